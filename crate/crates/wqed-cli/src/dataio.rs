//! CSV layouts for measured and synthesized data.
//!
//! All files are comma-separated with a single header row; lines starting
//! with `#` carry `key = value` metadata and may appear before the header.
//! Frequencies are stored in GHz (ordinary, not angular), delays in ns.
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write → read → write cycle is byte-identical.
//!
//! * `scans.csv` — `power_uW, detuning_GHz, I_t, counts`, one block of rows
//!   per drive power; requires `# gamma_tot_per_ns = …`.
//! * `g2_<pair>_<n>.csv` — `pair, tau_ns, g2, coincidences` plus
//!   `# power_uW` and `# drive_detuning_GHz` metadata.
//!
//! Empty `counts` / `coincidences` cells mean "no statistics recorded"; the
//! column must then be empty for the whole file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wqed_core::core::{
    angular_from_linear, linear_from_angular, make_grid, CorrelationTrace, G2Record, Grid,
    IntensityScan, MeasurementSet, PortPair, TauAxis,
};

use crate::error::CliError;

pub const SCAN_HEADER: &str = "power_uW, detuning_GHz, I_t, counts";
pub const TRACE_HEADER: &str = "pair, tau_ns, g2, coincidences";
pub const SPECTRUM_HEADER: &str = "detuning_GHz, re, im, modulus, phase_deg";
pub const SECTOR_HEADER: &str = "delta_GHz, re_T, im_T";
pub const KERNEL_HEADER: &str = "tau_ns, re_T, im_T";

fn data_err(path: &Path, message: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {message}", path.display()))
}

fn row_err(path: &Path, line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: line {line}: {message}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| data_err(path, e))
}

fn pair_name(pair: PortPair) -> &'static str {
    match pair {
        PortPair::Tt => "tt",
        PortPair::Rr => "rr",
        PortPair::Tr => "tr",
        PortPair::Rt => "rt",
    }
}

fn parse_pair(text: &str) -> Option<PortPair> {
    match text.trim().to_ascii_lowercase().as_str() {
        "tt" => Some(PortPair::Tt),
        "rr" => Some(PortPair::Rr),
        "tr" => Some(PortPair::Tr),
        "rt" => Some(PortPair::Rt),
        _ => None,
    }
}

fn opt_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

/// Render `scans.csv`: every scan in `set` as one block of rows.
pub fn render_scans(set: &MeasurementSet, seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        writeln!(out, "# seed = {seed}").unwrap();
    }
    writeln!(out, "# gamma_tot_per_ns = {}", set.gamma_tot).unwrap();
    writeln!(out, "{SCAN_HEADER}").unwrap();
    for scan in &set.intensity_scans {
        for (i, value) in scan.values.iter().enumerate() {
            let counts = scan.counts.as_ref().map(|c| c[i]);
            writeln!(
                out,
                "{}, {}, {}, {}",
                scan.power_uw,
                linear_from_angular(scan.grid.value(i)),
                value,
                opt_cell(counts)
            )
            .unwrap();
        }
    }
    out
}

/// Render one `g2_<pair>_<n>.csv` trace file.
pub fn render_trace(record: &G2Record, seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        writeln!(out, "# seed = {seed}").unwrap();
    }
    writeln!(out, "# power_uW = {}", record.power_uw).unwrap();
    writeln!(
        out,
        "# drive_detuning_GHz = {}",
        linear_from_angular(record.drive_detuning)
    )
    .unwrap();
    writeln!(out, "{TRACE_HEADER}").unwrap();
    let name = pair_name(record.trace.pair);
    for (i, value) in record.trace.values.iter().enumerate() {
        let coincidences = record.coincidences.as_ref().map(|c| c[i]);
        writeln!(
            out,
            "{}, {}, {}, {}",
            name,
            record.trace.tau.value(i),
            value,
            opt_cell(coincidences)
        )
        .unwrap();
    }
    out
}

pub fn trace_file_name(record: &G2Record, index: usize) -> String {
    format!("g2_{}_{index}.csv", pair_name(record.trace.pair))
}

/// Write a full measurement set into `dir` as `scans.csv` plus one file per
/// g² trace. Returns the paths written.
pub fn write_measurement_set(
    dir: &Path,
    set: &MeasurementSet,
    seed: Option<u64>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let scans = dir.join("scans.csv");
    write_file(&scans, &render_scans(set, seed))?;
    written.push(scans);
    for (index, record) in set.g2_traces.iter().enumerate() {
        let path = dir.join(trace_file_name(record, index));
        write_file(&path, &render_trace(record, seed))?;
        written.push(path);
    }
    Ok(written)
}

struct ParsedCsv {
    metadata: BTreeMap<String, String>,
    /// (1-based line number, cells) per data row.
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_csv(path: &Path, expected_header: &str, fields: usize) -> Result<ParsedCsv, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    let mut metadata = BTreeMap::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                metadata.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            let canonical: Vec<&str> = expected_header.split(',').map(str::trim).collect();
            let got: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if got != canonical {
                return Err(row_err(
                    path,
                    lineno,
                    format!("expected header {expected_header:?}, got {trimmed:?}"),
                ));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<String> = trimmed.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != fields {
            return Err(row_err(
                path,
                lineno,
                format!("expected {fields} fields, got {}", cells.len()),
            ));
        }
        rows.push((lineno, cells));
    }
    if !header_seen {
        return Err(data_err(path, "missing header row"));
    }
    if rows.is_empty() {
        return Err(data_err(path, "no data rows"));
    }
    Ok(ParsedCsv { metadata, rows })
}

fn parse_float(path: &Path, line: usize, cell: &str, what: &str) -> Result<f64, CliError> {
    cell.parse::<f64>()
        .map_err(|_| row_err(path, line, format!("cannot parse {what} from {cell:?}")))
}

/// Rebuild a uniform grid from sampled axis values, enforcing even spacing.
fn grid_from_samples(
    path: &Path,
    lines: &[usize],
    samples: &[f64],
    what: &str,
) -> Result<Grid, CliError> {
    if samples.len() < 2 {
        return Err(row_err(path, lines[0], format!("{what} needs at least two rows")));
    }
    let grid = make_grid(samples[0], samples[samples.len() - 1], samples.len())
        .map_err(|e| row_err(path, lines[0], format!("{what}: {e}")))?;
    let scale = samples
        .iter()
        .fold(grid.step(), |m, s| m.max(s.abs()));
    for (i, &s) in samples.iter().enumerate() {
        if (s - grid.value(i)).abs() > 1e-9 * scale {
            return Err(row_err(
                path,
                lines[i],
                format!(
                    "{what} is not uniformly spaced: sample {s} deviates from the reconstructed grid value {}",
                    grid.value(i)
                ),
            ));
        }
    }
    Ok(grid)
}

/// Collect an optional column: all cells empty → None, all present → Some,
/// a mixture is an error.
fn optional_column(
    path: &Path,
    cells: &[(usize, String)],
    what: &str,
) -> Result<Option<Vec<f64>>, CliError> {
    let filled = cells.iter().filter(|(_, c)| !c.is_empty()).count();
    if filled == 0 {
        return Ok(None);
    }
    if filled != cells.len() {
        let (line, _) = cells.iter().find(|(_, c)| c.is_empty()).unwrap();
        return Err(row_err(
            path,
            *line,
            format!("{what} column is partially filled; leave it entirely empty or fill every row"),
        ));
    }
    let mut out = Vec::with_capacity(cells.len());
    for (line, cell) in cells {
        out.push(parse_float(path, *line, cell, what)?);
    }
    Ok(Some(out))
}

fn read_scans(path: &Path) -> Result<(Vec<IntensityScan>, f64, Option<u64>), CliError> {
    let parsed = parse_csv(path, SCAN_HEADER, 4)?;
    let gamma_tot = parsed
        .metadata
        .get("gamma_tot_per_ns")
        .ok_or_else(|| data_err(path, "missing `# gamma_tot_per_ns = …` metadata line"))?
        .parse::<f64>()
        .map_err(|_| data_err(path, "cannot parse gamma_tot_per_ns metadata"))?;
    if !(gamma_tot > 0.0) {
        return Err(data_err(path, format!("gamma_tot_per_ns must be > 0, got {gamma_tot}")));
    }
    let seed = parsed
        .metadata
        .get("seed")
        .and_then(|s| s.parse::<u64>().ok());

    // Split rows into per-power blocks; a change in the power column starts
    // a new scan.
    let mut scans = Vec::new();
    let mut block: Vec<(usize, Vec<String>)> = Vec::new();
    let mut flush = |block: &mut Vec<(usize, Vec<String>)>| -> Result<(), CliError> {
        if block.is_empty() {
            return Ok(());
        }
        let first_line = block[0].0;
        let power = parse_float(path, first_line, &block[0].1[0], "power_uW")?;
        let mut lines = Vec::with_capacity(block.len());
        let mut detunings = Vec::with_capacity(block.len());
        let mut values = Vec::with_capacity(block.len());
        let mut count_cells = Vec::with_capacity(block.len());
        for (line, cells) in block.iter() {
            lines.push(*line);
            detunings.push(angular_from_linear(parse_float(
                path,
                *line,
                &cells[1],
                "detuning_GHz",
            )?));
            values.push(parse_float(path, *line, &cells[2], "I_t")?);
            count_cells.push((*line, cells[3].clone()));
        }
        let grid = grid_from_samples(path, &lines, &detunings, "detuning_GHz")?;
        let counts = optional_column(path, &count_cells, "counts")?;
        scans.push(IntensityScan {
            power_uw: power,
            grid,
            values,
            counts,
        });
        block.clear();
        Ok(())
    };
    let mut current_power: Option<String> = None;
    for (line, cells) in parsed.rows {
        if current_power.as_deref() != Some(cells[0].as_str()) {
            flush(&mut block)?;
            current_power = Some(cells[0].clone());
        }
        block.push((line, cells));
    }
    flush(&mut block)?;
    Ok((scans, gamma_tot, seed))
}

fn read_trace(path: &Path) -> Result<G2Record, CliError> {
    let parsed = parse_csv(path, TRACE_HEADER, 4)?;
    let power = parsed
        .metadata
        .get("power_uW")
        .ok_or_else(|| data_err(path, "missing `# power_uW = …` metadata line"))?
        .parse::<f64>()
        .map_err(|_| data_err(path, "cannot parse power_uW metadata"))?;
    let detuning_ghz = parsed
        .metadata
        .get("drive_detuning_GHz")
        .ok_or_else(|| data_err(path, "missing `# drive_detuning_GHz = …` metadata line"))?
        .parse::<f64>()
        .map_err(|_| data_err(path, "cannot parse drive_detuning_GHz metadata"))?;

    let first_line = parsed.rows[0].0;
    let pair_cell = &parsed.rows[0].1[0];
    let pair = parse_pair(pair_cell)
        .ok_or_else(|| row_err(path, first_line, format!("unknown port pair {pair_cell:?}")))?;
    let mut lines = Vec::with_capacity(parsed.rows.len());
    let mut taus = Vec::with_capacity(parsed.rows.len());
    let mut values = Vec::with_capacity(parsed.rows.len());
    let mut coincidence_cells = Vec::with_capacity(parsed.rows.len());
    for (line, cells) in &parsed.rows {
        let row_pair = parse_pair(&cells[0])
            .ok_or_else(|| row_err(path, *line, format!("unknown port pair {:?}", cells[0])))?;
        if row_pair != pair {
            return Err(row_err(
                path,
                *line,
                "port pair changes mid-file; use one file per trace",
            ));
        }
        lines.push(*line);
        taus.push(parse_float(path, *line, &cells[1], "tau_ns")?);
        values.push(parse_float(path, *line, &cells[2], "g2")?);
        coincidence_cells.push((*line, cells[3].clone()));
    }
    let tau = grid_from_samples(path, &lines, &taus, "tau_ns")?;
    let axis = if tau.lo() < -tau.step() {
        TauAxis::SymmetricAboutZero
    } else {
        TauAxis::StartsAtZero
    };
    let trace = CorrelationTrace::new(pair, tau, values, axis)
        .map_err(|e| data_err(path, e))?;
    let coincidences = optional_column(path, &coincidence_cells, "coincidences")?;
    Ok(G2Record {
        power_uw: power,
        drive_detuning: angular_from_linear(detuning_ghz),
        trace,
        coincidences,
    })
}

/// Ingest a data directory: `scans.csv` (required) plus any `g2_*.csv`.
pub fn read_measurement_set(dir: &Path) -> Result<MeasurementSet, CliError> {
    let scans_path = dir.join("scans.csv");
    if !scans_path.exists() {
        return Err(data_err(&scans_path, "file not found"));
    }
    let (intensity_scans, gamma_tot, _) = read_scans(&scans_path)?;

    let mut trace_paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| data_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("g2_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    trace_paths.sort();
    let g2_traces = trace_paths
        .iter()
        .map(|p| read_trace(p))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(MeasurementSet {
        intensity_scans,
        g2_traces,
        gamma_tot,
    })
}

/// Render a complex spectrum (t or r vs probe detuning) for plotting.
pub fn render_spectrum(grid: &Grid, values: &[num_complex::Complex64]) -> String {
    let mut out = String::new();
    writeln!(out, "{SPECTRUM_HEADER}").unwrap();
    for (i, v) in values.iter().enumerate() {
        writeln!(
            out,
            "{}, {}, {}, {}, {}",
            linear_from_angular(grid.value(i)),
            v.re,
            v.im,
            v.norm(),
            v.arg().to_degrees()
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use wqed_core::core::make_grid;

    fn sample_set() -> MeasurementSet {
        let grid = make_grid(-10.0, 10.0, 5).unwrap();
        MeasurementSet {
            intensity_scans: vec![
                IntensityScan {
                    power_uw: 0.3,
                    grid: grid.clone(),
                    values: vec![0.91, 0.52, 0.23130192847, 0.52, 0.91],
                    counts: Some(vec![910.0, 520.0, 231.0, 520.0, 910.0]),
                },
                IntensityScan {
                    power_uw: 3.0,
                    grid,
                    values: vec![0.93, 0.6, 0.31, 0.6, 0.93],
                    counts: Some(vec![930.0, 600.0, 310.0, 600.0, 930.0]),
                },
            ],
            g2_traces: vec![G2Record {
                power_uw: 26.6,
                drive_detuning: angular_from_linear(0.35),
                trace: CorrelationTrace::new(
                    PortPair::Tr,
                    make_grid(0.0, 2.0, 4).unwrap(),
                    vec![0.01, 0.4, 0.9, 1.0],
                    TauAxis::StartsAtZero,
                )
                .unwrap(),
                coincidences: None,
            }],
            gamma_tot: 7.65,
        }
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let dir = tempfile::tempdir().unwrap();
        let set = sample_set();
        write_measurement_set(dir.path(), &set, Some(7)).unwrap();
        let read = read_measurement_set(dir.path()).unwrap();

        assert_eq!(read.gamma_tot, set.gamma_tot);
        assert_eq!(read.intensity_scans.len(), 2);
        for (a, b) in read.intensity_scans.iter().zip(&set.intensity_scans) {
            assert_eq!(a.power_uw, b.power_uw);
            assert_eq!(a.values, b.values);
            assert_eq!(a.counts, b.counts);
            // The detuning axis passes through a GHz ↔ rad/ns conversion,
            // which can cost one ulp per endpoint.
            for i in 0..a.grid.len() {
                let (x, y) = (a.grid.value(i), b.grid.value(i));
                assert!((x - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0));
            }
        }
        assert_eq!(read.g2_traces.len(), 1);
        assert_eq!(read.g2_traces[0].trace.values, set.g2_traces[0].trace.values);
        assert_eq!(read.g2_traces[0].coincidences, None);

        // Serializing the ingested copy reproduces the files byte for byte.
        let scans_again = render_scans(&read, Some(7));
        let on_disk = std::fs::read_to_string(dir.path().join("scans.csv")).unwrap();
        assert_eq!(scans_again, on_disk);
        let trace_again = render_trace(&read.g2_traces[0], Some(7));
        let trace_disk = std::fs::read_to_string(dir.path().join("g2_tr_0.csv")).unwrap();
        assert_eq!(trace_again, trace_disk);
    }

    #[test]
    fn malformed_row_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scans.csv");
        let text = "# gamma_tot_per_ns = 7.65\npower_uW, detuning_GHz, I_t, counts\n0.3, 0.0, 0.9, 10\n0.3, 1.0, oops, 10\n";
        std::fs::write(&path, text).unwrap();
        let err = read_scans(&path).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("I_t"), "{msg}");
    }

    #[test]
    fn wrong_field_count_reports_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scans.csv");
        let text = "# gamma_tot_per_ns = 7.65\npower_uW, detuning_GHz, I_t, counts\n0.3, 0.0, 0.9\n";
        std::fs::write(&path, text).unwrap();
        let err = read_scans(&path).unwrap_err();
        assert!(err.to_string().contains("expected 4 fields"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn nonuniform_axis_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scans.csv");
        let text = "# gamma_tot_per_ns = 7.65\npower_uW, detuning_GHz, I_t, counts\n0.3, 0.0, 0.9, \n0.3, 1.0, 0.8, \n0.3, 2.5, 0.7, \n";
        std::fs::write(&path, text).unwrap();
        let err = read_scans(&path).unwrap_err();
        assert!(err.to_string().contains("uniformly spaced"), "{err}");
    }

    #[test]
    fn missing_gamma_metadata_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scans.csv");
        std::fs::write(&path, "power_uW, detuning_GHz, I_t, counts\n0.3, 0.0, 0.9, \n0.3, 1.0, 0.8, \n").unwrap();
        let err = read_scans(&path).unwrap_err();
        assert!(err.to_string().contains("gamma_tot_per_ns"), "{err}");
    }

    #[test]
    fn partial_counts_column_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scans.csv");
        let text = "# gamma_tot_per_ns = 7.65\npower_uW, detuning_GHz, I_t, counts\n0.3, 0.0, 0.9, 12\n0.3, 1.0, 0.8, \n";
        std::fs::write(&path, text).unwrap();
        let err = read_scans(&path).unwrap_err();
        assert!(err.to_string().contains("partially filled"), "{err}");
    }
}
