//! CSV emission and ingestion.
//!
//! All numeric output uses Rust's shortest round-trip decimal formatting, so
//! identical runs produce byte-identical files and refinement tables diff
//! cleanly. Files are written atomically (temp file + rename); timestamps go
//! only to the sidecar log.

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::geometry::Dims;
use crate::grid::{SpaceTimeGrid, SpatialGrid};
use crate::holder::HolderReport;
use crate::operator::AssumptionReport;
use crate::verify::VerifyReport;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn append_log(path: &Path, line: &str) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

/// `t,x1..,y1..,u` rows, time-major node order.
pub fn field_csv(field: &SampledField) -> String {
    let dims = field.grid.space.dims;
    let mut header = String::from("t");
    for i in 0..dims.n {
        header.push_str(&format!(",x{}", i + 1));
    }
    for l in 0..dims.m {
        header.push_str(&format!(",y{}", l + 1));
    }
    header.push_str(",u");
    let mut out = header;
    out.push('\n');
    let ns = field.grid.space.node_count();
    for (ti, &t) in field.grid.times.iter().enumerate() {
        for si in 0..ns {
            let z = field.grid.space.point(si);
            out.push_str(&format!("{t}"));
            for &x in &z.x {
                out.push_str(&format!(",{x}"));
            }
            for &y in &z.y {
                out.push_str(&format!(",{y}"));
            }
            out.push_str(&format!(",{}\n", field.values()[ti * ns + si]));
        }
    }
    out
}

/// Sidecar metadata for a field dump.
pub fn field_meta(field: &SampledField, hash: &str) -> String {
    let dims = field.grid.space.dims;
    let mut out = String::new();
    out.push_str(&format!("config_hash,{hash}\n"));
    out.push_str(&format!("n,{}\n", dims.n));
    out.push_str(&format!("m,{}\n", dims.m));
    out.push_str(&format!("time_nodes,{}\n", field.grid.times.len()));
    out.push_str(&format!("space_nodes,{}\n", field.grid.space.node_count()));
    out
}

/// Rebuild a sampled field from its `t,x…,y…,u` table: axis node sets are the
/// distinct coordinate values, which must tile a full tensor grid.
pub fn parse_field_csv(text: &str) -> Result<SampledField> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Field("empty field file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.last() != Some(&"u") {
        return Err(Error::Field("field header must be t,x…,y…,u".into()));
    }
    let n = cols.iter().filter(|c| c.starts_with('x')).count();
    let m = cols.iter().filter(|c| c.starts_with('y')).count();
    if cols.len() != 2 + n + m {
        return Err(Error::Field("malformed field header".into()));
    }
    let mut rows: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != cols.len() {
            return Err(Error::Field(format!(
                "row {}: expected {} columns",
                lineno + 2,
                cols.len()
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Field(format!("row {}: bad number `{p}`", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        rows.push((
            nums[0],
            nums[1..1 + n + m].to_vec(),
            nums[1 + n + m],
        ));
    }
    if rows.is_empty() {
        return Err(Error::Field("field file has no data rows".into()));
    }
    let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(n + m);
    for a in 0..n + m {
        let mut vals: Vec<f64> = rows.iter().map(|r| r.1[a]).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        vals.dedup();
        axes.push(vals);
    }
    let space = SpatialGrid::new(Dims::new(n, m), axes)?;
    let grid = Arc::new(SpaceTimeGrid {
        times: times.clone(),
        space,
    });
    let ns = grid.space.node_count();
    if rows.len() != times.len() * ns {
        return Err(Error::Field(format!(
            "expected {} rows for a full tensor grid, found {}",
            times.len() * ns,
            rows.len()
        )));
    }
    let mut values = vec![f64::NAN; times.len() * ns];
    for (t, coords, u) in rows {
        let ti = times
            .iter()
            .position(|&tt| tt == t)
            .ok_or_else(|| Error::Field("time lookup failure".into()))?;
        let mut idx = Vec::with_capacity(n + m);
        for (a, &c) in coords.iter().enumerate() {
            let pos = grid.space.axes[a]
                .iter()
                .position(|&v| v == c)
                .ok_or_else(|| Error::Field("coordinate lookup failure".into()))?;
            idx.push(pos);
        }
        let flat = ti * ns + grid.space.encode(&idx);
        if !values[flat].is_nan() {
            return Err(Error::Field("duplicate node row in field file".into()));
        }
        values[flat] = u;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Field("field file misses grid nodes".into()));
    }
    SampledField::from_values(grid, values)
}

/// `component,value` rows with a fixed header.
pub fn holder_csv(report: &HolderReport) -> String {
    let mut out = String::from("component,value\n");
    out.push_str(&format!("sup_norm,{}\n", report.sup_norm));
    out.push_str(&format!("seminorm_alpha,{}\n", report.seminorm_alpha));
    for (name, value) in &report.weighted_component_norms {
        out.push_str(&format!("{name},{value}\n"));
    }
    out.push_str(&format!("total,{}\n", report.total));
    out.push_str(&format!("pair_count_used,{}\n", report.pair_count_used));
    out.push_str(&format!("alpha,{}\n", report.alpha));
    out.push_str(&format!("k,{}\n", report.k));
    out.push_str(&format!("truncation_box,{}\n", report.truncation_box.replace(',', ";")));
    out
}

pub fn assumption_csv(report: &AssumptionReport) -> String {
    let mut out = String::from("quantity,value\n");
    out.push_str(&format!("delta_hat,{}\n", report.delta_hat));
    out.push_str(&format!("delta_sym_min,{}\n", report.delta_sym_min));
    out.push_str(&format!("K_hat,{}\n", report.k_hat));
    out.push_str(&format!("b_min_boundary,{}\n", report.b_min_boundary));
    out.push_str(&format!(
        "ellipticity_pass,{}\n",
        u8::from(report.ellipticity_pass)
    ));
    out.push_str(&format!(
        "coefficient_bound_pass,{}\n",
        u8::from(report.coefficient_bound_pass)
    ));
    out.push_str(&format!(
        "nonnegativity_pass,{}\n",
        u8::from(report.nonnegativity_pass)
    ));
    out.push_str(&format!("points_sampled,{}\n", report.points_sampled));
    out.push_str(&format!("directions_used,{}\n", report.directions_used));
    for v in &report.violations {
        out.push_str(&format!("violation,{v}\n"));
    }
    out
}

pub fn verify_csv(report: &VerifyReport) -> String {
    let mut out = String::from("quantity,value\n");
    out.push_str(&format!("experiment,{}\n", report.experiment));
    out.push_str(&format!("config_hash,{}\n", report.config_hash));
    out.push_str(&format!("pass,{}\n", u8::from(report.pass)));
    for (name, value) in &report.measured {
        out.push_str(&format!("{name},{value}\n"));
    }
    for note in &report.notes {
        out.push_str(&format!("note,{}\n", note.replace(',', ";")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::graded_nodes;

    fn sample_field() -> SampledField {
        let space = SpatialGrid::new(Dims::new(1, 0), vec![graded_nodes(8, 1.0)]).unwrap();
        let grid = Arc::new(SpaceTimeGrid {
            times: vec![0.0, 0.5, 1.0],
            space,
        });
        SampledField::from_fn(grid, |t, z| t + z.x[0] * (1.0 - z.x[0])).unwrap()
    }

    #[test]
    fn field_csv_round_trip_bitexact() {
        let f = sample_field();
        let text = field_csv(&f);
        let back = parse_field_csv(&text).unwrap();
        assert_eq!(back.grid.times, f.grid.times);
        assert_eq!(back.grid.space.axes, f.grid.space.axes);
        assert_eq!(back.values(), f.values());
        // serialization is deterministic
        assert_eq!(text, field_csv(&back));
    }

    #[test]
    fn parse_rejects_incomplete_grid() {
        let f = sample_field();
        let text = field_csv(&f);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(3);
        assert!(parse_field_csv(&lines.join("\n")).is_err());
    }
}
