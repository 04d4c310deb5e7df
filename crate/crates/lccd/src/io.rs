//! File formats: curve CSV, diagnostics CSV, summary JSON, SVG snapshots
//! and the per-scenario output bundle.

use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::curve::{ClosedCurve, MIN_NODES};
use crate::scenarios::ScenarioOutcome;
use crate::{Error, Result};

/// Reads a curve from CSV with header `x,y`, one node per row; closure is
/// implicit (the last row must not repeat the first).
pub fn read_curve_csv(path: &Path) -> Result<ClosedCurve> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim().eq_ignore_ascii_case("x,y") => {}
        Some((_, header)) => {
            return Err(Error::Parse(format!(
                "{}: expected header `x,y`, found `{header}`",
                path.display()
            )))
        }
        None => return Err(Error::Parse(format!("{}: empty file", path.display()))),
    }
    let mut points = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let x = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing x", lineno + 1)))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {}: field x: {e}", lineno + 1)))?;
        let y = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing y", lineno + 1)))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {}: field y: {e}", lineno + 1)))?;
        if parts.next().is_some() {
            return Err(Error::Parse(format!(
                "line {}: expected exactly two fields",
                lineno + 1
            )));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parse(format!(
                "line {}: non-finite coordinate",
                lineno + 1
            )));
        }
        points.push([x, y]);
    }
    if points.len() < MIN_NODES {
        return Err(Error::Parse(format!(
            "{}: need at least {MIN_NODES} nodes, found {}",
            path.display(),
            points.len()
        )));
    }
    ClosedCurve::from_points(points)
}

pub fn write_curve_csv(path: &Path, curve: &ClosedCurve) -> Result<()> {
    let mut out = String::from("x,y\n");
    for p in curve.points() {
        out.push_str(&format!("{:.17e},{:.17e}\n", p[0], p[1]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Diagnostics CSV, fixed column order:
/// t,L,A,I,kbar,K_osc,h,nk2,nks2,nkss2,nks32,min_k,embedded,max_disp,r_iii,r_v,r_vi
pub fn write_diagnostics_csv(
    path: &Path,
    records: &[crate::diagnostics::DiagnosticsRecord],
) -> Result<()> {
    let f = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(
        w,
        "t,L,A,I,kbar,K_osc,h,nk2,nks2,nkss2,nks32,min_k,embedded,max_disp,r_iii,r_v,r_vi"
    )?;
    for r in records {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.6e},{:.6e},{:.6e}",
            r.t,
            r.length,
            r.area,
            r.isoperimetric,
            r.kbar,
            r.kosc,
            r.h,
            r.nk2,
            r.nks2,
            r.nkss2,
            r.nks32,
            r.min_k,
            r.embedded,
            r.max_displacement,
            r.r_iii,
            r.r_v,
            r.r_vi
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Closed-path SVG snapshot, stroke only, fixed viewport.
pub fn write_svg(path: &Path, curve: &ClosedCurve, viewport: [f64; 4]) -> Result<()> {
    let [x0, y0, w, h] = viewport;
    let mut d = String::new();
    for (i, p) in curve.points().iter().enumerate() {
        // svg y axis points down; flip
        let cmd = if i == 0 { 'M' } else { 'L' };
        d.push_str(&format!("{cmd}{:.6} {:.6} ", p[0], -p[1]));
    }
    d.push('Z');
    let stroke_width = 0.004 * w.max(h);
    let svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0:.6} {:.6} {w:.6} {h:.6}\">\n\
         <path d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"{stroke_width:.6}\"/>\n\
         </svg>\n",
        -(y0 + h),
    );
    fs::write(path, svg)?;
    Ok(())
}

/// Fixed viewport from a curve's bounding box with 25% margin.
pub fn viewport_for(curve: &ClosedCurve) -> [f64; 4] {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in curve.points() {
        for d in 0..2 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }
    let span = (max[0] - min[0]).max(max[1] - min[1]).max(1e-9);
    let margin = 0.25 * span;
    [
        min[0] - margin,
        min[1] - margin,
        (max[0] - min[0]) + 2.0 * margin,
        (max[1] - min[1]) + 2.0 * margin,
    ]
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    scenario: &'a str,
    hypotheses: &'a crate::scenarios::HypothesisReport,
    dt: f64,
    steps: u64,
    t_final: f64,
    stopped_by_kosc: bool,
    aborted: &'a Option<String>,
    passed: bool,
    checks: &'a [crate::diagnostics::CheckReport],
}

pub fn summary_json(outcome: &ScenarioOutcome) -> serde_json::Value {
    let s = SummaryJson {
        scenario: &outcome.scenario.name,
        hypotheses: &outcome.hypotheses,
        dt: outcome.summary.dt,
        steps: outcome.summary.final_state.step,
        t_final: outcome.summary.final_state.t,
        stopped_by_kosc: outcome.summary.stopped_by_kosc,
        aborted: &outcome.summary.aborted,
        passed: outcome.passed,
        checks: &outcome.checks,
    };
    serde_json::to_value(&s).expect("summary serialization")
}

/// Writes `<dir>/diagnostics.csv`, `<dir>/curve_<step>.csv`,
/// `<dir>/summary.json` and optional `<dir>/snapshot_<step>.svg`.
pub fn write_scenario_bundle(dir: &Path, outcome: &ScenarioOutcome, svg: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_diagnostics_csv(&dir.join("diagnostics.csv"), &outcome.summary.records)?;
    let viewport = viewport_for(&outcome.summary.initial_curve);
    for (step, curve) in &outcome.summary.snapshots {
        write_curve_csv(&dir.join(format!("curve_{step}.csv")), curve)?;
        if svg {
            write_svg(&dir.join(format!("snapshot_{step}.svg")), curve, viewport)?;
        }
    }
    let summary = summary_json(outcome);
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary json") + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("lccd_io_{tag}_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn curve_csv_roundtrip() {
        let dir = tmpdir("roundtrip");
        let pts: Vec<[f64; 2]> = (0..64)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / 64.0;
                [th.cos() * 1.5, th.sin() * 1.5]
            })
            .collect();
        let c = ClosedCurve::from_points(pts).unwrap();
        let path = dir.join("c.csv");
        write_curve_csv(&path, &c).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back.n(), c.n());
        for (a, b) in c.points().iter().zip(back.points()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn csv_reader_rejects_malformed_input() {
        let dir = tmpdir("reject");
        let path = dir.join("bad.csv");
        fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        assert!(read_curve_csv(&path).is_err());
        fs::write(&path, "x,y\n1.0\n").unwrap();
        assert!(read_curve_csv(&path).is_err());
        fs::write(&path, "x,y\n1.0,2.0\n").unwrap();
        assert!(read_curve_csv(&path).is_err()); // below min node count
        let mut body = String::from("x,y\n");
        for i in 0..32 {
            body.push_str(&format!("{},{}\n", i, if i == 7 { "nan".into() } else { i.to_string() }));
        }
        fs::write(&path, body).unwrap();
        assert!(read_curve_csv(&path).is_err());
    }
}
