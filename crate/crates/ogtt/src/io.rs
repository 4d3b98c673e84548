//! File formats: observation CSV, posterior/band CSV, summary text, and the
//! SVG band plot.
//!
//! Time is always hours as a decimal; glucose is always mg/dL. Floats are
//! written with Rust's shortest round-trip formatting, so every CSV this
//! module writes is re-read bit-identically by its own readers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{FitSummary, PredictiveBand};
use crate::error::{Error, Result};
use crate::inference::ObservationSet;
use crate::sampler::PosteriorSample;
use crate::synth::{RecoveryReport, SbcReport};

pub const OBS_HEADER: &str = "time_hr,glucose_mg_dl";
pub const POSTERIOR_HEADER: &str = "theta0,theta1,theta2,g0,log_post";
pub const BAND_HEADER: &str = "time_hr,mean,q05,q25,q50,q75,q95";

fn read_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::ReadFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::WriteFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn row_err(path: &Path, line: usize, reason: String) -> Error {
    Error::CsvRow {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

/// Read an OGTT observation file: exact header `time_hr,glucose_mg_dl`,
/// then one `t,d` row per reading. Errors name the offending line.
pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    let text = fs::read_to_string(path).map_err(|e| read_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::CsvHeader {
            path: path.to_path_buf(),
            expected: OBS_HEADER.into(),
            found: String::new(),
        });
    };
    if header.trim_end_matches('\r') != OBS_HEADER {
        return Err(Error::CsvHeader {
            path: path.to_path_buf(),
            expected: OBS_HEADER.into(),
            found: header.trim_end_matches('\r').into(),
        });
    }
    let mut records: Vec<(f64, f64)> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            return Err(row_err(path, line_no, "blank row".into()));
        }
        let mut parts = line.split(',');
        let (Some(t_str), Some(d_str), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(row_err(
                path,
                line_no,
                format!("expected two comma-separated fields, got `{line}`"),
            ));
        };
        let t: f64 = t_str.trim().parse().map_err(|_| {
            row_err(path, line_no, format!("time `{}` is not a number", t_str.trim()))
        })?;
        let d: f64 = d_str.trim().parse().map_err(|_| {
            row_err(
                path,
                line_no,
                format!("glucose `{}` is not a number", d_str.trim()),
            )
        })?;
        if let Some(&(prev, _)) = records.last() {
            if t <= prev {
                return Err(row_err(
                    path,
                    line_no,
                    format!("time {t} does not increase past {prev}"),
                ));
            }
        } else if t < 0.0 {
            return Err(row_err(path, line_no, format!("first time {t} is negative")));
        }
        if d.is_nan() || d <= 0.0 {
            return Err(row_err(path, line_no, format!("glucose {d} must be > 0")));
        }
        records.push((t, d));
    }
    if records.len() < 2 {
        return Err(Error::TooFewObservations {
            path: path.to_path_buf(),
            n: records.len(),
        });
    }
    ObservationSet::new(records)
}

/// Write observations in the same format [`read_observations`] accepts.
pub fn write_observations(obs: &ObservationSet, path: &Path) -> Result<()> {
    let mut text = String::from(OBS_HEADER);
    text.push('\n');
    for (t, d) in obs.records() {
        let _ = writeln!(text, "{t},{d}");
    }
    fs::write(path, text).map_err(|e| write_err(path, e))
}

/// Re-read a posterior CSV produced by [`write_outputs`].
pub fn read_posterior_csv(path: &Path) -> Result<Vec<([f64; 4], f64)>> {
    let text = fs::read_to_string(path).map_err(|e| read_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == POSTERIOR_HEADER => {}
        other => {
            return Err(Error::CsvHeader {
                path: path.to_path_buf(),
                expected: POSTERIOR_HEADER.into(),
                found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = raw.trim_end_matches('\r').split(',').collect();
        if fields.len() != 5 {
            return Err(row_err(path, line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let mut vals = [0.0f64; 5];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f
                .parse()
                .map_err(|_| row_err(path, line_no, format!("`{f}` is not a number")))?;
        }
        rows.push(([vals[0], vals[1], vals[2], vals[3]], vals[4]));
    }
    Ok(rows)
}

fn render_summary(summary: &FitSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OGTT fit summary");
    let _ = writeln!(s, "================");
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<8} {:>10} {:>10} {:>10} {:>12} {:>12}",
        "param", "mean", "sd", "median", "2.5%", "97.5%"
    );
    for (name, p) in [
        ("theta0", &summary.theta0),
        ("theta1", &summary.theta1),
        ("theta2", &summary.theta2),
        ("g0", &summary.g0),
    ] {
        let _ = writeln!(
            s,
            "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>12.4} {:>12.4}",
            name, p.mean, p.sd, p.median, p.lo, p.hi
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "theta0 flag: {} (cutoffs low < {:.2}, high > {:.2}; tool conventions, not clinical values)",
        summary.theta0_flag, summary.cutoffs.low, summary.cutoffs.high
    );
    let g3 = &summary.g3h;
    let _ = writeln!(s);
    let _ = writeln!(s, "Glucose at 3 h (posterior predictive, {} draws):", g3.n_draws);
    let _ = writeln!(s, "  latent curve mean : {:.2} mg/dL", g3.latent_mean);
    let _ = writeln!(s, "  predictive mean   : {:.2} mg/dL", g3.mean);
    let _ = writeln!(s, "  95% interval      : [{:.2}, {:.2}] mg/dL", g3.lo, g3.hi);
    let _ = writeln!(
        s,
        "  P[G(3h) > {:.0} mg/dL] = {:.4}",
        g3.threshold, g3.p_above
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "chain: {} kept draws, acceptance {:.3}, IAT [{:.1}, {:.1}, {:.1}, {:.1}]",
        summary.n_kept,
        summary.acceptance_rate,
        summary.iat[0],
        summary.iat[1],
        summary.iat[2],
        summary.iat[3]
    );
    s
}

/// Write `posterior.csv`, `band.csv`, `summary.txt` and `band.svg` into
/// `dir` (created if needed). Refuses an empty posterior sample.
pub fn write_outputs(
    sample: &PosteriorSample,
    band: &PredictiveBand,
    summary: &FitSummary,
    obs: &ObservationSet,
    dir: &Path,
) -> Result<[PathBuf; 4]> {
    if sample.n_kept() == 0 {
        return Err(Error::EmptySample);
    }
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;

    let posterior_path = dir.join("posterior.csv");
    let mut text = String::from(POSTERIOR_HEADER);
    text.push('\n');
    for (draw, lp) in sample.draws.iter().zip(&sample.logpost) {
        let _ = writeln!(text, "{},{},{},{},{}", draw[0], draw[1], draw[2], draw[3], lp);
    }
    fs::write(&posterior_path, text).map_err(|e| write_err(&posterior_path, e))?;

    let band_path = dir.join("band.csv");
    let mut text = String::from(BAND_HEADER);
    text.push('\n');
    for i in 0..band.times.len() {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            band.times[i],
            band.mean[i],
            band.q05[i],
            band.q25[i],
            band.q50[i],
            band.q75[i],
            band.q95[i]
        );
    }
    fs::write(&band_path, text).map_err(|e| write_err(&band_path, e))?;

    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, render_summary(summary)).map_err(|e| write_err(&summary_path, e))?;

    let svg_path = dir.join("band.svg");
    fs::write(&svg_path, render_band_svg(band, obs)).map_err(|e| write_err(&svg_path, e))?;

    Ok([posterior_path, band_path, summary_path, svg_path])
}

/// Per-replicate interval coverage as CSV.
pub fn write_recovery_report(report: &RecoveryReport, path: &Path) -> Result<()> {
    let mut text = String::from("parameter,truth,covered,replicates,coverage\n");
    let tv = report.truth.to_vector();
    let names = ["theta0", "theta1", "theta2", "g0"];
    let n = report.outcomes.len();
    for (j, name) in names.iter().enumerate() {
        let covered = report.outcomes.iter().filter(|o| o.covered[j]).count();
        let _ = writeln!(
            text,
            "{name},{},{covered},{n},{}",
            tv[j],
            report.coverage(j)
        );
    }
    fs::write(path, text).map_err(|e| write_err(path, e))
}

/// Per-replicate calibration ranks as CSV.
pub fn write_sbc_report(report: &SbcReport, path: &Path) -> Result<()> {
    let mut text = String::from("replicate,theta0_rank,theta1_rank,theta2_rank,g0_rank\n");
    for (i, r) in report.ranks.iter().enumerate() {
        let _ = writeln!(text, "{i},{},{},{},{}", r[0], r[1], r[2], r[3]);
    }
    fs::write(path, text).map_err(|e| write_err(path, e))
}

// ---------------------------------------------------------------------------
// SVG band plot: quantile ribbons, a thinned spaghetti of posterior curves,
// the median curve, and the data points. Plain text and deterministic.

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 500.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 46.0;

struct Axes {
    t_max: f64,
    g_min: f64,
    g_max: f64,
}

impl Axes {
    fn x(&self, t: f64) -> f64 {
        MARGIN_L + (t / self.t_max) * (SVG_W - MARGIN_L - MARGIN_R)
    }

    fn y(&self, g: f64) -> f64 {
        let f = (g - self.g_min) / (self.g_max - self.g_min);
        SVG_H - MARGIN_B - f * (SVG_H - MARGIN_T - MARGIN_B)
    }
}

fn polyline(axes: &Axes, times: &[f64], values: &[f64]) -> String {
    let mut pts = String::new();
    for (t, g) in times.iter().zip(values) {
        let _ = write!(pts, "{:.2},{:.2} ", axes.x(*t), axes.y(*g));
    }
    pts.trim_end().to_string()
}

fn render_band_svg(band: &PredictiveBand, obs: &ObservationSet) -> String {
    let t_max = band.times.last().copied().unwrap_or(3.0).max(1e-9);
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    for v in band.q05.iter().chain(band.q95.iter()) {
        g_min = g_min.min(*v);
        g_max = g_max.max(*v);
    }
    for (_, d) in obs.records() {
        g_min = g_min.min(*d);
        g_max = g_max.max(*d);
    }
    let pad = 0.08 * (g_max - g_min).max(1.0);
    let axes = Axes {
        t_max,
        g_min: (g_min - pad).floor(),
        g_max: (g_max + pad).ceil(),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>");

    // 5-95 and 25-75 ribbons as closed polygons.
    for (lo, hi, fill) in [
        (&band.q05, &band.q95, "#c9d7e8"),
        (&band.q25, &band.q75, "#a3bcd9"),
    ] {
        let mut pts = String::new();
        for (t, g) in band.times.iter().zip(hi.iter()) {
            let _ = write!(pts, "{:.2},{:.2} ", axes.x(*t), axes.y(*g));
        }
        for (t, g) in band.times.iter().rev().zip(lo.iter().rev()) {
            let _ = write!(pts, "{:.2},{:.2} ", axes.x(*t), axes.y(*g));
        }
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"none\" opacity=\"0.8\"/>",
            pts.trim_end()
        );
    }

    for curve in &band.sample_curves {
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#9a9a9a\" stroke-width=\"0.6\" opacity=\"0.5\"/>",
            polyline(&axes, &band.times, curve)
        );
    }

    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1.8\"/>",
        polyline(&axes, &band.times, &band.q50)
    );

    for (t, d) in obs.records() {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c0392b\"/>",
            axes.x(*t),
            axes.y(*d)
        );
    }

    // Axes and ticks.
    let x0 = MARGIN_L;
    let y0 = SVG_H - MARGIN_B;
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{MARGIN_T}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>",
        SVG_W - MARGIN_R
    );
    let n_xticks = 6;
    for k in 0..=n_xticks {
        let t = t_max * k as f64 / n_xticks as f64;
        let x = axes.x(t);
        let _ = writeln!(s, "<line x1=\"{x:.2}\" y1=\"{y0}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>", y0 + 5.0);
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{t:.1}</text>",
            y0 + 20.0
        );
    }
    let n_yticks = 6;
    for k in 0..=n_yticks {
        let g = axes.g_min + (axes.g_max - axes.g_min) * k as f64 / n_yticks as f64;
        let y = axes.y(g);
        let _ = writeln!(s, "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{x0}\" y2=\"{y:.2}\" stroke=\"black\"/>", x0 - 5.0);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{g:.0}</text>",
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">time (hr)</text>",
        (MARGIN_L + SVG_W - MARGIN_R) / 2.0,
        SVG_H - 8.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">glucose (mg/dL)</text>",
        (MARGIN_T + SVG_H - MARGIN_B) / 2.0,
        (MARGIN_T + SVG_H - MARGIN_B) / 2.0
    );
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::model::FixedSettings;
    use crate::synth;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_a_simple_file() {
        let dir = tmp();
        let p = write(
            dir.path(),
            "obs.csv",
            "time_hr,glucose_mg_dl\n0,92\n1,165\n2,144\n",
        );
        let obs = read_observations(&p).unwrap();
        assert_eq!(obs.len(), 3);
        assert_eq!(obs.records()[1], (1.0, 165.0));
    }

    #[test]
    fn missing_file_is_distinct_error() {
        let e = read_observations(Path::new("/nonexistent/obs.csv")).unwrap_err();
        assert!(matches!(e, Error::ReadFile { .. }));
    }

    #[test]
    fn header_must_match_exactly() {
        let dir = tmp();
        let p = write(dir.path(), "obs.csv", "time,glucose\n0,92\n1,100\n");
        let e = read_observations(&p).unwrap_err();
        assert!(matches!(e, Error::CsvHeader { .. }), "{e}");
    }

    #[test]
    fn non_increasing_times_name_the_line() {
        let dir = tmp();
        let p = write(
            dir.path(),
            "obs.csv",
            "time_hr,glucose_mg_dl\n0,92\n1,165\n1,144\n",
        );
        let e = read_observations(&p).unwrap_err();
        match e {
            Error::CsvRow { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn non_numeric_cell_names_the_line() {
        let dir = tmp();
        let p = write(
            dir.path(),
            "obs.csv",
            "time_hr,glucose_mg_dl\n0,92\nx,165\n",
        );
        match read_observations(&p).unwrap_err() {
            Error::CsvRow { line, reason, .. } => {
                assert_eq!(line, 3);
                assert!(reason.contains("not a number"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn single_row_is_too_few() {
        let dir = tmp();
        let p = write(dir.path(), "obs.csv", "time_hr,glucose_mg_dl\n0,92\n");
        assert!(matches!(
            read_observations(&p).unwrap_err(),
            Error::TooFewObservations { n: 1, .. }
        ));
    }

    #[test]
    fn observation_round_trip_is_bit_identical() {
        let dir = tmp();
        let fs_model = FixedSettings::default();
        let patient =
            synth::generate(&synth::healthy_truth(), &fs_model, &[0.0, 0.5, 1.0, 2.0], 5).unwrap();
        let p1 = dir.path().join("a.csv");
        write_observations(&patient.obs, &p1).unwrap();
        let back = read_observations(&p1).unwrap();
        assert_eq!(back, patient.obs);
        let p2 = dir.path().join("b.csv");
        write_observations(&back, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    fn small_sample(n: usize) -> PosteriorSample {
        PosteriorSample {
            draws: (0..n)
                .map(|i| {
                    let f = i as f64 / n as f64;
                    [1.5 + f, 0.4 + 0.1 * f, 0.45 + 0.05 * f, 98.0 + 3.0 * f]
                })
                .collect(),
            logpost: (0..n).map(|i| -10.0 - (i as f64) / 7.0).collect(),
            acceptance_rate: 0.31,
            iat: [12.0, 14.0, 9.0, 11.0],
            stagnated: false,
        }
    }

    #[test]
    fn outputs_round_trip_and_count_rows() {
        let dir = tmp();
        let fs_model = FixedSettings::default();
        let sample = small_sample(120);
        let band = analysis::predictive_band(&sample, &fs_model, 3.0, 0.05, 40).unwrap();
        let summary =
            analysis::summarize(&sample, &fs_model, &Default::default(), 120.0, 9).unwrap();
        let obs =
            ObservationSet::new(vec![(0.0, 98.0), (1.0, 170.0), (2.0, 130.0)]).unwrap();
        let paths = write_outputs(&sample, &band, &summary, &obs, dir.path()).unwrap();
        for p in &paths {
            assert!(p.exists(), "{p:?} missing");
        }

        let rows = read_posterior_csv(&paths[0]).unwrap();
        assert_eq!(rows.len(), sample.n_kept());
        for (i, (draw, lp)) in rows.iter().enumerate() {
            assert_eq!(*draw, sample.draws[i], "draw {i} not exact");
            assert_eq!(*lp, sample.logpost[i]);
        }

        let band_text = fs::read_to_string(&paths[1]).unwrap();
        let n_rows = band_text.lines().count() - 1;
        assert_eq!(n_rows, (3.0f64 / 0.05).round() as usize + 1);
        assert!(band_text.starts_with(BAND_HEADER));

        let summary_text = fs::read_to_string(&paths[2]).unwrap();
        assert!(summary_text.contains("theta0 flag"));
        assert!(summary_text.contains("P[G(3h) >"));

        let svg = fs::read_to_string(&paths[3]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("circle"));
        assert!(svg.contains("polygon"));
    }

    #[test]
    fn empty_sample_is_refused() {
        let dir = tmp();
        let fs_model = FixedSettings::default();
        let sample = small_sample(50);
        let band = analysis::predictive_band(&sample, &fs_model, 1.0, 0.1, 10).unwrap();
        let summary =
            analysis::summarize(&sample, &fs_model, &Default::default(), 120.0, 9).unwrap();
        let obs = ObservationSet::new(vec![(0.0, 98.0), (1.0, 170.0)]).unwrap();
        let empty = PosteriorSample {
            draws: vec![],
            logpost: vec![],
            acceptance_rate: 0.0,
            iat: [1.0; 4],
            stagnated: false,
        };
        assert!(matches!(
            write_outputs(&empty, &band, &summary, &obs, dir.path()),
            Err(Error::EmptySample)
        ));
    }
}
