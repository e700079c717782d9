//! Limit extrapolation, slope fits and plain-text report writers.

use crate::error::{invalid, Result};
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: Option<f64>,
    pub converged: bool,
    pub predicted: Option<f64>,
    pub scale: f64,
    pub pass: bool,
    pub note: String,
}

/// Limit of a sequence along increasing radii.
///
/// Accepts the last value when the final increment is below `abs_tol`,
/// otherwise applies Aitken acceleration if increments shrink, and reports
/// non-convergence when they do not.
pub fn extrapolate(radii: &[f64], values: &[f64], abs_tol: f64) -> Result<LimitReport> {
    if radii.len() != values.len() || values.len() < 2 {
        return invalid("need at least two radii with matching values");
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radii must be strictly increasing");
    }
    let n = values.len();
    let d_last = values[n - 1] - values[n - 2];
    let mut rep = LimitReport {
        radii: radii.to_vec(),
        values: values.to_vec(),
        limit: None,
        converged: false,
        predicted: None,
        scale: 1.0,
        pass: false,
        note: String::new(),
    };
    if d_last.abs() <= abs_tol {
        rep.limit = Some(values[n - 1]);
        rep.converged = true;
        rep.note = "stationary".into();
        return Ok(rep);
    }
    if n >= 3 {
        let d_prev = values[n - 2] - values[n - 3];
        let r = d_last / d_prev;
        if d_prev != 0.0 && r.abs() < 0.8 {
            rep.limit = Some(values[n - 1] + d_last * r / (1.0 - r));
            rep.converged = true;
            rep.note = format!("aitken ratio {r:.3e}");
            return Ok(rep);
        }
        rep.note = format!("increments not contracting (ratio {r:.3e})");
    } else {
        rep.note = "too few radii to extrapolate".into();
    }
    Ok(rep)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("slope fit needs two or more points");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return invalid("slope fit needs positive data");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly).0)
}

/// Ordinary least squares `y ≈ slope x + intercept`, plus the residual sum of squares.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - slope * a - icpt).powi(2)).sum();
    (slope, icpt, rss)
}

/// Observed convergence order from errors at successive resolutions.
pub fn observed_orders(n: &[usize], err: &[f64]) -> Vec<f64> {
    n.windows(2)
        .zip(err.windows(2))
        .map(|(nn, ee)| (ee[0] / ee[1]).ln() / (nn[1] as f64 / nn[0] as f64).ln())
        .collect()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::Error::Io(e.into()))?;
    w.write_record(header).map_err(|e| crate::Error::Io(e.into()))?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.12e}"))).map_err(|e| crate::Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal log-log line plot of one or more series.
pub fn write_svg_loglog(path: &Path, title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> Result<()> {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter().copied())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    if pts.is_empty() {
        return invalid("nothing to plot");
    }
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<text x=\"{pad}\" y=\"20\" font-size=\"14\">{title}</text>\n"
    );
    s += &format!(
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for (k, (name, data)) in series.iter().enumerate() {
        let c = colors[k % colors.len()];
        let poly: Vec<String> = data
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .map(|(x, y)| format!("{:.2},{:.2}", sx(x.log10()), sy(y.log10())))
            .collect();
        s += &format!("<polyline fill=\"none\" stroke=\"{c}\" points=\"{}\"/>\n", poly.join(" "));
        s += &format!("<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{c}\">{name}</text>\n", w - 150.0, pad + 15.0 * (k as f64 + 1.0));
    }
    s += &format!(
        "<text x=\"{pad}\" y=\"{}\" font-size=\"11\">log10 x: [{x0:.2}, {x1:.2}]  log10 y: [{y0:.2}, {y1:.2}]</text>\n</svg>\n",
        h - 10.0
    );
    std::fs::write(path, s)?;
    Ok(())
}
