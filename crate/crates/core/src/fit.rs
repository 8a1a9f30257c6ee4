//! Growth-rate fitting over grid ladders.
//!
//! Divergence has no finite-grid meaning, so it is measured: a sequence of
//! partial sums (or norms) over nested grids is classified as unbounded when
//! it fits a power law with positive exponent, and as settled when its tail
//! increments fall below a relative threshold. Both modules that grade
//! ultraviolet behaviour share these rules so their verdicts stay consistent.

use serde::{Deserialize, Serialize};

/// Power-law exponent above which a ladder of values is declared unbounded.
pub const DIVERGENT_SLOPE_TOL: f64 = 0.05;

/// Relative tail increment below which a ladder of values is declared settled.
pub const CONVERGED_REL_TOL: f64 = 1e-3;

/// Number of trailing increments that must all be settled.
const TAIL_WINDOW: usize = 3;

/// Outcome of a growth measurement along a ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthVerdict {
    /// Values grow like a positive power of the extent.
    Divergent,
    /// Values have settled to a limit within tolerance.
    Bounded,
    /// Neither rule fired; the ladder does not reach far enough.
    Inconclusive,
}

/// Power-law fit of a ladder together with its verdict.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Least-squares slope of log(value) against log(extent).
    pub slope: f64,
    /// Largest relative increment among the trailing window.
    pub tail_rel_change: f64,
    pub verdict: GrowthVerdict,
}

/// Least-squares slope of ln(y) against ln(x). Entries with non-positive
/// x or y are skipped; fewer than two usable points give slope 0.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Classify a ladder of non-negative values measured at increasing extents.
///
/// The settled rule is checked first: if every increment in the trailing
/// window is below [`CONVERGED_REL_TOL`] relative to the final value, the
/// ladder is `Bounded`. Otherwise a log-log slope above
/// [`DIVERGENT_SLOPE_TOL`] means `Divergent`, and anything else is
/// `Inconclusive`.
pub fn classify_growth(extents: &[f64], values: &[f64]) -> GrowthFit {
    assert_eq!(extents.len(), values.len(), "ladder length mismatch");
    let slope = log_log_slope(extents, values);
    let last = values.last().copied().unwrap_or(0.0).abs();
    let scale = last.max(f64::MIN_POSITIVE);
    let window = TAIL_WINDOW.min(values.len().saturating_sub(1));
    let tail_rel_change = values
        .windows(2)
        .rev()
        .take(window)
        .map(|w| (w[1] - w[0]).abs() / scale)
        .fold(0.0, f64::max);
    let verdict = if values.len() >= 2 && tail_rel_change < CONVERGED_REL_TOL {
        GrowthVerdict::Bounded
    } else if slope > DIVERGENT_SLOPE_TOL {
        GrowthVerdict::Divergent
    } else {
        GrowthVerdict::Inconclusive
    };
    GrowthFit {
        slope,
        tail_rel_change,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = (1..=8).map(|m| 2f64.powi(m)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.5)).collect();
        assert!((log_log_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sqrt_growth_is_divergent() {
        let xs: Vec<f64> = (2..=9).map(|m| 4f64.powi(m)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (x.sqrt() - 1.0)).collect();
        let fit = classify_growth(&xs, &ys);
        assert_eq!(fit.verdict, GrowthVerdict::Divergent);
    }

    #[test]
    fn settling_tail_is_bounded() {
        let xs: Vec<f64> = (2..=9).map(|m| 10f64.powi(m)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (1.0 - x.powf(-0.5))).collect();
        let fit = classify_growth(&xs, &ys);
        assert_eq!(fit.verdict, GrowthVerdict::Bounded);
    }

    #[test]
    fn all_zero_ladder_is_bounded() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys = [0.0; 4];
        assert_eq!(classify_growth(&xs, &ys).verdict, GrowthVerdict::Bounded);
    }
}
