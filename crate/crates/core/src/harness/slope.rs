use crate::{Error, Result};

/// Errors at or below this level are treated as round-off, not signal.
pub const DEGENERATE_LEVEL: f64 = 1e-12;

/// Least-squares line through `(log τ, log err)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log-space misfit.
    pub residual: f64,
    /// Every error sits at round-off level, so the slope is meaningless.
    pub degenerate: bool,
}

pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 2 {
        return Err(Error::domain(format!("slope fit needs at least two points, got {}", pairs.len())));
    }
    if let Some(&(t, e)) = pairs.iter().find(|(t, e)| !(*t > 0.0) || !(*e > 0.0) || !t.is_finite() || !e.is_finite()) {
        return Err(Error::domain(format!("slope fit needs positive finite values, got ({t}, {e})")));
    }
    let n = pairs.len() as f64;
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(t, e)| (t.ln(), e.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("slope fit needs at least two distinct step sizes"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let degenerate = pairs.iter().all(|p| p.1 <= DEGENERATE_LEVEL);
    Ok(SlopeFit { slope, intercept, residual, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn taus(lo: i32, hi: i32) -> impl Iterator<Item = f64> {
        (lo..=hi).map(|q| 2f64.powi(-q))
    }

    #[test]
    fn exact_power_laws() {
        let quad: Vec<_> = taus(4, 10).map(|t| (t, 3.0 * t * t)).collect();
        let fit = fit_slope(&quad).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
        assert!(!fit.degenerate);

        let lin: Vec<_> = taus(4, 10).map(|t| (t, 0.5 * t)).collect();
        assert!((fit_slope(&lin).unwrap().slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_corrected_quadratic() {
        let pts: Vec<_> = taus(10, 15).map(|t| (t, t * t * (1.0 / t).ln())).collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((1.8..=2.1).contains(&fit.slope), "slope {}", fit.slope);
        assert!(fit.residual > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_slope(&[(0.1, 1.0)]).is_err());
        assert!(fit_slope(&[(0.1, 1.0), (0.05, 0.0)]).is_err());
        assert!(fit_slope(&[(0.1, 1.0), (-0.05, 1.0)]).is_err());
        assert!(fit_slope(&[(0.1, 1.0), (0.1, 2.0)]).is_err());
    }

    #[test]
    fn round_off_errors_are_flagged() {
        let pts: Vec<_> = taus(4, 8).map(|t| (t, 1e-15 * (1.0 + t))).collect();
        assert!(fit_slope(&pts).unwrap().degenerate);
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(order in -1.0f64..5.0, scale in 1e-6f64..1e3) {
            let pts: Vec<_> = taus(2, 9).map(|t| (t, scale * t.powf(order))).collect();
            let fit = fit_slope(&pts).unwrap();
            prop_assert!((fit.slope - order).abs() < 1e-9);
        }
    }
}
