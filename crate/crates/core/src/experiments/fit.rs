//! Logarithmic rate `d_H/r0 ≈ C |log ε|^{-β}`.

use super::{ExperimentError, StabilityRecord};

/// Relative slack allowed above the envelope.
pub const RATE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Least-squares constant.
    pub c: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Smallest constant with `d_H/r0 ≤ C|log ε|^{-β}` at every point, for the
    /// least-squares `β`.
    pub envelope_c: f64,
    /// Largest `(d_H/r0)/(C|log ε|^{-β})` over the points, with the
    /// least-squares `C`.
    pub max_ratio: f64,
}

impl RateFit {
    pub fn eta(&self, epsilon: f64) -> f64 {
        self.c * epsilon.ln().abs().powf(-self.beta)
    }

    pub fn envelope(&self, epsilon: f64) -> f64 {
        self.envelope_c * epsilon.ln().abs().powf(-self.beta)
    }
}

/// Least squares of `log(d_H/r0)` against `log|log ε|` over the usable
/// records (`0 < ε < 1`, `d_H > 0`, no error).
pub fn fit_log_rate(records: &[StabilityRecord]) -> Result<RateFit, ExperimentError> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.is_ok() && r.epsilon > 0.0 && r.epsilon < 1.0 && r.d_h > 0.0)
        .map(|r| (r.epsilon.ln().abs().ln(), (r.d_h / r.r0).ln()))
        .collect();
    if pts.len() < 4 {
        return Err(ExperimentError::InsufficientPoints { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 1e-14 * (1.0 + mx * mx) * n {
        return Err(ExperimentError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let max_residual = pts
        .iter()
        .map(|p| p.1 - intercept - slope * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit {
        c: intercept.exp(),
        beta: -slope,
        r_squared,
        points: pts.len(),
        envelope_c: (intercept + max_residual.max(0.0)).exp(),
        max_ratio: max_residual.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epsilon: f64, d_h: f64) -> StabilityRecord {
        StabilityRecord {
            delta: d_h,
            epsilon,
            epsilon_g: epsilon,
            epsilon_gt: epsilon,
            d_h,
            d_m: d_h,
            d_boundary: d_h,
            r0: 1.0,
            runtime: 0.0,
            error: None,
        }
    }

    #[test]
    fn recovers_its_own_model() {
        let recs: Vec<_> = (1..=8)
            .map(|k| {
                let eps = 10f64.powi(-k);
                record(eps, 2.0 * eps.ln().abs().powf(-0.5))
            })
            .collect();
        let fit = fit_log_rate(&recs).unwrap();
        assert!((fit.c - 2.0).abs() < 1e-10);
        assert!((fit.beta - 0.5).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
        assert!((fit.envelope_c - 2.0).abs() < 1e-10);
    }

    #[test]
    fn lipschitz_data_gives_large_finite_beta() {
        let recs: Vec<_> = (1..=8)
            .map(|k| record(0.5f64.powi(k + 3), 0.5f64.powi(k + 3)))
            .collect();
        let fit = fit_log_rate(&recs).unwrap();
        assert!(fit.beta.is_finite() && fit.beta > 1.0 && fit.c.is_finite());
    }

    #[test]
    fn rejects_unusable_inputs() {
        let few: Vec<_> = (1..=3).map(|k| record(0.1f64.powi(k), 0.1)).collect();
        assert!(matches!(
            fit_log_rate(&few),
            Err(ExperimentError::InsufficientPoints { found: 3 })
        ));
        let flat: Vec<_> = (1..=5).map(|k| record(0.01, 0.1 * k as f64)).collect();
        assert!(matches!(
            fit_log_rate(&flat),
            Err(ExperimentError::DegenerateFit)
        ));
        let large: Vec<_> = (1..=5).map(|k| record(1.5, 0.1 * k as f64)).collect();
        assert!(matches!(
            fit_log_rate(&large),
            Err(ExperimentError::InsufficientPoints { found: 0 })
        ));
    }
}
