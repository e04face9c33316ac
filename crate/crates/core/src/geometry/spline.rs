//! Natural cubic spline through ordered knots.

/// Piecewise cubic interpolant with continuous first and second derivatives
/// and vanishing second derivative at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl CubicSpline {
    /// Builds the spline. Callers guarantee at least two strictly increasing knots.
    pub fn natural(knots: Vec<f64>, values: Vec<f64>) -> Self {
        let n = knots.len();
        debug_assert!(n >= 2 && n == values.len());
        let mut moments = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior moment equations.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for k in 0..m {
                let i = k + 1;
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                diag[k] = 2.0 * (h0 + h1);
                upper[k] = h1;
                rhs[k] =
                    6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            }
            for k in 1..m {
                let lower = knots[k + 1] - knots[k];
                let w = lower / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                rhs[k] -= w * rhs[k - 1];
            }
            moments[m] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                moments[k + 1] = (rhs[k] - upper[k] * moments[k + 2]) / diag[k];
            }
        }
        Self {
            knots,
            values,
            moments,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `x`. Outside the knot span the
    /// end cubic is extended.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let i = self.interval(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope =
            (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let curvature = a * m0 + b * m1;
        (value, slope, curvature)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    /// Exact integral over the knot span.
    pub fn integral(&self) -> f64 {
        self.knots
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let h = w[1] - w[0];
                0.5 * h * (self.values[i] + self.values[i + 1])
                    - h * h * h * (self.moments[i] + self.moments[i + 1]) / 24.0
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data() {
        let knots: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let values: Vec<f64> = knots.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = CubicSpline::natural(knots, values);
        for &x in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let (v, d, c) = s.eval_all(x);
            assert!((v - (3.0 * x - 1.0)).abs() < 1e-13);
            assert!((d - 3.0).abs() < 1e-12);
            assert!(c.abs() < 1e-12);
        }
        assert!((s.integral() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn interpolates_sine_accurately() {
        let n = 201;
        let knots: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let values: Vec<f64> = knots
            .iter()
            .map(|x| (2.0 * std::f64::consts::PI * x).sin())
            .collect();
        let s = CubicSpline::natural(knots, values);
        for k in 0..97 {
            let x = 0.1 + 0.8 * k as f64 / 96.0;
            assert!((s.eval(x) - (2.0 * std::f64::consts::PI * x).sin()).abs() < 1e-8);
        }
        // odd symmetry about x = 1/2 survives the natural end conditions
        assert!(s.integral().abs() < 1e-14);
    }
}
