//! Power-law regression in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::numerics::NumericsError;

/// Result of an ordinary least-squares fit of `ln value = intercept + slope * ln L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`. A constant series is
    /// fitted exactly and reports `1`.
    pub r_squared: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    /// Fitted value `exp(intercept) * x^slope`.
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fits `value ~ a * L^p` through `(L, value)` pairs.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<PowerLawFit, NumericsError> {
    if points.len() < 2 {
        return Err(NumericsError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0))
    {
        return Err(NumericsError::NonPositive { x, y });
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(NumericsError::DegenerateAbscissae);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|&l| (l, l.powf(-0.7)))
            .collect();
        let fit = loglog_fit(&pts).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_points, 3);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let fit = loglog_fit(&[(10.0, 5.0), (100.0, 5.0), (1000.0, 5.0)]).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            loglog_fit(&[(1.0, 1.0)]),
            Err(NumericsError::TooFewPoints { .. })
        ));
        assert!(matches!(
            loglog_fit(&[(1.0, 1.0), (2.0, 0.0)]),
            Err(NumericsError::NonPositive { .. })
        ));
        assert!(matches!(
            loglog_fit(&[(-1.0, 1.0), (2.0, 1.0)]),
            Err(NumericsError::NonPositive { .. })
        ));
        assert_eq!(
            loglog_fit(&[(3.0, 1.0), (3.0, 2.0)]),
            Err(NumericsError::DegenerateAbscissae)
        );
    }

    /// Normal equations `[n Σx; Σx Σx²] [c; p] = [Σy; Σxy]` solved by Cramer's rule.
    fn normal_equations_oracle(pts: &[(f64, f64)]) -> (f64, f64) {
        let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(l, v) in pts {
            let (x, y) = (l.ln(), v.ln());
            s1 += 1.0;
            sx += x;
            sxx += x * x;
            sy += y;
            sxy += x * y;
        }
        let det = s1 * sxx - sx * sx;
        let intercept = (sy * sxx - sx * sxy) / det;
        let slope = (s1 * sxy - sx * sy) / det;
        (slope, intercept)
    }

    #[test]
    fn noisy_points_match_normal_equations() {
        let mut rng = RngStream::new(11, 3);
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let l = 2.0 + i as f64 * 7.5;
                (l, 3.0 * l.powf(-0.4) * (0.3 * rng.standard_normal()).exp())
            })
            .collect();
        let fit = loglog_fit(&pts).unwrap();
        let (slope, intercept) = normal_equations_oracle(&pts);
        assert!((fit.slope - slope).abs() <= 1e-12 * slope.abs());
        assert!((fit.intercept - intercept).abs() <= 1e-12 * intercept.abs());
        assert!(fit.r_squared > 0.0 && fit.r_squared < 1.0);
    }

    proptest! {
        #[test]
        fn recovers_any_exact_power_law(a in 1e-3f64..1e3, p in -3.0f64..3.0) {
            let pts: Vec<_> = [4.0f64, 16.0, 64.0, 256.0, 1024.0]
                .iter().map(|&l| (l, a * l.powf(p))).collect();
            let fit = loglog_fit(&pts).unwrap();
            prop_assert!((fit.slope - p).abs() < 1e-10);
            prop_assert!((fit.r_squared - 1.0).abs() < 1e-10);
        }
    }
}
