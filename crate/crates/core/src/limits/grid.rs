//! Coefficients of a spec sampled once on a uniform grid, so that the
//! per-path schemes do no closure calls or allocation per step.

use crate::limits::spec::{ItoSpec, LimitRegime, Tensor4};
use crate::limits::LimitsError;
use crate::numerics::tensor::{Mat, Tensor, Vector};
use crate::scalar::Scalar;

/// Grid samples of one coefficient. Time-constant coefficients are kept once.
#[derive(Clone, Debug)]
pub(crate) enum Sampled<X> {
    Constant(X),
    Varying(Vec<X>),
}

impl<X: PartialEq + Clone> Sampled<X> {
    fn sample(steps: usize, f: impl Fn(usize) -> X) -> Self {
        let first = f(0);
        let mut varying: Option<Vec<X>> = None;
        for k in 1..steps {
            let v = f(k);
            match &mut varying {
                Some(all) => all.push(v),
                None if v != first => {
                    let mut all = vec![first.clone(); k];
                    all.push(v);
                    varying = Some(all);
                }
                None => {}
            }
        }
        match varying {
            Some(all) => Sampled::Varying(all),
            None => Sampled::Constant(first),
        }
    }

    #[inline]
    pub(crate) fn at(&self, k: usize) -> &X {
        match self {
            Sampled::Constant(x) => x,
            Sampled::Varying(v) => &v[k],
        }
    }
}

/// Everything the recursion, the path sampler and Euler–Maruyama need at
/// `t_k = k/L`, `k < L`.
#[derive(Clone, Debug)]
pub(crate) struct GridCoefficients<T> {
    pub depth: usize,
    pub d: usize,
    pub regime: LimitRegime,
    /// `L^{-α}`.
    pub out_scale: T,
    /// `L^{-β} Ā(t_k)`, `L^{-β} b̄(t_k)`.
    pub a_trend: Sampled<Mat<T>>,
    pub b_trend: Sampled<Vector<T>>,
    pub u_a: Sampled<Mat<T>>,
    pub u_b: Sampled<Vector<T>>,
    pub q_a: Sampled<Tensor4<T>>,
    pub q_b: Sampled<Mat<T>>,
    /// Linear and constant parts of the limit drift without the correction.
    pub drift_a: Sampled<Mat<T>>,
    pub drift_b: Sampled<Vector<T>>,
    /// `½σ''(0)` times `Σ^A_{(i,j),(i,l)}` flattened as `[i][j][l]`, and times
    /// `Σ^b_{ii}`. Empty when the activation has no curvature at zero.
    pub corr_a: Sampled<Vec<T>>,
    pub corr_b: Sampled<Vec<T>>,
    pub has_correction: bool,
}

impl<T: Scalar> GridCoefficients<T> {
    pub fn sample(spec: &ItoSpec<T>, depth: usize) -> Result<Self, LimitsError> {
        if depth == 0 {
            return Err(LimitsError::InvalidParameter("depth must be >= 1".into()));
        }
        let regime = spec.regime()?;
        let d = spec.d;
        let lf = depth as f64;
        let t = |k: usize| k as f64 / lf;
        let trend_scale = T::lit(lf.powf(-spec.beta));
        let beta_one = (spec.beta - 1.0).abs() <= 1e-12;

        let a_trend = Sampled::sample(depth, |k| (spec.a_bar)(t(k)).scaled(trend_scale));
        let b_trend = Sampled::sample(depth, |k| (spec.b_bar)(t(k)).scaled(trend_scale));
        let u_a = Sampled::sample(depth, |k| (spec.u_a)(t(k)));
        let u_b = Sampled::sample(depth, |k| (spec.u_b)(t(k)));
        let q_a = Sampled::sample(depth, |k| (spec.q_a)(t(k)));
        let q_b = Sampled::sample(depth, |k| (spec.q_b)(t(k)));
        let drift_a = Sampled::sample(depth, |k| match regime {
            LimitRegime::Ode => (spec.a_bar)(t(k)),
            LimitRegime::Diffusive if beta_one => (spec.u_a)(t(k)).plus(&(spec.a_bar)(t(k))),
            LimitRegime::Diffusive => (spec.u_a)(t(k)),
        });
        let drift_b = Sampled::sample(depth, |k| match regime {
            LimitRegime::Ode => (spec.b_bar)(t(k)),
            LimitRegime::Diffusive if beta_one => (spec.u_b)(t(k)).plus(&(spec.b_bar)(t(k))),
            LimitRegime::Diffusive => (spec.u_b)(t(k)),
        });

        let s2 = spec.activation.second_derivative_at_zero();
        let has_correction = regime == LimitRegime::Diffusive && s2 != 0.0;
        let half = T::lit(0.5 * s2);
        let corr_a = Sampled::sample(depth, |k| {
            if !has_correction {
                return Vec::new();
            }
            let q = q_a.at(k);
            let mut out = Vec::with_capacity(d * d * d);
            for i in 0..d {
                for j in 0..d {
                    for l in 0..d {
                        let mut s = T::zero();
                        for m in 0..d {
                            for n in 0..d {
                                s = s + q.get(i, j, m, n) * q.get(i, l, m, n);
                            }
                        }
                        out.push(half * s);
                    }
                }
            }
            out
        });
        let corr_b = Sampled::sample(depth, |k| {
            if !has_correction {
                return Vec::new();
            }
            let q = q_b.at(k);
            (0..d)
                .map(|i| half * (0..d).map(|m| q[(i, m)] * q[(i, m)]).sum::<T>())
                .collect()
        });

        Ok(Self {
            depth,
            d,
            regime,
            out_scale: T::lit(lf.powf(-spec.alpha)),
            a_trend,
            b_trend,
            u_a,
            u_b,
            q_a,
            q_b,
            drift_a,
            drift_b,
            corr_a,
            corr_b,
            has_correction,
        })
    }
}
