use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::limits::LimitsError;
use crate::numerics::tensor::{Mat, Tensor, Vector};
use crate::scalar::Scalar;

/// Dense `d x d x d x d` tensor, index `(i, j, k, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![T::zero(); d * d * d * d],
        }
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut t = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        t.data[((i * d + j) * d + k) * d + l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// `c δ_ik δ_jl`: every weight entry driven by its own Brownian motion
    /// with volatility `c`.
    pub fn entrywise(d: usize, c: T) -> Self {
        Self::from_fn(d, |i, j, k, l| if i == k && j == l { c } else { T::zero() })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        let d = self.d;
        self.data[((i * d + j) * d + k) * d + l]
    }

    /// `(q : m)_{ij} = Σ_{kl} q_{ijkl} m_{kl}`.
    pub fn contract(&self, m: &Mat<T>) -> Mat<T> {
        let dd = self.d * self.d;
        let ms = m.as_slice();
        Mat::from_fn(self.d, self.d, |i, j| {
            let row = &self.data[(i * self.d + j) * dd..(i * self.d + j + 1) * dd];
            row.iter().zip(ms).map(|(&q, &b)| q * b).sum()
        })
    }

    /// `Σ_{(i1 j1),(i2 j2)} = Σ_{kl} q_{i1 j1 kl} q_{i2 j2 kl}` as a `d^2 x d^2`
    /// matrix.
    pub fn covariance(&self) -> Mat<T> {
        let dd = self.d * self.d;
        Mat::from_fn(dd, dd, |r, c| {
            let a = &self.data[r * dd..(r + 1) * dd];
            let b = &self.data[c * dd..(c + 1) * dd];
            a.iter().zip(b).map(|(&x, &y)| x * y).sum()
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == T::zero())
    }
}

/// Smooth activations with `σ(0) = 0`, `σ'(0) = 1` and bounded third
/// derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothActivation {
    Tanh,
    /// `σ(x) = x + (c/2) x^2 exp(-x^2/2)`, so `σ''(0) = c`.
    Curved {
        c: f64,
    },
}

impl SmoothActivation {
    pub fn identity_like() -> Self {
        SmoothActivation::Curved { c: 0.0 }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            SmoothActivation::Tanh => x.tanh(),
            SmoothActivation::Curved { c } => {
                let half = T::lit(0.5);
                x + T::lit(c) * half * x * x * (-half * x * x).exp()
            }
        }
    }

    pub fn second_derivative_at_zero(self) -> f64 {
        match self {
            SmoothActivation::Tanh => 0.0,
            SmoothActivation::Curved { c } => c,
        }
    }
}

impl fmt::Display for SmoothActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothActivation::Tanh => f.write_str("tanh"),
            SmoothActivation::Curved { c } => write!(f, "curved:{c}"),
        }
    }
}

impl FromStr for SmoothActivation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "tanh" {
            return Ok(SmoothActivation::Tanh);
        }
        if let Some(c) = s.strip_prefix("curved:") {
            let c: f64 = c.parse().map_err(|_| format!("bad curvature in `{s}`"))?;
            if c.is_finite() {
                return Ok(SmoothActivation::Curved { c });
            }
        }
        Err(format!(
            "unknown smooth activation `{s}` (expected tanh or curved:<c>)"
        ))
    }
}

pub type MatFn<T> = Arc<dyn Fn(f64) -> Mat<T> + Send + Sync>;
pub type VecFn<T> = Arc<dyn Fn(f64) -> Vector<T> + Send + Sync>;
pub type Tensor4Fn<T> = Arc<dyn Fn(f64) -> Tensor4<T> + Send + Sync>;

/// Coefficients of the limit: trends `Ā`, `b̄`, and the Itô processes
/// `dW^A = U^A dt + q^A : dB^A`, `dW^b = U^b dt + q^b dB^b`, together with the
/// exponents of `δ = L^{-α}` and the trend scale `L^{-β}`.
#[derive(Clone)]
pub struct ItoSpec<T> {
    pub d: usize,
    pub a_bar: MatFn<T>,
    pub b_bar: VecFn<T>,
    pub u_a: MatFn<T>,
    pub u_b: VecFn<T>,
    pub q_a: Tensor4Fn<T>,
    pub q_b: MatFn<T>,
    pub alpha: f64,
    pub beta: f64,
    pub activation: SmoothActivation,
    /// Declared Hölder exponent of the coefficients; metadata only.
    pub kappa: Option<f64>,
    /// Human-readable parameters; also the basis of the fingerprint.
    pub description: String,
}

impl<T> fmt::Debug for ItoSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ItoSpec")
            .field("d", &self.d)
            .field("description", &self.description)
            .finish()
    }
}

/// Which limit the recursion has.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRegime {
    /// `α = 0`, `β >= 1`: diffusive limit with Itô correction.
    Diffusive,
    /// `0 < α < 1`, `α + β = 1`: linear ODE `dH = (Ā H + b̄) dt`.
    Ode,
}

const EXPONENT_TOL: f64 = 1e-12;

impl<T: Scalar> ItoSpec<T> {
    pub fn regime(&self) -> Result<LimitRegime, LimitsError> {
        let (a, b) = (self.alpha, self.beta);
        if a.abs() <= EXPONENT_TOL && b >= 1.0 - EXPONENT_TOL {
            Ok(LimitRegime::Diffusive)
        } else if a > 0.0 && a < 1.0 && (a + b - 1.0).abs() <= EXPONENT_TOL {
            Ok(LimitRegime::Ode)
        } else {
            Err(LimitsError::UnsupportedRegime { alpha: a, beta: b })
        }
    }

    pub fn validate(&self) -> Result<(), LimitsError> {
        if self.d == 0 {
            return Err(LimitsError::InvalidParameter("d must be >= 1".into()));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(LimitsError::InvalidParameter(format!(
                "α = {} is negative",
                self.alpha
            )));
        }
        self.regime()?;
        let (a, b, ua, ub, qa, qb) = (
            (self.a_bar)(0.0),
            (self.b_bar)(0.0),
            (self.u_a)(0.0),
            (self.u_b)(0.0),
            (self.q_a)(0.0),
            (self.q_b)(0.0),
        );
        let d = self.d;
        if a.shape() != (d, d)
            || ua.shape() != (d, d)
            || qb.shape() != (d, d)
            || b.dim() != d
            || ub.dim() != d
            || qa.dim() != d
        {
            return Err(LimitsError::DimensionMismatch(format!(
                "coefficients do not all have d = {d}"
            )));
        }
        Ok(())
    }

    /// `Σ^A(t)` as a `d^2 x d^2` matrix.
    pub fn sigma_a(&self, t: f64) -> Mat<T> {
        (self.q_a)(t).covariance()
    }

    /// `Σ^b(t) = q^b (q^b)^T`.
    pub fn sigma_b(&self, t: f64) -> Mat<T> {
        let q = (self.q_b)(t);
        Mat::from_fn(self.d, self.d, |i, j| {
            (0..self.d).map(|k| q[(i, k)] * q[(j, k)]).sum()
        })
    }

    /// True when both diffusion coefficients vanish at every point of the
    /// uniform grid with `steps` intervals.
    pub fn is_noise_free_on(&self, steps: usize) -> bool {
        (0..=steps).all(|k| {
            let t = k as f64 / steps as f64;
            (self.q_a)(t).is_zero() && (self.q_b)(t).as_slice().iter().all(|v| *v == T::zero())
        })
    }

    /// Hex FNV-1a digest of the description.
    pub fn fingerprint(&self) -> String {
        format!(
            "{:016x}",
            crate::resnet::checkpoint::fnv1a64(self.description.as_bytes())
        )
    }
}

/// `Q_i = Σ_{jk} x_j x_k Σ^A_{(i,j),(i,k)} + Σ^b_{ii}`.
pub fn q_form<T: Scalar>(sigma_a: &Mat<T>, sigma_b: &Mat<T>, x: &Vector<T>) -> Vector<T> {
    let d = x.dim();
    Vector::from_fn(d, |i| {
        let mut q = sigma_b[(i, i)];
        for j in 0..d {
            if x[j] == T::zero() {
                continue;
            }
            let mut inner = T::zero();
            for k in 0..d {
                inner = inner + sigma_a[(i * d + j, i * d + k)] * x[k];
            }
            q = q + x[j] * inner;
        }
        q
    })
}

/// Constant-in-time coefficients, each a multiple of the identity (or of the
/// all-ones vector). `q^A` drives each weight entry by its own Brownian
/// motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantSpec {
    pub d: usize,
    pub a_bar: f64,
    pub b_bar: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub q_a: f64,
    pub q_b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub activation: SmoothActivation,
}

impl ConstantSpec {
    pub fn build<T: Scalar>(&self) -> ItoSpec<T> {
        let d = self.d;
        let eye = |c: f64| -> MatFn<T> {
            let m = Mat::identity(d).scaled(T::lit(c));
            Arc::new(move |_| m.clone())
        };
        let ones = |c: f64| -> VecFn<T> {
            let v = Vector::filled(d, T::lit(c));
            Arc::new(move |_| v.clone())
        };
        let qa = Tensor4::entrywise(d, T::lit(self.q_a));
        ItoSpec {
            d,
            a_bar: eye(self.a_bar),
            b_bar: ones(self.b_bar),
            u_a: eye(self.u_a),
            u_b: ones(self.u_b),
            q_a: Arc::new(move |_| qa.clone()),
            q_b: eye(self.q_b),
            alpha: self.alpha,
            beta: self.beta,
            activation: self.activation,
            kappa: None,
            description: serde_json::to_string(self).expect("plain struct serializes"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngStream;

    #[test]
    fn q_form_examples() {
        let d = 3;
        let x = Vector::from_vec(vec![0.3, -2.0, 1.1]).unwrap();
        let q = q_form(&Mat::zeros(d * d, d * d), &Mat::identity(d), &x);
        assert!(q.iter().all(|&v| v == 1.0));

        let mut rng = RngStream::new(3, 0);
        let sa = Tensor4::from_fn(d, |_, _, _, _| rng.standard_normal()).covariance();
        let sb = Mat::from_fn(d, d, |i, j| if i == j { 0.5 + i as f64 } else { 0.1 });
        let q = q_form(&sa, &sb, &Vector::zeros(d));
        for i in 0..d {
            assert_eq!(q[i], sb[(i, i)]);
        }

        let (a, c, x) = (0.7f64, 1.3f64, -1.9f64);
        let q = q_form(
            &Mat::from_fn(1, 1, |_, _| a),
            &Mat::from_fn(1, 1, |_, _| c),
            &Vector::filled(1, x),
        );
        assert!((q[0] - (a * x * x + c)).abs() < 1e-15);
    }

    #[test]
    fn q_form_dominates_bias_term_for_psd_covariance() {
        let d = 3;
        for seed in 0..50 {
            let mut rng = RngStream::new(seed, 9);
            let qa = Tensor4::from_fn(d, |_, _, _, _| rng.standard_normal());
            let qb = Mat::from_fn(d, d, |_, _| rng.standard_normal());
            let spec = ConstantSpec {
                d,
                a_bar: 0.0,
                b_bar: 0.0,
                u_a: 0.0,
                u_b: 0.0,
                q_a: 0.0,
                q_b: 0.0,
                alpha: 0.0,
                beta: 1.0,
                activation: SmoothActivation::Tanh,
            };
            let mut s = spec.build::<f64>();
            s.q_a = Arc::new(move |_| qa.clone());
            s.q_b = Arc::new(move |_| qb.clone());
            let (sa, sb) = (s.sigma_a(0.0), s.sigma_b(0.0));
            assert_eq!(sa, sa.transpose());
            assert_eq!(sb, sb.transpose());
            let x = Vector::from_fn(d, |_| rng.normal(3.0));
            let q = q_form(&sa, &sb, &x);
            for i in 0..d {
                assert!(q[i] >= sb[(i, i)]);
            }
        }
    }

    #[test]
    fn contraction_and_covariance_of_entrywise_noise() {
        let q = Tensor4::entrywise(2, 0.5);
        let m = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(q.contract(&m), m.scaled(0.5));
        assert_eq!(q.covariance(), Mat::identity(4).scaled(0.25));
    }

    #[test]
    fn curved_activation() {
        let s = SmoothActivation::Curved { c: 1.0 };
        assert_eq!(s.apply(0.0f64), 0.0);
        let h = 1e-4f64;
        let d1 = (s.apply(h) - s.apply(-h)) / (2.0 * h);
        let d2 = (s.apply(h) - 2.0 * s.apply(0.0) + s.apply(-h)) / (h * h);
        assert!((d1 - 1.0).abs() < 1e-7);
        assert!((d2 - 1.0).abs() < 1e-6);
        assert_eq!(s.second_derivative_at_zero(), 1.0);
        for a in [SmoothActivation::Tanh, SmoothActivation::Curved { c: -2.5 }] {
            assert_eq!(a.to_string().parse::<SmoothActivation>().unwrap(), a);
        }
        assert!("curved:x".parse::<SmoothActivation>().is_err());
    }

    #[test]
    fn regimes() {
        let mut c = ConstantSpec {
            d: 1,
            a_bar: 1.0,
            b_bar: 0.0,
            u_a: 0.0,
            u_b: 0.0,
            q_a: 0.0,
            q_b: 0.0,
            alpha: 0.5,
            beta: 0.5,
            activation: SmoothActivation::Tanh,
        };
        assert_eq!(c.build::<f64>().regime().unwrap(), LimitRegime::Ode);
        c.alpha = 0.0;
        c.beta = 1.0;
        assert_eq!(c.build::<f64>().regime().unwrap(), LimitRegime::Diffusive);
        c.alpha = 0.3;
        assert!(matches!(
            c.build::<f64>().regime(),
            Err(LimitsError::UnsupportedRegime { .. })
        ));
    }
}
