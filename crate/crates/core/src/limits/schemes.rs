use crate::limits::grid::GridCoefficients;
use crate::limits::path::DrivingPath;
use crate::limits::spec::{q_form, ItoSpec, LimitRegime, SmoothActivation};
use crate::limits::LimitsError;
use crate::numerics::tensor::{Mat, Tensor, Vector};
use crate::scalar::Scalar;

fn check_state<T: Scalar>(h: &Vector<T>, layer: usize) -> Result<(), LimitsError> {
    if h.is_finite() {
        Ok(())
    } else {
        Err(LimitsError::NonFiniteState { layer })
    }
}

fn check_input<T: Scalar>(
    spec: &ItoSpec<T>,
    path: &DrivingPath<T>,
    x: &Vector<T>,
) -> Result<(), LimitsError> {
    if x.dim() != spec.d || path.dw_a.first().is_none_or(|m| m.rows() != spec.d) {
        return Err(LimitsError::DimensionMismatch(format!(
            "input of dimension {} for a d = {} spec",
            x.dim(),
            spec.d
        )));
    }
    Ok(())
}

/// The network recursion driven by a path:
/// `h_{k+1} = h_k + L^{-α} σ(A_k h_k + b_k)` with
/// `A_k = L^{-β} Ā(k/L) + ΔW^A_k`, `b_k = L^{-β} b̄(k/L) + ΔW^b_k`.
pub fn discrete_hidden_states<T: Scalar>(
    spec: &ItoSpec<T>,
    path: &DrivingPath<T>,
    x: &Vector<T>,
) -> Result<Vec<Vector<T>>, LimitsError> {
    check_input(spec, path, x)?;
    discrete_hidden_states_on(
        &GridCoefficients::sample(spec, path.depth)?,
        spec.activation,
        path,
        x,
    )
}

pub(crate) fn discrete_hidden_states_on<T: Scalar>(
    grid: &GridCoefficients<T>,
    activation: SmoothActivation,
    path: &DrivingPath<T>,
    x: &Vector<T>,
) -> Result<Vec<Vector<T>>, LimitsError> {
    let d = grid.d;
    let mut states = Vec::with_capacity(path.depth + 1);
    let mut h = x.clone();
    let mut pre = vec![T::zero(); d];
    states.push(h.clone());
    for k in 0..path.depth {
        let (at, bt) = (grid.a_trend.at(k), grid.b_trend.at(k));
        let (dwa, dwb) = (&path.dw_a[k], &path.dw_b[k]);
        for (i, p) in pre.iter_mut().enumerate() {
            let mut s = bt[i] + dwb[i];
            for j in 0..d {
                s = s + (at[(i, j)] + dwa[(i, j)]) * h[j];
            }
            *p = s;
        }
        for (hi, &p) in h.as_mut_slice().iter_mut().zip(&pre) {
            *hi = *hi + grid.out_scale * activation.apply(p);
        }
        check_state(&h, k + 1)?;
        states.push(h.clone());
    }
    Ok(states)
}

/// Drift of the limit at `(t, h)`. In the diffusive regime it is
/// `U^A h + U^b + ½σ''(0) Q(t, h)`, plus `Ā h + b̄` when `β = 1`; in the ODE
/// regime it is `Ā h + b̄`. `correction = false` drops the `Q` term.
pub fn limit_drift<T: Scalar>(
    spec: &ItoSpec<T>,
    regime: LimitRegime,
    t: f64,
    h: &Vector<T>,
    correction: bool,
) -> Vector<T> {
    let trend = |mu: &mut Vector<T>| {
        mu.axpy(T::one(), &(spec.a_bar)(t).matvec(h));
        mu.axpy(T::one(), &(spec.b_bar)(t));
    };
    let mut mu = Vector::zeros(spec.d);
    match regime {
        LimitRegime::Ode => trend(&mut mu),
        LimitRegime::Diffusive => {
            mu.axpy(T::one(), &(spec.u_a)(t).matvec(h));
            mu.axpy(T::one(), &(spec.u_b)(t));
            if (spec.beta - 1.0).abs() <= 1e-12 {
                trend(&mut mu);
            }
            let s2 = spec.activation.second_derivative_at_zero();
            if correction && s2 != 0.0 {
                let q = q_form(&spec.sigma_a(t), &spec.sigma_b(t), h);
                mu.axpy(T::lit(0.5 * s2), &q);
            }
        }
    }
    mu
}

/// Euler–Maruyama for the limit, driven by the path's Brownian increments:
/// `ĥ_{k+1} = ĥ_k + μ(t_k, ĥ_k)/L + ΔV^A_k ĥ_k + ΔV^b_k`, with
/// `ΔV^A_k = q^A(t_k) : ΔB^A_k` and `ΔV^b_k = q^b(t_k) ΔB^b_k`. In the ODE
/// regime the noise does not survive the limit and the scheme is explicit
/// Euler on `dH = (Ā H + b̄) dt`.
pub fn euler_maruyama<T: Scalar>(
    spec: &ItoSpec<T>,
    path: &DrivingPath<T>,
    x: &Vector<T>,
) -> Result<Vec<Vector<T>>, LimitsError> {
    euler_maruyama_with(spec, path, x, true)
}

/// [`euler_maruyama`] with the Itô correction switchable.
pub fn euler_maruyama_with<T: Scalar>(
    spec: &ItoSpec<T>,
    path: &DrivingPath<T>,
    x: &Vector<T>,
    correction: bool,
) -> Result<Vec<Vector<T>>, LimitsError> {
    check_input(spec, path, x)?;
    euler_maruyama_on(
        &GridCoefficients::sample(spec, path.depth)?,
        path,
        x,
        correction,
    )
}

pub(crate) fn euler_maruyama_on<T: Scalar>(
    grid: &GridCoefficients<T>,
    path: &DrivingPath<T>,
    x: &Vector<T>,
    correction: bool,
) -> Result<Vec<Vector<T>>, LimitsError> {
    let d = grid.d;
    let l = path.depth;
    let inv_l = T::one() / T::from_usize_lossy(l);
    let diffusive = grid.regime == LimitRegime::Diffusive;
    let corrected = correction && grid.has_correction;
    let mut states = Vec::with_capacity(l + 1);
    let mut h = x.clone();
    let mut incr = vec![T::zero(); d];
    states.push(h.clone());
    for k in 0..l {
        let (ma, mb) = (grid.drift_a.at(k), grid.drift_b.at(k));
        for (i, inc) in incr.iter_mut().enumerate() {
            let mut mu = mb[i];
            for j in 0..d {
                mu = mu + ma[(i, j)] * h[j];
            }
            if corrected {
                let (ca, cb) = (grid.corr_a.at(k), grid.corr_b.at(k));
                let block = &ca[i * d * d..(i + 1) * d * d];
                let mut q = cb[i];
                for j in 0..d {
                    let mut inner = T::zero();
                    for m in 0..d {
                        inner = inner + block[j * d + m] * h[m];
                    }
                    q = q + h[j] * inner;
                }
                mu = mu + q;
            }
            let mut s = mu * inv_l;
            if diffusive {
                let (qa, qb) = (grid.q_a.at(k), grid.q_b.at(k));
                let (dba, dbb) = (&path.db_a[k], &path.db_b[k]);
                for j in 0..d {
                    let mut v = T::zero();
                    for m in 0..d {
                        for n in 0..d {
                            v = v + qa.get(i, j, m, n) * dba[(m, n)];
                        }
                    }
                    s = s + v * h[j];
                }
                for m in 0..d {
                    s = s + qb[(i, m)] * dbb[m];
                }
            }
            *inc = s;
        }
        for (hi, &v) in h.as_mut_slice().iter_mut().zip(&incr) {
            *hi = *hi + v;
        }
        check_state(&h, k + 1)?;
        states.push(h.clone());
    }
    Ok(states)
}

/// Classic fourth-order Runge–Kutta for `dh/dt = f(t, h)` on `[0, 1]`,
/// returning the states at `t = k/steps`.
pub fn rk4<T: Scalar>(
    f: impl Fn(f64, &Vector<T>) -> Vector<T>,
    x: &Vector<T>,
    steps: usize,
) -> Result<Vec<Vector<T>>, LimitsError> {
    if steps == 0 {
        return Err(LimitsError::InvalidParameter("steps must be >= 1".into()));
    }
    let hstep = 1.0 / steps as f64;
    let (h_t, half_t, sixth) = (T::lit(hstep), T::lit(0.5 * hstep), T::lit(hstep / 6.0));
    let two = T::lit(2.0);
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = x.clone();
    out.push(y.clone());
    for k in 0..steps {
        let t = k as f64 * hstep;
        let k1 = f(t, &y);
        let mut y2 = y.clone();
        y2.axpy(half_t, &k1);
        let k2 = f(t + 0.5 * hstep, &y2);
        let mut y3 = y.clone();
        y3.axpy(half_t, &k2);
        let k3 = f(t + 0.5 * hstep, &y3);
        let mut y4 = y.clone();
        y4.axpy(h_t, &k3);
        let k4 = f(t + hstep, &y4);
        let mut incr = k1;
        incr.axpy(two, &k2);
        incr.axpy(two, &k3);
        incr.axpy(T::one(), &k4);
        y.axpy(sixth, &incr);
        check_state(&y, k + 1)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// `dH/dt = Ā(t) H + b̄(t)`, `H_0 = x`, by RK4 with `steps` uniform steps.
pub fn integrate_ode<T: Scalar>(
    a_bar: &dyn Fn(f64) -> Mat<T>,
    b_bar: &dyn Fn(f64) -> Vector<T>,
    x: &Vector<T>,
    steps: usize,
) -> Result<Vec<Vector<T>>, LimitsError> {
    rk4(
        |t, h| {
            let mut v = a_bar(t).matvec(h);
            v.axpy(T::one(), &b_bar(t));
            v
        },
        x,
        steps,
    )
}

/// RK4 on the full drift of a noise-free spec.
pub fn integrate_limit_ode<T: Scalar>(
    spec: &ItoSpec<T>,
    x: &Vector<T>,
    steps: usize,
) -> Result<Vec<Vector<T>>, LimitsError> {
    let regime = spec.regime()?;
    rk4(|t, h| limit_drift(spec, regime, t, h, true), x, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::path::sample_driving_path;
    use crate::limits::spec::{ConstantSpec, SmoothActivation};
    use crate::numerics::rng::RngStream;
    use crate::resnet::{Architecture, Delta, ResNet};

    fn base() -> ConstantSpec {
        ConstantSpec {
            d: 1,
            a_bar: 0.0,
            b_bar: 0.0,
            u_a: 0.0,
            u_b: 0.0,
            q_a: 0.0,
            q_b: 0.0,
            alpha: 0.0,
            beta: 1.0,
            activation: SmoothActivation::Tanh,
        }
    }

    fn scalar(x: f64) -> Vector<f64> {
        Vector::filled(1, x)
    }

    #[test]
    fn zero_coefficients_keep_the_input() {
        let s = ConstantSpec { d: 3, ..base() }.build::<f64>();
        let p = sample_driving_path(&s, 20, &mut RngStream::new(0, 0)).unwrap();
        let x = Vector::from_vec(vec![0.5, -1.0, 2.0]).unwrap();
        for h in discrete_hidden_states(&s, &p, &x).unwrap() {
            assert_eq!(h, x);
        }
        for h in euler_maruyama(&s, &p, &x).unwrap() {
            assert_eq!(h, x);
        }
    }

    #[test]
    fn discrete_states_approach_the_exponential() {
        let a = 0.8;
        let spec = ConstantSpec {
            a_bar: a,
            alpha: 0.5,
            beta: 0.5,
            activation: SmoothActivation::identity_like(),
            ..base()
        }
        .build::<f64>();
        let mut prev = f64::INFINITY;
        for p in 4..=10 {
            let l = 1usize << p;
            let path = sample_driving_path(&spec, l, &mut RngStream::new(0, 0)).unwrap();
            let h = discrete_hidden_states(&spec, &path, &scalar(1.0)).unwrap();
            let err = (h[l][0] - a.exp()).abs();
            assert!(err < prev / 1.8, "L={l}: {err} vs {prev}");
            assert!(err * l as f64 <= 1.0);
            prev = err;
        }
    }

    #[test]
    fn iid_initialization_is_the_brownian_special_case() {
        // α = 0, β = 1, q^A = 1/d, q^b = 1/sqrt(d): a Gaussian-initialized
        // network with δ = 1
        let (l, d) = (64usize, 3usize);
        let spec = ConstantSpec {
            d,
            q_a: 1.0 / d as f64,
            q_b: 1.0 / (d as f64).sqrt(),
            ..base()
        }
        .build::<f64>();
        let path = sample_driving_path(&spec, l, &mut RngStream::new(2, 1)).unwrap();
        let net = ResNet::from_parts(
            Architecture::tanh_shared(l, d),
            path.dw_a.clone(),
            path.dw_b.clone(),
            Delta::Shared(1.0),
        )
        .unwrap();
        let x = Vector::from_vec(vec![0.3, -0.2, 0.9]).unwrap();
        let ours = discrete_hidden_states(&spec, &path, &x).unwrap();
        let theirs = net.forward(&x).unwrap();
        for (a, b) in ours.iter().zip(&theirs) {
            assert!(a.max_abs_diff(b) < 1e-14);
        }
    }

    #[test]
    fn additive_noise_is_exact() {
        let spec = ConstantSpec {
            q_b: 0.7,
            d: 2,
            ..base()
        }
        .build::<f64>();
        let path = sample_driving_path(&spec, 200, &mut RngStream::new(8, 0)).unwrap();
        let x = Vector::from_vec(vec![1.0, -2.0]).unwrap();
        let em = euler_maruyama(&spec, &path, &x).unwrap();
        assert!(em[200].max_abs_diff(&x.plus(&path.w_b_end())) < 1e-13);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let spec = ConstantSpec {
            a_bar: 1e308,
            b_bar: 1e308,
            alpha: 0.5,
            beta: 0.5,
            activation: SmoothActivation::identity_like(),
            ..base()
        }
        .build::<f64>();
        let path = sample_driving_path(&spec, 4, &mut RngStream::new(0, 0)).unwrap();
        assert!(matches!(
            discrete_hidden_states(&spec, &path, &scalar(1e300)),
            Err(LimitsError::NonFiniteState { layer: 1 })
        ));
    }

    #[test]
    fn rk4_examples() {
        let zero = |_: f64| Mat::zeros(1, 1);
        let c = |_: f64| Vector::filled(1, 0.37);
        let h = integrate_ode(&zero, &c, &scalar(2.0), 7).unwrap();
        assert!((h[7][0] - 2.37).abs() < 1e-15);

        let a = 1.3;
        let am = move |_: f64| Mat::from_fn(1, 1, |_, _| a);
        let none = |_: f64| Vector::zeros(1);
        let h = integrate_ode(&am, &none, &scalar(1.0), 1000).unwrap();
        assert!((h[1000][0] - a.exp()).abs() < 1e-10);

        let err =
            |n: usize| (integrate_ode(&am, &none, &scalar(1.0), n).unwrap()[n][0] - a.exp()).abs();
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.5, "{ratio}");
        assert!(integrate_ode(&am, &none, &scalar(1.0), 0).is_err());
    }

    #[test]
    fn noise_free_em_is_euler_with_first_order_error() {
        let a = 0.9;
        let spec = ConstantSpec { a_bar: a, ..base() }.build::<f64>();
        let mut prev = f64::INFINITY;
        for l in [64usize, 128, 256, 512] {
            let path = sample_driving_path(&spec, l, &mut RngStream::new(0, 0)).unwrap();
            let em = euler_maruyama(&spec, &path, &scalar(1.0)).unwrap();
            let euler = (1.0 + a / l as f64).powi(l as i32);
            assert!((em[l][0] - euler).abs() < 1e-12);
            let ode = integrate_limit_ode(&spec, &scalar(1.0), l).unwrap();
            let err = em
                .iter()
                .zip(&ode)
                .map(|(u, v)| (u[0] - v[0]).abs())
                .fold(0.0, f64::max);
            let scaled = err * l as f64;
            assert!(scaled > 0.1 && scaled < 2.0);
            assert!(err < prev);
            prev = err;
        }
    }
}
