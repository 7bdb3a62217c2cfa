use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::limits::grid::GridCoefficients;
use crate::limits::path::{sample_driving_path_on, DrivingPath};
use crate::limits::schemes::{discrete_hidden_states_on, euler_maruyama_on, integrate_limit_ode};
use crate::limits::spec::{ItoSpec, LimitRegime};
use crate::limits::LimitsError;
use crate::numerics::fit::{loglog_fit, PowerLawFit};
use crate::numerics::rng::RngStream;
use crate::numerics::tensor::{Tensor, Vector};
use crate::scalar::Scalar;

const STREAM_PATH: u64 = 0x5041_5448;
const STREAM_ITO: u64 = 0x4954_4f43;

/// What the discrete recursion is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    /// RK4 solution of the limit ODE.
    Ode,
    /// Euler–Maruyama on the fine grid, driven by the same Brownian path.
    Sde,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Strictly increasing; each must divide `reference_depth`.
    pub depths: Vec<usize>,
    pub paths: usize,
    /// Fine grid carrying the shared Brownian path and the reference.
    pub reference_depth: usize,
    pub mode: LimitMode,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), LimitsError> {
        let bad = |m: String| Err(LimitsError::InvalidParameter(m));
        if self.depths.is_empty() {
            return bad("depth list is empty".into());
        }
        if self.paths == 0 {
            return bad("need at least one path".into());
        }
        if self.depths.windows(2).any(|p| p[0] >= p[1]) || self.depths[0] == 0 {
            return bad(format!(
                "depths {:?} must be positive and strictly increasing",
                self.depths
            ));
        }
        if let Some(l) = self
            .depths
            .iter()
            .find(|&&l| !self.reference_depth.is_multiple_of(l))
        {
            return bad(format!(
                "depth {l} does not divide the reference depth {}",
                self.reference_depth
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub depth: usize,
    /// `E[sup_k |h_k - H_{k/L}|^2]^{1/2}`, estimated over the paths.
    pub error: f64,
    /// Delta-method standard error of `error`.
    pub stderr: f64,
    /// Largest `|h_k|` seen on any path.
    pub max_state_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub mode: LimitMode,
    pub rows: Vec<ConvergenceRow>,
    /// Log-log fit of error against depth; absent if some error is zero.
    pub rate: Option<PowerLawFit>,
    pub reference: String,
    pub reference_depth: usize,
    pub paths: usize,
    pub seed: u64,
    pub spec_fingerprint: String,
    pub spec_description: String,
}

/// States beyond this norm are flagged as a possible heavy-tail blowup.
pub const BLOWUP_NORM: f64 = 1e6;

impl ConvergenceTable {
    pub fn errors_decreasing(&self) -> bool {
        self.rows.windows(2).all(|p| p[1].error < p[0].error)
    }

    pub fn heavy_tail_flag(&self) -> bool {
        self.rows.iter().any(|r| r.max_state_norm > BLOWUP_NORM)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,error,stderr\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.depth, r.error, r.stderr);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "mode": self.mode,
            "rate": self.rate.map(|f| f.slope),
            "rate_fit": self.rate,
            "errors_decreasing": self.errors_decreasing(),
            "heavy_tail_flag": self.heavy_tail_flag(),
            "rows": self.rows,
            "reference": self.reference,
            "reference_depth": self.reference_depth,
            "paths": self.paths,
            "seed": self.seed,
            "spec_fingerprint": self.spec_fingerprint,
            "spec": self.spec_description,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("table serializes");
        s.push('\n');
        s
    }
}

/// Per-path sibling stream.
pub fn path_stream(seed: u64, tag: u64, path: usize) -> RngStream {
    RngStream::derived(seed, &[tag, path as u64])
}

fn sup_error<T: Scalar>(coarse: &[Vector<T>], reference: &[Vector<T>], stride: usize) -> f64 {
    coarse
        .iter()
        .enumerate()
        .map(|(k, h)| h.minus(&reference[k * stride]).norm().as_f64())
        .fold(0.0, f64::max)
}

fn sup_norm<T: Scalar>(states: &[Vector<T>]) -> f64 {
    states.iter().map(|h| h.norm().as_f64()).fold(0.0, f64::max)
}

/// `sqrt(mean)` of the squared sup errors and its delta-method standard error.
fn rms_with_stderr(sq: &[f64]) -> (f64, f64) {
    let m = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / m;
    let rms = mean.sqrt();
    if sq.len() < 2 || rms == 0.0 {
        return (rms, 0.0);
    }
    let var = sq.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1.0);
    (rms, (var / m).sqrt() / (2.0 * rms))
}

/// Strong error of the discrete recursion against its limit over a depth
/// sweep.
///
/// Every Monte Carlo path is one Brownian path on the reference grid; the
/// path at depth `L` is its aggregation, so all depths and the reference see
/// the same noise. The reference is RK4 on the limit drift in ODE mode, and
/// fine-grid Euler–Maruyama in SDE mode (RK4 again when `spec` has no
/// diffusion, where the SDE is an ODE).
pub fn strong_error_sweep<T: Scalar>(
    spec: &ItoSpec<T>,
    x: &Vector<T>,
    config: &SweepConfig,
) -> Result<ConvergenceTable, LimitsError> {
    config.validate()?;
    spec.validate()?;
    let regime = spec.regime()?;
    if x.dim() != spec.d {
        return Err(LimitsError::DimensionMismatch(format!(
            "input of dimension {} for d = {}",
            x.dim(),
            spec.d
        )));
    }
    if config.mode == LimitMode::Sde && regime != LimitRegime::Diffusive {
        return Err(LimitsError::InvalidParameter(format!(
            "SDE mode needs α = 0 and β >= 1 (got α = {}, β = {})",
            spec.alpha, spec.beta
        )));
    }
    let l_ref = config.reference_depth;
    let noise_free = spec.is_noise_free_on(l_ref);
    let use_ode_reference = config.mode == LimitMode::Ode || noise_free;
    let ode_reference = if use_ode_reference {
        Some(integrate_limit_ode(spec, x, l_ref)?)
    } else {
        None
    };
    let fine_grid = GridCoefficients::sample(spec, l_ref)?;
    let grids: Vec<GridCoefficients<T>> = config
        .depths
        .iter()
        .map(|&l| GridCoefficients::sample(spec, l))
        .collect::<Result<_, _>>()?;

    let per_path: Vec<Vec<(f64, f64)>> = (0..config.paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = path_stream(config.seed, STREAM_PATH, m);
            let fine = sample_driving_path_on(&fine_grid, &mut rng)?;
            let em_reference;
            let reference = match &ode_reference {
                Some(r) => r,
                None => {
                    em_reference = euler_maruyama_on(&fine_grid, &fine, x, true)?;
                    &em_reference
                }
            };
            config
                .depths
                .iter()
                .zip(&grids)
                .map(|(&l, grid)| {
                    let stride = l_ref / l;
                    let coarse: DrivingPath<T> = fine.aggregate(stride)?;
                    let h = discrete_hidden_states_on(grid, spec.activation, &coarse, x)?;
                    let e = sup_error(&h, reference, stride);
                    Ok((e * e, sup_norm(&h)))
                })
                .collect()
        })
        .collect::<Result<_, LimitsError>>()?;

    let rows: Vec<ConvergenceRow> = config
        .depths
        .iter()
        .enumerate()
        .map(|(j, &depth)| {
            let sq: Vec<f64> = per_path.iter().map(|p| p[j].0).collect();
            let (error, stderr) = rms_with_stderr(&sq);
            let max_state_norm = per_path.iter().map(|p| p[j].1).fold(0.0, f64::max);
            ConvergenceRow {
                depth,
                error,
                stderr,
                max_state_norm,
            }
        })
        .collect();
    let rate = if rows.len() >= 2 && rows.iter().all(|r| r.error > 0.0) {
        Some(loglog_fit(
            &rows
                .iter()
                .map(|r| (r.depth as f64, r.error))
                .collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    let reference = if use_ode_reference {
        format!("RK4 on the limit drift, {l_ref} steps")
    } else {
        format!("Euler-Maruyama on the shared Brownian path, {l_ref} steps")
    };
    Ok(ConvergenceTable {
        mode: config.mode,
        rows,
        rate,
        reference,
        reference_depth: l_ref,
        paths: config.paths,
        seed: config.seed,
        spec_fingerprint: spec.fingerprint(),
        spec_description: spec.description.clone(),
    })
}

/// Monte Carlo means of `h_L` (scalar case) under the recursion, the
/// corrected Euler–Maruyama limit and the limit without the Itô correction,
/// all driven by the same paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItoCheck {
    pub depth: usize,
    pub paths: usize,
    pub mean_discrete: f64,
    pub mean_em: f64,
    pub mean_em_without_correction: f64,
    pub se_discrete: f64,
    pub se_em: f64,
    pub se_em_without_correction: f64,
}

impl ItoCheck {
    /// `|mean_a - mean_b|` in units of `sqrt(se_a^2 + se_b^2)`. The samples
    /// are coupled, so this ignores their positive correlation and
    /// overstates the noise of the difference.
    fn z(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
        (a - b).abs() / (sa * sa + sb * sb).sqrt()
    }

    pub fn z_corrected(&self) -> f64 {
        Self::z(
            self.mean_discrete,
            self.se_discrete,
            self.mean_em,
            self.se_em,
        )
    }

    pub fn z_uncorrected(&self) -> f64 {
        Self::z(
            self.mean_discrete,
            self.se_discrete,
            self.mean_em_without_correction,
            self.se_em_without_correction,
        )
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn ito_correction_check<T: Scalar>(
    spec: &ItoSpec<T>,
    depth: usize,
    paths: usize,
    x: &Vector<T>,
    seed: u64,
) -> Result<ItoCheck, LimitsError> {
    spec.validate()?;
    if spec.d != 1 || spec.regime()? != LimitRegime::Diffusive || (spec.beta - 1.0).abs() > 1e-12 {
        return Err(LimitsError::InvalidParameter(
            "the correction check is defined for d = 1, α = 0, β = 1".into(),
        ));
    }
    if depth == 0 || paths == 0 {
        return Err(LimitsError::InvalidParameter(
            "depth and paths must be >= 1".into(),
        ));
    }
    if x.dim() != 1 {
        return Err(LimitsError::DimensionMismatch(format!(
            "input of dimension {} for d = 1",
            x.dim()
        )));
    }
    let grid = GridCoefficients::sample(spec, depth)?;
    let finals: Vec<[f64; 3]> = (0..paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = path_stream(seed, STREAM_ITO, m);
            let path = sample_driving_path_on(&grid, &mut rng)?;
            let last = |s: Vec<Vector<T>>| s[depth][0].as_f64();
            Ok([
                last(discrete_hidden_states_on(&grid, spec.activation, &path, x)?),
                last(euler_maruyama_on(&grid, &path, x, true)?),
                last(euler_maruyama_on(&grid, &path, x, false)?),
            ])
        })
        .collect::<Result<_, LimitsError>>()?;
    let col = |j: usize| mean_se(&finals.iter().map(|f| f[j]).collect::<Vec<_>>());
    let ((md, sd), (me, se), (mu, su)) = (col(0), col(1), col(2));
    Ok(ItoCheck {
        depth,
        paths,
        mean_discrete: md,
        mean_em: me,
        mean_em_without_correction: mu,
        se_discrete: sd,
        se_em: se,
        se_em_without_correction: su,
    })
}
