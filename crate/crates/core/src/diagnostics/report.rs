use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::diagnostics::decompose::{decompose, quadratic_variation};
use crate::diagnostics::denoise::denoised_loss;
use crate::diagnostics::norms::{
    estimate_alpha, estimate_beta, increment_slope, sweep_slope, table1_norms, ExponentFit,
    Table1Norms, MIN_DEPTHS,
};
use crate::diagnostics::regime::{classify_regime, Regime, RegimeInputs, RegimeThresholds};
use crate::diagnostics::tensor::{total_scaling, TensorKind, WeightTensor};
use crate::diagnostics::DiagnosticsError;
use crate::numerics::smooth::default_window;
use crate::resnet::{Activation, DeltaMode, ResNet};
use crate::scalar::Scalar;

/// How the smoothing window is chosen for a depth `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRule {
    /// Odd integer nearest `sqrt(L)`.
    Sqrt,
    /// A fixed odd window, shrunk to the largest odd value `<= L` when needed.
    Fixed(usize),
}

impl WindowRule {
    pub fn window(&self, depth: usize) -> usize {
        match *self {
            WindowRule::Sqrt => default_window(depth),
            WindowRule::Fixed(w) => {
                let cap = if depth % 2 == 1 { depth } else { depth - 1 };
                w.min(cap).max(1)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub window: WindowRule,
    pub thresholds: RegimeThresholds,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            window: WindowRule::Sqrt,
            thresholds: RegimeThresholds::default(),
        }
    }
}

/// Per-depth statistics, averaged over the replicates at that depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: usize,
    pub replicates: usize,
    pub norms: Table1Norms,
    pub qv_norm: f64,
    pub noise_fraction: f64,
    pub window: usize,
}

/// Steps 2 to 5 of the procedure for one tensor family (weights or biases).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub kind: TensorKind,
    pub rows: Vec<DepthRow>,
    pub beta: ExponentFit,
    pub increment_slope: f64,
    pub rss_slope: f64,
    pub max_norm_slope: f64,
    pub regime: Regime,
}

impl FamilyReport {
    pub fn regime_inputs(&self) -> RegimeInputs {
        RegimeInputs {
            beta: self.beta.exponent,
            increment_slope: self.increment_slope,
            rss_slope: self.rss_slope,
            max_norm_slope: self.max_norm_slope,
            noise_fraction: self.rows.last().map_or(f64::NAN, |r| r.noise_fraction),
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Groups indices by depth, in increasing depth order.
fn by_depth(depths: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in depths.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Diagnoses a sweep of tensors of one family. Several tensors may share a
/// depth; their statistics are averaged before fitting.
pub fn diagnose_family<T: Scalar>(
    tensors: &[WeightTensor<T>],
    config: &DiagnosticsConfig,
) -> Result<FamilyReport, DiagnosticsError> {
    let Some(first) = tensors.first() else {
        return Err(DiagnosticsError::Empty);
    };
    let kind = first.kind();
    let depths: Vec<usize> = tensors.iter().map(WeightTensor::depth).collect();
    let groups = by_depth(&depths);
    if groups.len() < MIN_DEPTHS {
        return Err(DiagnosticsError::TooFewDepths {
            needed: MIN_DEPTHS,
            got: groups.len(),
        });
    }

    let raw: Vec<Table1Norms> = tensors
        .par_iter()
        .map(|w| table1_norms(w, 0.0))
        .collect::<Result<_, _>>()?;
    let avg = |idx: &[usize], f: fn(&Table1Norms) -> f64| mean(idx.iter().map(|&i| f(&raw[i])));
    let cumsum: Vec<(f64, f64)> = groups
        .iter()
        .map(|(&l, idx)| (l as f64, avg(idx, |n| n.cumulative_sum_norm)))
        .collect();
    let beta = estimate_beta(&cumsum)?;
    let b = beta.exponent;

    let decomp: Vec<(f64, f64)> = tensors
        .par_iter()
        .map(|w| {
            let dec = decompose(w, b, config.window.window(w.depth()))?;
            Ok((quadratic_variation(&dec.noise_path)?, dec.noise_fraction))
        })
        .collect::<Result<_, DiagnosticsError>>()?;

    let rows: Vec<DepthRow> = groups
        .iter()
        .map(|(&l, idx)| {
            let max_increment = avg(idx, |n| n.max_increment);
            let norms = Table1Norms {
                maximum_norm: avg(idx, |n| n.maximum_norm),
                scaled_increment_norm: (l as f64).powf(b) * max_increment,
                cumulative_sum_norm: avg(idx, |n| n.cumulative_sum_norm),
                root_sum_squares: avg(idx, |n| n.root_sum_squares),
                beta_used: b,
                max_increment,
            };
            DepthRow {
                depth: l,
                replicates: idx.len(),
                norms,
                qv_norm: mean(idx.iter().map(|&i| decomp[i].0)),
                noise_fraction: mean(idx.iter().map(|&i| decomp[i].1)),
                window: config.window.window(l),
            }
        })
        .collect();

    let series = |f: fn(&Table1Norms) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.depth as f64, f(&r.norms))).collect()
    };
    let increment_slope = increment_slope(&series(|n| n.scaled_increment_norm))?;
    let rss_slope = sweep_slope(&series(|n| n.root_sum_squares))?;
    let max_norm_slope = sweep_slope(&series(|n| n.maximum_norm))?;

    let mut report = FamilyReport {
        kind,
        rows,
        beta,
        increment_slope,
        rss_slope,
        max_norm_slope,
        regime: Regime::Inconclusive,
    };
    report.regime = classify_regime(&report.regime_inputs(), &config.thresholds);
    Ok(report)
}

/// Full diagnosis of a depth sweep of trained networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub width: usize,
    pub activation: Activation,
    pub delta_mode: DeltaMode,
    /// Mean of `max_k |δ_k|` per depth, in the depth order of the rows.
    pub delta_max: Vec<f64>,
    pub alpha: ExponentFit,
    pub weights: FamilyReport,
    pub biases: FamilyReport,
    /// Verdict for the weight family.
    pub regime: Regime,
    pub thresholds: RegimeThresholds,
    pub window: WindowRule,
    /// Denoised over original training loss at the deepest depth, averaged
    /// over replicates.
    pub denoised_loss_ratio: Option<f64>,
    pub provenance: BTreeMap<String, String>,
}

/// Steps 1 to 5 on a set of trained networks. ReLU networks are diagnosed
/// through their total-scaling tensors `|δ_k| A_k`, `|δ_k| b_k`.
pub fn diagnose_networks<T: Scalar>(
    nets: &[ResNet<T>],
    config: &DiagnosticsConfig,
    data: Option<&Dataset<T>>,
) -> Result<ScalingReport, DiagnosticsError> {
    let Some(first) = nets.first() else {
        return Err(DiagnosticsError::Empty);
    };
    let key = |n: &ResNet<T>| (n.width(), n.arch.activation, n.arch.delta_mode);
    if let Some(bad) = nets.iter().find(|n| key(n) != key(first)) {
        return Err(DiagnosticsError::MixedArchitectures(format!(
            "{:?} vs {:?}",
            key(first),
            key(bad)
        )));
    }
    let total = first.arch.activation == Activation::Relu;
    let kind = if total {
        TensorKind::TotalScaling
    } else {
        TensorKind::Weights
    };
    let families: Vec<(WeightTensor<T>, WeightTensor<T>)> = nets
        .par_iter()
        .map(|n| {
            let (a, b) = (WeightTensor::weights_of(n), WeightTensor::biases_of(n));
            if total {
                let delta = n.delta.per_layer(n.depth());
                Ok((total_scaling(&delta, &a)?, total_scaling(&delta, &b)?))
            } else {
                Ok((a, b))
            }
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    let (wa, wb): (Vec<_>, Vec<_>) = families.into_iter().unzip();
    let weights = diagnose_family(&wa, config)?;
    let biases = diagnose_family(&wb, config)?;

    let groups = by_depth(&nets.iter().map(ResNet::depth).collect::<Vec<_>>());
    let delta_max: Vec<f64> = groups
        .values()
        .map(|idx| mean(idx.iter().map(|&i| nets[i].delta.max_abs().as_f64())))
        .collect();
    let alpha_pts: Vec<(f64, f64)> = groups
        .keys()
        .zip(&delta_max)
        .map(|(&l, &v)| (l as f64, v))
        .collect();
    let alpha = estimate_alpha(&alpha_pts)?;

    let denoised_loss_ratio = match data {
        None => None,
        Some(data) => {
            let (&deepest, idx) = groups.iter().next_back().expect("at least three depths");
            let window = config.window.window(deepest);
            let ratios = idx
                .par_iter()
                .map(|&i| {
                    let da = decompose(&wa[i], weights.beta.exponent, window)?;
                    let db = decompose(&wb[i], biases.beta.exponent, window)?;
                    Ok(denoised_loss(&nets[i], &da, &db, kind, data)?.ratio())
                })
                .collect::<Result<Vec<f64>, DiagnosticsError>>()?;
            Some(mean(ratios.into_iter()))
        }
    };

    Ok(ScalingReport {
        width: first.width(),
        activation: first.arch.activation,
        delta_mode: first.arch.delta_mode,
        delta_max,
        alpha,
        regime: weights.regime,
        weights,
        biases,
        thresholds: config.thresholds,
        window: config.window,
        denoised_loss_ratio,
        provenance: BTreeMap::new(),
    })
}

impl ScalingReport {
    pub const CSV_HEADER: &'static str = "L,replicates,window,delta_max,\
A_max_norm,A_scaled_increment_norm,A_cumulative_sum_norm,A_root_sum_squares,A_qv_norm,A_noise_fraction,\
b_max_norm,b_scaled_increment_norm,b_cumulative_sum_norm,b_root_sum_squares,b_qv_norm,b_noise_fraction";

    /// One row per depth, weights and biases side by side.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for ((ra, rb), dm) in self
            .weights
            .rows
            .iter()
            .zip(&self.biases.rows)
            .zip(&self.delta_max)
        {
            let _ = write!(out, "{},{},{},{}", ra.depth, ra.replicates, ra.window, dm);
            for r in [ra, rb] {
                let n = &r.norms;
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{}",
                    n.maximum_norm,
                    n.scaled_increment_norm,
                    n.cumulative_sum_norm,
                    n.root_sum_squares,
                    r.qv_norm,
                    r.noise_fraction
                );
            }
            out.push('\n');
        }
        out
    }

    /// Summary with exponents, slopes, verdicts and thresholds. Infinite
    /// slopes are written as `null`.
    pub fn to_json(&self) -> String {
        let family = |f: &FamilyReport| {
            serde_json::json!({
                "kind": f.kind,
                "beta": f.beta.exponent,
                "beta_fit": f.beta.fit,
                "increment_slope": f.increment_slope,
                "rss_slope": f.rss_slope,
                "max_norm_slope": f.max_norm_slope,
                "regime": f.regime,
                "qv_norm": f.rows.iter().map(|r| r.qv_norm).collect::<Vec<_>>(),
            })
        };
        let v = serde_json::json!({
            "depths": self.weights.rows.iter().map(|r| r.depth).collect::<Vec<_>>(),
            "width": self.width,
            "activation": self.activation,
            "delta_mode": self.delta_mode,
            "alpha": self.alpha.exponent,
            "alpha_fit": self.alpha.fit,
            "alpha_plus_beta": self.alpha.exponent + self.weights.beta.exponent,
            "weights": family(&self.weights),
            "biases": family(&self.biases),
            "regime": self.regime,
            "thresholds": self.thresholds,
            "window": self.window,
            "denoised_loss_ratio": self.denoised_loss_ratio,
            "provenance": self.provenance,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}
