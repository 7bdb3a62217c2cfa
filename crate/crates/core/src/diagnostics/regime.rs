use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Rescaled weights converge to a continuous function of `k/L`.
    H1,
    /// Trend plus increments of a rough noise path with finite quadratic
    /// variation.
    H2,
    /// A bounded number of `O(1)` weights; norms do not decay with depth.
    #[serde(rename = "sparse")]
    Sparse,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::H1 => "H1",
            Regime::H2 => "H2",
            Regime::Sparse => "sparse",
            Regime::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "H1" => Ok(Regime::H1),
            "H2" => Ok(Regime::H2),
            "sparse" => Ok(Regime::Sparse),
            "inconclusive" => Ok(Regime::Inconclusive),
            _ => Err(format!("unknown regime `{s}`")),
        }
    }
}

/// Cut-offs of the regime classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// H1 needs an increment slope at or below this.
    pub h1_max_increment_slope: f64,
    /// H1 needs a noise fraction below this.
    pub h1_max_noise_fraction: f64,
    /// H2 needs `β` at least this.
    pub h2_min_beta: f64,
    /// H2 and sparse need the root-sum-of-squares slope at or below this.
    pub max_rss_slope: f64,
    /// Sparse needs the maximum-norm slope at or above this.
    pub sparse_min_max_norm_slope: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            h1_max_increment_slope: -0.1,
            h1_max_noise_fraction: 0.2,
            h2_min_beta: 0.5,
            max_rss_slope: 0.1,
            sparse_min_max_norm_slope: -0.05,
        }
    }
}

/// Sweep-level statistics the classifier looks at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeInputs {
    pub beta: f64,
    pub increment_slope: f64,
    pub rss_slope: f64,
    pub max_norm_slope: f64,
    /// Noise fraction of the decomposition at the deepest depth.
    pub noise_fraction: f64,
}

/// Rules are tried in the order H1, sparse, H2. Sparse goes before H2
/// because a single surviving weight also has bounded root sum of squares
/// and rough increments, so it would otherwise be read as H2.
pub fn classify_regime(inputs: &RegimeInputs, t: &RegimeThresholds) -> Regime {
    let RegimeInputs {
        beta,
        increment_slope,
        rss_slope,
        max_norm_slope,
        noise_fraction,
    } = *inputs;
    if increment_slope <= t.h1_max_increment_slope && noise_fraction < t.h1_max_noise_fraction {
        Regime::H1
    } else if max_norm_slope >= t.sparse_min_max_norm_slope && rss_slope <= t.max_rss_slope {
        Regime::Sparse
    } else if increment_slope > t.h1_max_increment_slope
        && beta >= t.h2_min_beta
        && rss_slope <= t.max_rss_slope
    {
        Regime::H2
    } else {
        Regime::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(beta: f64, inc: f64, rss: f64, max: f64, noise: f64) -> RegimeInputs {
        RegimeInputs {
            beta,
            increment_slope: inc,
            rss_slope: rss,
            max_norm_slope: max,
            noise_fraction: noise,
        }
    }

    #[test]
    fn rule_table() {
        let t = RegimeThresholds::default();
        assert_eq!(
            classify_regime(&inputs(0.3, -1.0, 0.2, -0.3, 0.01), &t),
            Regime::H1
        );
        assert_eq!(
            classify_regime(&inputs(1.0, 0.5, 0.0, -0.5, 0.9), &t),
            Regime::H2
        );
        assert_eq!(
            classify_regime(&inputs(1.0, 1.0, 0.0, 0.0, 0.9), &t),
            Regime::Sparse
        );
        assert_eq!(
            classify_regime(&inputs(0.2, 0.5, 0.4, -0.5, 0.9), &t),
            Regime::Inconclusive
        );
        // smooth increments but noisy decomposition
        assert_eq!(
            classify_regime(&inputs(0.3, -1.0, 0.4, -0.3, 0.5), &t),
            Regime::Inconclusive
        );
        assert_eq!(
            classify_regime(&inputs(1.0, f64::NEG_INFINITY, 0.0, 0.0, 0.0), &t),
            Regime::H1
        );
    }

    #[test]
    fn names_round_trip() {
        for r in [Regime::H1, Regime::H2, Regime::Sparse, Regime::Inconclusive] {
            assert_eq!(r.as_str().parse::<Regime>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{r}\""));
        }
    }
}
