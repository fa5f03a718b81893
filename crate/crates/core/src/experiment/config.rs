//! Experiment configuration, read from TOML or JSON.

use crate::elliptic::EllipticConfig;
use crate::weights::{DEFAULT_EPS_W_SCALE, DEFAULT_MC_SAMPLES};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Planted sparse vector: `c_1 = 1` plus `sparsity − 1` random ±U(0.1, 1) entries.
    SyntheticSparse,
    /// Planted compressible vector: `c_1 = 1`, `c_j = ±j^(−r)` on shuffled positions.
    SyntheticDecay,
    /// QOI of the 1-D stochastic elliptic model.
    Elliptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    L1,
    WeightedL1,
    ReweightedL1,
    Wls,
    /// Least squares on all `P` columns; needs `N ≥ P`.
    LsReference,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::L1 => "l1",
            Method::WeightedL1 => "weighted_l1",
            Method::ReweightedL1 => "reweighted_l1",
            Method::Wls => "wls",
            Method::LsReference => "ls_reference",
        }
    }

    pub fn needs_bounds(self) -> bool {
        matches!(self, Method::WeightedL1 | Method::Wls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    None,
    /// Magnitudes of the planted or reference coefficients.
    TrueCoeffs,
    /// Exponential decay model with fitted per-dimension rates.
    EllipticBound,
    /// Taylor bound driven by an exponential-kernel KL input.
    TaylorBound,
}

/// How the BPDN tolerance is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsilonRule {
    CrossValidation { grid_points: usize },
    Fixed { value: f64 },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::CrossValidation {
            grid_points: crate::cross_validation::DEFAULT_GRID_POINTS,
        }
    }
}

/// Settings of the Taylor bound weight source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaylorSettings {
    pub l_c: f64,
    pub sigma_t: f64,
    pub tc_bar: f64,
    pub k_max: usize,
    pub mc_samples: usize,
}

impl Default for TaylorSettings {
    fn default() -> Self {
        Self {
            l_c: 1.0 / 21.0,
            sigma_t: 0.11,
            tc_bar: -0.5,
            k_max: 4,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub d: usize,
    pub q: usize,
    pub p_keep: Option<usize>,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub weight_source: WeightSource,
    pub seed: u64,
    /// `ε_w = eps_w_scale · |ĉ_1|`, with `ĉ_1` the sample mean of `u`.
    pub eps_w_scale: f64,
    pub reweight_iters: usize,
    /// Nonzero count of the synthetic sparse truth.
    pub sparsity: usize,
    /// Decay exponent of the synthetic compressible truth.
    pub decay_rate: f64,
    /// Standard deviation of Gaussian noise added to every observation.
    pub noise_std: f64,
    pub epsilon: EpsilonRule,
    /// Fraction of bound entries randomly permuted among themselves before
    /// use; 0 keeps the bounds as computed.
    pub misrank_fraction: f64,
    pub elliptic: EllipticConfig,
    /// Samples behind the elliptic reference solution; `None` means `10P`.
    pub reference_samples: Option<usize>,
    /// Samples per dimension for fitting elliptic decay rates.
    pub gk_samples: usize,
    pub taylor: TaylorSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::SyntheticDecay,
            d: 10,
            q: 3,
            p_keep: None,
            n_list: vec![40, 80, 160],
            replications: 20,
            methods: vec![Method::L1, Method::WeightedL1],
            weight_source: WeightSource::TrueCoeffs,
            seed: 1,
            eps_w_scale: DEFAULT_EPS_W_SCALE,
            reweight_iters: 5,
            sparsity: 10,
            decay_rate: 2.0,
            noise_std: 0.0,
            epsilon: EpsilonRule::default(),
            misrank_fraction: 0.0,
            elliptic: EllipticConfig::default(),
            reference_samples: None,
            gk_samples: 1000,
            taylor: TaylorSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("n_list must be strictly ascending: {:?}", self.n_list));
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        let needs_bounds = self.methods.iter().any(|m| m.needs_bounds());
        if needs_bounds && self.weight_source == WeightSource::None {
            return bad("weighted_l1 and wls need a weight_source other than none".into());
        }
        if self.weight_source == WeightSource::EllipticBound && self.problem != Problem::Elliptic {
            return bad("weight_source elliptic_bound requires problem elliptic".into());
        }
        if self.problem == Problem::Elliptic && self.elliptic.d != self.d {
            return bad(format!(
                "elliptic.d = {} differs from d = {}",
                self.elliptic.d, self.d
            ));
        }
        if !(self.eps_w_scale > 0.0 && self.eps_w_scale.is_finite()) {
            return bad(format!("eps_w_scale must be positive, got {}", self.eps_w_scale));
        }
        if self.reweight_iters == 0 {
            return bad("reweight_iters must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be nonnegative, got {}", self.noise_std));
        }
        if !(0.0..=1.0).contains(&self.misrank_fraction) {
            return bad(format!(
                "misrank_fraction must lie in [0, 1], got {}",
                self.misrank_fraction
            ));
        }
        match self.epsilon {
            EpsilonRule::CrossValidation { grid_points: 0 } => {
                return bad("cross-validation grid needs at least one point".into())
            }
            EpsilonRule::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                return bad(format!("fixed epsilon must be nonnegative, got {value}"))
            }
            _ => {}
        }
        if self.problem == Problem::SyntheticSparse && self.sparsity == 0 {
            return bad("sparsity must be at least 1".into());
        }
        if !(self.decay_rate > 0.0) {
            return bad(format!("decay_rate must be positive, got {}", self.decay_rate));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("config serializes"))
    }
}

pub(crate) fn hash_json(v: &serde_json::Value) -> String {
    let digest = Sha256::digest(v.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic 64-bit seed from a base seed and a tag sequence.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for t in tags {
        h.update(t.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
