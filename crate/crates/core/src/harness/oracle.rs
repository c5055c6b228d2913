//! Iterative inference against the exhaustive MAP on random instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::inference::{exhaustive_map, infer, InferenceConfig, DEFAULT_STATE_CAP};

use super::instances::{random_instance, InstanceSizes};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub count: usize,
    pub sizes: InstanceSizes,
    pub seed: u64,
    /// Draw instances with alpha, beta and gamma zero.
    pub zero_context: bool,
    /// Relative gap below which an instance counts as matched.
    pub tolerance: f64,
    pub inference: InferenceConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            count: 200,
            sizes: InstanceSizes::default(),
            seed: 0,
            zero_context: false,
            tolerance: 0.01,
            inference: InferenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub count: usize,
    /// Instances with relative gap ≤ tolerance.
    pub matched: usize,
    pub match_fraction: f64,
    /// Instances where both potentials are bit-identical.
    pub exact: usize,
    /// Largest `(exhaustive − iterative) / |exhaustive|`.
    pub max_relative_gap: f64,
    /// Instances whose potential trace decreased somewhere.
    pub monotone_violations: usize,
    /// Instances where iterative inference beat the exhaustive search.
    pub bound_violations: usize,
}

/// `(exhaustive − iterative) / |exhaustive|`, or the absolute gap when the
/// exhaustive potential is zero.
pub fn relative_gap(exhaustive: f64, iterative: f64) -> f64 {
    let gap = exhaustive - iterative;
    if exhaustive == 0.0 {
        gap
    } else {
        gap / exhaustive.abs()
    }
}

pub fn run_oracle_suite(config: &OracleConfig) -> Result<OracleReport> {
    config.inference.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut r = OracleReport {
        count: config.count,
        matched: 0,
        match_fraction: 0.0,
        exact: 0,
        max_relative_gap: 0.0,
        monotone_violations: 0,
        bound_violations: 0,
    };
    for _ in 0..config.count {
        let inst = random_instance(&mut rng, &config.sizes, config.zero_context);
        let res = infer(&inst.evidence, &inst.params, &config.inference)?;
        let (_, _, best) = exhaustive_map(&inst.evidence, &inst.params, DEFAULT_STATE_CAP)?;
        let gap = relative_gap(best, res.potential);
        if gap <= config.tolerance {
            r.matched += 1;
        }
        if best == res.potential {
            r.exact += 1;
        }
        if res.potential > best {
            r.bound_violations += 1;
        }
        if res.trace.windows(2).any(|w| w[1] < w[0]) {
            r.monotone_violations += 1;
        }
        r.max_relative_gap = r.max_relative_gap.max(gap);
    }
    if config.count > 0 {
        r.match_fraction = r.matched as f64 / config.count as f64;
    }
    Ok(r)
}
