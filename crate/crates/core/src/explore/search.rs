use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{infer_residual_topology, ArchitectureSpec, Network};
use crate::error::{Error, Result};
use crate::nn::{CountParams, ParamMode};

use super::generator::{generate, GeneratorState};
use super::{estimate_macs, universal_performance, Metrics, Requirements, UConfig};

/// Validation accuracy of a spec, and optionally the trained network behind it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub val_accuracy: f64,
    pub network: Option<Network>,
}

pub trait Evaluator: Sync {
    fn evaluate(&self, spec: &ArchitectureSpec, seed: u64) -> Result<Evaluation>;

    /// Full-budget check for the final short-list.
    fn reverify(&self, spec: &ArchitectureSpec, seed: u64) -> Result<Evaluation> {
        self.evaluate(spec, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub generations: usize,
    pub candidates_per_gen: usize,
    pub survivors_per_gen: usize,
    pub shrink: f64,
    pub seed: u64,
    /// Re-check this many top candidates with [`Evaluator::reverify`].
    pub reverify_top: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            generations: 5,
            candidates_per_gen: 8,
            survivors_per_gen: 5,
            shrink: 0.7,
            seed: 0,
            reverify_top: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub spec: ArchitectureSpec,
    pub seed: u64,
    pub generation: usize,
    pub metrics: Metrics,
    pub u_score: f64,
    #[serde(skip)]
    pub network: Option<Network>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Exploration {
    /// Every surviving candidate, highest U first.
    pub candidates: Vec<Candidate>,
    /// Highest U among survivors up to and including each generation.
    pub best_so_far: Vec<Option<f64>>,
    pub evaluated: usize,
}

fn candidate_seed(master: u64, generation: usize, index: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = master ^ ((generation as u64) << 32) ^ index as u64;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn score(spec: &ArchitectureSpec, eval: Evaluation, seed: u64, generation: usize, ucfg: &UConfig) -> Result<Candidate> {
    let net = match &eval.network {
        Some(n) => n.count_params(ParamMode::Paper),
        None => Network::zeroed(spec)?.count_params(ParamMode::Paper),
    };
    let metrics = Metrics {
        val_accuracy: eval.val_accuracy,
        param_count: net,
        mac_count: estimate_macs(spec, spec.input)?,
    };
    let u_score = if metrics.val_accuracy > 0.0 {
        universal_performance(&metrics, ucfg)?
    } else {
        f64::NEG_INFINITY
    };
    Ok(Candidate {
        spec: spec.clone(),
        seed,
        generation,
        metrics,
        u_score,
        network: eval.network,
    })
}

fn by_u(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.u_score.total_cmp(&a.u_score)
}

/// Progressive search maximizing U subject to `req`. Candidates within a
/// generation are evaluated in parallel; results are deterministic.
pub fn explore(
    prototype: &ArchitectureSpec,
    req: &Requirements,
    ucfg: &UConfig,
    budget: &Budget,
    evaluator: &dyn Evaluator,
) -> Result<Exploration> {
    req.validate()?;
    ucfg.validate()?;
    if budget.generations == 0 || budget.candidates_per_gen == 0 || budget.survivors_per_gen == 0 {
        return Err(Error::InvalidConfig("generations, candidates_per_gen and survivors_per_gen must be positive".into()));
    }
    if !(budget.shrink > 0.0 && budget.shrink <= 1.0) {
        return Err(Error::InvalidConfig(format!("shrink {} must be in (0, 1]", budget.shrink)));
    }
    let mut state = GeneratorState::from_prototype(prototype)?;
    let mut kept: Vec<Candidate> = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut best_so_far = Vec::with_capacity(budget.generations);
    let mut best_infeasible = 0.0f64;
    let mut evaluated = 0usize;

    for generation in 0..budget.generations {
        state.generation = generation;
        let specs: Vec<(ArchitectureSpec, u64)> = (0..budget.candidates_per_gen)
            .map(|i| {
                let seed = candidate_seed(budget.seed, generation, i);
                (generate(&state, seed), seed)
            })
            .collect();
        let mut scored = specs
            .par_iter()
            .map(|(spec, seed)| score(spec, evaluator.evaluate(spec, *seed)?, *seed, generation, ucfg))
            .collect::<Result<Vec<_>>>()?;
        evaluated += scored.len();
        for c in scored.iter().filter(|c| !req.satisfied_by(&c.metrics)) {
            best_infeasible = best_infeasible.max(c.metrics.val_accuracy);
        }
        scored.retain(|c| req.satisfied_by(&c.metrics));
        scored.sort_by(by_u);
        scored.truncate(budget.survivors_per_gen);
        if let Some(top) = scored.first() {
            if best.as_ref().is_none_or(|b| top.u_score > b.u_score) {
                best = Some(top.clone());
            }
        }
        kept.extend(scored);
        best_so_far.push(best.as_ref().map(|b| b.u_score));
        match &best {
            Some(b) => {
                let narrows = infer_residual_topology(&b.spec)?.narrow_widths(&b.spec);
                state.recenter(&narrows, budget.shrink);
            }
            None => state.shrink(budget.shrink),
        }
    }

    kept.sort_by(by_u);
    if budget.reverify_top > 0 {
        let top: Vec<Candidate> = kept.drain(..budget.reverify_top.min(kept.len())).collect();
        let rechecked = top
            .par_iter()
            .map(|c| score(&c.spec, evaluator.reverify(&c.spec, c.seed)?, c.seed, c.generation, ucfg))
            .collect::<Result<Vec<_>>>()?;
        for c in &rechecked {
            if !req.satisfied_by(&c.metrics) {
                best_infeasible = best_infeasible.max(c.metrics.val_accuracy);
            }
        }
        let mut rechecked: Vec<Candidate> = rechecked.into_iter().filter(|c| req.satisfied_by(&c.metrics)).collect();
        rechecked.extend(kept);
        kept = rechecked;
        kept.sort_by(by_u);
    }
    if kept.is_empty() {
        return Err(Error::NoFeasibleCandidate {
            evaluated,
            best_accuracy: best_infeasible,
        });
    }
    Ok(Exploration {
        candidates: kept,
        best_so_far,
        evaluated,
    })
}
