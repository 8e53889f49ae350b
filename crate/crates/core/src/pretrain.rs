//! Offline training of the base agent on the Basic-style corpus with DAgger:
//! every epoch rolls out a expert/learner mixture over the corpus, adds the
//! expert-labelled states to the aggregate set and refits on all of it.

use serde::{Deserialize, Serialize};

use crate::adapt::{canonical_sort, evaluate, il_update, AdaptConfig, Deployment, SourceDomain};
use crate::envgraph::GeoTable;
use crate::error::Result;
use crate::feedback::LengthFilter;
use crate::membank::MemoryBank;
use crate::policy::{FeatureSpace, PolicyParams};
use crate::rollout::{dagger_rollout, Expert};
use crate::seeds::derive_seed;
use crate::synthlang::Instruction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Gradient passes over the aggregate set per DAgger epoch.
    pub passes: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            max_epochs: 15,
            patience: 5,
            passes: 2,
        }
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub beta: f64,
    pub pairs: usize,
    pub loss: f64,
    pub val_sr: f64,
}

pub fn curve_csv(curve: &[EpochStat]) -> String {
    let mut out = String::from("epoch,beta,pairs,loss,val_SR\n");
    for e in curve {
        out.push_str(&format!(
            "{},{:.4},{},{:.6},{:.2}\n",
            e.epoch,
            e.beta,
            e.pairs,
            e.loss,
            e.val_sr * 100.0
        ));
    }
    out
}

/// Returns the parameters with the best validation SR (earliest on ties).
pub fn pretrain(
    source: &SourceDomain,
    validation: &[Instruction],
    feature_space: FeatureSpace,
    cfg: &PretrainConfig,
    adapt: &AdaptConfig,
    t_max: usize,
    d_th: f64,
) -> Result<(PolicyParams, Vec<EpochStat>)> {
    let env = &source.env;
    let geo = GeoTable::new(env);
    let dep = Deployment {
        env,
        geo: &geo,
        t_max,
        d_th,
        filter: LengthFilter::default(),
    };
    let val_items: Vec<_> = validation.iter().map(|i| (i, &source.style)).collect();
    let mut params = PolicyParams::zeros(feature_space, adapt.alpha);
    let mut best = (
        evaluate(&params, &val_items, &dep, MemoryBank::new(env))?.mean().sr,
        params.clone(),
    );
    let mut aggregate = Vec::new();
    let mut curve = Vec::new();
    let mut stale = 0;
    for epoch in 0..cfg.max_epochs {
        let beta = adapt.dagger_beta.at(epoch);
        let seed = derive_seed(adapt.seed, &format!("pretrain/{epoch}"));
        let mut bank = MemoryBank::new(env);
        for instr in &source.corpus {
            let expert = Expert::towards(env, env.index_of(&instr.goal)?);
            let (_, pairs) = dagger_rollout(
                &params,
                instr,
                &source.style,
                env,
                &mut bank,
                beta,
                &expert,
                seed,
                t_max,
            )?;
            aggregate.extend(pairs);
        }
        canonical_sort(&mut aggregate);
        let fit = AdaptConfig {
            epochs: cfg.passes,
            seed,
            ..adapt.clone()
        };
        let (next, trace) = il_update(&params, &aggregate, &fit)?;
        params = next;
        let val_sr = evaluate(&params, &val_items, &dep, MemoryBank::new(env))?.mean().sr;
        curve.push(EpochStat {
            epoch,
            beta,
            pairs: aggregate.len(),
            loss: trace.losses.last().copied().unwrap_or(0.0),
            val_sr,
        });
        if val_sr > best.0 {
            best = (val_sr, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best.1, curve))
}
