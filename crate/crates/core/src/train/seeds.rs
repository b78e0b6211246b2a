use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::model::ModelConfig;
use crate::splits::{make_split, SplitAssignment, SplitTag, TaskKind};
use crate::train::{fit, Precision, TrainConfig};

/// Sample mean and standard deviation (n − 1 denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(xs: &[f64]) -> Result<MeanStd> {
    if xs.is_empty() {
        return Err(Error::Empty { what: "sample" });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MeanStd { mean, std })
}

/// Test-set results of one configuration over several seeds.
#[derive(Debug, Clone)]
pub struct SeedSummary {
    pub label: String,
    pub micro: MeanStd,
    pub macro_: MeanStd,
    /// One report per seed, in seed order.
    pub reports: Vec<EvalReport>,
}

impl SeedSummary {
    /// Table of `label TAB micro_mean TAB micro_std TAB macro_mean TAB macro_std`.
    pub fn table(summaries: &[SeedSummary]) -> String {
        let mut s = String::from("model\tmicro_mean\tmicro_std\tmacro_mean\tmacro_std\n");
        for r in summaries {
            s.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                r.label, r.micro.mean, r.micro.std, r.macro_.mean, r.macro_.std
            ));
        }
        s
    }
}

fn run_one(corpus: &Corpus, split: &SplitAssignment, model: &ModelConfig, train: &TrainConfig, seed: u64) -> Result<EvalReport> {
    let cfg = TrainConfig { seed, ..train.clone() };
    let parallel = !cfg.deterministic;
    match cfg.precision {
        Precision::F32 => evaluate(&fit::<f32>(corpus, split, model, &cfg)?.best.model, corpus, split, SplitTag::Test, parallel),
        Precision::F64 => evaluate(&fit::<f64>(corpus, split, model, &cfg)?.best.model, corpus, split, SplitTag::Test, parallel),
    }
}

/// Trains and tests every `(label, config)` once per seed. Each seed
/// draws its own split of `task` and its own initialization. Jobs run
/// on the thread pool; results do not depend on scheduling.
pub fn run_seeds(
    corpus: &Corpus,
    task: TaskKind,
    models: &[(String, ModelConfig)],
    train: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<SeedSummary>> {
    run_seeds_with(models, train, seeds, |seed| Ok((corpus.clone(), make_split(task, corpus, seed))))
}

/// As [`run_seeds`], with the encoded corpus and split of each seed
/// supplied by `data`, e.g. to build the vocabulary from each seed's
/// training documents.
pub fn run_seeds_with<F>(models: &[(String, ModelConfig)], train: &TrainConfig, seeds: &[u64], data: F) -> Result<Vec<SeedSummary>>
where
    F: Fn(u64) -> Result<(Corpus, SplitAssignment)> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::Empty { what: "seed list" });
    }
    let prepared: Vec<(Corpus, SplitAssignment)> = seeds.iter().map(|&s| data(s)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..models.len()).flat_map(|m| (0..seeds.len()).map(move |k| (m, k))).collect();
    let reports: Vec<EvalReport> = jobs
        .par_iter()
        .map(|&(m, k)| run_one(&prepared[k].0, &prepared[k].1, &models[m].1, train, seeds[k]))
        .collect::<Result<_>>()?;
    models
        .iter()
        .zip(reports.chunks(seeds.len()))
        .map(|((label, _), rs)| {
            let micro: Vec<f64> = rs.iter().map(|r| r.micro_ppl).collect();
            let macro_: Vec<f64> = rs.iter().map(|r| r.macro_ppl).collect();
            Ok(SeedSummary {
                label: label.clone(),
                micro: mean_std(&micro)?,
                macro_: mean_std(&macro_)?,
                reports: rs.to_vec(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        let m = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m.mean, 5.0);
        assert!((m.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0]).unwrap(), MeanStd { mean: 3.0, std: 0.0 });
        assert!(mean_std(&[]).is_err());
    }
}
