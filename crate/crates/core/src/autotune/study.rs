use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{sample_uniform, ParameterSet, SearchSpace};
use super::tpe::{suggest_tpe, TpeConfig};
use super::AutotuneError;
use crate::planner::PlannerMetadata;
use crate::world::{derive_seed, Metrics, Termination, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Random,
    Tpe(TpeConfig),
}

impl Sampler {
    pub fn tpe() -> Self {
        Sampler::Tpe(TpeConfig::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Random => "random",
            Sampler::Tpe(_) => "tpe",
        }
    }
}

/// Outcome of evaluating one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Objective value; `+∞` marks a rollout that produced no usable metrics.
    pub cost: f64,
    pub metrics: Option<Metrics>,
    pub termination: Option<Termination>,
}

impl Evaluation {
    pub fn cost_only(cost: f64) -> Self {
        Self {
            cost,
            metrics: None,
            termination: None,
        }
    }
}

pub trait Evaluator: Sync {
    fn evaluate(&self, params: &ParameterSet, seed: u64) -> Evaluation;
}

impl<F: Fn(&ParameterSet, u64) -> Evaluation + Sync> Evaluator for F {
    fn evaluate(&self, params: &ParameterSet, seed: u64) -> Evaluation {
        self(params, seed)
    }
}

mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: ParameterSet,
    /// Serialized as `null` when not finite.
    #[serde(with = "nonfinite_as_null")]
    pub cost: f64,
    #[serde(default)]
    pub metrics: Option<Metrics>,
    #[serde(default)]
    pub termination: Option<Termination>,
    pub rng_seed: u64,
    pub wall_time: f64,
}

impl Trial {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Trial) -> bool {
        Trial {
            wall_time: 0.0,
            ..self.clone()
        } == Trial {
            wall_time: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyHeader {
    pub space: SearchSpace,
    pub sampler: Sampler,
    pub master_seed: u64,
    #[serde(default)]
    pub weights: Option<Weights>,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub robot: Option<String>,
    #[serde(default)]
    pub planner: Option<PlannerMetadata>,
    /// Candidates evaluated concurrently per round; 1 is fully sequential.
    #[serde(default = "one")]
    pub batch: usize,
}

fn one() -> usize {
    1
}

impl StudyHeader {
    pub fn new(space: SearchSpace, sampler: Sampler, master_seed: u64) -> Self {
        Self {
            space,
            sampler,
            master_seed,
            weights: None,
            scenario: None,
            robot: None,
            planner: None,
            batch: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub header: StudyHeader,
    pub trials: Vec<Trial>,
}

impl Study {
    pub fn new(header: StudyHeader) -> Self {
        Self {
            header,
            trials: Vec::new(),
        }
    }

    /// Lowest cost, ties broken by lowest index.
    pub fn best(&self) -> Result<&Trial, AutotuneError> {
        best(&self.trials)
    }

    /// Prefix minimum of the costs.
    pub fn running_best(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::INFINITY, |m, t| {
                *m = m.min(t.cost);
                Some(*m)
            })
            .collect()
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Study) -> bool {
        self.header == other.header
            && self.trials.len() == other.trials.len()
            && self.trials.iter().zip(&other.trials).all(|(a, b)| a.same_outcome(b))
    }

    pub fn validate(&self) -> Result<(), AutotuneError> {
        for (i, t) in self.trials.iter().enumerate() {
            if t.index != i {
                return Err(AutotuneError::CorruptStudy(format!(
                    "trial {} found at position {i}",
                    t.index
                )));
            }
        }
        Ok(())
    }
}

pub fn best(trials: &[Trial]) -> Result<&Trial, AutotuneError> {
    trials
        .iter()
        .reduce(|b, t| if t.cost < b.cost { t } else { b })
        .ok_or(AutotuneError::EmptyStudy)
}

/// Seed for trial `index` of a study.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, index as u64)
}

fn suggest(header: &Study, index: usize) -> ParameterSet {
    let h = &header.header;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(h.master_seed, index));
    match &h.sampler {
        Sampler::Random => sample_uniform(&h.space, &mut rng),
        Sampler::Tpe(cfg) => {
            let history: Vec<(&ParameterSet, f64)> =
                header.trials.iter().map(|t| (&t.params, t.cost)).collect();
            suggest_tpe(&h.space, &history, cfg, &mut rng)
        }
    }
}

/// Extends `study` to `n_trials` trials, calling `on_trial` after each
/// commit (in index order). Results depend only on the header and the
/// trials already present, so a study reloaded from disk resumes to the
/// same result as an uninterrupted run.
pub fn continue_study<E, C>(
    study: &mut Study,
    evaluator: &E,
    n_trials: usize,
    mut on_trial: C,
) -> Result<(), AutotuneError>
where
    E: Evaluator + ?Sized,
    C: FnMut(&Trial) -> Result<(), AutotuneError>,
{
    study.validate()?;
    study.header.space.validate()?;
    let batch = study.header.batch.max(1);
    while study.trials.len() < n_trials {
        let start = study.trials.len();
        let count = batch.min(n_trials - start);
        let proposals: Vec<(usize, ParameterSet)> =
            (start..start + count).map(|i| (i, suggest(study, i))).collect();
        let seed = study.header.master_seed;
        let results: Vec<Trial> = proposals
            .into_par_iter()
            .map(|(index, params)| {
                let rng_seed = trial_seed(seed, index);
                let t0 = Instant::now();
                let ev = evaluator.evaluate(&params, rng_seed);
                Trial {
                    index,
                    params,
                    cost: if ev.cost.is_nan() { f64::INFINITY } else { ev.cost },
                    metrics: ev.metrics,
                    termination: ev.termination,
                    rng_seed,
                    wall_time: t0.elapsed().as_secs_f64(),
                }
            })
            .collect();
        for t in results {
            log::debug!("trial {} cost {}", t.index, t.cost);
            on_trial(&t)?;
            study.trials.push(t);
        }
    }
    Ok(())
}

pub fn run_study<E: Evaluator + ?Sized>(
    header: StudyHeader,
    evaluator: &E,
    n_trials: usize,
) -> Result<Study, AutotuneError> {
    if n_trials == 0 {
        return Err(AutotuneError::NoTrials);
    }
    let mut study = Study::new(header);
    continue_study(&mut study, evaluator, n_trials, |_| Ok(()))?;
    Ok(study)
}
