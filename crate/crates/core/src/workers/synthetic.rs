use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_skills, StepContext, StepOutput, Worker, WorkerError, WorkerProfile};
use crate::deliverable::Deliverable;
use crate::grade::{Grade, Quality};
use crate::task::Actor;

/// Uniform 64-bit words consumed by one [`sample_outcome`] call, whatever the outcome.
pub const DRAWS_PER_OUTCOME: usize = 4;

/// Lognormal distribution parameterised by its median `exp(mu)` and `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lognormal {
    pub median: f64,
    pub sigma: f64,
}

impl Lognormal {
    pub fn point(value: f64) -> Self {
        Lognormal {
            median: value,
            sigma: 0.0,
        }
    }

    pub fn from_mu_sigma(mu: f64, sigma: f64) -> Self {
        Lognormal {
            median: mu.exp(),
            sigma,
        }
    }

    /// Fit to a (median, mean) pair: `mu = ln median`, `sigma^2 = 2 ln(mean / median)`.
    pub fn from_median_mean(median: f64, mean: f64) -> Result<Self, ModelError> {
        if !(median > 0.0 && mean.is_finite() && mean >= median) {
            return Err(ModelError::Invalid(format!(
                "cannot fit lognormal to median {median}, mean {mean}"
            )));
        }
        Ok(Lognormal {
            median,
            sigma: (2.0 * (mean / median).ln()).sqrt(),
        })
    }

    pub fn mu(&self) -> f64 {
        self.median.ln()
    }

    pub fn mean(&self) -> f64 {
        self.median * (self.sigma * self.sigma / 2.0).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        (s2.exp() - 1.0) * self.median * self.median * s2.exp()
    }

    /// Value at standard-normal deviate `z`.
    pub fn at(&self, z: f64) -> f64 {
        if self.sigma == 0.0 {
            self.median
        } else {
            self.median * (self.sigma * z).exp()
        }
    }

    fn validate(&self, what: &str) -> Result<(), ModelError> {
        if !(self.median.is_finite() && self.median > 0.0) {
            return Err(ModelError::Invalid(format!("{what}: median must be positive")));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(ModelError::Invalid(format!("{what}: sigma must be finite and >= 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityDist {
    pub good: f64,
    pub mediocre: f64,
    pub bad: f64,
}

impl QualityDist {
    pub fn point(q: Quality) -> Self {
        let (good, mediocre, bad) = match q {
            Quality::Good => (1.0, 0.0, 0.0),
            Quality::Mediocre => (0.0, 1.0, 0.0),
            Quality::Bad => (0.0, 0.0, 1.0),
        };
        QualityDist { good, mediocre, bad }
    }

    pub fn pick(&self, u: f64) -> Quality {
        if u < self.good {
            Quality::Good
        } else if u < self.good + self.mediocre {
            Quality::Mediocre
        } else {
            Quality::Bad
        }
    }

    pub fn prob(&self, q: Quality) -> f64 {
        match q {
            Quality::Good => self.good,
            Quality::Mediocre => self.mediocre,
            Quality::Bad => self.bad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub fixed_usd: f64,
    pub per_hour_usd: f64,
}

impl CostModel {
    pub fn cost(&self, hours: f64) -> f64 {
        self.fixed_usd + self.per_hour_usd * hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorkerModel {
    pub quality_dist: QualityDist,
    pub decline_prob: f64,
    /// `None` means the worker starts immediately.
    #[serde(default)]
    pub connect_time: Option<Lognormal>,
    pub exec_time: Lognormal,
    pub cost_model: CostModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid worker model: {0}")]
    Invalid(String),
}

impl SyntheticWorkerModel {
    /// Degenerate model: fixed quality, times and cost.
    pub fn point(quality: Quality, connect_h: f64, exec_h: f64, cost_usd: f64) -> Self {
        SyntheticWorkerModel {
            quality_dist: QualityDist::point(quality),
            decline_prob: 0.0,
            connect_time: (connect_h > 0.0).then(|| Lognormal::point(connect_h)),
            exec_time: Lognormal::point(exec_h),
            cost_model: CostModel {
                fixed_usd: cost_usd,
                per_hour_usd: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let q = &self.quality_dist;
        for (name, p) in [("good", q.good), ("mediocre", q.mediocre), ("bad", q.bad), ("decline_prob", self.decline_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::Invalid(format!("{name} = {p} is not a probability")));
            }
        }
        let sum = q.good + q.mediocre + q.bad;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::Invalid(format!("quality_dist sums to {sum}")));
        }
        if let Some(c) = &self.connect_time {
            c.validate("connect_time")?;
        }
        self.exec_time.validate("exec_time")?;
        let cm = &self.cost_model;
        if !(cm.fixed_usd.is_finite() && cm.fixed_usd >= 0.0 && cm.per_hour_usd.is_finite() && cm.per_hour_usd >= 0.0) {
            return Err(ModelError::Invalid("cost model must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub quality: Option<Quality>,
    pub declined: bool,
    pub connect_h: f64,
    pub exec_h: f64,
    pub cost_usd: f64,
}

impl Outcome {
    pub fn grade(&self) -> Grade {
        match self.quality {
            Some(q) if !self.declined => q.into(),
            _ => Grade::Decline,
        }
    }
}

fn unit(rng: &mut dyn RngCore) -> f64 {
    rng.random::<f64>()
}

/// Draw one outcome. Consumes exactly [`DRAWS_PER_OUTCOME`] words in the
/// order: decline, quality, then two uniforms turned into a pair of normal
/// deviates (Box-Muller) for connect and execution time.
pub fn sample_outcome(model: &SyntheticWorkerModel, rng: &mut dyn RngCore) -> Outcome {
    let u_decline = unit(rng);
    let u_quality = unit(rng);
    let u1 = 1.0 - unit(rng);
    let u2 = unit(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    let (z0, z1) = (r * theta.cos(), r * theta.sin());
    let connect_h = model.connect_time.map(|d| d.at(z0)).unwrap_or(0.0);
    if u_decline < model.decline_prob {
        return Outcome {
            quality: None,
            declined: true,
            connect_h,
            exec_h: 0.0,
            cost_usd: 0.0,
        };
    }
    let exec_h = model.exec_time.at(z1);
    Outcome {
        quality: Some(model.quality_dist.pick(u_quality)),
        declined: false,
        connect_h,
        exec_h,
        cost_usd: model.cost_model.cost(exec_h),
    }
}

/// Seeded stochastic worker for simulation and demos.
#[derive(Debug, Clone)]
pub struct SyntheticWorker {
    profile: WorkerProfile,
    model: SyntheticWorkerModel,
    rng: ChaCha20Rng,
}

impl SyntheticWorker {
    pub fn new(profile: WorkerProfile, model: SyntheticWorkerModel, seed: u64) -> Result<Self, ModelError> {
        model.validate()?;
        Ok(SyntheticWorker {
            profile,
            model,
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }
}

impl Worker for SyntheticWorker {
    fn profile(&self) -> &WorkerProfile {
        &self.profile
    }

    fn perform_step(&mut self, ctx: &StepContext<'_>) -> Result<StepOutput, WorkerError> {
        check_skills(&self.profile, ctx.step)?;
        let out = sample_outcome(&self.model, &mut self.rng);
        let Some(quality) = out.quality else {
            return Err(WorkerError::WorkerUnavailable {
                worker_id: self.profile.worker_id.clone(),
                reason: "declined".into(),
            });
        };
        let mut deliverable = Deliverable::empty(Actor::for_worker(self.profile.kind), ctx.step.index);
        deliverable.summary = format!("{}: {:?} draft", ctx.step.description, quality);
        // Redundant answers mirror quality so that online self-consistency sees it.
        let samples: &[&str] = match quality {
            Quality::Good => &["a", "a", "a"],
            Quality::Mediocre => &["a", "a", "b"],
            Quality::Bad => &["a", "b", "c"],
        };
        if !self.profile.kind.is_human() {
            deliverable.answer_samples = samples.iter().map(|s| s.to_string()).collect();
        }
        Ok(StepOutput {
            deliverable,
            elapsed_h: out.exec_h / self.profile.speed_factor,
            cost_usd: out.cost_usd,
        })
    }
}
