//! Grand-canonical Gibbs sampling on the torus and the estimators built on it.

mod estimators;
mod gnz;
pub mod records;

pub use estimators::{
    default_edges, estimate_density_in, estimate_k1, estimate_k2, estimate_ursell2, exp_moment, pair_count_series, ruelle_probe,
    ExpMomentResult, PairCorrelation, RuelleReport,
};
pub use gnz::{double_gnz_residual, gnz_residual, standard_functionals, GnzFunctional, GnzResult, Outer};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::model::{Configuration, LahtCheck, ModelSpec};
use crate::seed::{self, SimRng};
use crate::stats::integrated_autocorr_time;

/// Relative weights of the three Metropolis-Hastings move types.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveMix {
    pub birth: f64,
    pub death: f64,
    pub displacement: f64,
}

impl Default for MoveMix {
    fn default() -> Self {
        Self { birth: 0.25, death: 0.25, displacement: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounters {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum McmcMove {
    Birth,
    Death,
    Displacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McmcEvent {
    pub kind: McmcMove,
    pub accepted: bool,
}

/// Metropolis-Hastings chain for the density `z^N e^{-U}` on the torus.
#[derive(Clone, Debug)]
pub struct GibbsChain {
    model: ModelSpec,
    current: Configuration,
    rng: SimRng,
    p_birth: f64,
    p_death: f64,
    step: f64,
    max_particles: Option<usize>,
    sweep_len: usize,
    counters: MoveCounters,
}

impl GibbsChain {
    pub fn new(model: &ModelSpec, initial: Configuration, seed: u64, mix: MoveMix) -> Result<Self> {
        if !initial.total_energy(&model.phi).is_finite() {
            return Err(SimError::InfiniteInitialEnergy);
        }
        let total = mix.birth + mix.death + mix.displacement;
        if !(mix.birth > 0.0 && mix.death > 0.0 && mix.displacement >= 0.0 && total.is_finite()) {
            return Err(SimError::Invalid("move mix needs positive birth and death weights".into()));
        }
        let r = model.phi.range();
        Ok(Self {
            model: model.clone(),
            current: initial,
            rng: seed::rng(seed),
            p_birth: mix.birth / total,
            p_death: mix.death / total,
            step: if r > 0.0 { 0.3 * r } else { 0.3 },
            max_particles: None,
            sweep_len: (model.z * model.dom.volume()).ceil().max(1.0) as usize,
            counters: MoveCounters::default(),
        })
    }

    /// Half-width of the uniform displacement proposal.
    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// Restricts the target to configurations with at most `n` points.
    pub fn with_max_particles(mut self, n: Option<usize>) -> Self {
        self.max_particles = n;
        self
    }

    pub fn current(&self) -> &Configuration {
        &self.current
    }

    pub fn counters(&self) -> MoveCounters {
        self.counters
    }

    fn uniform_point(&mut self) -> Point {
        let dom = self.model.dom;
        let mut p = [0.0; 3];
        for c in p.iter_mut().take(dom.dim()) {
            *c = self.rng.random::<f64>() * dom.side();
        }
        p
    }

    pub fn step(&mut self) -> McmcEvent {
        let u: f64 = self.rng.random();
        let n = self.current.len();
        let zv = self.model.z * self.model.dom.volume();
        let (kind, accepted) = if u < self.p_birth {
            let x = self.uniform_point();
            let full = self.max_particles.is_some_and(|m| n >= m);
            let e = self.current.energy_at(&self.model.phi, &x, None);
            let ratio = self.p_death / self.p_birth * zv * (-e).exp() / (n + 1) as f64;
            let ok = !full && e.is_finite() && self.rng.random::<f64>() < ratio;
            if ok {
                self.current.push(x);
            }
            (McmcMove::Birth, ok)
        } else if u < self.p_birth + self.p_death {
            if n == 0 {
                (McmcMove::Death, false)
            } else {
                let id = self.rng.random_range(0..n);
                let e = self.current.energy_of(&self.model.phi, id);
                let ratio = self.p_birth / self.p_death * n as f64 * e.exp() / zv;
                let ok = self.rng.random::<f64>() < ratio;
                if ok {
                    self.current.swap_remove(id);
                }
                (McmcMove::Death, ok)
            }
        } else if n == 0 {
            (McmcMove::Displacement, false)
        } else {
            let id = self.rng.random_range(0..n);
            let mut y = self.current.points()[id];
            for c in y.iter_mut().take(self.model.dom.dim()) {
                *c += self.step * (2.0 * self.rng.random::<f64>() - 1.0);
            }
            let e_new = self.current.energy_at(&self.model.phi, &y, Some(id));
            let ok = if e_new.is_finite() {
                let e_old = self.current.energy_of(&self.model.phi, id);
                self.rng.random::<f64>() < (e_old - e_new).exp()
            } else {
                false
            };
            if ok {
                self.current.move_point(id, y);
            }
            (McmcMove::Displacement, ok)
        };
        let k = kind as usize;
        self.counters.proposed[k] += 1;
        self.counters.accepted[k] += accepted as u64;
        McmcEvent { kind, accepted }
    }

    /// `ceil(z V)` proposals, independent of the current state.
    pub fn sweep(&mut self) {
        for _ in 0..self.sweep_len {
            self.step();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub n_samples: usize,
    /// Sweeps between kept samples; `None` picks the integrated
    /// autocorrelation time of `N` from a pilot run.
    pub thin: Option<usize>,
    pub burn_in_sweeps: usize,
    pub seed: u64,
    pub mix: MoveMix,
    pub step: Option<f64>,
    pub max_particles: Option<usize>,
    /// Sweeps in the pilot run that sets automatic thinning.
    pub pilot_sweeps: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            thin: None,
            burn_in_sweeps: 10_000,
            seed: 1,
            mix: MoveMix::default(),
            step: None,
            max_particles: None,
            pilot_sweeps: 4_000,
        }
    }
}

/// Output of [`sample_gibbs`].
#[derive(Clone, Debug)]
pub struct GibbsSamples {
    pub model: ModelSpec,
    pub configs: Vec<Configuration>,
    pub thin: usize,
    pub tau_pilot: f64,
    pub settings: SamplerSettings,
    pub counters: MoveCounters,
    pub lahht: Option<LahtCheck>,
}

impl GibbsSamples {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// Draws `n_samples` thinned configurations from a chain started empty.
pub fn sample_gibbs(model: &ModelSpec, settings: &SamplerSettings) -> Result<GibbsSamples> {
    sample_gibbs_from(model, settings, Configuration::for_model(model))
}

pub fn sample_gibbs_from(model: &ModelSpec, settings: &SamplerSettings, initial: Configuration) -> Result<GibbsSamples> {
    let mut chain = GibbsChain::new(model, initial, settings.seed, settings.mix)?.with_max_particles(settings.max_particles);
    if let Some(s) = settings.step {
        chain = chain.with_step(s);
    }
    for _ in 0..settings.burn_in_sweeps {
        chain.sweep();
    }
    let (thin, tau) = match settings.thin {
        Some(t) => (t.max(1), f64::NAN),
        None => {
            let ns: Vec<f64> = (0..settings.pilot_sweeps.max(100))
                .map(|_| {
                    chain.sweep();
                    chain.current().len() as f64
                })
                .collect();
            let tau = integrated_autocorr_time(&ns);
            (tau.ceil() as usize, tau)
        }
    };
    let mut configs = Vec::with_capacity(settings.n_samples);
    for _ in 0..settings.n_samples {
        for _ in 0..thin {
            chain.sweep();
        }
        configs.push(chain.current().clone());
    }
    Ok(GibbsSamples {
        model: model.clone(),
        configs,
        thin,
        tau_pilot: tau,
        settings: settings.clone(),
        counters: chain.counters(),
        lahht: model.lahht_check().ok(),
    })
}
