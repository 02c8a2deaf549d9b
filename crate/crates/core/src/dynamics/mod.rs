//! Exact continuous-time simulation of the Kawasaki hop and Glauber
//! birth-death processes by thinning a dominating Poisson clock.

mod audit;

pub use audit::{detailed_balance_audit, stationarity_audit, AuditStat, DetailedBalanceReport, StationarityReport};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::model::{kawasaki_energy_factor, Configuration, ModelSpec};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Engine {
    /// Hop dynamics with kernel `a_eps`, `eps` and `s` taken from the model.
    Kawasaki,
    /// Birth-death dynamics with death rate `alpha`.
    Glauber { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsSpec {
    pub model: ModelSpec,
    pub engine: Engine,
    pub horizon: f64,
    /// Times in `[0, horizon]` at which the configuration is recorded.
    pub snapshot_times: Vec<f64>,
    pub record_events: bool,
}

impl DynamicsSpec {
    pub fn new(model: &ModelSpec, engine: Engine, horizon: f64) -> Self {
        Self { model: model.clone(), engine, horizon, snapshot_times: Vec::new(), record_events: false }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_events(mut self, on: bool) -> Self {
        self.record_events = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(SimError::Invalid(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        if let Engine::Glauber { alpha } = self.engine {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(SimError::Invalid(format!("alpha must be positive, got {alpha}")));
            }
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0])
            || self.snapshot_times.iter().any(|t| !(0.0..=self.horizon).contains(t))
        {
            return Err(SimError::Invalid("snapshot times must be sorted and lie in [0, horizon]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Jump { id: usize, from: Point, to: Point },
    Birth { at: Point },
    /// Point `id` is removed; the last point takes its index.
    Death { id: usize, at: Point },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub proposals: u64,
    pub jumps: u64,
    pub births: u64,
    pub deaths: u64,
}

/// A simulated path on `[0, final_time]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub snapshots: Vec<(f64, Configuration)>,
    pub final_time: f64,
    pub final_config: Configuration,
    pub counts: EventCounts,
}

impl Trajectory {
    /// Replays the event log from the initial configuration, checking that
    /// every event is applicable, and returns the final configuration.
    pub fn replay(&self) -> Result<Configuration> {
        let mut c = self.initial.clone();
        let mut last = 0.0;
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.time > last || (i == 0 && ev.time >= 0.0)) || ev.time > self.final_time {
                return Err(SimError::Invalid(format!("event {i}: time {} not increasing", ev.time)));
            }
            last = ev.time;
            let same = |a: &Point, b: &Point| a.iter().zip(b).all(|(u, v)| u.to_bits() == v.to_bits());
            match ev.kind {
                EventKind::Jump { id, from, to } => {
                    if id >= c.len() || !same(&c.points()[id], &from) {
                        return Err(SimError::Invalid(format!("event {i}: jump of an absent particle")));
                    }
                    c.move_point(id, to);
                }
                EventKind::Birth { at } => {
                    if c.points().iter().any(|p| same(p, &at)) {
                        return Err(SimError::Invalid(format!("event {i}: duplicate birth")));
                    }
                    c.push(at);
                }
                EventKind::Death { id, at } => {
                    if id >= c.len() || !same(&c.points()[id], &at) {
                        return Err(SimError::Invalid(format!("event {i}: death of an absent particle")));
                    }
                    c.swap_remove(id);
                }
            }
        }
        Ok(c)
    }
}

struct Recorder<'a> {
    times: &'a [f64],
    next: usize,
    snapshots: Vec<(f64, Configuration)>,
}

impl Recorder<'_> {
    /// Records every pending snapshot time strictly before `t`.
    fn before(&mut self, t: f64, c: &Configuration) {
        while self.next < self.times.len() && self.times[self.next] < t {
            self.snapshots.push((self.times[self.next], c.clone()));
            self.next += 1;
        }
    }

    fn rest(&mut self, c: &Configuration) {
        self.before(f64::INFINITY, c);
    }
}

fn check_cap(factor: f64, cap: f64, context: &'static str) -> Result<()> {
    if factor > cap * (1.0 + 1e-12) {
        return Err(SimError::RateCapExceeded { factor, cap, context });
    }
    Ok(())
}

/// Exact simulation of the hop process: a global clock at rate
/// `N M ||a||_1` proposes `y = x + u / eps` with `u ~ a / ||a||_1`, accepted
/// with the energy factor divided by its cap `M`.
pub fn run_kawasaki(gamma0: &Configuration, spec: &DynamicsSpec, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    let m = &spec.model;
    if !gamma0.total_energy(&m.phi).is_finite() {
        return Err(SimError::InfiniteInitialEnergy);
    }
    let mut rng = seed::rng(seed);
    let cap = m.kawasaki_cap();
    let per_particle = cap * m.kernel.mass();
    let dim = m.dom.dim();
    let mut c = gamma0.clone();
    let mut rec = Recorder { times: &spec.snapshot_times, next: 0, snapshots: Vec::new() };
    let mut events = Vec::new();
    let mut counts = EventCounts::default();
    let mut t = 0.0;
    loop {
        let n = c.len();
        if n == 0 {
            break;
        }
        t += Exp::new(n as f64 * per_particle).expect("positive rate").sample(&mut rng);
        if t > spec.horizon {
            break;
        }
        rec.before(t, &c);
        counts.proposals += 1;
        let id = rng.random_range(0..n);
        let x = c.points()[id];
        let u = m.kernel.sample_displacement(dim, &mut rng);
        let mut y = x;
        for k in 0..dim {
            y[k] += u[k] / m.eps;
        }
        let y = m.dom.wrap(y);
        let e_from = c.energy_of(&m.phi, id);
        let e_to = c.energy_at(&m.phi, &y, Some(id));
        let f = kawasaki_energy_factor(m.s, e_from, e_to);
        check_cap(f, cap, "kawasaki energy factor")?;
        if rng.random::<f64>() * cap < f {
            c.move_point(id, y);
            counts.jumps += 1;
            if spec.record_events {
                events.push(Event { time: t, kind: EventKind::Jump { id, from: x, to: y } });
            }
        }
    }
    rec.rest(&c);
    Ok(Trajectory {
        initial: gamma0.clone(),
        events,
        snapshots: rec.snapshots,
        final_time: spec.horizon,
        final_config: c,
        counts,
    })
}

/// Exact simulation of the birth-death process: the dominating clock runs at
/// `alpha M_d N + alpha z M_b V`; deaths accept with `e^{sE} / M_d`, births
/// (uniform on the torus) with `e^{-(1-s)E} / M_b`.
pub fn run_glauber(gamma0: &Configuration, spec: &DynamicsSpec, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    let Engine::Glauber { alpha } = spec.engine else {
        return Err(SimError::Invalid("run_glauber needs a Glauber engine".into()));
    };
    let m = &spec.model;
    if !gamma0.total_energy(&m.phi).is_finite() {
        return Err(SimError::InfiniteInitialEnergy);
    }
    let mut rng = seed::rng(seed);
    let (md, mb) = (m.death_cap(), m.birth_cap());
    let birth_bound = alpha * m.z * mb * m.dom.volume();
    let dim = m.dom.dim();
    let s = m.s;
    let mut c = gamma0.clone();
    let mut rec = Recorder { times: &spec.snapshot_times, next: 0, snapshots: Vec::new() };
    let mut events = Vec::new();
    let mut counts = EventCounts::default();
    let mut t = 0.0;
    loop {
        let n = c.len();
        let death_bound = alpha * md * n as f64;
        let total = death_bound + birth_bound;
        t += Exp::new(total).expect("positive rate").sample(&mut rng);
        if t > spec.horizon {
            break;
        }
        rec.before(t, &c);
        counts.proposals += 1;
        if rng.random::<f64>() * total < death_bound {
            let id = rng.random_range(0..n);
            let f = (s * c.energy_of(&m.phi, id)).exp();
            check_cap(f, md, "glauber death factor")?;
            if rng.random::<f64>() * md < f {
                let at = c.swap_remove(id);
                counts.deaths += 1;
                if spec.record_events {
                    events.push(Event { time: t, kind: EventKind::Death { id, at } });
                }
            }
        } else {
            let mut x = [0.0; 3];
            for v in x.iter_mut().take(dim) {
                *v = rng.random::<f64>() * m.dom.side();
            }
            let e = c.energy_at(&m.phi, &x, None);
            let f = if e == f64::INFINITY { 0.0 } else { (-(1.0 - s) * e).exp() };
            check_cap(f, mb, "glauber birth factor")?;
            if rng.random::<f64>() * mb < f {
                c.push(x);
                counts.births += 1;
                if spec.record_events {
                    events.push(Event { time: t, kind: EventKind::Birth { at: x } });
                }
            }
        }
    }
    rec.rest(&c);
    Ok(Trajectory {
        initial: gamma0.clone(),
        events,
        snapshots: rec.snapshots,
        final_time: spec.horizon,
        final_config: c,
        counts,
    })
}

/// Dispatches on the engine.
pub fn run(gamma0: &Configuration, spec: &DynamicsSpec, seed: u64) -> Result<Trajectory> {
    match spec.engine {
        Engine::Kawasaki => run_kawasaki(gamma0, spec, seed),
        Engine::Glauber { .. } => run_glauber(gamma0, spec, seed),
    }
}

/// Writes an event log as CSV: `time,kind,id,x0..,y0..`.
pub fn write_event_csv<W: std::io::Write>(w: W, traj: &Trajectory, dim: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["time".to_string(), "kind".into(), "id".into()];
    head.extend((0..dim).map(|k| format!("x{k}")));
    head.extend((0..dim).map(|k| format!("y{k}")));
    out.write_record(&head).map_err(csv_err)?;
    for ev in &traj.events {
        let f = crate::gibbs::records::fmt_sig9;
        let (kind, id, a, b) = match ev.kind {
            EventKind::Jump { id, from, to } => ("jump", id.to_string(), from, Some(to)),
            EventKind::Birth { at } => ("birth", String::new(), at, None),
            EventKind::Death { id, at } => ("death", id.to_string(), at, None),
        };
        let mut row = vec![f(ev.time), kind.to_string(), id];
        row.extend(a.iter().take(dim).map(|v| f(*v)));
        row.extend((0..dim).map(|k| b.map(|p| f(p[k])).unwrap_or_default()));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::Io(std::io::Error::other(e.to_string()))
}
