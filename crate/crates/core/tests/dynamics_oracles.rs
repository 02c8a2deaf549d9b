use kgsim::dynamics::{detailed_balance_audit, run, stationarity_audit, DynamicsSpec, Engine, EventKind};
use kgsim::geometry::{Point, TorusDomain};
use kgsim::gibbs::{sample_gibbs, SamplerSettings};
use kgsim::model::{Configuration, JumpKernel, ModelSpec, PairPotential};
use kgsim::seed;
use kgsim::stats::{iid_mean, ks_one_sample};
use kgsim::SimError;
use rand::Rng;

fn model(l: f64, phi: PairPotential, z: f64, eps: f64, s: f64, cap: Option<f64>) -> ModelSpec {
    ModelSpec::new(TorusDomain::new(1, l).unwrap(), phi, z, JumpKernel::uniform_ball(1.0), eps, s, cap).unwrap()
}

fn pts(xs: &[f64]) -> Vec<Point> {
    xs.iter().map(|x| [*x, 0.0, 0.0]).collect()
}

fn brute_energy(m: &ModelSpec, x: f64, others: &[f64]) -> f64 {
    others.iter().map(|o| m.phi.eval(&m.dom.min_image_disp(&[x, 0.0, 0.0], &[*o, 0.0, 0.0]))).sum()
}

/// First-event times of many independent runs from the same state.
fn first_event_times(gamma: &Configuration, spec: &DynamicsSpec, n: usize, root: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = run(gamma, spec, seed::split(root, i as u64)).unwrap();
            t.events.first().map_or(f64::INFINITY, |e| e.time)
        })
        .collect()
}

const SW: PairPotential = PairPotential::SquareWell { strength: 1.0, range: 0.5 };

#[test]
fn kawasaki_first_event_matches_integrated_rate() {
    let m = model(6.0, SW, 0.3, 0.5, 0.0, None);
    let xs = [1.0, 1.3, 3.5];
    let gamma = Configuration::from_points(m.dom, 0.5, pts(&xs));
    // a_eps is 0.25 on |u| <= 2 for radius 1 and eps 1/2
    let grid = 60_000;
    let h = m.dom.side() / grid as f64;
    let mut total = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let others: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| *o).collect();
        for g in 0..grid {
            let y = (g as f64 + 0.5) * h;
            let d = (y - x).rem_euclid(6.0).min((x - y).rem_euclid(6.0));
            if d <= 2.0 {
                total += 0.25 * (-brute_energy(&m, y, &others)).exp() * h;
            }
        }
    }
    let spec = DynamicsSpec::new(&m, Engine::Kawasaki, 200.0 / total).with_events(true);
    let times = first_event_times(&gamma, &spec, 4000, 1);
    let ks = ks_one_sample(&times, |t| 1.0 - (-total * t).exp());
    assert!(ks.p_value > 0.01, "{ks:?} rate {total}");
}

#[test]
fn glauber_first_event_matches_integrated_rate() {
    let (alpha, s) = (0.7, 0.5);
    let m = model(6.0, SW, 0.3, 1.0, s, Some(10.0));
    let xs = [1.0, 1.3, 3.5];
    let gamma = Configuration::from_points(m.dom, 0.5, pts(&xs));
    let mut total = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let others: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| *o).collect();
        total += alpha * (s * brute_energy(&m, x, &others)).exp();
    }
    let grid = 60_000;
    let h = 6.0 / grid as f64;
    for g in 0..grid {
        let y = (g as f64 + 0.5) * h;
        total += alpha * m.z * (-(1.0 - s) * brute_energy(&m, y, &xs)).exp() * h;
    }
    let spec = DynamicsSpec::new(&m, Engine::Glauber { alpha }, 200.0 / total).with_events(true);
    let times = first_event_times(&gamma, &spec, 4000, 2);
    let ks = ks_one_sample(&times, |t| 1.0 - (-total * t).exp());
    assert!(ks.p_value > 0.01, "{ks:?} rate {total}");
}

#[test]
fn free_hops_have_kernel_mass_rate_and_uniform_displacements() {
    let m = ModelSpec::ideal_gas(TorusDomain::new(1, 20.0).unwrap(), 0.5);
    let mut rng = seed::rng(5);
    let gamma = Configuration::from_points(m.dom, 0.0, (0..10).map(|_| [rng.random::<f64>() * 20.0, 0.0, 0.0]));
    let horizon = 200.0;
    let t = run(&gamma, &DynamicsSpec::new(&m, Engine::Kawasaki, horizon).with_events(true), 6).unwrap();
    let per = t.counts.jumps as f64 / (10.0 * horizon);
    let se = (t.counts.jumps as f64).sqrt() / (10.0 * horizon);
    assert!((per - m.kernel.mass()).abs() < 3.0 * se, "{per} +- {se}");
    let gaps: Vec<f64> = t.events.windows(2).map(|w| w[1].time - w[0].time).collect();
    let mean_gap = iid_mean(&gaps).unwrap();
    assert!(mean_gap.within_sigma(1.0 / (10.0 * m.kernel.mass()), 3.0));
    let disp: Vec<f64> = t
        .events
        .iter()
        .map(|e| match e.kind {
            EventKind::Jump { from, to, .. } => m.dom.min_image_disp(&to, &from)[0],
            _ => unreachable!(),
        })
        .collect();
    let ks = ks_one_sample(&disp, |u| ((u + 0.5) / 1.0).clamp(0.0, 1.0));
    assert!(ks.p_value > 0.01, "{ks:?}");
    assert_eq!(t.final_config.len(), 10);
}

#[test]
fn empty_starts() {
    let m = model(6.0, SW, 0.3, 1.0, 0.0, None);
    let empty = Configuration::for_model(&m);
    let t = run(&empty, &DynamicsSpec::new(&m, Engine::Kawasaki, 10.0).with_events(true), 1).unwrap();
    assert!(t.events.is_empty() && t.final_config.is_empty());
    for i in 0..50 {
        let t = run(&empty, &DynamicsSpec::new(&m, Engine::Glauber { alpha: 1.0 }, 5.0).with_events(true), i).unwrap();
        assert!(matches!(t.events[0].kind, EventKind::Birth { .. }));
    }
}

#[test]
fn ideal_glauber_is_mm_infinity() {
    let (l, z, alpha) = (10.0, 0.5, 1.0);
    let m = ModelSpec::ideal_gas(TorusDomain::new(1, l).unwrap(), z);
    let times = vec![0.5, 1.0, 2.0];
    let spec = DynamicsSpec::new(&m, Engine::Glauber { alpha }, 2.0).with_snapshots(times.clone());
    let empty = Configuration::for_model(&m);
    let runs: Vec<Vec<f64>> = (0..3000)
        .map(|i| run(&empty, &spec, seed::split(40, i)).unwrap().snapshots.iter().map(|(_, c)| c.len() as f64).collect())
        .collect();
    for (k, t) in times.iter().enumerate() {
        let mean = z * l * (1.0 - (-alpha * t).exp());
        let ns: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let est = iid_mean(&ns).unwrap();
        assert!(est.within_sigma(mean, 3.0), "t={t}: {est:?} vs {mean}");
        // Poisson: variance equals mean
        let sq: Vec<f64> = ns.iter().map(|n| (n - mean).powi(2)).collect();
        assert!(iid_mean(&sq).unwrap().within_sigma(mean, 3.0));
    }
}

#[test]
fn rate_cap_violation_is_reported() {
    let lj = PairPotential::LennardJonesTruncated { sigma: 0.3, well_depth: 1.0, range: 0.75 };
    let m = ModelSpec::new(TorusDomain::new(1, 10.0).unwrap(), lj, 0.3, JumpKernel::uniform_ball(0.5), 1.0, 0.0, Some(1.5)).unwrap();
    let gamma = Configuration::from_points(m.dom, 0.75, pts(&[1.0, 1.4]));
    let err = run(&gamma, &DynamicsSpec::new(&m, Engine::Kawasaki, 1000.0), 3).unwrap_err();
    assert!(matches!(err, SimError::RateCapExceeded { .. }), "{err}");
    let err = run(&gamma, &DynamicsSpec::new(&m, Engine::Glauber { alpha: 1.0 }, 1000.0), 3).unwrap_err();
    assert!(matches!(err, SimError::RateCapExceeded { .. }), "{err}");
}

#[test]
fn replay_fuzz() {
    let models = [
        model(5.0, SW, 0.5, 1.0, 0.0, None),
        model(5.0, PairPotential::Triangle { strength: 2.0, range: 0.7 }, 0.5, 0.25, 0.3, Some(50.0)),
        model(5.0, PairPotential::HardcoreSquareWell { core: 0.2, strength: -0.3, range: 0.6 }, 0.4, 0.5, 0.0, Some(20.0)),
    ];
    for (k, m) in models.iter().enumerate() {
        let starts = sample_gibbs(m, &SamplerSettings { n_samples: 10, seed: k as u64, burn_in_sweeps: 500, ..Default::default() }).unwrap();
        for (i, c) in starts.configs.iter().enumerate() {
            for engine in [Engine::Kawasaki, Engine::Glauber { alpha: 0.8 }] {
                let spec = DynamicsSpec::new(m, engine, 20.0).with_events(true).with_snapshots(vec![0.0, 5.0, 20.0]);
                let t = run(c, &spec, seed::split(k as u64, i as u64)).unwrap();
                let replayed = t.replay().unwrap();
                assert_eq!(replayed, t.final_config);
                assert!(t.events.windows(2).all(|w| w[1].time > w[0].time));
                assert_eq!(t.snapshots.len(), 3);
                assert_eq!(t.snapshots[0].1, t.initial);
                if matches!(engine, Engine::Kawasaki) {
                    assert_eq!(t.final_config.len(), c.len());
                }
                let p = t.final_config.points();
                for a in 0..p.len() {
                    for b in a + 1..p.len() {
                        assert!(m.phi.eval(&m.dom.min_image_disp(&p[a], &p[b])).is_finite());
                    }
                }
                assert!(t.final_config.is_consistent());
            }
        }
    }
}

#[test]
fn detailed_balance_identities() {
    let cases = [
        model(5.0, PairPotential::Zero, 0.5, 1.0, 0.0, None),
        model(5.0, SW, 0.5, 0.5, 0.0, None),
        model(5.0, PairPotential::HardcoreSquareWell { core: 0.2, strength: -0.3, range: 0.6 }, 0.4, 1.0, 0.5, Some(20.0)),
        model(5.0, PairPotential::LennardJonesTruncated { sigma: 0.2, well_depth: 0.5, range: 0.5 }, 0.4, 1.0, 1.0, Some(20.0)),
    ];
    for m in &cases {
        let r = detailed_balance_audit(m, 2000, 17);
        assert!(r.passes(1e-10), "{:?} {r:?}", m.phi);
    }
}

#[test]
fn stationarity_small() {
    let sampler = SamplerSettings { n_samples: 4000, seed: 1, burn_in_sweeps: 2000, ..Default::default() };
    let ideal = ModelSpec::ideal_gas(TorusDomain::new(1, 10.0).unwrap(), 0.5);
    let edges = [0.0, 0.5, 1.0, 2.0];
    let g = stationarity_audit(&ideal, Engine::Glauber { alpha: 1.0 }, 10.0, 100, &edges, &sampler, 3).unwrap();
    assert!(g.passes(3.0), "{g:?}");
    let k = stationarity_audit(&ideal, Engine::Kawasaki, 10.0, 100, &edges, &sampler, 4).unwrap();
    assert!(k.passes(3.0), "{k:?}");
    assert!(k.stats.iter().all(|s| s.name != "density"));
}

#[test]
fn stationarity_square_well() {
    let sampler = SamplerSettings { n_samples: 4000, seed: 2, burn_in_sweeps: 2000, ..Default::default() };
    let m = model(10.0, SW, 0.3, 1.0, 0.0, None);
    let edges = [0.0, 0.25, 0.5, 1.0];
    for (i, engine) in [Engine::Kawasaki, Engine::Glauber { alpha: 1.0 }].into_iter().enumerate() {
        let r = stationarity_audit(&m, engine, 10.0, 100, &edges, &sampler, 10 + i as u64).unwrap();
        assert!(r.passes(3.0), "{r:?}");
    }
}

