//! Desk-scale acceptance run. One PASS/FAIL line per criterion; exits
//! nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use kgsim::cli::alpha_check;
use kgsim::dynamics::{detailed_balance_audit, run, stationarity_audit, DynamicsSpec, Engine};
use kgsim::gibbs::{
    double_gnz_residual, estimate_k1, estimate_ursell2, exp_moment, gnz_residual, sample_gibbs, standard_functionals,
    GibbsSamples, SamplerSettings,
};
use kgsim::model::alpha_from_k1;
use kgsim::quadrature::QuadPolicy;
use kgsim::scaling::{energy_shift_limit_check, fdd_compare, l2_generator_distance, spectral_gap_probe, FddSettings, GapSettings};
use kgsim::seed;
use kgsim::stats::iid_mean;
use kgsim::testfn::TestFunction;
use kgsim::{Configuration, JumpKernel, ModelSpec, PairPotential, Result, TorusDomain};
use rand::Rng;

const SW: PairPotential = PairPotential::SquareWell { strength: 1.0, range: 0.5 };

fn square_well(l: f64) -> ModelSpec {
    ModelSpec::new(TorusDomain::new(1, l).unwrap(), SW, 0.2, JumpKernel::uniform_ball(0.5), 1.0, 0.0, None).unwrap()
}

fn ideal(l: f64) -> ModelSpec {
    ModelSpec::ideal_gas(TorusDomain::new(1, l).unwrap(), 0.2)
}

fn sampler(n: usize, seed: u64) -> SamplerSettings {
    SamplerSettings { n_samples: n, seed, burn_in_sweeps: 5000, ..Default::default() }
}

struct Check {
    passed: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn c1_identities() -> Result<Check> {
    let cases = [
        square_well(20.0),
        ModelSpec::new(TorusDomain::new(1, 10.0).unwrap(), PairPotential::Triangle { strength: 2.0, range: 0.8 }, 0.3, JumpKernel::uniform_ball(1.0), 0.5, 0.5, Some(50.0))?,
        ModelSpec::new(
            TorusDomain::new(2, 6.0).unwrap(),
            PairPotential::HardcoreSquareWell { core: 0.2, strength: -0.5, range: 0.6 },
            0.2,
            JumpKernel::uniform_ball(0.5),
            1.0,
            1.0,
            Some(50.0),
        )?,
        ModelSpec::new(
            TorusDomain::new(1, 10.0).unwrap(),
            PairPotential::LennardJonesTruncated { sigma: 0.1, well_depth: 1.0, range: 0.25 },
            0.2,
            JumpKernel::uniform_ball(0.5),
            1.0,
            0.3,
            Some(50.0),
        )?,
    ];
    let per = 10_000 / cases.len();
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for (k, m) in cases.iter().enumerate() {
        let r = detailed_balance_audit(m, per, seed::split(1, k as u64));
        worst = worst.max(r.max_rel_kawasaki).max(r.max_rel_glauber).max(r.max_rel_energy_increment);
        skipped += r.unrepresentable_cases;
    }
    Ok(Check::new(
        worst <= 1e-10,
        format!("{} cases, worst relative deviation {worst:.2e}, {skipped} comparisons beyond f64 range", per * cases.len()),
    ))
}

fn c2_poisson() -> Result<Check> {
    let mut notes = Vec::new();
    let mut ok = true;
    let m = ideal(20.0);
    let s = sample_gibbs(&m, &sampler(100_000, 2))?;
    let k1 = estimate_k1(&s)?;
    ok &= k1.within_sigma(m.z, 3.0);
    notes.push(format!("density z={:.2}", k1.z_against(m.z)));
    let em = exp_moment(&s, &TestFunction::bump(&[10.0], 2.0, 0.7), m.z)?;
    ok &= em.mc.within_sigma(em.poisson_value, 3.0);
    notes.push(format!("exp moment z={:.2}", em.mc.z_against(em.poisson_value)));

    // M/M/infinity from empty on L = 10
    let small = ideal(10.0);
    let times = [0.5, 1.0, 2.0];
    let spec = DynamicsSpec::new(&small, Engine::Glauber { alpha: 1.0 }, 2.0).with_snapshots(times.to_vec());
    let empty = Configuration::for_model(&small);
    let mut counts = vec![Vec::with_capacity(100_000); times.len()];
    for i in 0..100_000u64 {
        let t = run(&empty, &spec, seed::split(22, i))?;
        for (k, (_, c)) in t.snapshots.iter().enumerate() {
            counts[k].push(c.len() as f64);
        }
    }
    for (k, t) in times.iter().enumerate() {
        let mean = small.z * 10.0 * (1.0 - (-t).exp());
        let e = iid_mean(&counts[k])?;
        let v = iid_mean(&counts[k].iter().map(|n| (n - mean).powi(2)).collect::<Vec<_>>())?;
        ok &= e.within_sigma(mean, 3.0) && v.within_sigma(mean, 3.0);
        notes.push(format!("N({t}) z={:.2}/{:.2}", e.z_against(mean), v.z_against(mean)));
    }

    // free hops: per-particle jump counts over unit windows
    let mut rng = seed::rng(23);
    let n = 100;
    let gamma = Configuration::from_points(m.dom, 0.0, (0..n).map(|_| [rng.random::<f64>() * 20.0, 0.0, 0.0]));
    let horizon = 1000.0;
    let t = run(&gamma, &DynamicsSpec::new(&m, Engine::Kawasaki, horizon), 24)?;
    let rate = t.counts.jumps as f64 / (n as f64 * horizon);
    let se = (t.counts.jumps as f64).sqrt() / (n as f64 * horizon);
    let z = (rate - m.kernel.mass()) / se;
    ok &= z.abs() < 3.0;
    notes.push(format!("jump rate {rate:.4} (||a|| = {}), z={z:.2}", m.kernel.mass()));
    Ok(Check::new(ok, notes.join("; ")))
}

fn c3_gnz(s: &GibbsSamples) -> Result<Check> {
    let p = QuadPolicy::default();
    let funcs = standard_functionals(&s.model.dom);
    let mut worst: f64 = 0.0;
    let mut zs = Vec::new();
    for f in &funcs {
        let a = gnz_residual(s, f, &p)?.z_score;
        let b = double_gnz_residual(s, f, &p)?.z_score;
        worst = worst.max(a.abs()).max(b.abs());
        zs.push(format!("{a:.2}/{b:.2}"));
    }
    Ok(Check::new(funcs.len() >= 5 && worst < 3.0, format!("{} functionals, single/double z: {}", funcs.len(), zs.join(" "))))
}

fn c4_alpha(s: &GibbsSamples) -> Result<Check> {
    let (_, z) = alpha_check(s)?;
    let k1 = estimate_k1(s)?;
    let alpha = alpha_from_k1(k1.value, s.model.z, &s.model.kernel);
    Ok(Check::new(z.abs() < 3.0, format!("alpha {alpha:.4}, z={z:.2}")))
}

fn c5_c6_sweep() -> Result<(Check, Check)> {
    let m = square_well(64.0);
    let s = sample_gibbs(&m, &sampler(10_000, 5))?;
    let test = TestFunction::bump(&[32.0], 1.0, 1.0);
    let r = l2_generator_distance(&test, &m, &[1.0, 0.5, 0.25, 0.125], None, &s, &QuadPolicy::default())?;
    let totals: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.total.value)).collect();
    let ok5 = r.total_decreasing() && r.plus_decreasing() && r.minus_decreasing() && r.end_ratio() < 0.25;
    let c5 = Check::new(
        ok5,
        format!(
            "totals {} ratio {:.3}; plus decreasing {}; minus decreasing {}",
            totals.join(" > "),
            r.end_ratio(),
            r.plus_decreasing(),
            r.minus_decreasing()
        ),
    );
    let eps: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
    let sh = energy_shift_limit_check(&TestFunction::zero(), &[1.0, 0.0, 0.0], &[0.0; 3], &[3.0, 0.0, 0.0], &[0.0; 3], &eps, &s)?;
    let c6 = match sh.smallest_admissible() {
        Some(row) => Check::new(
            row.z_double.abs() < 3.0 && row.z_single.abs() < 3.0,
            format!("eps {}: double z={:.2}, single z={:.2}", row.eps, row.z_double, row.z_single),
        ),
        None => Check::new(false, "no admissible eps"),
    };
    Ok((c5, c6))
}

fn c7_fdd() -> Result<Check> {
    let m = square_well(20.0);
    let settings = FddSettings {
        tests: vec![TestFunction::bump(&[10.0], 1.0, 1.0)],
        times: vec![0.5, 1.0],
        eps_list: vec![1.0, 0.5, 0.25, 0.125],
        alpha: None,
        times_in_alpha_units: true,
        n_replicas: 2000,
        seed: 7,
        sampler: SamplerSettings { burn_in_sweeps: 2000, ..Default::default() },
        permutations: 1000,
    };
    let r = fdd_compare(&m, &settings)?;
    let (first, last) = (r.first().unwrap(), r.last().unwrap());
    let e_ratio = last.energy.statistic / first.energy.statistic;
    let ks_ratios: Vec<f64> =
        first.marginal_ks.iter().zip(&last.marginal_ks).map(|(a, b)| b.statistic / a.statistic).collect();
    let inc_ratios: Vec<f64> =
        first.increment_ks.iter().zip(&last.increment_ks).map(|(a, b)| b.statistic / a.statistic).collect();
    let initial_ok = r.rows.iter().all(|row| row.initial_ks.p_value >= 0.01);
    let ok = e_ratio < 0.5 && ks_ratios.iter().all(|x| *x < 0.5) && initial_ok;
    Ok(Check::new(
        ok,
        format!(
            "energy ratio {e_ratio:.3}; marginal KS ratios {:?}; increment KS ratios {:?}; t=0 law kept {initial_ok}",
            ks_ratios.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>(),
            inc_ratios.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>()
        ),
    ))
}

fn c8_stationarity() -> Result<Check> {
    let m = square_well(20.0);
    let s = sample_gibbs(&m, &sampler(2000, 8))?;
    let alpha = alpha_from_k1(estimate_k1(&s)?.value, m.z, &m.kernel);
    let edges = [0.0, 0.25, 0.5, 1.0, 2.0];
    let mut ok = true;
    let mut notes = Vec::new();
    for (k, engine) in [Engine::Kawasaki, Engine::Glauber { alpha }].into_iter().enumerate() {
        let r = stationarity_audit(&m, engine, 50.0 / alpha, 100, &edges, &sampler(10_000, 80 + k as u64), 81 + k as u64)?;
        ok &= r.passes(3.0);
        notes.push(format!("{}: max |z| {:.2} over {}", if k == 0 { "kawasaki" } else { "glauber" }, r.max_abs_z, r.stats.len()));
    }
    Ok(Check::new(ok, notes.join("; ")))
}

fn c9_gap() -> Result<Check> {
    let settings = |seed| GapSettings {
        test: TestFunction::bump(&[10.0], 1.0, 1.0),
        alpha: None,
        horizon: 10.0,
        dt: 0.05,
        n_replicas: 2000,
        seed,
        sampler: SamplerSettings { burn_in_sweeps: 2000, ..Default::default() },
    };
    let sw = spectral_gap_probe(&square_well(20.0), &settings(3))?;
    let free = spectral_gap_probe(&ideal(20.0), &settings(4))?;
    let rel = (free.gap.value - free.alpha).abs() / free.alpha;
    Ok(Check::new(
        sw.respects_bound(3.0) && rel < 0.1,
        format!(
            "square well gap {:.3} +- {:.3} vs bound {:.3}; ideal gap {:.3} vs alpha {:.3} ({:.1}%)",
            sw.gap.value,
            sw.gap.std_error,
            sw.bound,
            free.gap.value,
            free.alpha,
            100.0 * rel
        ),
    ))
}

fn c10_ursell(s: &GibbsSamples) -> Result<Check> {
    let edges = [0.0, 0.5, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
    let u = estimate_ursell2(s, &edges)?;
    let near = u[0].ok_or_else(|| kgsim::SimError::InsufficientData("no pairs below R".into()))?;
    let near_ok = near.value.abs() > 3.0 * near.std_error;
    let far: Vec<f64> = u[2..].iter().flatten().map(|e| e.z_against(0.0)).collect();
    let far_ok = far.len() == 5 && far.iter().all(|z| z.abs() < 3.0);
    Ok(Check::new(
        near_ok && far_ok,
        format!(
            "u2(r<R) = {:.4} +- {:.4}; far-bin z {:?}",
            near.value,
            near.std_error,
            far.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>()
        ),
    ))
}

fn report(n: usize, name: &str, started: Instant, r: Result<Check>, failures: &mut usize) {
    let secs = started.elapsed().as_secs_f64();
    match r {
        Ok(c) => {
            if !c.passed {
                *failures += 1;
            }
            println!("{} criterion {n} ({name}): {} [{secs:.0}s]", if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
        Err(e) => {
            *failures += 1;
            println!("FAIL criterion {n} ({name}): error {e} [{secs:.0}s]");
        }
    }
}

fn main() -> ExitCode {
    let mut failures = 0;
    let t = Instant::now();
    report(1, "exact identities", t, c1_identities(), &mut failures);
    let t = Instant::now();
    report(2, "ideal gas oracles", t, c2_poisson(), &mut failures);

    let t = Instant::now();
    match sample_gibbs(&square_well(20.0), &sampler(10_000, 3)) {
        Ok(s) => {
            report(3, "GNZ identities", t, c3_gnz(&s), &mut failures);
            let t = Instant::now();
            report(4, "alpha consistency", t, c4_alpha(&s), &mut failures);
            let t = Instant::now();
            report(10, "Ursell decay", t, c10_ursell(&s), &mut failures);
        }
        Err(e) => {
            failures += 3;
            println!("FAIL criteria 3, 4, 10: sampler error {e}");
        }
    }

    let t = Instant::now();
    match c5_c6_sweep() {
        Ok((c5, c6)) => {
            report(5, "generator convergence", t, Ok(c5), &mut failures);
            report(6, "energy-shift limits", t, Ok(c6), &mut failures);
        }
        Err(e) => {
            failures += 2;
            println!("FAIL criteria 5, 6: error {e}");
        }
    }
    let t = Instant::now();
    report(7, "FDD convergence", t, c7_fdd(), &mut failures);
    let t = Instant::now();
    report(8, "stationarity", t, c8_stationarity(), &mut failures);
    let t = Instant::now();
    report(9, "spectral gap", t, c9_gap(), &mut failures);

    if failures == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion checks failed");
        ExitCode::FAILURE
    }
}
