use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, Resolved};
use crate::dynamics::{self, detailed_balance_audit, stationarity_audit, DynamicsSpec, Engine, EventCounts};
use crate::error::{Result, SimError};
use crate::gibbs::{
    default_edges, double_gnz_residual, estimate_k1, estimate_k2, estimate_ursell2, gnz_residual, records, sample_gibbs,
    standard_functionals, GibbsSamples, SamplerSettings,
};
use crate::model::{alpha_from_k1, ModelSpec};
use crate::scaling::{energy_shift_limit_check, fdd_compare, l2_generator_distance, spectral_gap_probe, FddSettings, GapSettings};
use crate::seed;
use crate::stats::{batch_means, z_score};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn verdict(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { name: name.into(), passed, detail: detail.into() }
}

/// Results of one experiment; `telemetry` holds counts that do not belong
/// in the reproducible report.
pub struct Outcome {
    pub results: Value,
    pub verdicts: Vec<Verdict>,
    pub events: EventCounts,
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(dir.join(name)).map_err(|e| SimError::Io(std::io::Error::other(e.to_string())))
}

fn csv_io(e: csv::Error) -> SimError {
    SimError::Io(std::io::Error::other(e.to_string()))
}

fn f(x: f64) -> String {
    records::fmt_sig9(x)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable result")
}

fn add(a: &mut EventCounts, b: &EventCounts) {
    a.proposals += b.proposals;
    a.jumps += b.jumps;
    a.births += b.births;
    a.deaths += b.deaths;
}

fn default_k2_edges(model: &ModelSpec) -> Vec<f64> {
    let r = model.phi.range();
    let r = if r > 0.0 { r } else { 0.5 };
    (0..=4).map(|i| 0.5 * r * i as f64).collect()
}

pub fn run_experiment(r: &Resolved, dir: &Path) -> Result<Outcome> {
    match r.experiment {
        Experiment::SampleGibbs => sample(r, dir),
        Experiment::ValidateGnz => validate_gnz(r, dir),
        Experiment::RunKawasaki => simulate(r, dir, false),
        Experiment::RunGlauber => simulate(r, dir, true),
        Experiment::ScalingSweep => sweep(r, dir),
        Experiment::FddCompare => fdd(r, dir),
        Experiment::GapProbe => gap(r, dir),
    }
}

fn write_samples(r: &Resolved, dir: &Path, s: &GibbsSamples) -> Result<()> {
    if r.config.output.records {
        let w = BufWriter::new(File::create(dir.join("samples.rec"))?);
        records::write_records(w, &r.model, r.config.sampler.seed, s.configs.iter().map(|c| (None, c)))?;
    }
    Ok(())
}

fn sample(r: &Resolved, dir: &Path) -> Result<Outcome> {
    let m = &r.model;
    let s = sample_gibbs(m, &r.config.sampler)?;
    write_samples(r, dir, &s)?;
    let mut w = csv_writer(dir, "series.csv")?;
    w.write_record(["sample", "n", "energy"]).map_err(csv_io)?;
    for (i, c) in s.configs.iter().enumerate() {
        w.write_record([i.to_string(), c.len().to_string(), f(c.total_energy(&m.phi))]).map_err(csv_io)?;
    }
    w.flush()?;
    let k1 = estimate_k1(&s)?;
    let edges = default_edges(m.dom.side(), 40);
    let k2 = estimate_k2(&s, &edges)?;
    let u2 = estimate_ursell2(&s, &edges)?;
    let mut w = csv_writer(dir, "k2.csv")?;
    w.write_record(["r_lo", "r_hi", "k2", "k2_se", "u2", "u2_se"]).map_err(csv_io)?;
    for b in 0..edges.len() - 1 {
        let opt = |e: Option<crate::stats::Estimate>| e.map_or((String::new(), String::new()), |e| (f(e.value), f(e.std_error)));
        let (a, ase) = opt(k2.k2[b]);
        let (u, use_) = opt(u2[b]);
        w.write_record([f(edges[b]), f(edges[b + 1]), a, ase, u, use_]).map_err(csv_io)?;
    }
    w.flush()?;
    let lahht = m.lahht_check()?;
    let verdicts = vec![verdict(
        "low_activity_condition",
        true,
        format!("z int|e^-phi - 1| = {:.6} vs bound {:.6} (satisfied: {}); informational", lahht.lhs, lahht.rhs, lahht.satisfied),
    )];
    Ok(Outcome {
        results: json!({
            "n_samples": s.len(),
            "thin": s.thin,
            "tau_pilot": if s.tau_pilot.is_finite() { json!(s.tau_pilot) } else { Value::Null },
            "counters": to_json(&s.counters),
            "k1": to_json(&k1),
            "lahht": to_json(&lahht),
            "k2": to_json(&k2),
            "ursell2": to_json(&u2),
        }),
        verdicts,
        events: EventCounts::default(),
    })
}

fn validate_gnz(r: &Resolved, dir: &Path) -> Result<Outcome> {
    let m = &r.model;
    let block = r.config.gnz.clone().unwrap_or_default();
    let funcs = block.functionals.clone().unwrap_or_else(|| standard_functionals(&m.dom));
    let s = sample_gibbs(m, &r.config.sampler)?;
    write_samples(r, dir, &s)?;
    let sigma = r.config.verdict.sigma;
    let mut verdicts = Vec::new();
    let mut w = csv_writer(dir, "gnz.csv")?;
    w.write_record(["identity", "index", "lhs", "rhs", "difference", "difference_se", "z_score"]).map_err(csv_io)?;
    let single: Vec<_> = funcs.par_iter().map(|fu| gnz_residual(&s, fu, &block.quad)).collect::<Result<_>>()?;
    let double: Vec<_> = if block.double {
        funcs.par_iter().map(|fu| double_gnz_residual(&s, fu, &block.quad)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    for (kind, res) in [("single", &single), ("double", &double)] {
        for (i, g) in res.iter().enumerate() {
            w.write_record([
                kind.to_string(),
                i.to_string(),
                f(g.lhs.value),
                f(g.rhs.value),
                f(g.difference.value),
                f(g.difference.std_error),
                f(g.z_score),
            ])
            .map_err(csv_io)?;
            verdicts.push(verdict(format!("gnz_{kind}_{i}"), g.z_score.abs() < sigma, format!("z = {:.3}", g.z_score)));
        }
    }
    w.flush()?;
    let alpha = alpha_check(&s)?;
    verdicts.push(verdict("alpha_identity", alpha.1.abs() < sigma, format!("z = {:.3}", alpha.1)));
    Ok(Outcome {
        results: json!({
            "n_samples": s.len(),
            "single": to_json(&single),
            "double": to_json(&double),
            "alpha_identity": alpha.0,
        }),
        verdicts,
        events: EventCounts::default(),
    })
}

/// `k1 ||a|| / z` against `||a|| E[e^{-E(x, gamma)}]` averaged over a grid
/// of probe points; returns the report and the z-score of the difference.
pub fn alpha_check(s: &GibbsSamples) -> Result<(Value, f64)> {
    let m = &s.model;
    let dom = m.dom;
    let v = dom.volume();
    let probes: Vec<crate::geometry::Point> = (0..8)
        .map(|k| {
            let mut p = [0.0; 3];
            for (j, c) in p.iter_mut().enumerate().take(dom.dim()) {
                *c = dom.side() * ((k as f64 + 0.5) / 8.0 + 0.37 * j as f64).fract();
            }
            p
        })
        .collect();
    let mass = m.kernel.mass();
    let from_k1: Vec<f64> = s.configs.iter().map(|c| c.len() as f64 / v * mass / m.z).collect();
    let from_gnz: Vec<f64> = s
        .configs
        .iter()
        .map(|c| {
            let acc: f64 = probes
                .iter()
                .map(|p| {
                    let e = c.energy_at(&m.phi, p, None);
                    if e == f64::INFINITY { 0.0 } else { (-e).exp() }
                })
                .sum();
            mass * acc / probes.len() as f64
        })
        .collect();
    let diff: Vec<f64> = from_k1.iter().zip(&from_gnz).map(|(a, b)| a - b).collect();
    let a = batch_means(&from_k1)?;
    let b = batch_means(&from_gnz)?;
    let d = batch_means(&diff)?;
    let z = z_score(d.value, d.std_error);
    Ok((json!({ "alpha_k1": to_json(&a), "alpha_gnz": to_json(&b), "difference": to_json(&d), "z_score": z }), z))
}

fn resolve_alpha(r: &Resolved, given: Option<f64>) -> Result<(f64, Option<Value>)> {
    match given {
        Some(a) => Ok((a, None)),
        None => {
            let s = sample_gibbs(&r.model, &r.config.sampler)?;
            let k1 = estimate_k1(&s)?;
            Ok((alpha_from_k1(k1.value, r.model.z, &r.model.kernel), Some(to_json(&k1))))
        }
    }
}

fn simulate(r: &Resolved, dir: &Path, glauber: bool) -> Result<Outcome> {
    let m = &r.model;
    let d = r.config.dynamics.clone().expect("dynamics block checked");
    let (engine, alpha, k1) = if glauber {
        let (a, k1) = resolve_alpha(r, d.alpha)?;
        (Engine::Glauber { alpha: a }, Some(a), k1)
    } else {
        (Engine::Kawasaki, None, None)
    };
    let unit = match (d.in_alpha_units, alpha) {
        (true, Some(a)) => 1.0 / a,
        (true, None) => {
            let (a, _) = resolve_alpha(r, d.alpha)?;
            1.0 / a
        }
        _ => 1.0,
    };
    let horizon = d.horizon * unit;
    let times: Vec<f64> = d.snapshot_times.iter().map(|t| t * unit).collect();
    let spec = DynamicsSpec::new(m, engine, horizon).with_snapshots(times).with_events(d.record_events);
    let starts = sample_gibbs(
        m,
        &SamplerSettings { seed: seed::split(d.seed, 0), n_samples: d.replicas, ..r.config.sampler.clone() },
    )?;
    let trajs: Vec<_> = starts
        .configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| dynamics::run(c, &spec, seed::split(d.seed, 1 + i as u64)))
        .collect::<Result<_>>()?;
    let mut events = EventCounts::default();
    let mut w = csv_writer(dir, "replicas.csv")?;
    w.write_record(["replica", "initial_n", "final_n", "proposals", "jumps", "births", "deaths"]).map_err(csv_io)?;
    for (i, t) in trajs.iter().enumerate() {
        add(&mut events, &t.counts);
        let c = &t.counts;
        w.write_record([
            i.to_string(),
            t.initial.len().to_string(),
            t.final_config.len().to_string(),
            c.proposals.to_string(),
            c.jumps.to_string(),
            c.births.to_string(),
            c.deaths.to_string(),
        ])
        .map_err(csv_io)?;
        if d.record_events {
            dynamics::write_event_csv(File::create(dir.join(format!("events_{i}.csv")))?, t, m.dom.dim())?;
        }
    }
    w.flush()?;
    if r.config.output.records {
        let w = BufWriter::new(File::create(dir.join("snapshots.rec"))?);
        let recs = trajs.iter().flat_map(|t| t.snapshots.iter().map(|(time, c)| (Some(*time), c)));
        records::write_records(w, m, d.seed, recs)?;
    }
    let mut verdicts = Vec::new();
    let mut audit = Value::Null;
    if d.audit_cases > 0 {
        let rep = detailed_balance_audit(m, d.audit_cases, seed::split(d.seed, u64::MAX));
        verdicts.push(verdict(
            "detailed_balance",
            rep.passes(1e-10),
            format!(
                "max relative deviation {:.3e}, {} comparisons beyond f64 range",
                rep.max_rel_kawasaki.max(rep.max_rel_glauber),
                rep.unrepresentable_cases
            ),
        ));
        audit = to_json(&rep);
    }
    let mut stationarity = Value::Null;
    if let Some(n) = d.stationarity_replicas {
        let edges = d.k2_edges.clone().unwrap_or_else(|| default_k2_edges(m));
        let rep = stationarity_audit(m, engine, horizon, n, &edges, &r.config.sampler, seed::split(d.seed, u64::MAX - 1))?;
        let sigma = r.config.verdict.sigma;
        verdicts.push(verdict("stationarity", rep.passes(sigma), format!("max |z| = {:.3}", rep.max_abs_z)));
        stationarity = to_json(&rep);
    }
    Ok(Outcome {
        results: json!({
            "engine": to_json(&engine),
            "horizon": horizon,
            "replicas": d.replicas,
            "k1": k1,
            "events": to_json(&events),
            "final_mean_n": trajs.iter().map(|t| t.final_config.len() as f64).sum::<f64>() / trajs.len() as f64,
            "detailed_balance": audit,
            "stationarity": stationarity,
        }),
        verdicts,
        events,
    })
}

fn sweep(r: &Resolved, dir: &Path) -> Result<Outcome> {
    let m = &r.model;
    let b = r.config.sweep.clone().expect("sweep block checked");
    let s = sample_gibbs(m, &r.config.sampler)?;
    let res = l2_generator_distance(&b.test, m, &b.eps, b.alpha, &s, &b.quad)?;
    let mut w = csv_writer(dir, "sweep.csv")?;
    w.write_record(["eps", "total", "total_se", "plus", "plus_se", "minus", "minus_se", "admissible"]).map_err(csv_io)?;
    for row in &res.rows {
        w.write_record([
            f(row.eps),
            f(row.total.value),
            f(row.total.std_error),
            f(row.plus.value),
            f(row.plus.std_error),
            f(row.minus.value),
            f(row.minus.std_error),
            row.admissible.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    let ratio = res.end_ratio();
    let vb = &r.config.verdict;
    let mut verdicts = vec![
        verdict("total_decreasing", res.total_decreasing(), "strict decrease in eps"),
        verdict("plus_decreasing", res.plus_decreasing(), "strict decrease in eps"),
        verdict("minus_decreasing", res.minus_decreasing(), "strict decrease in eps"),
        verdict("end_ratio", ratio < vb.sweep_ratio, format!("last/first = {ratio:.4} (limit {})", vb.sweep_ratio)),
    ];
    let mut shift = Value::Null;
    if let Some(sb) = &r.config.shift {
        let pt = |v: &[f64]| {
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(v);
            p
        };
        let rep = energy_shift_limit_check(&sb.psi, &pt(&sb.x), &pt(&sb.x_offset), &pt(&sb.y), &pt(&sb.y_offset), &sb.eps, &s)?;
        match rep.smallest_admissible() {
            Some(row) => {
                verdicts.push(verdict("shift_double", row.z_double.abs() < vb.sigma, format!("eps = {}, z = {:.3}", row.eps, row.z_double)));
                verdicts.push(verdict("shift_single", row.z_single.abs() < vb.sigma, format!("eps = {}, z = {:.3}", row.eps, row.z_single)));
            }
            None => verdicts.push(verdict("shift_admissible", false, "no admissible eps")),
        }
        shift = to_json(&rep);
    }
    Ok(Outcome { results: json!({ "sweep": to_json(&res), "shift": shift }), verdicts, events: EventCounts::default() })
}

fn fdd(r: &Resolved, dir: &Path) -> Result<Outcome> {
    let b = r.config.fdd.clone().expect("fdd block checked");
    let settings = FddSettings {
        tests: b.tests,
        times: b.times,
        eps_list: b.eps,
        alpha: b.alpha,
        times_in_alpha_units: b.in_alpha_units,
        n_replicas: b.replicas,
        seed: b.seed,
        sampler: r.config.sampler.clone(),
        permutations: b.permutations,
    };
    let rep = fdd_compare(&r.model, &settings)?;
    let mut w = csv_writer(dir, "fdd.csv")?;
    let n_t = rep.times.len();
    let mut head = vec!["eps".to_string(), "energy".into(), "energy_p".into()];
    head.extend((0..n_t).map(|j| format!("ks_t{j}")));
    head.extend((0..n_t).map(|j| format!("increment_ks_t{j}")));
    head.push("initial_ks_p".into());
    w.write_record(&head).map_err(csv_io)?;
    for row in &rep.rows {
        let mut rec = vec![f(row.eps), f(row.energy.statistic), f(row.energy.p_value)];
        rec.extend(row.marginal_ks.iter().map(|k| f(k.statistic)));
        rec.extend(row.increment_ks.iter().map(|k| f(k.statistic)));
        rec.push(f(row.initial_ks.p_value));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    let vb = &r.config.verdict;
    let mut verdicts = Vec::new();
    if let (Some(a), Some(z)) = (rep.first(), rep.last()) {
        let ratio = z.energy.statistic / a.energy.statistic;
        verdicts.push(verdict("energy_ratio", ratio < vb.fdd_ratio, format!("{ratio:.4}")));
        for j in 0..n_t {
            let ratio = z.marginal_ks[j].statistic / a.marginal_ks[j].statistic;
            verdicts.push(verdict(format!("marginal_ks_ratio_t{j}"), ratio < vb.fdd_ratio, format!("{ratio:.4}")));
        }
        for row in &rep.rows {
            let p = row.initial_ks.p_value;
            verdicts.push(verdict(format!("initial_law_eps_{}", row.eps), p >= vb.level, format!("p = {p:.4}")));
        }
    }
    Ok(Outcome { results: to_json(&rep), verdicts, events: EventCounts::default() })
}

fn gap(r: &Resolved, dir: &Path) -> Result<Outcome> {
    let b = r.config.gap.clone().expect("gap block checked");
    let settings = GapSettings {
        test: b.test,
        alpha: b.alpha,
        horizon: b.horizon,
        dt: b.dt,
        n_replicas: b.replicas,
        seed: b.seed,
        sampler: r.config.sampler.clone(),
    };
    let rep = spectral_gap_probe(&r.model, &settings)?;
    let mut w = csv_writer(dir, "acf.csv")?;
    w.write_record(["lag", "autocorrelation"]).map_err(csv_io)?;
    let dt = b.dt / rep.alpha;
    for (k, c) in rep.autocorrelation.iter().enumerate() {
        w.write_record([f(k as f64 * dt), f(*c)]).map_err(csv_io)?;
    }
    w.flush()?;
    let vb = &r.config.verdict;
    let mut verdicts = vec![verdict(
        "gap_bound",
        rep.respects_bound(vb.sigma),
        format!("gap {:.4} +- {:.4}, bound {:.4}", rep.gap.value, rep.gap.std_error, rep.bound),
    )];
    if r.model.phi.range() == 0.0 {
        let rel = (rep.gap.value / rep.alpha - 1.0).abs();
        verdicts.push(verdict("ideal_gas_gap", rel < vb.gap_rel_tol, format!("|gap/alpha - 1| = {rel:.4}")));
    }
    Ok(Outcome { results: to_json(&rep), verdicts, events: EventCounts::default() })
}
