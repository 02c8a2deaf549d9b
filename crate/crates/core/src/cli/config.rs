use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::TorusDomain;
use crate::gibbs::{GnzFunctional, SamplerSettings};
use crate::model::{JumpKernel, ModelSpec, PairPotential};
use crate::quadrature::QuadPolicy;
use crate::testfn::TestFunction;

/// A configuration problem, reported with the dotted path of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.field.is_empty() {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SampleGibbs,
    ValidateGnz,
    RunKawasaki,
    RunGlauber,
    ScalingSweep,
    FddCompare,
    GapProbe,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::SampleGibbs,
        Experiment::ValidateGnz,
        Experiment::RunKawasaki,
        Experiment::RunGlauber,
        Experiment::ScalingSweep,
        Experiment::FddCompare,
        Experiment::GapProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SampleGibbs => "sample-gibbs",
            Experiment::ValidateGnz => "validate-gnz",
            Experiment::RunKawasaki => "run-kawasaki",
            Experiment::RunGlauber => "run-glauber",
            Experiment::ScalingSweep => "scaling-sweep",
            Experiment::FddCompare => "fdd-compare",
            Experiment::GapProbe => "gap-probe",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::SampleGibbs => "draw Gibbs samples; report density, pair correlation and Ursell function",
            Experiment::ValidateGnz => "check the single and two-point GNZ identities and the alpha identity",
            Experiment::RunKawasaki => "simulate hop dynamics from Gibbs starts; audit rates and stationarity",
            Experiment::RunGlauber => "simulate birth-death dynamics from Gibbs starts; audit rates and stationarity",
            Experiment::ScalingSweep => "L2 distance between hop and birth-death generators over an eps grid",
            Experiment::FddCompare => "compare finite-dimensional laws of hop and birth-death dynamics",
            Experiment::GapProbe => "fit the relaxation rate of the birth-death dynamics against its lower bound",
        }
    }

    pub fn required_blocks(self) -> &'static [&'static str] {
        match self {
            Experiment::SampleGibbs | Experiment::ValidateGnz => &["model", "sampler"],
            Experiment::RunKawasaki | Experiment::RunGlauber => &["model", "sampler", "dynamics"],
            Experiment::ScalingSweep => &["model", "sampler", "sweep"],
            Experiment::FddCompare => &["model", "sampler", "fdd"],
            Experiment::GapProbe => &["model", "sampler", "gap"],
        }
    }

    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Self::ALL.into_iter().find(|e| e.name() == name).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            cfg_err("experiment", format!("unknown experiment `{name}`; valid names: {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub dim: usize,
    pub side: f64,
    pub z: f64,
    pub potential: PairPotential,
    pub kernel: JumpKernel,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub rate_cap: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelBlock {
    pub fn to_spec(&self) -> Result<ModelSpec, ConfigError> {
        let dom = TorusDomain::new(self.dim, self.side).map_err(|e| cfg_err(format!("model.{}", e.field), e.message))?;
        ModelSpec::new(dom, self.potential.clone(), self.z, self.kernel.clone(), self.eps, self.s, self.rate_cap)
            .map_err(|e| cfg_err(format!("model.{}", e.field), e.message))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    /// Death rate for birth-death runs; `None` uses `k1 ||a||_1 / z`.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub horizon: f64,
    /// Whether `horizon` and `snapshot_times` are in units of `1/alpha`.
    #[serde(default)]
    pub in_alpha_units: bool,
    #[serde(default = "one_usize")]
    pub replicas: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub record_events: bool,
    pub seed: u64,
    /// Fuzzed cases for the detailed-balance audit; 0 disables it.
    #[serde(default = "default_audit_cases")]
    pub audit_cases: usize,
    /// Replicas for the stationarity audit; absent disables it.
    #[serde(default)]
    pub stationarity_replicas: Option<usize>,
    /// Radial bin edges for pair statistics.
    #[serde(default)]
    pub k2_edges: Option<Vec<f64>>,
}

fn one_usize() -> usize {
    1
}

fn default_audit_cases() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnzBlock {
    /// Defaults to the standard five functionals.
    #[serde(default)]
    pub functionals: Option<Vec<GnzFunctional>>,
    #[serde(default = "yes")]
    pub double: bool,
    #[serde(default)]
    pub quad: QuadPolicy,
}

impl Default for GnzBlock {
    fn default() -> Self {
        Self { functionals: None, double: true, quad: QuadPolicy::default() }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub eps: Vec<f64>,
    pub test: TestFunction,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub quad: QuadPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftBlock {
    #[serde(default)]
    pub psi: TestFunction,
    pub x: Vec<f64>,
    pub x_offset: Vec<f64>,
    pub y: Vec<f64>,
    pub y_offset: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FddBlock {
    pub tests: Vec<TestFunction>,
    pub times: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "yes")]
    pub in_alpha_units: bool,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
}

fn default_permutations() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapBlock {
    pub test: TestFunction,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_gap_horizon")]
    pub horizon: f64,
    #[serde(default = "default_gap_dt")]
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
}

fn default_gap_horizon() -> f64 {
    10.0
}

fn default_gap_dt() -> f64 {
    0.05
}

/// Thresholds of the statistical verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictBlock {
    pub enabled: bool,
    /// Standard errors allowed in two-sided checks.
    pub sigma: f64,
    /// Significance level of distribution tests.
    pub level: f64,
    /// Largest allowed ratio of last to first sweep distance.
    pub sweep_ratio: f64,
    /// Largest allowed ratio of smallest-eps to largest-eps fdd statistics.
    pub fdd_ratio: f64,
    /// Relative tolerance of the gap against `alpha` for the ideal gas.
    pub gap_rel_tol: f64,
}

impl Default for VerdictBlock {
    fn default() -> Self {
        Self { enabled: true, sigma: 3.0, level: 0.01, sweep_ratio: 0.25, fdd_ratio: 0.5, gap_rel_tol: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    /// Write configuration record files.
    pub records: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: "out".into(), records: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub model: ModelBlock,
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub dynamics: Option<DynamicsBlock>,
    #[serde(default)]
    pub gnz: Option<GnzBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub shift: Option<ShiftBlock>,
    #[serde(default)]
    pub fdd: Option<FddBlock>,
    #[serde(default)]
    pub gap: Option<GapBlock>,
    #[serde(default)]
    pub verdict: VerdictBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Validated configuration ready to run.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub experiment: Experiment,
    pub config: RunConfig,
    pub model: ModelSpec,
}

impl Resolved {
    /// Canonical JSON of the resolved config.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.config).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Applies `key.path=value` to the table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, value) =
        assignment.split_once('=').ok_or_else(|| cfg_err("", format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(key.trim(), "empty key segment in override"));
    }
    let mut cur = table;
    for (i, p) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| cfg_err(parts[..=i].join("."), "is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

fn require_key(table: &toml::Table, block: &str, key: &str) -> Result<(), ConfigError> {
    match table.get(block).and_then(|b| b.as_table()) {
        Some(t) if t.contains_key(key) => Ok(()),
        _ => Err(cfg_err(format!("{block}.{key}"), "missing field; seeds must be explicit")),
    }
}

/// Parses, overrides and validates a run configuration.
pub fn resolve(text: &str, overrides: &[String]) -> Result<Resolved, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| cfg_err("", format!("TOML parse error: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let name = table
        .get("experiment")
        .and_then(|v| v.as_str())
        .ok_or_else(|| cfg_err("experiment", "missing experiment name"))?
        .to_string();
    let experiment = Experiment::parse(&name)?;
    for block in experiment.required_blocks() {
        if !table.get(*block).is_some_and(|v| v.is_table()) {
            return Err(cfg_err(*block, format!("block required by `{name}` is missing")));
        }
    }
    require_key(&table, "sampler", "seed")?;
    let config: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let field = match inner.split('`').nth(1).filter(|_| inner.starts_with("missing field")) {
            Some(f) if path == "." || path.is_empty() => f.to_string(),
            Some(f) => format!("{path}.{f}"),
            None => path,
        };
        cfg_err(field, inner)
    })?;
    let model = config.model.to_spec()?;
    let dom = model.dom;
    let check_test = |field: &str, t: &TestFunction| t.validate(&dom).map_err(|e| cfg_err(format!("{field}.{}", e.field), e.message));
    let positive_list = |field: &str, v: &[f64]| {
        if v.is_empty() || v.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            Err(cfg_err(field, "must be a nonempty list of positive numbers"))
        } else {
            Ok(())
        }
    };
    if let Some(s) = &config.sweep {
        positive_list("sweep.eps", &s.eps)?;
        check_test("sweep.test", &s.test)?;
    }
    if let Some(s) = &config.shift {
        positive_list("shift.eps", &s.eps)?;
        check_test("shift.psi", &s.psi)?;
        for (f, v) in [("shift.x", &s.x), ("shift.x_offset", &s.x_offset), ("shift.y", &s.y), ("shift.y_offset", &s.y_offset)] {
            if v.len() != dom.dim() {
                return Err(cfg_err(f, format!("expected {} coordinates", dom.dim())));
            }
        }
    }
    if let Some(f) = &config.fdd {
        positive_list("fdd.eps", &f.eps)?;
        for (i, t) in f.tests.iter().enumerate() {
            check_test(&format!("fdd.tests[{i}]"), t)?;
        }
        if f.replicas < 500 {
            return Err(cfg_err("fdd.replicas", "at least 500 replicas are required"));
        }
    }
    if let Some(g) = &config.gap {
        check_test("gap.test", &g.test)?;
    }
    if let Some(d) = &config.dynamics {
        if !(d.horizon.is_finite() && d.horizon >= 0.0) {
            return Err(cfg_err("dynamics.horizon", "must be finite and >= 0"));
        }
        if d.replicas == 0 {
            return Err(cfg_err("dynamics.replicas", "must be at least 1"));
        }
    }
    if config.sampler.n_samples == 0 {
        return Err(cfg_err("sampler.n_samples", "must be at least 1"));
    }
    Ok(Resolved { experiment, config, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "sample-gibbs"
[model]
dim = 1
side = 20.0
z = 0.2
potential = { kind = "square_well", strength = 1.0, range = 0.5 }
kernel = { kind = "uniform_ball", radius = 0.5 }
[sampler]
seed = 4
n_samples = 200
"#;

    #[test]
    fn parses_and_hashes() {
        let r = resolve(BASE, &[]).unwrap();
        assert_eq!(r.experiment, Experiment::SampleGibbs);
        assert_eq!(r.model.z, 0.2);
        assert_eq!(r.hash(), resolve(BASE, &[]).unwrap().hash());
        assert_ne!(r.hash(), resolve(BASE, &["model.z=0.1".into()]).unwrap().hash());
    }

    #[test]
    fn missing_z_names_field() {
        let text = BASE.replace("z = 0.2\n", "");
        assert_eq!(resolve(&text, &[]).unwrap_err().field, "model.z");
    }

    #[test]
    fn range_checked_against_box() {
        let e = resolve(BASE, &["model.side=0.8".into()]).unwrap_err();
        assert_eq!(e.field, "model.potential.range");
    }

    #[test]
    fn unknown_experiment_lists_names() {
        let e = resolve(BASE, &["experiment=\"nope\"".into()]).unwrap_err();
        assert_eq!(e.field, "experiment");
        for x in Experiment::ALL {
            assert!(e.message.contains(x.name()));
        }
    }

    #[test]
    fn seeds_must_be_explicit() {
        let text = BASE.replace("seed = 4\n", "");
        assert_eq!(resolve(&text, &[]).unwrap_err().field, "sampler.seed");
    }

    #[test]
    fn override_types() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "a.b=3").unwrap();
        apply_override(&mut t, "a.c=hello").unwrap();
        apply_override(&mut t, "a.d=[1.0, 2.0]").unwrap();
        assert_eq!(t["a"]["b"].as_integer(), Some(3));
        assert_eq!(t["a"]["c"].as_str(), Some("hello"));
        assert_eq!(t["a"]["d"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut t, "novalue").is_err());
    }
}
