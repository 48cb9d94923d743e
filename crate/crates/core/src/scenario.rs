//! Versioned JSON scenarios and the bundled fixtures.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffeo::DiffeoMap;
use crate::distance::{AnsatzConfig, HarmonicNorm};
use crate::error::Result;
use crate::forms::OneFormField;
use crate::hamiltonian::Hamiltonian;
use crate::model::{TorusModel, TorusModelSpec};
use crate::paths::Schedule;
use crate::probes::{self, Disc};
use crate::splitting::{BaseNorm, SeminormSpec, SplittingOperator};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming an extra fixture directory.
pub const FIXTURE_ENV: &str = "SYMPFLUX_FIXTURES";

/// Scenarios compiled into the binary.
pub const BUNDLED: &[(&str, &str)] = &[
    ("empty", include_str!("../fixtures/empty.json")),
    ("torus-delta-sweep", include_str!("../fixtures/torus-delta-sweep.json")),
    ("hamiltonian-targets", include_str!("../fixtures/hamiltonian-targets.json")),
    ("banyaga-vs-hofer", include_str!("../fixtures/banyaga-vs-hofer.json")),
    ("dagger-probe", include_str!("../fixtures/dagger-probe.json")),
    ("rank-probe", include_str!("../fixtures/rank-probe.json")),
    ("nonharmonic", include_str!("../fixtures/nonharmonic.json")),
    ("right-concat", include_str!("../fixtures/right-concat.json")),
    ("product-split", include_str!("../fixtures/product-split.json")),
];

/// A schema violation with a JSON pointer to the offending field.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{pointer}: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

fn schema_err(pointer: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError { pointer: pointer.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    /// Seed of every random family in the scenario.
    pub seed: u64,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_model")]
    pub model: TorusModelSpec,
    /// Optimizer settings for distance estimates; omitted fields take library defaults.
    #[serde(default = "default_ansatz")]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

fn default_model() -> TorusModelSpec {
    TorusModel::standard(1, 32).expect("standard torus").into()
}

/// Reduced optimizer settings used when a scenario gives none.
pub fn default_ansatz() -> AnsatzConfig {
    AnsatzConfig {
        k_modes: 2,
        time_degree: 2,
        steps: 16,
        flow_steps: 16,
        flow_grid: 8,
        seeds: 1,
        stages: 3,
        max_iter: 60,
        ..Default::default()
    }
}

fn one() -> f64 {
    1.0
}

fn hofer() -> BaseNorm {
    BaseNorm::HoferOsc
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MuConfig {
    Zero,
    #[default]
    Hodge,
    PullbackTranslation { shift: Vec<f64> },
    PullbackFlow { hamiltonian: Hamiltonian, #[serde(default = "flow_steps")] steps: usize },
    HamiltonianContraction { hamiltonian: Hamiltonian },
    ExactProjection { hamiltonians: Vec<Hamiltonian> },
}

/// Seminorm `n_{(mu,c)}` as written in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    #[serde(default)]
    pub mu: MuConfig,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "hofer")]
    pub base_norm: BaseNorm,
}

impl Default for SpecConfig {
    fn default() -> Self {
        SpecConfig { mu: MuConfig::Hodge, c: 1.0, base_norm: BaseNorm::HoferOsc }
    }
}

impl SpecConfig {
    pub fn build(&self, model: &TorusModel) -> Result<SeminormSpec> {
        let mu = match &self.mu {
            MuConfig::Zero => SplittingOperator::zero(),
            MuConfig::Hodge => SplittingOperator::hodge(),
            MuConfig::PullbackTranslation { shift } => {
                SplittingOperator::pullback_diff(DiffeoMap::translation(model, shift))
            }
            MuConfig::PullbackFlow { hamiltonian, steps } => {
                SplittingOperator::pullback_diff(probes::hamiltonian_flow(model, hamiltonian, *steps)?)
            }
            MuConfig::HamiltonianContraction { hamiltonian } => {
                SplittingOperator::hamiltonian_contraction(model, hamiltonian.sample(model))?
            }
            MuConfig::ExactProjection { hamiltonians } => {
                SplittingOperator::exact_projection(hamiltonians.iter().map(|h| h.form(model)).collect())?
            }
        };
        SeminormSpec::new(mu, self.c, self.base_norm)
    }

    fn validate(&self, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(schema_err(format!("{at}/c"), "c must be a nonnegative number"));
        }
        match &self.mu {
            MuConfig::PullbackTranslation { shift } => check_len(shift, model.dim(), &format!("{at}/mu/pullback_translation/shift")),
            MuConfig::PullbackFlow { hamiltonian, steps } => {
                check_hamiltonian(hamiltonian, model, &format!("{at}/mu/pullback_flow/hamiltonian"))?;
                check_positive(*steps, &format!("{at}/mu/pullback_flow/steps"))
            }
            MuConfig::HamiltonianContraction { hamiltonian } => {
                check_hamiltonian(hamiltonian, model, &format!("{at}/mu/hamiltonian_contraction/hamiltonian"))
            }
            MuConfig::ExactProjection { hamiltonians } => {
                if hamiltonians.is_empty() {
                    return Err(schema_err(format!("{at}/mu/exact_projection/hamiltonians"), "basis is empty"));
                }
                for (i, h) in hamiltonians.iter().enumerate() {
                    check_hamiltonian(h, model, &format!("{at}/mu/exact_projection/hamiltonians/{i}"))?;
                }
                Ok(())
            }
            MuConfig::Zero | MuConfig::Hodge => Ok(()),
        }
    }
}

fn flow_steps() -> usize {
    16
}

/// A symplectomorphism named in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Identity,
    Translation { shift: Vec<f64> },
    /// Time-one map of an autonomous Hamiltonian.
    Flow { hamiltonian: Hamiltonian, #[serde(default = "flow_steps")] steps: usize },
    /// `parts[0] o parts[1] o ...`.
    Compose { parts: Vec<TargetConfig> },
}

impl TargetConfig {
    pub fn build(&self, model: &TorusModel) -> Result<DiffeoMap> {
        Ok(match self {
            TargetConfig::Identity => DiffeoMap::identity(model),
            TargetConfig::Translation { shift } => DiffeoMap::translation(model, shift),
            TargetConfig::Flow { hamiltonian, steps } => probes::hamiltonian_flow(model, hamiltonian, *steps)?,
            TargetConfig::Compose { parts } => {
                let mut out = DiffeoMap::identity(model);
                for p in parts {
                    out = out.compose(&p.build(model)?);
                }
                out
            }
        })
    }

    fn validate(&self, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
        match self {
            TargetConfig::Identity => Ok(()),
            TargetConfig::Translation { shift } => check_len(shift, model.dim(), &format!("{at}/translation/shift")),
            TargetConfig::Flow { hamiltonian, steps } => {
                check_hamiltonian(hamiltonian, model, &format!("{at}/flow/hamiltonian"))?;
                check_positive(*steps, &format!("{at}/flow/steps"))
            }
            TargetConfig::Compose { parts } => {
                for (i, p) in parts.iter().enumerate() {
                    p.validate(model, &format!("{at}/compose/parts/{i}"))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTarget {
    pub name: String,
    pub target: TargetConfig,
}

/// A 1-form given by harmonic coefficients plus an optional exact part `dH`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormConfig {
    #[serde(default)]
    pub harmonic: Option<Vec<f64>>,
    #[serde(default)]
    pub hamiltonian: Option<Hamiltonian>,
}

impl FormConfig {
    pub fn build(&self, model: &TorusModel) -> OneFormField {
        let mut out = match &self.harmonic {
            Some(h) => OneFormField::constant(model, h),
            None => OneFormField::zero(model),
        };
        if let Some(h) = &self.hamiltonian {
            out = out.add(&h.form(model));
        }
        out
    }

    fn validate(&self, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
        if let Some(h) = &self.harmonic {
            check_len(h, model.dim(), &format!("{at}/harmonic"))?;
        }
        if let Some(h) = &self.hamiltonian {
            check_hamiltonian(h, model, &format!("{at}/hamiltonian"))?;
        }
        Ok(())
    }
}

fn tol_distance() -> f64 {
    1e-3
}

/// `Delta` of translations by `a e_axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaSweep {
    #[serde(default)]
    pub spec: SpecConfig,
    #[serde(default)]
    pub axis: usize,
    pub shifts: Vec<f64>,
    #[serde(default = "tol_distance")]
    pub tolerance: f64,
}

/// `Delta` and the lattice tag of arbitrary targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    #[serde(default)]
    pub spec: SpecConfig,
    pub targets: Vec<NamedTarget>,
}

fn fifty() -> usize {
    50
}

fn two() -> i64 {
    2
}

fn small_amplitude() -> f64 {
    0.05
}

fn path_steps() -> usize {
    16
}

/// Pathwise comparison of Banyaga and Hofer lengths on random Hamiltonian paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanyagaVsHofer {
    #[serde(default = "fifty")]
    pub paths: usize,
    #[serde(default = "two")]
    pub kmax: i64,
    #[serde(default = "small_amplitude")]
    pub amplitude: f64,
    #[serde(default = "path_steps")]
    pub steps: usize,
    #[serde(default)]
    pub harmonic_norm: HarmonicNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaggerProbe {
    #[serde(default)]
    pub spec: SpecConfig,
    #[serde(default)]
    pub translations_only: bool,
    /// When set, the run fails unless the violation flag has this value.
    #[serde(default)]
    pub expect_violation: Option<bool>,
}

fn default_disc() -> Disc {
    Disc { center: vec![0.5, 0.5], radius: 0.4 }
}

fn bump_amplitude() -> f64 {
    0.004
}

fn eight() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankProbe {
    pub beta: FormConfig,
    #[serde(default = "eight")]
    pub k: usize,
    #[serde(default = "default_disc")]
    pub disc: Disc,
    #[serde(default = "bump_amplitude")]
    pub amplitude: f64,
}

fn inner_radius() -> f64 {
    0.15
}

fn tenth() -> f64 {
    0.1
}

fn ten() -> usize {
    10
}

fn ibp_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nonharmonic {
    pub alpha: FormConfig,
    #[serde(default = "default_disc")]
    pub outer: Disc,
    #[serde(default = "inner_radius")]
    pub inner_radius: f64,
    #[serde(default = "tenth")]
    pub bump_amplitude: f64,
    #[serde(default = "ten")]
    pub diagonal_metrics: usize,
    #[serde(default = "ten")]
    pub conformal_metrics: usize,
    #[serde(default = "ibp_tol")]
    pub ibp_tolerance: f64,
}

fn concat_steps() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RightConcat {
    /// Autonomous generator of `Phi`.
    pub hamiltonian: Hamiltonian,
    /// Harmonic class of the constant path `Psi`.
    pub harmonic: Vec<f64>,
    #[serde(default = "concat_steps")]
    pub steps: usize,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "tol_distance")]
    pub min_excess: f64,
    #[serde(default = "prediction_tol")]
    pub prediction_tolerance: f64,
    #[serde(default = "control_tol")]
    pub control_tolerance: f64,
}

fn prediction_tol() -> f64 {
    1e-4
}

fn control_tol() -> f64 {
    1e-6
}

fn twenty() -> usize {
    20
}

fn split_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSplit {
    /// `phi` on the left factor (the scenario model).
    pub phi: TargetConfig,
    /// `psi` on the right factor.
    pub psi: TargetConfig,
    /// Right factor; the scenario model when omitted.
    #[serde(default)]
    pub right_model: Option<TorusModelSpec>,
    #[serde(default)]
    pub spec: SpecConfig,
    #[serde(default = "twenty")]
    pub sample_paths: usize,
    #[serde(default = "split_tol")]
    pub split_tolerance: f64,
    /// Closed-form value of `epsilon(phi)` to compare against.
    #[serde(default)]
    pub expected_epsilon: Option<f64>,
    #[serde(default = "tol_distance")]
    pub tolerance: f64,
    /// Optimizer override for the product estimates.
    #[serde(default)]
    pub ansatz: Option<AnsatzConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    DeltaSweep(DeltaSweep),
    Targets(TargetSet),
    BanyagaVsHofer(BanyagaVsHofer),
    DaggerProbe(DaggerProbe),
    RankProbe(RankProbe),
    Nonharmonic(Nonharmonic),
    RightConcat(RightConcat),
    ProductSplit(ProductSplit),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::DeltaSweep(_) => "delta_sweep",
            Experiment::Targets(_) => "targets",
            Experiment::BanyagaVsHofer(_) => "banyaga_vs_hofer",
            Experiment::DaggerProbe(_) => "dagger_probe",
            Experiment::RankProbe(_) => "rank_probe",
            Experiment::Nonharmonic(_) => "nonharmonic",
            Experiment::RightConcat(_) => "right_concat",
            Experiment::ProductSplit(_) => "product_split",
        }
    }
}

fn check_len(v: &[f64], dim: usize, at: &str) -> std::result::Result<(), SchemaError> {
    if v.len() != dim {
        return Err(schema_err(at, format!("expected {dim} entries, found {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(schema_err(at, "entries must be finite"));
    }
    Ok(())
}

fn check_positive(n: usize, at: &str) -> std::result::Result<(), SchemaError> {
    if n == 0 {
        return Err(schema_err(at, "must be positive"));
    }
    Ok(())
}

fn check_tol(x: f64, at: &str) -> std::result::Result<(), SchemaError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(schema_err(at, "tolerance must be positive"));
    }
    Ok(())
}

fn check_hamiltonian(h: &Hamiltonian, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
    match h {
        Hamiltonian::Mode { freq, .. } if freq.len() != model.dim() => {
            Err(schema_err(format!("{at}/freq"), format!("expected {} entries", model.dim())))
        }
        Hamiltonian::Bump { center, radius, .. } => {
            check_len(center, model.dim(), &format!("{at}/center"))?;
            if !(*radius > 0.0) {
                return Err(schema_err(format!("{at}/radius"), "radius must be positive"));
            }
            Ok(())
        }
        Hamiltonian::Sum { terms } => {
            for (i, t) in terms.iter().enumerate() {
                check_hamiltonian(t, model, &format!("{at}/terms/{i}"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_disc(disc: &Disc, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
    check_len(&disc.center, model.dim(), &format!("{at}/center"))?;
    let lmin = model.periods().iter().copied().fold(f64::INFINITY, f64::min);
    if !(disc.radius > 0.0) || disc.radius >= 0.5 * lmin {
        return Err(schema_err(format!("{at}/radius"), "radius must lie in (0, L/2)"));
    }
    Ok(())
}

fn check_ansatz(cfg: &AnsatzConfig, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
    if 2 * cfg.k_modes >= model.grid_res() {
        return Err(schema_err(format!("{at}/k_modes"), "frequencies must be resolved by the grid"));
    }
    check_positive(cfg.steps, &format!("{at}/steps"))?;
    check_positive(cfg.flow_steps, &format!("{at}/flow_steps"))?;
    check_positive(cfg.flow_grid, &format!("{at}/flow_grid"))?;
    check_positive(cfg.stages, &format!("{at}/stages"))?;
    check_tol(cfg.feasibility_tol, &format!("{at}/feasibility_tol"))
}

fn build_model(spec: &TorusModelSpec, at: &str) -> std::result::Result<TorusModel, SchemaError> {
    TorusModel::try_from(spec.clone()).map_err(|e| schema_err(at, e.to_string()))
}

impl Scenario {
    pub fn model(&self) -> Result<TorusModel> {
        TorusModel::try_from(self.model.clone())
    }

    /// Checks that do not fit the serde schema: versions, lengths and ranges.
    pub fn validate(&self) -> std::result::Result<(), SchemaError> {
        if self.version != SCHEMA_VERSION {
            return Err(schema_err("/version", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.version)));
        }
        if self.name.trim().is_empty() {
            return Err(schema_err("/name", "name must not be empty"));
        }
        let model = build_model(&self.model, "/model")?;
        check_ansatz(&self.ansatz, &model, "/ansatz")?;
        for (i, e) in self.experiments.iter().enumerate() {
            let at = format!("/experiments/{i}/{}", e.kind());
            self.validate_experiment(e, &model, &at)?;
        }
        Ok(())
    }

    fn validate_experiment(&self, e: &Experiment, model: &TorusModel, at: &str) -> std::result::Result<(), SchemaError> {
        match e {
            Experiment::DeltaSweep(x) => {
                x.spec.validate(model, &format!("{at}/spec"))?;
                if x.spec.c <= 0.0 {
                    return Err(schema_err(format!("{at}/spec/c"), "distance to Ham needs c > 0"));
                }
                if x.axis >= model.dim() {
                    return Err(schema_err(format!("{at}/axis"), "axis out of range"));
                }
                if x.shifts.is_empty() || x.shifts.iter().any(|a| !a.is_finite()) {
                    return Err(schema_err(format!("{at}/shifts"), "need at least one finite shift"));
                }
                check_tol(x.tolerance, &format!("{at}/tolerance"))
            }
            Experiment::Targets(x) => {
                x.spec.validate(model, &format!("{at}/spec"))?;
                if x.spec.c <= 0.0 {
                    return Err(schema_err(format!("{at}/spec/c"), "distance to Ham needs c > 0"));
                }
                for (i, t) in x.targets.iter().enumerate() {
                    t.target.validate(model, &format!("{at}/targets/{i}/target"))?;
                }
                Ok(())
            }
            Experiment::BanyagaVsHofer(x) => {
                check_positive(x.paths, &format!("{at}/paths"))?;
                check_positive(x.steps, &format!("{at}/steps"))?;
                if x.kmax < 1 || 2 * x.kmax as usize >= model.grid_res() {
                    return Err(schema_err(format!("{at}/kmax"), "kmax must be resolved by the grid"));
                }
                Ok(())
            }
            Experiment::DaggerProbe(x) => x.spec.validate(model, &format!("{at}/spec")),
            Experiment::RankProbe(x) => {
                x.beta.validate(model, &format!("{at}/beta"))?;
                check_disc(&x.disc, model, &format!("{at}/disc"))?;
                if x.k == 0 || x.k > 16 {
                    return Err(schema_err(format!("{at}/k"), "k must lie in 1..=16"));
                }
                check_tol(x.amplitude, &format!("{at}/amplitude"))
            }
            Experiment::Nonharmonic(x) => {
                x.alpha.validate(model, &format!("{at}/alpha"))?;
                check_disc(&x.outer, model, &format!("{at}/outer"))?;
                if !(x.inner_radius > 0.0 && x.inner_radius < x.outer.radius) {
                    return Err(schema_err(format!("{at}/inner_radius"), "inner disc must lie inside the outer disc"));
                }
                check_tol(x.ibp_tolerance, &format!("{at}/ibp_tolerance"))
            }
            Experiment::RightConcat(x) => {
                check_hamiltonian(&x.hamiltonian, model, &format!("{at}/hamiltonian"))?;
                check_len(&x.harmonic, model.dim(), &format!("{at}/harmonic"))?;
                check_positive(x.steps, &format!("{at}/steps"))?;
                x.schedule.validate().map_err(|e| schema_err(format!("{at}/schedule"), e.to_string()))?;
                check_tol(x.prediction_tolerance, &format!("{at}/prediction_tolerance"))?;
                check_tol(x.control_tolerance, &format!("{at}/control_tolerance"))
            }
            Experiment::ProductSplit(x) => {
                let right = match &x.right_model {
                    Some(r) => build_model(r, &format!("{at}/right_model"))?,
                    None => model.clone(),
                };
                if model.grid_res() != right.grid_res() {
                    return Err(schema_err(format!("{at}/right_model/grid_res"), "factors need the same grid resolution"));
                }
                x.phi.validate(model, &format!("{at}/phi"))?;
                x.psi.validate(&right, &format!("{at}/psi"))?;
                x.spec.validate(model, &format!("{at}/spec"))?;
                if x.spec.mu != MuConfig::Hodge || x.spec.c <= 0.0 {
                    return Err(schema_err(format!("{at}/spec"), "the split obstruction needs mu = hodge and c > 0"));
                }
                if let Some(a) = &x.ansatz {
                    let product = model.product(&right).map_err(|e| schema_err(format!("{at}/right_model"), e.to_string()))?;
                    check_ansatz(a, &product, &format!("{at}/ansatz"))?;
                }
                check_tol(x.split_tolerance, &format!("{at}/split_tolerance"))?;
                check_tol(x.tolerance, &format!("{at}/tolerance"))
            }
        }
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> std::result::Result<Scenario, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sc: Scenario = serde_path_to_error::deserialize(de)
        .map_err(|e| schema_err(pointer_of(e.path()), e.inner().to_string()))?;
    sc.validate()?;
    Ok(sc)
}

/// Where a scenario was found.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File(PathBuf),
    Bundled(&'static str),
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::File(p) => write!(f, "{}", p.display()),
            Source::Bundled(n) => write!(f, "bundled:{n}"),
        }
    }
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Resolves a path, a fixture in `fixture_dir`, or a bundled fixture name, in that order.
pub fn resolve(name: &str, fixture_dir: Option<&Path>) -> std::io::Result<(Source, String)> {
    let p = Path::new(name);
    if p.is_file() {
        return Ok((Source::File(p.to_path_buf()), std::fs::read_to_string(p)?));
    }
    if let Some(dir) = fixture_dir {
        for candidate in [dir.join(name), dir.join(format!("{name}.json"))] {
            if candidate.is_file() {
                let text = std::fs::read_to_string(&candidate)?;
                return Ok((Source::File(candidate), text));
            }
        }
    }
    if let Some((n, t)) = BUNDLED.iter().find(|(n, _)| *n == name) {
        return Ok((Source::Bundled(n), t.to_string()));
    }
    Err(std::io::Error::new(std::io::ErrorKind::NotFound, format!("no scenario file or fixture named {name:?}")))
}

/// Fixture names: bundled ones first, then `*.json` files in `fixture_dir`.
pub fn list_fixtures(fixture_dir: Option<&Path>) -> std::io::Result<Vec<(String, Source)>> {
    let mut out: Vec<(String, Source)> = BUNDLED.iter().map(|(n, _)| (n.to_string(), Source::Bundled(n))).collect();
    if let Some(dir) = fixture_dir {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for f in files {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.push((stem, Source::File(f)));
        }
    }
    Ok(out)
}
