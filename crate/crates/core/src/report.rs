//! Running scenarios, the JSON report and flat CSV tables for plotting.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{self, AnsatzConfig, DistanceEstimate};
use crate::error::Result;
use crate::hamiltonian;
use crate::lattice::{self, FluxLattice, HamiltonianTag, ProductModel};
use crate::model::TorusModel;
use crate::paths::IsotopyPath;
use crate::probes::{self, ConcatExcess, DaggerProbeResult, NonharmonicResult, RankProbeResult, SplitReport};
use crate::scenario::{
    BanyagaVsHofer, DaggerProbe, DeltaSweep, Experiment, MuConfig, Nonharmonic, ProductSplit, RankProbe, RightConcat,
    Scenario, TargetSet, SCHEMA_VERSION,
};
use crate::splitting::{BaseNorm, SeminormSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaRow {
    pub a: f64,
    pub flux: Vec<f64>,
    pub tag: HamiltonianTag,
    pub lower: f64,
    pub upper: f64,
    /// `c min(a, 1 - a)` on the unit standard torus with the Hodge splitting.
    pub closed_form: Option<f64>,
    pub estimate: DistanceEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetRow {
    pub name: String,
    pub flux: Vec<f64>,
    pub tag: HamiltonianTag,
    pub lower: f64,
    pub upper: f64,
    pub estimate: DistanceEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LengthRow {
    pub path: usize,
    /// `l^B`.
    pub banyaga: f64,
    /// `int osc(H_t) dt`.
    pub hofer: f64,
    /// `l_{(mu,0)}` and `l_{(mu,1)}` for the Hodge splitting.
    pub l_mu0: f64,
    pub l_mu1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcatResult {
    pub demo: ConcatExcess,
    /// Same computation with `Phi` the null path.
    pub control: ConcatExcess,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductResult {
    pub split: SplitReport,
    /// Flux of the product map computed on the product torus.
    pub product_map_flux: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentResult {
    DeltaSweep(Vec<DeltaRow>),
    Targets(Vec<TargetRow>),
    BanyagaVsHofer(Vec<LengthRow>),
    DaggerProbe(DaggerProbeResult),
    RankProbe(RankProbeResult),
    Nonharmonic(NonharmonicResult),
    RightConcat(ConcatResult),
    ProductSplit(ProductResult),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub seed: u64,
    pub result: Option<ExperimentResult>,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub threads: usize,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            threads: rayon::current_num_threads(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub scenario: Scenario,
    pub environment: Environment,
    pub experiments: Vec<ExperimentReport>,
    pub passed: bool,
    /// Names of the failing checks.
    pub failing: Vec<String>,
    pub wall_time: f64,
}

impl Report {
    /// The report as JSON with every `wall_time` field removed.
    pub fn payload(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        strip_times(&mut v);
        v
    }

    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.experiments.iter().flat_map(|e| e.checks.iter())
    }
}

fn strip_times(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("wall_time");
            map.values_mut().for_each(strip_times);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}

/// Seed of the `i`-th experiment.
pub fn experiment_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs every experiment in order; failures of one experiment are recorded, not propagated.
pub fn run_scenario(sc: &Scenario) -> Result<Report> {
    let start = Instant::now();
    let model = sc.model()?;
    let mut experiments = Vec::with_capacity(sc.experiments.len());
    for (i, e) in sc.experiments.iter().enumerate() {
        let t0 = Instant::now();
        let seed = experiment_seed(sc.seed, i);
        let cfg = AnsatzConfig { seed, ..sc.ansatz.clone() };
        log::info!("{}: experiment {i} ({})", sc.name, e.kind());
        let outcome = run_experiment(e, &model, &cfg, seed);
        let (result, error, checks) = match outcome {
            Ok((r, c)) => (Some(r), None, c),
            Err(err) => {
                let name = format!("{}[{i}]: runs without error", e.kind());
                (None, Some(err.to_string()), vec![check(name, false, err.to_string())])
            }
        };
        experiments.push(ExperimentReport {
            kind: e.kind().into(),
            seed,
            result,
            error,
            checks,
            wall_time: t0.elapsed().as_secs_f64(),
        });
    }
    let failing: Vec<String> =
        experiments.iter().flat_map(|e| e.checks.iter()).filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    Ok(Report {
        version: SCHEMA_VERSION,
        scenario: sc.clone(),
        environment: Environment::current(),
        experiments,
        passed: failing.is_empty(),
        failing,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn run_experiment(
    e: &Experiment,
    model: &TorusModel,
    cfg: &AnsatzConfig,
    seed: u64,
) -> Result<(ExperimentResult, Vec<Check>)> {
    match e {
        Experiment::DeltaSweep(x) => delta_sweep(x, model, cfg),
        Experiment::Targets(x) => targets(x, model, cfg),
        Experiment::BanyagaVsHofer(x) => banyaga_vs_hofer(x, model, seed),
        Experiment::DaggerProbe(x) => dagger(x, model, seed),
        Experiment::RankProbe(x) => rank(x, model),
        Experiment::Nonharmonic(x) => nonharmonic(x, model, seed),
        Experiment::RightConcat(x) => right_concat(x, model),
        Experiment::ProductSplit(x) => product_split(x, model, cfg, seed),
    }
}

fn unit_standard(model: &TorusModel) -> bool {
    TorusModel::standard(model.half_dim(), model.grid_res()).is_ok_and(|m| m == *model)
}

fn delta_sweep(x: &DeltaSweep, model: &TorusModel, cfg: &AnsatzConfig) -> Result<(ExperimentResult, Vec<Check>)> {
    let spec = x.spec.build(model)?;
    let lat = FluxLattice::torus(model)?;
    let closed = unit_standard(model) && x.spec.mu == MuConfig::Hodge;
    let rows = x
        .shifts
        .par_iter()
        .map(|&a| {
            let mut shift = vec![0.0; model.dim()];
            shift[x.axis] = a;
            let map = crate::DiffeoMap::translation(model, &shift);
            let flux = lattice::map_flux(&map);
            let tag = lat.classify(&flux.coeffs)?;
            let est = distance::delta_to_ham(model, &flux, &spec, &lat, cfg)?;
            let fr = a.rem_euclid(1.0);
            Ok(DeltaRow {
                a,
                flux: flux.coeffs,
                tag,
                lower: est.lower,
                upper: est.upper,
                closed_form: closed.then(|| x.spec.c * fr.min(1.0 - fr)),
                estimate: est,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    for r in &rows {
        let gap = r.upper - r.lower;
        checks.push(check(
            format!("delta_sweep[a={}]: upper meets lower", r.a),
            gap.abs() <= x.tolerance,
            format!("lower {:.9} upper {:.9}", r.lower, r.upper),
        ));
        if let Some(cf) = r.closed_form {
            let err = (r.lower - cf).abs().max((r.upper - cf).abs());
            checks.push(check(
                format!("delta_sweep[a={}]: interval matches closed form", r.a),
                err <= x.tolerance,
                format!("closed form {cf:.9}, max deviation {err:.3e}"),
            ));
        }
    }
    Ok((ExperimentResult::DeltaSweep(rows), checks))
}

fn targets(x: &TargetSet, model: &TorusModel, cfg: &AnsatzConfig) -> Result<(ExperimentResult, Vec<Check>)> {
    let spec = x.spec.build(model)?;
    let lat = FluxLattice::torus(model)?;
    let rows = x
        .targets
        .par_iter()
        .map(|t| {
            let map = t.target.build(model)?;
            let flux = lattice::map_flux(&map);
            let tag = lattice::is_hamiltonian_endpoint(&flux, &lat)?;
            let est = distance::delta_to_ham(model, &flux, &spec, &lat, cfg)?;
            Ok(TargetRow { name: t.name.clone(), flux: flux.coeffs, tag, lower: est.lower, upper: est.upper, estimate: est })
        })
        .collect::<Result<Vec<_>>>()?;
    let checks = rows
        .iter()
        .flat_map(|r| {
            let zero = r.lower <= lattice::HAMILTONIAN_TOL;
            [
                check(
                    format!("targets[{}]: vanishing lower bound iff tagged Hamiltonian", r.name),
                    zero == r.tag.is_yes(),
                    format!("lower {:.3e}, tag {:?}", r.lower, r.tag),
                ),
                check(
                    format!("targets[{}]: lower <= upper", r.name),
                    r.lower <= r.upper + 1e-8,
                    format!("lower {:.9} upper {:.9}", r.lower, r.upper),
                ),
            ]
        })
        .collect();
    Ok((ExperimentResult::Targets(rows), checks))
}

fn banyaga_vs_hofer(x: &BanyagaVsHofer, model: &TorusModel, seed: u64) -> Result<(ExperimentResult, Vec<Check>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = (0..x.paths)
        .map(|_| hamiltonian::random_path(model, &mut rng, x.steps, x.kmax, x.amplitude, 0.0))
        .collect::<Result<Vec<IsotopyPath>>>()?;
    let mu0 = SeminormSpec::hodge(0.0, BaseNorm::HoferOsc);
    let mu1 = SeminormSpec::hodge(1.0, BaseNorm::HoferOsc);
    let rows = paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(LengthRow {
                path: i,
                banyaga: distance::length_banyaga(p, x.harmonic_norm)?,
                hofer: p.integrate(|a| Ok(a.primitive_osc()))?,
                l_mu0: distance::length(p, &mu0)?,
                l_mu1: distance::length(p, &mu1)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chain = rows.iter().filter(|r| r.l_mu0 > r.l_mu1).count();
    let bh = rows.iter().filter(|r| r.banyaga > r.hofer + 1e-10).count();
    let dev = rows.iter().map(|r| (r.banyaga - r.hofer).abs()).fold(0.0, f64::max);
    let checks = vec![
        check("banyaga_vs_hofer: l_(mu,0) <= l_(mu,1) on every path", chain == 0, format!("{chain} violations")),
        check("banyaga_vs_hofer: l^B <= l^H on every path", bh == 0, format!("{bh} violations")),
        check("banyaga_vs_hofer: l^B = l^H on Hamiltonian paths", dev <= 1e-10, format!("max deviation {dev:.3e}")),
    ];
    Ok((ExperimentResult::BanyagaVsHofer(rows), checks))
}

fn dagger(x: &DaggerProbe, model: &TorusModel, seed: u64) -> Result<(ExperimentResult, Vec<Check>)> {
    let spec = x.spec.build(model)?;
    let maps = probes::dagger_maps(model, seed, x.translations_only)?;
    let forms = probes::dagger_forms(model, seed);
    let r = probes::dagger_defect(&spec, &maps, &forms)?;
    let mut checks = vec![check(
        "dagger_probe: at least 100 pairs",
        r.samples.len() >= 100,
        format!("{} pairs", r.samples.len()),
    )];
    if let Some(expect) = x.expect_violation {
        checks.push(check(
            "dagger_probe: violation flag as expected",
            r.violates_dagger == expect,
            format!(
                "violates {}, sup {}, {} witnesses",
                r.violates_dagger,
                r.sup_estimate.map_or("unbounded".into(), |v| format!("{v:.6e}")),
                r.witnesses.len()
            ),
        ));
    }
    Ok((ExperimentResult::DaggerProbe(r), checks))
}

fn rank(x: &RankProbe, model: &TorusModel) -> Result<(ExperimentResult, Vec<Check>)> {
    let beta = x.beta.build(model);
    let r = probes::pullback_independence_rank(&beta, x.k, &x.disc, x.amplitude)?;
    let checks = r
        .steps
        .iter()
        .map(|s| {
            check(
                format!("rank_probe[k={}]: full rank", s.k),
                s.rank == s.k && s.min_singular > 1e-8,
                format!("rank {}, min singular value {:.3e}", s.rank, s.min_singular),
            )
        })
        .collect();
    Ok((ExperimentResult::RankProbe(r), checks))
}

fn nonharmonic(x: &Nonharmonic, model: &TorusModel, seed: u64) -> Result<(ExperimentResult, Vec<Check>)> {
    let alpha = x.alpha.build(model);
    let metrics = probes::sample_metrics(model, x.diagonal_metrics, x.conformal_metrics, seed);
    let r = probes::construct_nonharmonic_closed_form(&alpha, &x.outer, x.inner_radius, x.bump_amplitude, &metrics)?;
    let checks = r
        .certificates
        .iter()
        .map(|c| {
            check(
                format!("nonharmonic[{}]: positive certificate and integration by parts", c.metric),
                c.certificate > 0.0 && c.codiff_norm > 0.0 && c.ibp_residual <= x.ibp_tolerance,
                format!("certificate {:.6e}, |delta| {:.6e}, ibp {:.3e}", c.certificate, c.codiff_norm, c.ibp_residual),
            )
        })
        .collect();
    Ok((ExperimentResult::Nonharmonic(r), checks))
}

fn right_concat(x: &RightConcat, model: &TorusModel) -> Result<(ExperimentResult, Vec<Check>)> {
    let phi = IsotopyPath::constant(model, x.steps, &x.hamiltonian.form(model))?;
    let demo = probes::nonminimizing_right_concat_demo(&phi, &x.harmonic, x.schedule)?;
    let control = probes::right_concat_excess(&IsotopyPath::null(model, x.steps), &x.harmonic, x.schedule)?;
    let checks = vec![
        check(
            "right_concat: strict excess",
            demo.right_excess >= x.min_excess,
            format!("excess {:.9}", demo.right_excess),
        ),
        check(
            "right_concat: excess matches osc prediction",
            (demo.right_excess - demo.predicted).abs() <= x.prediction_tolerance,
            format!("excess {:.9}, predicted {:.9}", demo.right_excess, demo.predicted),
        ),
        check(
            "right_concat: left concatenation is additive",
            demo.left_excess.abs() <= x.control_tolerance,
            format!("left excess {:.3e}", demo.left_excess),
        ),
        check(
            "right_concat: no excess for the null path",
            control.right_excess.abs() <= x.control_tolerance,
            format!("control excess {:.3e}", control.right_excess),
        ),
    ];
    Ok((ExperimentResult::RightConcat(ConcatResult { demo, control }), checks))
}

fn product_split(
    x: &ProductSplit,
    model: &TorusModel,
    cfg: &AnsatzConfig,
    seed: u64,
) -> Result<(ExperimentResult, Vec<Check>)> {
    let right = match &x.right_model {
        Some(r) => TorusModel::try_from(r.clone())?,
        None => model.clone(),
    };
    let product = ProductModel::new(model, &right)?;
    let phi = x.phi.build(model)?;
    let psi = x.psi.build(&right)?;
    let left_spec = x.spec.build(model)?;
    let right_spec = x.spec.build(&right)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..x.sample_paths)
        .map(|_| hamiltonian::random_path(&right, &mut rng, 16, 2, 0.05, 0.3))
        .collect::<Result<Vec<_>>>()?;
    let cfg = match &x.ansatz {
        Some(a) => AnsatzConfig { seed: cfg.seed, ..a.clone() },
        None => cfg.clone(),
    };
    let split = probes::product_split_obstruction(&phi, &psi, &product, &left_spec, &right_spec, &cfg, &samples)?;
    let pm = lattice::map_flux(&product.product_map(&phi, &psi)).coeffs;
    let add_err = pm.iter().zip(&split.product_flux).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut checks = vec![
        check(
            "product_split: split-length identity",
            split.split_length_deviation <= x.split_tolerance,
            format!("max deviation {:.3e} over {} paths", split.split_length_deviation, samples.len()),
        ),
        check(
            "product_split: flux of the product map is the direct sum",
            add_err <= 1e-8,
            format!("max deviation {add_err:.3e}"),
        ),
        check(
            "product_split: implication consistent",
            split.implication_consistent,
            format!(
                "product tag {:?}, Delta(psi) <= {:.6}, epsilon >= {:.6}",
                split.product_hamiltonian, split.delta_psi.upper, split.epsilon.lower
            ),
        ),
    ];
    if let Some(e) = x.expected_epsilon {
        let err = (split.epsilon.lower - e).abs().max((split.epsilon.upper - e).abs());
        checks.push(check(
            "product_split: epsilon matches expected value",
            err <= x.tolerance,
            format!("epsilon in [{:.9}, {:.9}], expected {e}", split.epsilon.lower, split.epsilon.upper),
        ));
    }
    Ok((ExperimentResult::ProductSplit(ProductResult { split, product_map_flux: pm }), checks))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// One CSV table per experiment with a result, named `NN-kind.csv`.
pub fn plotdata(report: &Report) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, e) in report.experiments.iter().enumerate() {
        let Some(result) = &e.result else { continue };
        let mut csv = format!("# scenario {}, experiment {i} ({}), seed {}\n", report.scenario.name, e.kind, e.seed);
        match result {
            ExperimentResult::DeltaSweep(rows) => {
                csv.push_str("# a: translation length; lower, upper: certified interval for Delta\n");
                csv.push_str("a,lower,upper\n");
                for r in rows {
                    csv.push_str(&format!("{},{},{}\n", r.a, r.lower, r.upper));
                }
            }
            ExperimentResult::Targets(rows) => {
                csv.push_str("# flux: space separated coefficients; hamiltonian: lattice tag\n");
                csv.push_str("name,flux,hamiltonian,lower,upper\n");
                for r in rows {
                    csv.push_str(&format!("{},{},{},{},{}\n", r.name, fmt_vec(&r.flux), r.tag.is_yes(), r.lower, r.upper));
                }
            }
            ExperimentResult::BanyagaVsHofer(rows) => {
                csv.push_str("# per-path lengths: Banyaga, Hofer, Hodge splitting with c = 0 and c = 1\n");
                csv.push_str("path,banyaga,hofer,l_mu0,l_mu1\n");
                for r in rows {
                    csv.push_str(&format!("{},{},{},{},{}\n", r.path, r.banyaga, r.hofer, r.l_mu0, r.l_mu1));
                }
            }
            ExperimentResult::DaggerProbe(r) => {
                csv.push_str("# ratio: n(mu(phi^* alpha)) / n(mu(alpha)); empty when the denominator vanishes\n");
                csv.push_str("map,form,numerator,denominator,ratio\n");
                for s in &r.samples {
                    let ratio = s.ratio.map(|v| v.to_string()).unwrap_or_default();
                    csv.push_str(&format!("{},{},{},{},{}\n", s.map, s.form, s.numerator, s.denominator, ratio));
                }
            }
            ExperimentResult::RankProbe(r) => {
                csv.push_str("# numerical rank of the first k pullbacks and the smallest singular value\n");
                csv.push_str("k,rank,min_singular\n");
                for s in &r.steps {
                    csv.push_str(&format!("{},{},{}\n", s.k, s.rank, s.min_singular));
                }
            }
            ExperimentResult::Nonharmonic(r) => {
                csv.push_str("# per-metric certificate <df', alpha''>_g, |delta_g alpha''| and integration by parts residual\n");
                csv.push_str("metric,certificate,codiff_norm,ibp_residual\n");
                for c in &r.certificates {
                    csv.push_str(&format!("{},{},{},{}\n", c.metric, c.certificate, c.codiff_norm, c.ibp_residual));
                }
            }
            ExperimentResult::RightConcat(r) => {
                csv.push_str("# case: demo or null-path control\n");
                csv.push_str("case,right_excess,left_excess,predicted\n");
                for (name, c) in [("demo", &r.demo), ("control", &r.control)] {
                    csv.push_str(&format!("{name},{},{},{}\n", c.right_excess, c.left_excess, c.predicted));
                }
            }
            ExperimentResult::ProductSplit(r) => {
                csv.push_str("# epsilon: Delta(phi^-1 x 1); delta_psi: Delta(psi)\n");
                csv.push_str("quantity,lower,upper\n");
                csv.push_str(&format!("epsilon,{},{}\n", r.split.epsilon.lower, r.split.epsilon.upper));
                csv.push_str(&format!("delta_psi,{},{}\n", r.split.delta_psi.lower, r.split.delta_psi.upper));
            }
        }
        out.push((format!("{i:02}-{}.csv", e.kind), csv));
    }
    out
}
