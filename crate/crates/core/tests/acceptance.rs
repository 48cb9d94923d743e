//! Acceptance suite: one PASS or FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sympflux::distance::{self, delta_to_ham, gradient_check, flux_penalty, length, EndpointPenalty, LengthModel};
use sympflux::hamiltonian::{random_path, random_separable_path};
use sympflux::lattice::{map_flux, HAMILTONIAN_TOL};
use sympflux::probes::hamiltonian_flow;
use sympflux::report::{ExperimentResult, Report};
use sympflux::scenario::{bundled, BUNDLED};
use sympflux::{
    AnsatzConfig, BaseNorm, DiffeoMap, FluxLattice, Hamiltonian, HarmonicNorm, IsotopyPath, OneFormField, PathAnsatz, Schedule,
    SeminormSpec, SplittingOperator, TorusModel,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn run_fixture(name: &str) -> Result<Report, String> {
    let text = bundled(name).ok_or_else(|| format!("no bundled fixture {name}"))?;
    let sc = sympflux::parse_scenario(text).map_err(|e| e.to_string())?;
    let r = sympflux::run_scenario(&sc).map_err(|e| e.to_string())?;
    if let Some(e) = r.experiments.iter().find_map(|e| e.error.clone()) {
        return Err(format!("{name}: {e}"));
    }
    Ok(r)
}

fn small_cfg() -> AnsatzConfig {
    AnsatzConfig { k_modes: 2, time_degree: 2, steps: 16, flow_steps: 16, flow_grid: 8, seeds: 1, stages: 3, max_iter: 60, ..Default::default() }
}

fn hodge1() -> SeminormSpec {
    SeminormSpec::hodge(1.0, BaseNorm::HoferOsc)
}

fn hodge_exactness() -> Outcome {
    let m = TorusModel::standard(1, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let forms: Vec<OneFormField> = (0..200)
        .map(|_| {
            let h = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            OneFormField::constant(&m, &h).add(&Hamiltonian::random_trig(&mut rng, 2, 6, 1.0).form(&m))
        })
        .collect();
    // timed: decomposition and checks, not form synthesis
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, a) in forms.iter().enumerate() {
        let split = a.hodge_decompose().map_err(|e| e.to_string())?;
        let res = a.reconstruction_residual(&split);
        worst = worst.max(res);
        ensure(res <= 1e-10, format!("form {i}: residual {res:.3e}"))?;
        for k in 0..2 {
            let c = a.component(k);
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            ensure(split.harmonic[k] == mean, format!("form {i}: harmonic {} != mean {mean}", split.harmonic[k]))?;
        }
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 5.0, format!("runtime {t:.2} s"))?;
    Ok(format!("200 forms at 64^2, worst residual {worst:.2e}, {t:.2} s"))
}

fn left_concat_additivity() -> Outcome {
    let m = TorusModel::standard(1, 32).unwrap();
    let spec = hodge1();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let schedules = [Schedule::default(), Schedule::septic()];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let phi = random_separable_path(&m, &mut rng, 256, 2, 0.05, 0.3).map_err(|e| e.to_string())?;
        let psi = random_separable_path(&m, &mut rng, 256, 2, 0.05, 0.3).map_err(|e| e.to_string())?;
        let sum = length(&phi, &spec).unwrap() + length(&psi, &spec).unwrap();
        for s in schedules {
            let cat = IsotopyPath::concat_left(&phi, &psi, s).map_err(|e| e.to_string())?;
            let rel = (length(&cat, &spec).unwrap() - sum).abs() / sum;
            worst = worst.max(rel);
            ensure(rel <= 1e-6, format!("pair {i}, {s:?}: relative error {rel:.3e}"))?;
        }
    }
    // general polynomial-in-time Hamiltonians, reported only
    let mut general = 0.0f64;
    for _ in 0..5 {
        let phi = random_path(&m, &mut rng, 256, 2, 0.05, 0.3).unwrap();
        let psi = random_path(&m, &mut rng, 256, 2, 0.05, 0.3).unwrap();
        let sum = length(&phi, &spec).unwrap() + length(&psi, &spec).unwrap();
        let cat = IsotopyPath::concat_left(&phi, &psi, Schedule::default()).unwrap();
        general = general.max((length(&cat, &spec).unwrap() - sum).abs() / sum);
    }
    Ok(format!("50 pairs x 2 schedules, worst relative error {worst:.2e} (general paths, not asserted: {general:.2e})"))
}

fn delta_closed_form() -> Outcome {
    let start = Instant::now();
    let r = run_fixture("torus-delta-sweep")?;
    let mut n = 0;
    let mut worst = 0.0f64;
    for e in &r.experiments {
        let Some(ExperimentResult::DeltaSweep(rows)) = &e.result else { continue };
        for row in rows {
            let expect = row.a.min(1.0 - row.a);
            let dev = (row.lower - expect).abs().max((row.upper - expect).abs());
            worst = worst.max(dev).max((row.upper - row.lower).abs());
            ensure(dev <= 1e-3, format!("a = {}: [{}, {}] vs {expect}", row.a, row.lower, row.upper))?;
            ensure((row.upper - row.lower).abs() <= 1e-3, format!("a = {}: lower {} upper {}", row.a, row.lower, row.upper))?;
            n += 1;
        }
    }
    ensure(n == 9, format!("{n} shifts instead of 9"))?;
    let t = start.elapsed().as_secs_f64();
    ensure(t < 60.0, format!("runtime {t:.1} s"))?;
    Ok(format!("9 shifts, worst deviation {worst:.2e}, {t:.1} s"))
}

fn degeneracy_is_hamiltonian() -> Outcome {
    let mut rows = 0;
    let mut zero = 0;
    for (name, _) in BUNDLED {
        let text = bundled(name).unwrap();
        let sc = sympflux::parse_scenario(text).map_err(|e| e.to_string())?;
        if !sc.experiments.iter().any(|e| matches!(e.kind(), "targets" | "delta_sweep")) {
            continue;
        }
        let r = run_fixture(name)?;
        for e in &r.experiments {
            let pairs: Vec<(String, f64, bool)> = match &e.result {
                Some(ExperimentResult::Targets(t)) => t.iter().map(|r| (r.name.clone(), r.lower, r.tag.is_yes())).collect(),
                Some(ExperimentResult::DeltaSweep(t)) => t.iter().map(|r| (format!("a={}", r.a), r.lower, r.tag.is_yes())).collect(),
                _ => continue,
            };
            for (target, lower, yes) in pairs {
                rows += 1;
                let vanishes = lower <= HAMILTONIAN_TOL;
                zero += vanishes as usize;
                ensure(vanishes == yes, format!("{name}/{target}: lower {lower:.3e}, Hamiltonian tag {yes}"))?;
            }
        }
    }
    ensure(zero > 0, "no target with vanishing lower bound".into())?;
    Ok(format!("{rows} bundled targets, {zero} with vanishing lower bound, all tagged Hamiltonian"))
}

fn unit_lattice() -> Outcome {
    let m = TorusModel::standard(1, 32).unwrap();
    let l = FluxLattice::torus(&m).map_err(|e| e.to_string())?;
    let expected = [[0.0, 1.0], [-1.0, 0.0]];
    let mut worst = 0.0f64;
    for (g, e) in l.generators.iter().zip(expected) {
        for k in 0..2 {
            worst = worst.max((g.coeffs[k] - e[k]).abs());
        }
    }
    ensure(worst <= 1e-8, format!("generator error {worst:.3e}"))?;
    let eps = l.epsilon0();
    ensure((eps - 1.0).abs() <= 1e-14, format!("epsilon0 = {eps}"))?;
    Ok(format!("generator error {worst:.1e}, epsilon0 = {eps}"))
}

fn comparison_chain() -> Outcome {
    let m = TorusModel::standard(1, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = Hamiltonian::random_trig(&mut rng, 2, 2, 1.0).sample(&m);
    let mus = [
        SplittingOperator::hodge(),
        SplittingOperator::pullback_diff(DiffeoMap::translation(&m, &[0.31, 0.17])),
        SplittingOperator::hamiltonian_contraction(&m, h).unwrap(),
        SplittingOperator::zero(),
    ];
    let mut violations = 0;
    for i in 0..100 {
        let drift = if i % 2 == 0 { 0.0 } else { 0.3 };
        let p = random_path(&m, &mut rng, 16, 2, 0.05, drift).map_err(|e| e.to_string())?;
        for mu in &mus {
            let l0 = length(&p, &SeminormSpec::new(mu.clone(), 0.0, BaseNorm::HoferOsc).unwrap()).unwrap();
            let l1 = length(&p, &SeminormSpec::new(mu.clone(), 1.0, BaseNorm::HoferOsc).unwrap()).unwrap();
            violations += (l0 > l1) as usize;
        }
    }
    ensure(violations == 0, format!("{violations} chain violations"))?;
    // Hamiltonian paths: l^B against the Hofer length
    let r = run_fixture("banyaga-vs-hofer")?;
    let mut dev = 0.0f64;
    let mut n = 0;
    for e in &r.experiments {
        let Some(ExperimentResult::BanyagaVsHofer(rows)) = &e.result else { continue };
        for row in rows {
            ensure(row.banyaga <= row.hofer + 1e-10, format!("path {}: l^B {} > l^H {}", row.path, row.banyaga, row.hofer))?;
            dev = dev.max((row.banyaga - row.hofer).abs());
            n += 1;
        }
    }
    ensure(dev <= 1e-10, format!("max |l^B - l^H| = {dev:.3e}"))?;
    // and directly, for the Euclidean harmonic norm
    let p = random_path(&m, &mut rng, 16, 2, 0.05, 0.0).unwrap();
    let b = distance::length_banyaga(&p, HarmonicNorm::Euclidean).unwrap();
    let hofer = p.integrate(|a| Ok(a.primitive_osc())).unwrap();
    ensure((b - hofer).abs() <= 1e-10, format!("Euclidean l^B {b} vs l^H {hofer}"))?;
    Ok(format!("100 paths x 4 splittings, 0 violations; {n} Hamiltonian paths with |l^B - l^H| <= {dev:.1e}"))
}

fn right_concat_excess() -> Outcome {
    let r = run_fixture("right-concat")?;
    let mut out = String::new();
    for e in &r.experiments {
        let Some(ExperimentResult::RightConcat(c)) = &e.result else { continue };
        ensure(c.demo.right_excess >= 1e-3, format!("excess {}", c.demo.right_excess))?;
        ensure(c.demo.left_excess.abs() <= 1e-6, format!("left concatenation excess {:.3e}", c.demo.left_excess))?;
        ensure(c.control.right_excess.abs() <= 1e-6, format!("null path excess {:.3e}", c.control.right_excess))?;
        out = format!(
            "excess {:.6}, left control {:.1e}, null control {:.1e}",
            c.demo.right_excess, c.demo.left_excess, c.control.right_excess
        );
    }
    ensure(!out.is_empty(), "no right_concat experiment".into())?;
    Ok(out)
}

fn pullback_rank() -> Outcome {
    let r = run_fixture("rank-probe")?;
    for e in &r.experiments {
        let Some(ExperimentResult::RankProbe(p)) = &e.result else { continue };
        let ks: Vec<usize> = p.steps.iter().map(|s| s.k).collect();
        ensure(ks == (1..=8).collect::<Vec<_>>(), format!("prefix sizes {ks:?}"))?;
        for s in &p.steps {
            ensure(s.rank == s.k && s.min_singular > 1e-8, format!("k = {}: rank {}, sigma {:.3e}", s.k, s.rank, s.min_singular))?;
        }
        return Ok(format!("rank k for k = 1..8, smallest singular value {:.3e}", p.min_singular()));
    }
    Err("no rank_probe experiment".into())
}

fn nonharmonic_certificate() -> Outcome {
    let r = run_fixture("nonharmonic")?;
    for e in &r.experiments {
        let Some(ExperimentResult::Nonharmonic(n)) = &e.result else { continue };
        let sampled = n.certificates.iter().filter(|c| c.metric != "flat").count();
        ensure(sampled >= 20, format!("{sampled} sampled metrics"))?;
        let mut ibp = 0.0f64;
        for c in &n.certificates {
            ensure(c.certificate > 0.0 && c.codiff_norm > 0.0, format!("{}: certificate {}, |delta| {}", c.metric, c.certificate, c.codiff_norm))?;
            ensure(c.ibp_residual <= 1e-8, format!("{}: ibp residual {:.3e}", c.metric, c.ibp_residual))?;
            ibp = ibp.max(c.ibp_residual);
        }
        return Ok(format!("{} metrics ({sampled} sampled), worst ibp residual {ibp:.1e}", n.certificates.len()));
    }
    Err("no nonharmonic experiment".into())
}

fn product_identities() -> Outcome {
    let r = run_fixture("product-split")?;
    let mut n = 0;
    let mut eps_line = String::new();
    for e in &r.experiments {
        let Some(ExperimentResult::ProductSplit(p)) = &e.result else { continue };
        let s = &p.split;
        ensure(s.split_length_deviation <= 1e-8, format!("split deviation {:.3e}", s.split_length_deviation))?;
        ensure(s.implication_consistent, format!("implication inconsistent: {:?}", s.product_hamiltonian))?;
        let (lo, hi) = (s.epsilon.lower, s.epsilon.upper);
        ensure((lo - 0.3).abs() <= 1e-3 && (hi - 0.3).abs() <= 1e-3, format!("epsilon in [{lo}, {hi}]"))?;
        eps_line = format!("epsilon in [{lo:.6}, {hi:.6}]");
        n += 1;
    }
    let paths = r.scenario.experiments.iter().map(|e| match e {
        sympflux::scenario::Experiment::ProductSplit(p) => p.sample_paths,
        _ => 0,
    });
    let total: usize = paths.max().unwrap_or(0);
    ensure(total >= 20, format!("only {total} split sample paths"))?;
    ensure(n > 0, "no product_split experiment".into())?;
    Ok(format!("{n} split pairs consistent, {total} sample paths, {eps_line}"))
}

fn translation_corollaries() -> Outcome {
    let m = TorusModel::standard(1, 16).unwrap();
    let lat = FluxLattice::torus(&m).unwrap();
    let cfg = small_cfg();
    let spec = hodge1();
    let delta = |map: &DiffeoMap| -> Result<(f64, f64), String> {
        let est = delta_to_ham(&m, &map_flux(map), &spec, &lat, &cfg).map_err(|e| e.to_string())?;
        Ok((est.lower, est.upper))
    };
    let mid = |d: (f64, f64)| 0.5 * (d.0 + d.1);
    // psi^2 Hamiltonian
    let psi = DiffeoMap::translation(&m, &[0.5, 0.0]);
    let (a, b) = (delta(&psi)?, delta(&psi.inverse().unwrap())?);
    ensure((mid(a) - mid(b)).abs() <= 1e-3, format!("Delta(psi) {a:?} vs Delta(psi^-1) {b:?}"))?;
    // conjugation and bi-invariance with a shear
    let shear = hamiltonian_flow(&m, &Hamiltonian::mode(0.03, &[1, 0]), 16).map_err(|e| e.to_string())?;
    let t = DiffeoMap::translation(&m, &[0.3, 0.1]);
    let conj = shear.compose(&t).compose(&shear.inverse().unwrap());
    let (dt, dc) = (delta(&t)?, delta(&conj)?);
    ensure((mid(dt) - mid(dc)).abs() <= 1e-3, format!("conjugation: {dt:?} vs {dc:?}"))?;
    let (l, r) = (delta(&t.compose(&shear))?, delta(&shear.compose(&t))?);
    ensure((mid(l) - mid(r)).abs() <= 1e-3, format!("Delta(psi phi) {l:?} vs Delta(phi psi) {r:?}"))?;
    // bounded multiplication on a 5 x 5 grid
    let psis: Vec<DiffeoMap> = (0..5).map(|i| DiffeoMap::translation(&m, &[0.2 * i as f64 + 0.05, 0.1 * i as f64])).collect();
    let phis: Vec<DiffeoMap> = (0..5).map(|j| DiffeoMap::translation(&m, &[0.13 * j as f64 + 0.07, 0.3 - 0.11 * j as f64])).collect();
    let mut worst = f64::NEG_INFINITY;
    for p in &psis {
        let bound = mid(delta(p)?).max(mid(delta(&p.inverse().unwrap())?));
        for f in &phis {
            let lhs = (mid(delta(&p.compose(f))?) - mid(delta(f)?)).abs();
            worst = worst.max(lhs - bound);
            ensure(lhs <= bound + 1e-3, format!("|Delta(psi phi) - Delta(phi)| = {lhs} > {bound}"))?;
        }
    }
    Ok(format!("Delta(psi) = {:.6}, Delta(psi^-1) = {:.6}; 25 products, worst margin {worst:.2e}", mid(a), mid(b)))
}

fn gradient_checks() -> Outcome {
    let m = TorusModel::standard(1, 16).unwrap();
    let ans = PathAnsatz::new(&m, small_cfg()).unwrap();
    let n = ans.nparams();
    let pen = EndpointPenalty::new(&ans, &DiffeoMap::translation(&m, &[0.2, 0.1])).unwrap();
    let mut worst = Vec::new();
    worst.push(("endpoint", gradient_check(&|t| pen.value_grad(t), n, 10, 0.01, 12)));
    let goal = vec![0.3, -0.2];
    worst.push(("flux", gradient_check(&|t| flux_penalty(&ans, t, &goal), n, 10, 0.1, 13)));
    for (name, base) in [("l2 length", BaseNorm::L2OnExact), ("osc length", BaseNorm::HoferOsc)] {
        let mut lm = LengthModel::new(&ans, &SeminormSpec::hodge(0.7, base)).unwrap();
        lm.set_tau(0.05);
        worst.push((name, gradient_check(&|t| lm.value_grad(t), n, 10, 0.1, 14)));
    }
    for (name, e) in &worst {
        ensure(*e <= 1e-5, format!("{name}: relative error {e:.3e}"))?;
    }
    Ok(worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Hodge exactness", hodge_exactness),
        ("left concatenation additivity", left_concat_additivity),
        ("distance to Ham of translations", delta_closed_form),
        ("vanishing lower bound iff Hamiltonian", degeneracy_is_hamiltonian),
        ("flux lattice of the unit torus", unit_lattice),
        ("comparison chain", comparison_chain),
        ("strict excess of right concatenation", right_concat_excess),
        ("pullback independence rank", pullback_rank),
        ("non-harmonic certificate", nonharmonic_certificate),
        ("product split identities", product_identities),
        ("translation identities for Delta", translation_corollaries),
        ("gradient checks", gradient_checks),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    let total = start.elapsed().as_secs_f64();
    if total < 600.0 {
        println!("PASS criterion 13: total runtime: {total:.1} s");
    } else {
        failed += 1;
        println!("FAIL criterion 13: total runtime: {total:.1} s");
    }
    println!("acceptance: {} of 13 criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
