//! Numerical experiments: pullback invariance of splitting seminorms, linear
//! independence of pullbacks, non-harmonic representatives, concatenation
//! excess and the product obstruction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeo::DiffeoMap;
use crate::distance::{self, AnsatzConfig, DistanceEstimate};
use crate::error::{Error, Result};
use crate::forms::OneFormField;
use crate::hamiltonian::Hamiltonian;
use crate::lattice::{self, FluxLattice, HamiltonianTag, ProductModel};
use crate::model::TorusModel;
use crate::paths::{IsotopyPath, Schedule};
use crate::spectral;
use crate::splitting::{MuKind, SeminormSpec};

/// Denominators below this are treated as zero.
pub const DENOM_TOL: f64 = 1e-10;
/// A ratio further than this from 1 counts as a violation.
pub const DAGGER_TOL: f64 = 1e-4;

/// Time-1 map of the autonomous flow of `h`.
pub fn hamiltonian_flow(model: &TorusModel, h: &Hamiltonian, steps: usize) -> Result<DiffeoMap> {
    IsotopyPath::constant(model, steps, &h.form(model))?.endpoint()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DaggerSample {
    pub map: String,
    pub form: String,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the denominator vanishes.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DaggerProbeResult {
    pub mu: String,
    pub c: f64,
    pub samples: Vec<DaggerSample>,
    pub sampled_ratios: Vec<f64>,
    /// Largest sampled ratio; `None` when a witness makes the supremum infinite.
    pub sup_estimate: Option<f64>,
    pub violates_dagger: bool,
    /// Every pair was `0/0`: the seminorm part vanishes identically on the sample.
    pub trivially_dagger: bool,
    /// Pairs with a vanishing denominator and a vanishing numerator.
    pub excluded: Vec<String>,
    /// Pairs with a vanishing denominator and a positive numerator.
    pub witnesses: Vec<String>,
}

/// Ratios `n^B(mu(phi^* alpha)) / n^B(mu(alpha))` over all pairs.
pub fn dagger_defect(
    spec: &SeminormSpec,
    maps: &[(String, DiffeoMap)],
    forms: &[(String, OneFormField)],
) -> Result<DaggerProbeResult> {
    let pairs: Vec<(usize, usize)> = (0..maps.len()).flat_map(|i| (0..forms.len()).map(move |j| (i, j))).collect();
    let samples = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mname, phi) = &maps[i];
            let (fname, alpha) = &forms[j];
            let den = spec.base_norm.eval(&spec.mu.apply(alpha)?);
            let num = spec.base_norm.eval(&spec.mu.apply(&phi.pullback(alpha)?)?);
            let ratio = (den > DENOM_TOL).then(|| num / den);
            Ok(DaggerSample { map: mname.clone(), form: fname.clone(), numerator: num, denominator: den, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut excluded = Vec::new();
    let mut witnesses = Vec::new();
    let mut ratios = Vec::new();
    for s in &samples {
        match s.ratio {
            Some(r) => ratios.push(r),
            None if s.numerator > DENOM_TOL => witnesses.push(format!("{} / {}: {:.6e} / 0", s.map, s.form, s.numerator)),
            None => excluded.push(format!("{} / {}", s.map, s.form)),
        }
    }
    let trivially = ratios.is_empty() && witnesses.is_empty();
    if trivially && !matches!(spec.mu.kind, MuKind::Zero) {
        return Err(Error::Degenerate("every sampled denominator vanishes".into()));
    }
    let sup = witnesses.is_empty().then(|| ratios.iter().copied().fold(0.0, f64::max));
    let violates = !witnesses.is_empty() || ratios.iter().any(|r| (r - 1.0).abs() > DAGGER_TOL);
    Ok(DaggerProbeResult {
        mu: spec.mu.description.clone(),
        c: spec.c,
        samples,
        sampled_ratios: ratios,
        sup_estimate: sup,
        violates_dagger: violates,
        trivially_dagger: trivially,
        excluded,
        witnesses,
    })
}

/// Named maps for the invariance probe: translations, shears and random flows.
pub fn dagger_maps(model: &TorusModel, seed: u64, translations_only: bool) -> Result<Vec<(String, DiffeoMap)>> {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let ntrans = if translations_only { 10 } else { 3 };
    for i in 0..ntrans {
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5) * model.periods()[0]).collect();
        out.push((format!("translation{i}"), DiffeoMap::translation(model, &shift)));
    }
    if translations_only {
        return Ok(out);
    }
    for (i, amp) in [0.05, 0.1, 0.15].iter().enumerate() {
        let mut freq = vec![0i64; d];
        freq[i % d] = 1;
        out.push((format!("shear{i}"), hamiltonian_flow(model, &Hamiltonian::mode(*amp, &freq), 16)?));
    }
    for i in 0..4 {
        let h = Hamiltonian::random_trig(&mut rng, d, 2, 0.01);
        out.push((format!("random_flow{i}"), hamiltonian_flow(model, &h, 16)?));
    }
    Ok(out)
}

/// Named closed forms: harmonic, exact and mixed.
pub fn dagger_forms(model: &TorusModel, seed: u64) -> Vec<(String, OneFormField)> {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Vec::new();
    for k in 0..d.min(2) {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        out.push((format!("harmonic{k}"), OneFormField::constant(model, &e)));
    }
    let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    out.push(("harmonic_mix".into(), OneFormField::constant(model, &h)));
    for i in 0..4 {
        out.push((format!("exact{i}"), Hamiltonian::random_trig(&mut rng, d, 2, 1.0).form(model)));
    }
    for i in 0..3 {
        let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ex = Hamiltonian::random_trig(&mut rng, d, 2, 1.0).form(model);
        out.push((format!("mixed{i}"), OneFormField::constant(model, &h).add(&ex)));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankProbeStep {
    pub k: usize,
    pub rank: usize,
    pub min_singular: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankProbeResult {
    pub steps: Vec<RankProbeStep>,
    pub singular_values: Vec<f64>,
}

impl RankProbeResult {
    pub fn rank(&self) -> usize {
        self.steps.last().map_or(0, |s| s.rank)
    }

    pub fn min_singular(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.min_singular)
    }
}

/// Disc on the torus used by the local probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Disc {
    fn dist(&self, model: &TorusModel, x: &[f64]) -> f64 {
        (0..x.len()).map(|a| model.wrap(a, x[a] - self.center[a]).powi(2)).sum::<f64>().sqrt()
    }

    fn validate(&self, model: &TorusModel) -> Result<()> {
        let lmin = model.periods().iter().copied().fold(f64::INFINITY, f64::min);
        if self.center.len() != model.dim() || !(self.radius > 0.0) || self.radius >= 0.5 * lmin {
            return Err(Error::Config(format!("disc {:?} does not fit the torus", self)));
        }
        Ok(())
    }
}

/// Maps supported in `disc`: the identity, then time-1 maps of bump Hamiltonians
/// with distinct centers and radii inside the disc.
pub fn disc_flows(model: &TorusModel, disc: &Disc, k: usize, amplitude: f64) -> Result<Vec<DiffeoMap>> {
    disc.validate(model)?;
    let d = model.dim();
    (0..k)
        .into_par_iter()
        .map(|j| {
            if j == 0 {
                return Ok(DiffeoMap::identity(model));
            }
            // centers on a spiral inside the disc, radii shrinking so supports stay inside
            let angle = 2.0 * PI * j as f64 * 0.618_033_988_749_895;
            let off = disc.radius * 0.25 * (j as f64 / k as f64).sqrt();
            let mut center = disc.center.clone();
            center[0] += off * angle.cos();
            center[1 % d] += off * angle.sin();
            let radius = disc.radius - off;
            let h = Hamiltonian::Bump { amplitude, center, radius, power: 8 };
            hamiltonian_flow(model, &h, 8)
        })
        .collect()
}

/// Numerical rank of `{phi_j^* beta}` for maps supported in `disc`, for every prefix `k`.
pub fn pullback_independence_rank(beta: &OneFormField, k: usize, disc: &Disc, amplitude: f64) -> Result<RankProbeResult> {
    let model = beta.model();
    beta.require_closed()?;
    disc.validate(model)?;
    let mut x = vec![0.0; model.dim()];
    let mut on_disc = 0.0f64;
    for p in 0..model.npoints() {
        model.point(p, &mut x);
        if disc.dist(model, &x) < disc.radius {
            for c in beta.components() {
                on_disc = on_disc.max(c[p].abs());
            }
        }
    }
    if on_disc <= 1e-12 {
        return Err(Error::Degenerate("beta vanishes on the disc".into()));
    }
    if k == 0 {
        return Err(Error::Config("rank probe needs k >= 1".into()));
    }
    let maps = disc_flows(model, disc, k, amplitude)?;
    let pulled = maps.par_iter().map(|m| m.pullback(beta)).collect::<Result<Vec<_>>>()?;
    let gram = DMatrix::from_fn(k, k, |i, j| pulled[i].l2_inner(&pulled[j]));
    let mut steps = Vec::new();
    let mut sv = Vec::new();
    for kk in 1..=k {
        let g = gram.view((0, 0), (kk, kk)).into_owned();
        let eig = SymmetricEigen::new(g);
        let mut s: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let smax = s[0];
        let rank = s.iter().filter(|&&v| v > 1e-8 * smax).count();
        steps.push(RankProbeStep { k: kk, rank, min_singular: *s.last().unwrap() });
        sv = s;
    }
    Ok(RankProbeResult { steps, singular_values: sv })
}

/// Riemannian metric `g = lambda(x) diag(m)` used by the non-harmonic certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledMetric {
    pub kind: String,
    pub diag: Vec<f64>,
    #[serde(skip)]
    pub conformal: Vec<f64>,
}

impl SampledMetric {
    fn weight(&self, model: &TorusModel, p: usize) -> f64 {
        // sqrt(det g) with det g = lambda^d prod m
        let lam = self.conformal[p];
        lam.powf(0.5 * model.dim() as f64) * self.diag.iter().product::<f64>().sqrt()
    }

    fn inner_forms(&self, model: &TorusModel, a: &OneFormField, b: &OneFormField) -> f64 {
        let mut acc = 0.0;
        for p in 0..model.npoints() {
            let w = self.weight(model, p) / self.conformal[p];
            for k in 0..model.dim() {
                acc += w * a.component(k)[p] * b.component(k)[p] / self.diag[k];
            }
        }
        acc * model.cell_volume()
    }

    fn inner_functions(&self, model: &TorusModel, f: &[f64], h: &[f64]) -> f64 {
        (0..model.npoints()).map(|p| self.weight(model, p) * f[p] * h[p]).sum::<f64>() * model.cell_volume()
    }

    /// `delta_g beta = -(1/sqrt g) d_i (sqrt g g^{ij} beta_j)`.
    fn codifferential(&self, model: &TorusModel, beta: &OneFormField) -> Vec<f64> {
        let n = model.npoints();
        let mut out = vec![0.0; n];
        for k in 0..model.dim() {
            let flux: Vec<f64> = (0..n)
                .map(|p| self.weight(model, p) / self.conformal[p] / self.diag[k] * beta.component(k)[p])
                .collect();
            let dk = spectral::derivative(model, &flux, k);
            for (o, v) in out.iter_mut().zip(dk) {
                *o -= v;
            }
        }
        for (p, o) in out.iter_mut().enumerate() {
            *o /= self.weight(model, p);
        }
        out
    }
}

/// Metrics with random constant diagonals, and random conformal factors in `[1/2, 2]`.
pub fn sample_metrics(model: &TorusModel, diagonal: usize, conformal: usize, seed: u64) -> Vec<SampledMetric> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let n = model.npoints();
    let mut out = Vec::new();
    out.push(SampledMetric { kind: "flat".into(), diag: vec![1.0; d], conformal: vec![1.0; n] });
    for i in 0..diagonal {
        let diag = (0..d).map(|_| 2f64.powf(rng.gen_range(-1.0..1.0))).collect();
        out.push(SampledMetric { kind: format!("diagonal{i}"), diag, conformal: vec![1.0; n] });
    }
    for i in 0..conformal {
        let h = Hamiltonian::random_trig(&mut rng, d, 2, 1.0);
        let s = h.sample(model);
        let smax = s.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let lam = s.iter().map(|v| 2f64.powf(v / smax)).collect();
        out.push(SampledMetric { kind: format!("conformal{i}"), diag: vec![1.0; d], conformal: lam });
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricCertificate {
    pub metric: String,
    /// `<df', alpha''>_g`.
    pub certificate: f64,
    /// `<df', df'>_g`, the integral over the inner disc.
    pub local_energy: f64,
    /// `|delta_g alpha''|_g`.
    pub codiff_norm: f64,
    pub f_norm: f64,
    /// `|<f', delta_g alpha''>_g - <df', alpha''>_g|`.
    pub ibp_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonharmonicResult {
    #[serde(skip)]
    pub form: Option<OneFormField>,
    pub harmonic_part: Vec<f64>,
    pub certificates: Vec<MetricCertificate>,
}

impl NonharmonicResult {
    /// Positive certificate, positive codifferential and the integration by parts identity
    /// for every metric.
    pub fn all_certified(&self, ibp_tol: f64) -> bool {
        self.certificates.iter().all(|c| {
            c.certificate > 0.0 && c.codiff_norm > 0.0 && c.codiff_norm * c.f_norm >= c.certificate * (1.0 - 1e-9) && c.ibp_residual <= ibp_tol * c.certificate.abs().max(1.0)
        })
    }
}

/// `C^4` step: 0 for `s <= 0`, 1 for `s >= 1`.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s.powi(5) * (126.0 - 420.0 * s + 540.0 * s * s - 315.0 * s.powi(3) + 70.0 * s.powi(4))
}

/// A closed form cohomologous to `alpha` that equals `df'` near the inner disc and so
/// pairs positively with `df'` in every metric.
///
/// The primitive of `alpha` on the outer disc is `h.(x - c) + u` from its Hodge
/// decomposition; it is cut off between the inner and outer radius.
pub fn construct_nonharmonic_closed_form(
    alpha: &OneFormField,
    outer: &Disc,
    inner_radius: f64,
    bump_amplitude: f64,
    metrics: &[SampledMetric],
) -> Result<NonharmonicResult> {
    let model = alpha.model();
    outer.validate(model)?;
    let split = alpha.hodge_decompose()?;
    if split.harmonic.iter().all(|h| h.abs() <= 1e-12) {
        return Err(Error::Config("alpha must have a nonzero cohomology class".into()));
    }
    if !(inner_radius > 0.0 && inner_radius < outer.radius) {
        return Err(Error::Config("inner disc must lie inside the outer disc".into()));
    }
    if bump_amplitude == 0.0 {
        return Err(Error::Degenerate("f' = 0 gives a zero certificate".into()));
    }
    let d = model.dim();
    let r_flat = 0.5 * (inner_radius + outer.radius);
    let bump = Hamiltonian::Bump { amplitude: bump_amplitude, center: outer.center.clone(), radius: inner_radius, power: 8 };
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; model.npoints()];
    let mut fprime = vec![0.0; model.npoints()];
    for p in 0..model.npoints() {
        model.point(p, &mut x);
        let r = outer.dist(model, &x);
        let chi = smoothstep((outer.radius - r) / (outer.radius - r_flat));
        let local: f64 = (0..d).map(|a| split.harmonic[a] * model.wrap(a, x[a] - outer.center[a])).sum::<f64>() + split.primitive[p];
        fprime[p] = bump.eval(model, &x);
        g[p] = fprime[p] - chi * local;
    }
    // alpha'' = alpha - d(chi f) + df'
    let alpha2 = alpha.add(&OneFormField::exact(model, &g)).checked()?;
    let dfp = OneFormField::exact(model, &fprime);
    let certificates = metrics
        .par_iter()
        .map(|m| {
            let cert = m.inner_forms(model, &dfp, &alpha2);
            let energy = m.inner_forms(model, &dfp, &dfp);
            let delta = m.codifferential(model, &alpha2);
            let lhs = m.inner_functions(model, &fprime, &delta);
            MetricCertificate {
                metric: m.kind.clone(),
                certificate: cert,
                local_energy: energy,
                codiff_norm: m.inner_functions(model, &delta, &delta).sqrt(),
                f_norm: m.inner_functions(model, &fprime, &fprime).sqrt(),
                ibp_residual: (lhs - cert).abs(),
            }
        })
        .collect();
    Ok(NonharmonicResult { harmonic_part: alpha2.harmonic_coeffs(), form: Some(alpha2), certificates })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcatExcess {
    /// `l^B(Phi *_r Psi) - l^B(Phi) - l^B(Psi)`.
    pub right_excess: f64,
    /// `l^B(Phi *_l Psi) - l^B(Phi) - l^B(Psi)`.
    pub left_excess: f64,
    /// `osc` of the exact part of `(phi_1^{-1})^* h`.
    pub predicted: f64,
    pub phi_length: f64,
    pub psi_length: f64,
}

/// Excess length of concatenating a path with the constant harmonic path of `h`.
pub fn right_concat_excess(phi: &IsotopyPath, h: &[f64], schedule: Schedule) -> Result<ConcatExcess> {
    let model = phi.model();
    if h.len() != model.dim() {
        return Err(Error::Shape("harmonic coefficients have the wrong length".into()));
    }
    let form = OneFormField::constant(model, h);
    let psi = IsotopyPath::constant(model, phi.steps(), &form)?;
    let norm = distance::HarmonicNorm::L2;
    let lphi = distance::length_banyaga(phi, norm)?;
    let lpsi = distance::length_banyaga(&psi, norm)?;
    let right = IsotopyPath::concat_right(phi, &psi, schedule)?;
    let left = IsotopyPath::concat_left(phi, &psi, schedule)?;
    let moved = phi.endpoint()?.inverse()?.pullback(&form)?;
    let predicted = spectral::continuous_osc(model, &moved.hodge_decompose()?.primitive);
    Ok(ConcatExcess {
        right_excess: distance::length_banyaga(&right, norm)? - lphi - lpsi,
        left_excess: distance::length_banyaga(&left, norm)? - lphi - lpsi,
        predicted,
        phi_length: lphi,
        psi_length: lpsi,
    })
}

/// As [`right_concat_excess`], rejecting paths whose endpoint is the identity.
pub fn nonminimizing_right_concat_demo(phi: &IsotopyPath, h: &[f64], schedule: Schedule) -> Result<ConcatExcess> {
    let end = phi.endpoint()?;
    if end.max_displacement() < 1e-6 {
        return Err(Error::Degenerate("phi_1 is the identity; no excess to exhibit".into()));
    }
    right_concat_excess(phi, h, schedule)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitReport {
    pub phi_flux: Vec<f64>,
    pub psi_flux: Vec<f64>,
    pub product_flux: Vec<f64>,
    pub product_hamiltonian: HamiltonianTag,
    /// `Delta(phi^{-1} x 1)` on the product.
    pub epsilon: DistanceEstimate,
    pub delta_psi: DistanceEstimate,
    /// `phi x psi` Hamiltonian implies `Delta(psi) >= epsilon(phi)`.
    pub implication_consistent: bool,
    /// Largest `|l(1 x Theta) - l'(Theta)|` over the sample paths.
    pub split_length_deviation: f64,
}

/// The product seminorm for split Hodge-type specs.
pub fn split_spec(left: &SeminormSpec, right: &SeminormSpec) -> Result<SeminormSpec> {
    let hodge_like = |s: &SeminormSpec| matches!(s.mu.kind, MuKind::HodgeProjection);
    if !hodge_like(left) || !hodge_like(right) || left.c != right.c || left.base_norm != right.base_norm {
        return Err(Error::Config("product obstruction needs matching Hodge specs on both factors".into()));
    }
    Ok(SeminormSpec::hodge(left.c, left.base_norm))
}

/// Flux bookkeeping, `epsilon(phi)`, `Delta(psi)` and the split-length identity.
pub fn product_split_obstruction(
    phi: &DiffeoMap,
    psi: &DiffeoMap,
    product: &ProductModel,
    left_spec: &SeminormSpec,
    right_spec: &SeminormSpec,
    cfg: &AnsatzConfig,
    sample_paths: &[IsotopyPath],
) -> Result<SplitReport> {
    let spec = split_spec(left_spec, right_spec)?;
    if (product.left.volume() - 1.0).abs() > 1e-12 {
        return Err(Error::Config("split lengths agree only for a unit-volume left factor".into()));
    }
    let plat = FluxLattice::torus(&product.product)?;
    let rlat = FluxLattice::torus(&product.right)?;
    let fphi = lattice::map_flux(phi);
    let fpsi = lattice::map_flux(psi);
    let fprod = product.product_flux(&fphi, &fpsi);
    let tag = plat.classify(&fprod.coeffs)?;
    let inv_flux = crate::paths::FluxVector::new(&product.left, fphi.coeffs.iter().map(|v| -v).collect());
    let zero_right = crate::paths::FluxVector::new(&product.right, vec![0.0; product.right.dim()]);
    let eps_flux = product.product_flux(&inv_flux, &zero_right);
    let epsilon = distance::delta_to_ham(&product.product, &eps_flux, &spec, &plat, cfg)?;
    let delta_psi = distance::delta_to_ham(&product.right, &fpsi, right_spec, &rlat, cfg)?;
    let implication = !tag.is_yes() || delta_psi.upper + 1e-3 >= epsilon.lower;
    let dev = sample_paths
        .par_iter()
        .map(|p| {
            let lifted = product.lift_right_path(p);
            Ok((distance::length(&lifted, &spec)? - distance::length(p, right_spec)?).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SplitReport {
        phi_flux: fphi.coeffs,
        psi_flux: fpsi.coeffs,
        product_flux: fprod.coeffs,
        product_hamiltonian: tag,
        epsilon,
        delta_psi,
        implication_consistent: implication,
        split_length_deviation: dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::{BaseNorm, SplittingOperator};

    #[test]
    fn zero_mu_is_trivially_invariant() {
        let m = TorusModel::standard(1, 16).unwrap();
        let spec = SeminormSpec::new(SplittingOperator::zero(), 1.0, BaseNorm::HoferOsc).unwrap();
        let r = dagger_defect(&spec, &dagger_maps(&m, 1, true).unwrap(), &dagger_forms(&m, 1)).unwrap();
        assert!(r.trivially_dagger && !r.violates_dagger);
        assert_eq!(r.excluded.len(), 100);
    }

    #[test]
    fn shear_breaks_invariance_of_harmonic_form() {
        let m = TorusModel::standard(1, 32).unwrap();
        let spec = SeminormSpec::hodge(1.0, BaseNorm::HoferOsc);
        let shear = hamiltonian_flow(&m, &Hamiltonian::mode(0.1, &[1, 0]), 16).unwrap();
        let dy = OneFormField::constant(&m, &[0.0, 1.0]);
        let r = dagger_defect(&spec, &[("shear".into(), shear)], &[("dy".into(), dy)]).unwrap();
        assert!(r.violates_dagger && r.witnesses.len() == 1, "{:?}", r.witnesses);
    }

    #[test]
    fn smoothstep_is_a_step() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-12);
    }
}
