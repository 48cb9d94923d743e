//! Linear maps `mu: Z^1 -> B^1` and the splitting seminorms built from them.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::diffeo::DiffeoMap;
use crate::error::{Error, Result};
use crate::forms::{Closedness, OneFormField};
use crate::model::TorusModel;
use crate::spectral;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MuKind {
    Zero,
    /// `alpha -> d u_alpha`, the exact part of the Hodge decomposition.
    HodgeProjection,
    /// `alpha -> alpha - f^* alpha`.
    PullbackDiff { f: DiffeoMap },
    /// `alpha -> d(alpha(X_H))` for the Hamiltonian field of `H`.
    HamiltonianContraction { h: Vec<f64> },
    /// L2-orthogonal projection onto the span of an orthonormal exact basis.
    ExactProjection { basis: Vec<OneFormField> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingOperator {
    pub kind: MuKind,
    pub description: String,
}

impl SplittingOperator {
    pub fn zero() -> Self {
        SplittingOperator { kind: MuKind::Zero, description: "zero".into() }
    }

    pub fn hodge() -> Self {
        SplittingOperator { kind: MuKind::HodgeProjection, description: "Hodge projection onto exact forms".into() }
    }

    pub fn pullback_diff(f: DiffeoMap) -> Self {
        SplittingOperator { kind: MuKind::PullbackDiff { f }, description: "alpha - f^* alpha".into() }
    }

    pub fn hamiltonian_contraction(model: &TorusModel, h: Vec<f64>) -> Result<Self> {
        if h.len() != model.npoints() {
            return Err(Error::Shape("Hamiltonian must be a grid function".into()));
        }
        Ok(SplittingOperator { kind: MuKind::HamiltonianContraction { h }, description: "d(alpha(X_H))".into() })
    }

    /// Orthonormalizes `basis` (modified Gram-Schmidt, twice) and drops dependent elements.
    pub fn exact_projection(basis: Vec<OneFormField>) -> Result<Self> {
        let mut ortho: Vec<OneFormField> = Vec::new();
        for b in basis {
            let b = b.checked()?;
            if b.tag() != Closedness::Exact {
                return Err(Error::Config("projection basis elements must be exact".into()));
            }
            let norm0 = b.l2_norm();
            let mut v = b;
            for _ in 0..2 {
                for q in &ortho {
                    v = v.lincomb(1.0, q, -v.l2_inner(q));
                }
            }
            let n = v.l2_norm();
            if n > 1e-10 * norm0.max(f64::MIN_POSITIVE) {
                ortho.push(v.scale(1.0 / n).with_tag(Closedness::Exact));
            }
        }
        Ok(SplittingOperator {
            description: format!("projection onto {} exact forms", ortho.len()),
            kind: MuKind::ExactProjection { basis: ortho },
        })
    }

    /// `mu(alpha)` for closed `alpha`; the result is tagged exact.
    pub fn apply(&self, alpha: &OneFormField) -> Result<OneFormField> {
        alpha.require_closed()?;
        let m = alpha.model();
        let out = match &self.kind {
            MuKind::Zero => OneFormField::zero(m),
            MuKind::HodgeProjection => {
                let split = alpha.hodge_unchecked();
                OneFormField::exact(m, &split.primitive)
            }
            MuKind::PullbackDiff { f } => {
                let pulled = f.pullback(&alpha.clone().with_tag(closed_tag(alpha)))?;
                // cohomologous forms: the difference is exact
                alpha.sub(&pulled)
            }
            MuKind::HamiltonianContraction { h } => {
                let d = m.dim();
                let dh = spectral::gradient(m, h);
                let mut contraction = vec![0.0; m.npoints()];
                for k in 0..d {
                    // X_k = sum_j A_kj dH_j
                    for j in 0..d {
                        let a = m.field_map(k, j);
                        if a != 0.0 {
                            for ((c, ak), hj) in contraction.iter_mut().zip(alpha.component(k)).zip(&dh[j]) {
                                *c += a * ak * hj;
                            }
                        }
                    }
                }
                OneFormField::exact(m, &contraction)
            }
            MuKind::ExactProjection { basis } => {
                let mut acc = OneFormField::zero(m);
                for b in basis {
                    acc = acc.lincomb(1.0, b, alpha.l2_inner(b));
                }
                acc
            }
        };
        Ok(out.with_tag(Closedness::Exact))
    }
}

fn closed_tag(alpha: &OneFormField) -> Closedness {
    match alpha.tag() {
        Closedness::Unchecked => Closedness::Closed,
        t => t,
    }
}

/// Base norm on exact forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseNorm {
    /// Oscillation of the primitive.
    HoferOsc,
    /// L2 norm of the exact form.
    L2OnExact,
}

impl BaseNorm {
    pub fn eval(&self, exact: &OneFormField) -> f64 {
        match self {
            BaseNorm::HoferOsc => exact.primitive_osc(),
            BaseNorm::L2OnExact => exact.l2_norm(),
        }
    }
}

/// `n(alpha) = n^B(mu(alpha)) + c |alpha - mu(alpha)|_{L2}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeminormSpec {
    pub mu: SplittingOperator,
    pub c: f64,
    pub base_norm: BaseNorm,
}

/// Outcome of the norm criterion.
#[derive(Clone, Debug)]
pub enum NormCriterion {
    IsNorm,
    /// A nonzero closed form of seminorm zero.
    IsSeminormOnly { witness: OneFormField },
    /// `c = 0` and no kernel element was found among the searched candidates.
    Undetermined { smallest_ratio: f64 },
}

impl SeminormSpec {
    pub fn new(mu: SplittingOperator, c: f64, base_norm: BaseNorm) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("c must be a nonnegative number, got {c}")));
        }
        Ok(SeminormSpec { mu, c, base_norm })
    }

    /// Hodge projection with the given `c` and base norm.
    pub fn hodge(c: f64, base_norm: BaseNorm) -> Self {
        SeminormSpec { mu: SplittingOperator::hodge(), c, base_norm }
    }

    /// Both parts `(n^B(mu(alpha)), |alpha - mu(alpha)|_{L2})`.
    pub fn parts(&self, alpha: &OneFormField) -> Result<(f64, f64)> {
        let mu = self.mu.apply(alpha)?;
        let rest = alpha.sub(&mu).l2_norm();
        Ok((self.base_norm.eval(&mu), rest))
    }

    pub fn seminorm(&self, alpha: &OneFormField) -> Result<f64> {
        let (b, r) = self.parts(alpha)?;
        Ok(b + self.c * r)
    }

    /// A norm iff `c != 0` or `mu` is injective.
    ///
    /// For `c = 0` the kernel of `mu` is searched over the harmonic forms and,
    /// for Hamiltonian contractions, `dH`.
    pub fn norm_criterion(&self, model: &TorusModel) -> Result<NormCriterion> {
        if self.c != 0.0 {
            return Ok(NormCriterion::IsNorm);
        }
        let d = model.dim();
        let mut candidates: Vec<OneFormField> = Vec::new();
        // dy-type directions first so the reported witness is canonical
        let order: Vec<usize> = (0..d).filter(|k| k % 2 == 1).chain((0..d).filter(|k| k % 2 == 0)).collect();
        for &k in &order {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            candidates.push(OneFormField::constant(model, &e));
        }
        if let MuKind::HamiltonianContraction { h } = &self.mu.kind {
            let dh = OneFormField::exact(model, h);
            if dh.l2_norm() > 0.0 {
                candidates.push(dh.scale(1.0 / dh.l2_norm()));
            }
        }
        let images = candidates.iter().map(|c| self.mu.apply(c)).collect::<Result<Vec<_>>>()?;
        for (c, im) in candidates.iter().zip(&images) {
            if im.l2_norm() <= 1e-8 * c.l2_norm() {
                return Ok(NormCriterion::IsSeminormOnly { witness: c.clone() });
            }
        }
        // generalized problem: min |mu(sum w_i c_i)| / |sum w_i c_i|
        let n = candidates.len();
        let g = DMatrix::from_fn(n, n, |i, j| candidates[i].l2_inner(&candidates[j]));
        let a = DMatrix::from_fn(n, n, |i, j| images[i].l2_inner(&images[j]));
        let eg = SymmetricEigen::new(g.clone());
        let keep: Vec<usize> = (0..n).filter(|&i| eg.eigenvalues[i] > 1e-12 * eg.eigenvalues.max()).collect();
        let basis = DMatrix::from_fn(n, keep.len(), |i, j| eg.eigenvectors[(i, keep[j])] / eg.eigenvalues[keep[j]].sqrt());
        let reduced = basis.transpose() * &a * &basis;
        let er = SymmetricEigen::new(reduced);
        let (imin, lmin) = er
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
        let ratio = lmin.max(0.0).sqrt();
        if ratio <= 1e-8 {
            let w = &basis * er.eigenvectors.column(imin);
            let mut witness = OneFormField::zero(model);
            for (i, c) in candidates.iter().enumerate() {
                witness = witness.lincomb(1.0, c, w[i]);
            }
            return Ok(NormCriterion::IsSeminormOnly { witness });
        }
        Ok(NormCriterion::Undetermined { smallest_ratio: ratio })
    }
}

/// `| mu_{f o g}(alpha) - (mu_f(alpha) + mu_g(f^* alpha)) |_{L2}`.
pub fn mu_f_identity_check(f: &DiffeoMap, g: &DiffeoMap, alpha: &OneFormField) -> Result<f64> {
    let fg = SplittingOperator::pullback_diff(f.compose(g));
    let mf = SplittingOperator::pullback_diff(f.clone());
    let mg = SplittingOperator::pullback_diff(g.clone());
    let lhs = fg.apply(alpha)?;
    let fa = f.pullback(alpha)?;
    let rhs = mf.apply(alpha)?.add(&mg.apply(&fa)?);
    Ok(lhs.sub(&rhs).l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Hamiltonian;
    use std::f64::consts::PI;

    fn t2() -> TorusModel {
        TorusModel::standard(1, 32).unwrap()
    }

    #[test]
    fn hodge_mu_on_examples() {
        let m = t2();
        let mu = SplittingOperator::hodge();
        let dy = OneFormField::constant(&m, &[0.0, 1.0]);
        assert_eq!(mu.apply(&dy).unwrap().max_abs(), 0.0);
        let ds = Hamiltonian::Mode { amplitude: 1.0, freq: vec![1, 0], phase: -PI / 2.0 }.form(&m);
        let out = mu.apply(&ds).unwrap();
        assert!(out.sub(&ds).max_abs() < 1e-12);
    }

    #[test]
    fn seminorm_examples() {
        let m = t2();
        let dy = OneFormField::constant(&m, &[0.0, 1.0]);
        let spec = SeminormSpec::hodge(1.0, BaseNorm::HoferOsc);
        assert!((spec.seminorm(&dy).unwrap() - 1.0).abs() < 1e-14);
        let ds = Hamiltonian::Mode { amplitude: 1.0, freq: vec![1, 0], phase: -PI / 2.0 }.form(&m);
        assert!((SeminormSpec::hodge(5.0, BaseNorm::HoferOsc).seminorm(&ds).unwrap() - 2.0).abs() < 1e-10);
        let zero = SeminormSpec { mu: SplittingOperator::zero(), c: 0.7, base_norm: BaseNorm::HoferOsc };
        assert!((zero.seminorm(&ds).unwrap() - 0.7 * ds.l2_norm()).abs() < 1e-14);
    }

    #[test]
    fn norm_criterion_examples() {
        let m = t2();
        assert!(matches!(SeminormSpec::hodge(1.0, BaseNorm::HoferOsc).norm_criterion(&m).unwrap(), NormCriterion::IsNorm));
        match SeminormSpec::hodge(0.0, BaseNorm::HoferOsc).norm_criterion(&m).unwrap() {
            NormCriterion::IsSeminormOnly { witness } => assert_eq!(witness.harmonic_coeffs(), vec![0.0, 1.0]),
            other => panic!("{other:?}"),
        }
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        let h = Hamiltonian::random_trig(&mut rng, 2, 2, 1.0).sample(&m);
        let spec = SeminormSpec {
            mu: SplittingOperator::hamiltonian_contraction(&m, h).unwrap(),
            c: 0.0,
            base_norm: BaseNorm::L2OnExact,
        };
        assert!(matches!(spec.norm_criterion(&m).unwrap(), NormCriterion::IsSeminormOnly { .. }));
    }

    #[test]
    fn pullback_diff_of_identity_vanishes() {
        let m = t2();
        let mu = SplittingOperator::pullback_diff(DiffeoMap::identity(&m));
        let a = OneFormField::constant(&m, &[0.4, -0.2]).add(&Hamiltonian::mode(0.3, &[1, 2]).form(&m));
        assert_eq!(mu.apply(&a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn exact_projection_is_idempotent() {
        let m = t2();
        let b1 = Hamiltonian::mode(1.0, &[1, 0]).form(&m);
        let b2 = Hamiltonian::mode(1.0, &[0, 1]).form(&m);
        let mu = SplittingOperator::exact_projection(vec![b1.clone(), b2, b1.scale(2.0)]).unwrap();
        if let MuKind::ExactProjection { basis } = &mu.kind {
            assert_eq!(basis.len(), 2);
        }
        let a = OneFormField::constant(&m, &[1.0, 0.0]).add(&b1.scale(0.5)).add(&Hamiltonian::mode(1.0, &[1, 1]).form(&m));
        let p = mu.apply(&a).unwrap();
        assert!(p.sub(&b1.scale(0.5)).l2_norm() < 1e-12);
        assert!(mu.apply(&p).unwrap().sub(&p).l2_norm() < 1e-12);
    }
}
