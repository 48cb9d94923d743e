//! The flux group as a lattice in `H^1`, closest-vector queries and product tori.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diffeo::DiffeoMap;
use crate::error::{Error, Result};
use crate::forms::{self, OneFormField};
use crate::model::TorusModel;
use crate::paths::{FluxVector, IsotopyPath};

/// Largest rank handled by the enumeration.
pub const MAX_RANK: usize = 12;
/// Distance below which a flux is considered a lattice point.
pub const HAMILTONIAN_TOL: f64 = 1e-6;
/// Upper end of the ambiguous band.
pub const BORDERLINE_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxLattice {
    pub rank: usize,
    pub generators: Vec<FluxVector>,
    /// Row-major `rank x rank` Gram matrix of harmonic L2 inner products.
    pub gram: Vec<f64>,
    /// Harmonic L2 weight of each basis class `[dx_k]`.
    metric: Vec<f64>,
}

/// Result of a closest-vector query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosestVector {
    /// Integer coordinates in the generator basis.
    pub coords: Vec<i64>,
    /// The lattice point in `H^1` coordinates.
    pub point: Vec<f64>,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HamiltonianTag {
    Yes { distance: f64 },
    Borderline { distance: f64 },
    No { distance: f64 },
}

impl HamiltonianTag {
    pub fn is_yes(&self) -> bool {
        matches!(self, HamiltonianTag::Yes { .. })
    }

    pub fn distance(&self) -> f64 {
        match self {
            HamiltonianTag::Yes { distance } | HamiltonianTag::Borderline { distance } | HamiltonianTag::No { distance } => {
                *distance
            }
        }
    }
}

/// Flux of a map modulo the lattice: `omega^T` applied to the mean displacement.
///
/// The mean displacement of a symplectic isotopy grows at the rate of the
/// mean of its vector field, which is the dual of the harmonic part.
pub fn map_flux(map: &DiffeoMap) -> FluxVector {
    let m = map.model();
    let d = m.dim();
    let mean: Vec<f64> = map
        .displacement()
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let coeffs = (0..d).map(|j| (0..d).map(|i| m.omega(i, j) * mean[i]).sum()).collect();
    FluxVector::new(m, coeffs)
}

impl FluxLattice {
    pub fn from_generators(model: &TorusModel, generators: Vec<FluxVector>) -> Result<Self> {
        let rank = generators.len();
        if rank > MAX_RANK {
            return Err(Error::UnsupportedRank(rank));
        }
        let d = model.dim();
        if generators.iter().any(|g| g.coeffs.len() != d) {
            return Err(Error::Shape("generator dimension differs from the model".into()));
        }
        let metric: Vec<f64> = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                forms::harmonic_inner(model, &e, &e)
            })
            .collect();
        let mut gram = vec![0.0; rank * rank];
        for i in 0..rank {
            for j in 0..rank {
                gram[i * rank + j] = forms::harmonic_inner(model, &generators[i].coeffs, &generators[j].coeffs);
            }
        }
        let det = DMatrix::from_row_slice(rank, rank, &gram).determinant();
        if rank > 0 && !(det > 1e-12) {
            return Err(Error::Degenerate(format!("lattice generators are dependent (Gram determinant {det:.2e})")));
        }
        Ok(FluxLattice { rank, generators, gram, metric })
    }

    /// Fluxes of the loops translating once around each period.
    pub fn torus(model: &TorusModel) -> Result<Self> {
        let d = model.dim();
        let mut gens = Vec::with_capacity(d);
        for k in 0..d {
            // generating form of the translation by L_k e_k is omega(L_k e_k, .)
            let coeffs: Vec<f64> = (0..d).map(|j| model.omega(k, j) * model.periods()[k]).collect();
            let path = IsotopyPath::constant(model, 4, &OneFormField::constant(model, &coeffs))?;
            let end = path.endpoint()?;
            let gap = end.distance(&DiffeoMap::identity(model));
            if gap > 1e-10 {
                return Err(Error::Integration(format!("translation loop does not close (gap {gap:.2e})")));
            }
            gens.push(path.flux());
        }
        Self::from_generators(model, gens)
    }

    fn gram_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rank, self.rank, &self.gram)
    }

    fn norm2(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.metric).map(|(x, m)| x * x * m).sum()
    }

    /// Exact closest lattice vector in the harmonic L2 metric.
    pub fn closest_vector(&self, v: &[f64]) -> Result<ClosestVector> {
        if self.rank > MAX_RANK {
            return Err(Error::UnsupportedRank(self.rank));
        }
        let d = self.metric.len();
        if v.len() != d {
            return Err(Error::Shape("flux dimension differs from the lattice".into()));
        }
        if self.rank == 0 {
            return Ok(ClosestVector { coords: vec![], point: vec![0.0; d], distance: self.norm2(v).sqrt() });
        }
        let n = self.rank;
        let g = self.gram_matrix();
        // projection of v onto the lattice span, in generator coordinates
        let rhs = DVector::from_fn(n, |i, _| {
            self.generators[i].coeffs.iter().zip(v).zip(&self.metric).map(|((a, b), m)| a * b * m).sum::<f64>()
        });
        let chol = g.clone().cholesky().ok_or_else(|| Error::Degenerate("Gram matrix not positive definite".into()))?;
        let y = chol.solve(&rhs);
        let r = chol.l().transpose();
        let best = enumerate_closest(&r, y.as_slice());
        let point: Vec<f64> = (0..d)
            .map(|k| best.iter().zip(&self.generators).map(|(c, gv)| *c as f64 * gv.coeffs[k]).sum())
            .collect();
        let diff: Vec<f64> = v.iter().zip(&point).map(|(a, b)| a - b).collect();
        Ok(ClosestVector { coords: best, point, distance: self.norm2(&diff).sqrt() })
    }

    /// Length of the shortest nonzero lattice vector.
    pub fn epsilon0(&self) -> f64 {
        let n = self.rank;
        if n == 0 {
            return f64::INFINITY;
        }
        let g = self.gram_matrix();
        let r = g.cholesky().expect("validated Gram matrix").l().transpose();
        let mut best = (0..n).map(|i| self.gram[i * n + i]).fold(f64::INFINITY, f64::min);
        let mut z = vec![0i64; n];
        shortest_rec(&r, n - 1, &mut z, 0.0, &mut best);
        best.sqrt()
    }

    pub fn classify(&self, flux: &[f64]) -> Result<HamiltonianTag> {
        let cv = self.closest_vector(flux)?;
        let distance = cv.distance;
        Ok(if distance <= HAMILTONIAN_TOL {
            HamiltonianTag::Yes { distance }
        } else if distance < BORDERLINE_TOL {
            HamiltonianTag::Borderline { distance }
        } else {
            HamiltonianTag::No { distance }
        })
    }

    /// Block lattice of a product from the lattices of the factors.
    pub fn direct_sum(&self, other: &FluxLattice, product: &TorusModel) -> Result<FluxLattice> {
        let d1 = self.metric.len();
        let d2 = other.metric.len();
        let mut gens = Vec::new();
        for g in &self.generators {
            let mut c = g.coeffs.clone();
            c.extend(std::iter::repeat(0.0).take(d2));
            gens.push(FluxVector::new(product, c));
        }
        for g in &other.generators {
            let mut c = vec![0.0; d1];
            c.extend_from_slice(&g.coeffs);
            gens.push(FluxVector::new(product, c));
        }
        FluxLattice::from_generators(product, gens)
    }
}

/// Is `flux` a lattice point (within tolerance)?
pub fn is_hamiltonian_endpoint(flux: &FluxVector, lattice: &FluxLattice) -> Result<HamiltonianTag> {
    lattice.classify(&flux.coeffs)
}

fn enumerate_closest(r: &DMatrix<f64>, y: &[f64]) -> Vec<i64> {
    let n = y.len();
    // Babai rounding gives the initial radius
    let mut babai = vec![0i64; n];
    for i in (0..n).rev() {
        let mut c = y[i];
        for j in i + 1..n {
            c -= r[(i, j)] / r[(i, i)] * (babai[j] as f64 - y[j]);
        }
        babai[i] = c.round() as i64;
    }
    let mut best = babai.clone();
    let mut best_d = quad(r, &babai, y);
    let mut z = vec![0i64; n];
    closest_rec(r, y, n - 1, &mut z, 0.0, &mut best, &mut best_d);
    best
}

fn quad(r: &DMatrix<f64>, z: &[i64], y: &[f64]) -> f64 {
    let n = y.len();
    (0..n)
        .map(|i| {
            let s: f64 = (i..n).map(|j| r[(i, j)] * (z[j] as f64 - y[j])).sum();
            s * s
        })
        .sum()
}

fn closest_rec(r: &DMatrix<f64>, y: &[f64], i: usize, z: &mut [i64], partial: f64, best: &mut Vec<i64>, best_d: &mut f64) {
    let n = y.len();
    let mut c = y[i];
    for j in i + 1..n {
        c -= r[(i, j)] / r[(i, i)] * (z[j] as f64 - y[j]);
    }
    let rii = r[(i, i)];
    let width = ((*best_d - partial).max(0.0).sqrt() / rii.abs()).floor() as i64 + 1;
    let center = c.round() as i64;
    // zig-zag from the nearest integer outward
    let mut order = vec![center];
    for k in 1..=width {
        order.push(center + k);
        order.push(center - k);
    }
    for zi in order {
        let t = rii * (zi as f64 - c);
        let p = partial + t * t;
        if p > *best_d + 1e-15 {
            continue;
        }
        z[i] = zi;
        if i == 0 {
            if p < *best_d {
                *best_d = p;
                best.copy_from_slice(z);
            }
        } else {
            closest_rec(r, y, i - 1, z, p, best, best_d);
        }
    }
}

fn shortest_rec(r: &DMatrix<f64>, i: usize, z: &mut [i64], partial: f64, best: &mut f64) {
    let n = z.len();
    let mut c = 0.0;
    for j in i + 1..n {
        c -= r[(i, j)] / r[(i, i)] * z[j] as f64;
    }
    let rii = r[(i, i)];
    let width = ((*best - partial).max(0.0).sqrt() / rii.abs()).floor() as i64 + 1;
    let center = c.round() as i64;
    for zi in center - width..=center + width {
        let t = rii * (zi as f64 - c);
        let p = partial + t * t;
        if p > *best * (1.0 + 1e-12) {
            continue;
        }
        z[i] = zi;
        if i == 0 {
            if z.iter().any(|&v| v != 0) && p < *best {
                *best = p;
            }
        } else {
            shortest_rec(r, i - 1, z, p, best);
        }
    }
    z[i] = 0;
}

/// A product torus with the block symplectic form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductModel {
    pub left: TorusModel,
    pub right: TorusModel,
    pub product: TorusModel,
}

impl ProductModel {
    pub fn new(left: &TorusModel, right: &TorusModel) -> Result<Self> {
        Ok(ProductModel { left: left.clone(), right: right.clone(), product: left.product(right)? })
    }

    fn right_points(&self) -> usize {
        self.right.npoints()
    }

    /// `pr_1^* alpha` for a form on the left factor.
    pub fn lift_left(&self, alpha: &OneFormField) -> OneFormField {
        let nr = self.right_points();
        let mut comps: Vec<Vec<f64>> = alpha
            .components()
            .iter()
            .map(|c| c.iter().flat_map(|&v| std::iter::repeat(v).take(nr)).collect())
            .collect();
        for _ in 0..self.right.dim() {
            comps.push(vec![0.0; self.product.npoints()]);
        }
        OneFormField::new(&self.product, comps).expect("lifted shape").with_tag(alpha.tag())
    }

    /// `pr_2^* alpha` for a form on the right factor.
    pub fn lift_right(&self, alpha: &OneFormField) -> OneFormField {
        let nl = self.left.npoints();
        let mut comps = vec![vec![0.0; self.product.npoints()]; self.left.dim()];
        for c in alpha.components() {
            comps.push((0..nl).flat_map(|_| c.iter().copied()).collect());
        }
        OneFormField::new(&self.product, comps).expect("lifted shape").with_tag(alpha.tag())
    }

    pub fn lift_left_path(&self, p: &IsotopyPath) -> IsotopyPath {
        IsotopyPath::from_samples_unchecked(&self.product, p.samples().iter().map(|s| self.lift_left(s)).collect())
    }

    pub fn lift_right_path(&self, p: &IsotopyPath) -> IsotopyPath {
        IsotopyPath::from_samples_unchecked(&self.product, p.samples().iter().map(|s| self.lift_right(s)).collect())
    }

    /// `phi x psi` as a map of the product.
    pub fn product_map(&self, phi: &DiffeoMap, psi: &DiffeoMap) -> DiffeoMap {
        let nr = self.right_points();
        let nl = self.left.npoints();
        let mut disp: Vec<Vec<f64>> = phi
            .displacement()
            .iter()
            .map(|c| c.iter().flat_map(|&v| std::iter::repeat(v).take(nr)).collect())
            .collect();
        for c in psi.displacement() {
            disp.push((0..nl).flat_map(|_| c.iter().copied()).collect());
        }
        DiffeoMap::from_displacement_unchecked(&self.product, disp)
    }

    /// `(F_left, F_right)`.
    pub fn product_flux(&self, left: &FluxVector, right: &FluxVector) -> FluxVector {
        let mut c = left.coeffs.clone();
        c.extend_from_slice(&right.coeffs);
        FluxVector::new(&self.product, c)
    }
}
