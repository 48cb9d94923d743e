//! Path lengths, certified distance intervals and the distance to the Hamiltonian group.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeo::DiffeoMap;
use crate::error::{Error, Result};
use crate::forms::{self, OneFormField};
use crate::lattice::{self, FluxLattice};
use crate::model::TorusModel;
use crate::optimize::{lbfgs, LbfgsOptions};
use crate::paths::{quadrature_weights, FluxVector, IsotopyPath};
use crate::splitting::{BaseNorm, SeminormSpec};

/// `int_0^1 n_{(mu,c)}(alpha_t) dt` by the path quadrature rule.
pub fn length(path: &IsotopyPath, spec: &SeminormSpec) -> Result<f64> {
    path.integrate(|a| spec.seminorm(a))
}

/// Norm used on harmonic coefficients in the Banyaga-type length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicNorm {
    /// L2 norm of the harmonic representative.
    #[default]
    L2,
    /// Euclidean norm of the coefficient vector.
    Euclidean,
}

/// `int_0^1 (osc u_t + |h_t|) dt`.
pub fn length_banyaga(path: &IsotopyPath, norm: HarmonicNorm) -> Result<f64> {
    let model = path.model().clone();
    path.integrate(|a| {
        let split = a.hodge_decompose()?;
        let h = match norm {
            HarmonicNorm::L2 => forms::harmonic_l2(&model, &split.harmonic),
            HarmonicNorm::Euclidean => split.harmonic.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        Ok(crate::spectral::continuous_osc(&model, &split.primitive) + h)
    })
}

/// A certified interval for a distance, with the path realizing the upper end.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub lower: f64,
    pub upper: f64,
    #[serde(skip)]
    pub witness: Option<IsotopyPath>,
    /// Endpoint (or flux) residual of the witness.
    pub residual: f64,
    pub seeds: Vec<u64>,
    pub method_log: String,
    pub wall_time: f64,
}

/// Settings of the finite-dimensional path family and its optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzConfig {
    /// Largest spatial frequency per axis of the primitive track.
    pub k_modes: usize,
    /// Polynomial degree of the time profiles.
    pub time_degree: usize,
    /// Time steps of decoded witness paths.
    pub steps: usize,
    /// Time steps of the flow inside the optimizer.
    pub flow_steps: usize,
    /// Points per axis at which the optimizer tracks the flow.
    pub flow_grid: usize,
    /// Random restarts in addition to the straight-path seed.
    pub seeds: usize,
    pub stages: usize,
    pub penalty0: f64,
    pub max_iter: usize,
    pub feasibility_tol: f64,
    pub seed: u64,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        AnsatzConfig {
            k_modes: 8,
            time_degree: 3,
            steps: 64,
            flow_steps: 32,
            flow_grid: 16,
            seeds: 4,
            stages: 4,
            penalty0: 10.0,
            max_iter: 200,
            feasibility_tol: 1e-3,
            seed: 0,
        }
    }
}

/// Shifted Legendre polynomials `P_p(2t - 1)`, `p <= degree`.
fn legendre(degree: usize, t: f64) -> Vec<f64> {
    let x = 2.0 * t - 1.0;
    let mut out = vec![1.0; degree + 1];
    if degree >= 1 {
        out[1] = x;
    }
    for n in 1..degree {
        out[n + 1] = ((2 * n + 1) as f64 * x * out[n] - n as f64 * out[n - 1]) / (n + 1) as f64;
    }
    out
}

/// Paths `alpha_t = sum_p P_p(t) (sum_k a_kp dx_k + d(sum_s c_sp phi_s))` with
/// `phi_s` the real Fourier modes of frequency at most `k_modes` per axis.
///
/// Parameters are stored spatial-index major: `theta[s * P + p]`, harmonic
/// directions first.
#[derive(Clone, Debug)]
pub struct PathAnsatz {
    model: TorusModel,
    config: AnsatzConfig,
    freqs: Vec<Vec<i64>>,
    waves: Vec<Vec<f64>>,
}

impl PathAnsatz {
    pub fn new(model: &TorusModel, config: AnsatzConfig) -> Result<Self> {
        if 2 * config.k_modes >= model.grid_res() {
            return Err(Error::Config(format!(
                "k_modes {} is not resolved by grid_res {}",
                config.k_modes,
                model.grid_res()
            )));
        }
        if config.steps < 2 || config.flow_steps < 1 || config.flow_grid == 0 {
            return Err(Error::Config("ansatz needs positive step counts".into()));
        }
        let d = model.dim();
        let k = config.k_modes as i64;
        let mut freqs = Vec::new();
        let mut f = vec![-k; d];
        'outer: loop {
            // one representative per +/- pair: first nonzero entry positive
            if let Some(first) = f.iter().find(|&&v| v != 0) {
                if *first > 0 {
                    freqs.push(f.clone());
                }
            }
            let mut a = 0;
            loop {
                if a == d {
                    break 'outer;
                }
                f[a] += 1;
                if f[a] <= k {
                    break;
                }
                f[a] = -k;
                a += 1;
            }
        }
        let waves = freqs
            .iter()
            .map(|f| f.iter().zip(model.periods()).map(|(&k, &l)| 2.0 * std::f64::consts::PI * k as f64 / l).collect())
            .collect();
        Ok(PathAnsatz { model: model.clone(), config, freqs, waves })
    }

    pub fn model(&self) -> &TorusModel {
        &self.model
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    fn ntime(&self) -> usize {
        self.config.time_degree + 1
    }

    /// Spatial basis size: harmonic directions plus cosine and sine of each mode.
    pub fn nspatial(&self) -> usize {
        self.model.dim() + 2 * self.freqs.len()
    }

    pub fn nparams(&self) -> usize {
        self.nspatial() * self.ntime()
    }

    /// Spatial coefficients at time `t`.
    pub fn coeffs_at(&self, theta: &[f64], t: f64) -> Vec<f64> {
        let b = legendre(self.config.time_degree, t);
        let p = self.ntime();
        (0..self.nspatial()).map(|s| (0..p).map(|q| theta[s * p + q] * b[q]).sum()).collect()
    }

    /// Flux of the decoded path: the constant-profile harmonic coefficients.
    pub fn flux(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.model.dim()).map(|k| theta[k * self.ntime()]).collect()
    }

    /// Sets the flux exactly, leaving all other coefficients unchanged.
    pub fn set_flux(&self, theta: &mut [f64], flux: &[f64]) {
        for (k, f) in flux.iter().enumerate() {
            theta[k * self.ntime()] = *f;
        }
    }

    /// Basis form `s` sampled on the grid.
    pub fn basis_form(&self, s: usize) -> OneFormField {
        let d = self.model.dim();
        if s < d {
            let mut e = vec![0.0; d];
            e[s] = 1.0;
            return OneFormField::constant(&self.model, &e);
        }
        let m = (s - d) / 2;
        let sine = (s - d) % 2 == 1;
        let w = &self.waves[m];
        OneFormField::from_fn(&self.model, |x, out| {
            let th: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            // d cos = -sin w, d sin = cos w
            let g = if sine { th.cos() } else { -th.sin() };
            for k in 0..d {
                out[k] = g * w[k];
            }
        })
        .checked()
        .expect("trigonometric gradients are closed")
    }

    /// Primitive of basis form `s` (zero for harmonic directions).
    pub fn basis_primitive(&self, s: usize) -> Vec<f64> {
        let d = self.model.dim();
        if s < d {
            return vec![0.0; self.model.npoints()];
        }
        let m = (s - d) / 2;
        let sine = (s - d) % 2 == 1;
        let w = &self.waves[m];
        let mut x = vec![0.0; d];
        (0..self.model.npoints())
            .map(|i| {
                self.model.point(i, &mut x);
                let th: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
                if sine {
                    th.sin()
                } else {
                    th.cos()
                }
            })
            .collect()
    }

    fn basis_forms(&self) -> Vec<OneFormField> {
        (0..self.nspatial()).into_par_iter().map(|s| self.basis_form(s)).collect()
    }

    /// The path with the given coefficients.
    pub fn decode(&self, theta: &[f64]) -> IsotopyPath {
        self.decode_with(&self.basis_forms(), theta)
    }

    fn decode_with(&self, basis: &[OneFormField], theta: &[f64]) -> IsotopyPath {
        let steps = self.config.steps;
        let samples = (0..=steps)
            .map(|i| {
                let z = self.coeffs_at(theta, i as f64 / steps as f64);
                let mut acc = OneFormField::zero(&self.model);
                for (b, zs) in basis.iter().zip(&z) {
                    if *zs != 0.0 {
                        acc = acc.lincomb(1.0, b, *zs);
                    }
                }
                acc
            })
            .collect();
        IsotopyPath::from_samples_unchecked(&self.model, samples)
    }

    /// Coefficients of the path `t -> alpha` (constant in time) best fitting a closed form.
    pub fn project_constant(&self, alpha: &OneFormField) -> Vec<f64> {
        let split = alpha.hodge_unchecked();
        let mut theta = vec![0.0; self.nparams()];
        let p = self.ntime();
        for (k, h) in split.harmonic.iter().enumerate() {
            theta[k * p] = *h;
        }
        let d = self.model.dim();
        let npts = self.model.npoints() as f64;
        for s in d..self.nspatial() {
            let phi = self.basis_primitive(s);
            let num: f64 = phi.iter().zip(&split.primitive).map(|(a, b)| a * b).sum();
            let den: f64 = phi.iter().map(|a| a * a).sum();
            if den > 1e-12 * npts {
                theta[s * p] = num / den;
            }
        }
        theta
    }

    /// Vector field `X = A alpha` of spatial coefficients `z` at `x`, and optionally `DX`.
    fn field(&self, z: &[f64], x: &[f64], f: &mut [f64], df: Option<&mut [f64]>, scratch: &mut Vec<Complex64>) {
        let d = self.model.dim();
        let mut alpha = [0.0f64; 8];
        let mut dalpha = [0.0f64; 64];
        alpha[..d].copy_from_slice(&z[..d]);
        self.phase_table(x, scratch);
        let want_d = df.is_some();
        for (m, w) in self.waves.iter().enumerate() {
            let (zc, zs) = (z[d + 2 * m], z[d + 2 * m + 1]);
            if zc == 0.0 && zs == 0.0 {
                continue;
            }
            let ph = self.mode_phase(m, scratch);
            // alpha += zc d cos + zs d sin
            let g = -zc * ph.im + zs * ph.re;
            for k in 0..d {
                alpha[k] += g * w[k];
            }
            if want_d {
                let hval = -(zc * ph.re + zs * ph.im);
                for i in 0..d {
                    for j in 0..d {
                        dalpha[i * d + j] += hval * w[i] * w[j];
                    }
                }
            }
        }
        for i in 0..d {
            f[i] = (0..d).map(|j| self.model.field_map(i, j) * alpha[j]).sum();
        }
        if let Some(df) = df {
            for i in 0..d {
                for j in 0..d {
                    df[i * d + j] = (0..d).map(|k| self.model.field_map(i, k) * dalpha[k * d + j]).sum();
                }
            }
        }
    }

    /// Adds `d(lam . X)/dz` to `gz` and returns `(DX)^T lam` in `gx`.
    fn field_vjp(&self, z: &[f64], x: &[f64], lam: &[f64], gz: &mut [f64], gx: &mut [f64], scratch: &mut Vec<Complex64>) {
        let d = self.model.dim();
        // mu = A^T lam, so lam . X = mu . alpha
        let mut mu = [0.0f64; 8];
        for j in 0..d {
            mu[j] = (0..d).map(|i| self.model.field_map(i, j) * lam[i]).sum();
        }
        for k in 0..d {
            gz[k] += mu[k];
            gx[k] = 0.0;
        }
        self.phase_table(x, scratch);
        for (m, w) in self.waves.iter().enumerate() {
            let ph = self.mode_phase(m, scratch);
            let wm: f64 = w.iter().zip(&mu[..d]).map(|(a, b)| a * b).sum();
            gz[d + 2 * m] += -ph.im * wm;
            gz[d + 2 * m + 1] += ph.re * wm;
            let (zc, zs) = (z[d + 2 * m], z[d + 2 * m + 1]);
            if zc != 0.0 || zs != 0.0 {
                let hval = -(zc * ph.re + zs * ph.im) * wm;
                for j in 0..d {
                    gx[j] += hval * w[j];
                }
            }
        }
    }

    fn phase_table(&self, x: &[f64], table: &mut Vec<Complex64>) {
        let d = self.model.dim();
        let k = self.config.k_modes;
        let width = 2 * k + 1;
        table.clear();
        table.resize(d * width, Complex64::new(1.0, 0.0));
        for a in 0..d {
            let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x[a] / self.model.periods()[a]);
            let base = a * width + k;
            for j in 1..=k {
                let v = table[base + j - 1] * e;
                table[base + j] = v;
                table[base - j] = v.conj();
            }
        }
    }

    fn mode_phase(&self, m: usize, table: &[Complex64]) -> Complex64 {
        let k = self.config.k_modes as i64;
        let width = (2 * k + 1) as usize;
        let mut p = Complex64::new(1.0, 0.0);
        for (a, &f) in self.freqs[m].iter().enumerate() {
            if f != 0 {
                p *= table[a * width + (f + k) as usize];
            }
        }
        p
    }
}

/// Precomputed quadratic and oscillation data for smooth length evaluation.
pub struct LengthModel {
    nspatial: usize,
    ntime: usize,
    weights: Vec<f64>,
    basis_at_nodes: Vec<Vec<f64>>,
    base: BaseNorm,
    c: f64,
    gmu: DMatrix<f64>,
    grest: DMatrix<f64>,
    /// Primitive of `mu(e_s)` at grid points, `npoints x nspatial`.
    prim: DMatrix<f64>,
    tau: f64,
}

const ETA2: f64 = 1e-24;

impl LengthModel {
    pub fn new(ans: &PathAnsatz, spec: &SeminormSpec) -> Result<Self> {
        let basis = ans.basis_forms();
        let images = basis.par_iter().map(|b| spec.mu.apply(b)).collect::<Result<Vec<_>>>()?;
        let rests: Vec<OneFormField> = basis.iter().zip(&images).map(|(b, m)| b.sub(m)).collect();
        let n = basis.len();
        let gmu = DMatrix::from_fn(n, n, |i, j| images[i].l2_inner(&images[j]));
        let grest = DMatrix::from_fn(n, n, |i, j| rests[i].l2_inner(&rests[j]));
        let prim = if spec.base_norm == BaseNorm::HoferOsc {
            let cols: Vec<Vec<f64>> = images.par_iter().map(|im| im.hodge_unchecked().primitive).collect();
            DMatrix::from_fn(ans.model.npoints(), n, |p, s| cols[s][p])
        } else {
            DMatrix::zeros(0, n)
        };
        let steps = ans.config.steps;
        let weights = quadrature_weights(steps);
        let basis_at_nodes = (0..=steps).map(|i| legendre(ans.config.time_degree, i as f64 / steps as f64)).collect();
        Ok(LengthModel {
            nspatial: n,
            ntime: ans.ntime(),
            weights,
            basis_at_nodes,
            base: spec.base_norm,
            c: spec.c,
            gmu,
            grest,
            prim,
            tau: 1e-3,
        })
    }

    pub fn set_tau(&mut self, tau: f64) {
        self.tau = tau;
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn z_at(&self, theta: &[f64], i: usize) -> Vec<f64> {
        let b = &self.basis_at_nodes[i];
        (0..self.nspatial).map(|s| (0..self.ntime).map(|q| theta[s * self.ntime + q] * b[q]).sum()).collect()
    }

    /// Grid oscillation of the `mu` part at every node (used to pick the smoothing scale).
    pub fn max_grid_osc(&self, theta: &[f64]) -> f64 {
        if self.base != BaseNorm::HoferOsc {
            return 0.0;
        }
        (0..self.weights.len())
            .map(|i| {
                let z = nalgebra::DVector::from_vec(self.z_at(theta, i));
                let u = &self.prim * z;
                forms::osc_norm(u.as_slice())
            })
            .fold(0.0, f64::max)
    }

    fn integrand(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let zv = nalgebra::DVector::from_column_slice(z);
        let mut grad = vec![0.0; z.len()];
        let mut val = 0.0;
        match self.base {
            BaseNorm::L2OnExact => {
                let gz = &self.gmu * &zv;
                let q = (zv.dot(&gz) + ETA2).sqrt();
                val += q;
                for (g, v) in grad.iter_mut().zip(gz.iter()) {
                    *g += v / q;
                }
            }
            BaseNorm::HoferOsc => {
                let u = &self.prim * &zv;
                let tau = self.tau;
                let mut wsum = vec![0.0; u.len()];
                let npts = u.len() as f64;
                for sign in [1.0, -1.0] {
                    let mx = u.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(sign * v));
                    let e: Vec<f64> = u.iter().map(|&v| ((sign * v - mx) / tau).exp()).collect();
                    let s: f64 = e.iter().sum();
                    val += mx + tau * (s / npts).ln();
                    for (w, ei) in wsum.iter_mut().zip(&e) {
                        *w += sign * ei / s;
                    }
                }
                let g = self.prim.transpose() * nalgebra::DVector::from_vec(wsum);
                for (gi, v) in grad.iter_mut().zip(g.iter()) {
                    *gi += v;
                }
            }
        }
        if self.c != 0.0 {
            let gr = &self.grest * &zv;
            let q = (zv.dot(&gr) + ETA2).sqrt();
            val += self.c * q;
            for (g, v) in grad.iter_mut().zip(gr.iter()) {
                *g += self.c * v / q;
            }
        }
        (val, grad)
    }

    /// Smoothed length and its gradient in the ansatz coefficients.
    pub fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Vec<f64>)> = (0..self.weights.len())
            .into_par_iter()
            .map(|i| {
                let (v, gz) = self.integrand(&self.z_at(theta, i));
                let b = &self.basis_at_nodes[i];
                let w = self.weights[i];
                let mut g = vec![0.0; theta.len()];
                for s in 0..self.nspatial {
                    for q in 0..self.ntime {
                        g[s * self.ntime + q] = w * b[q] * gz[s];
                    }
                }
                (w * v, g)
            })
            .collect();
        let mut val = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for (v, g) in parts {
            val += v;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (val, grad)
    }
}

/// Squared wrapped L2 distance between the flowed endpoint and a target map,
/// tracked on a sub-grid of points.
pub struct EndpointPenalty<'a> {
    ans: &'a PathAnsatz,
    points: Vec<f64>,
    target: Vec<f64>,
    weight: f64,
}

const CHUNK: usize = 32;

impl<'a> EndpointPenalty<'a> {
    pub fn new(ans: &'a PathAnsatz, target: &DiffeoMap) -> Result<Self> {
        let m = &ans.model;
        if !m.same_grid(target.model()) {
            return Err(Error::Shape("target map lives on a different grid".into()));
        }
        let d = m.dim();
        let n = m.grid_res();
        let stride = (n / ans.config.flow_grid.min(n)).max(1);
        let mut idx = vec![0usize; d];
        let mut points = Vec::new();
        let mut tgt = Vec::new();
        let mut x = vec![0.0; d];
        for i in 0..m.npoints() {
            m.multi_index(i, &mut idx);
            if idx.iter().all(|v| v % stride == 0) {
                m.point(i, &mut x);
                points.extend_from_slice(&x);
                for k in 0..d {
                    tgt.push(target.displacement()[k][i]);
                }
            }
        }
        let npts = points.len() / d;
        Ok(EndpointPenalty { ans, points, target: tgt, weight: m.volume() / npts as f64 })
    }

    fn z_table(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let t = self.ans.config.flow_steps;
        (0..=2 * t).map(|j| self.ans.coeffs_at(theta, j as f64 / (2 * t) as f64)).collect()
    }

    /// Penalty value and gradient.
    pub fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.ans.model.dim();
        let zs = self.z_table(theta);
        let ns = self.ans.nspatial();
        let nchunks = (self.points.len() / d).div_ceil(CHUNK);
        let parts: Vec<(f64, Vec<f64>)> = (0..nchunks)
            .into_par_iter()
            .map(|c| {
                let mut gz = vec![0.0; zs.len() * ns];
                let mut val = 0.0;
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(self.points.len() / d);
                let mut scratch = Vec::new();
                for p in lo..hi {
                    val += self.point_adjoint(&zs, p, &mut gz, &mut scratch);
                }
                (val, gz)
            })
            .collect();
        let mut val = 0.0;
        let mut gz = vec![0.0; zs.len() * ns];
        for (v, g) in parts {
            val += v;
            for (a, b) in gz.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let t = self.ans.config.flow_steps;
        let p = self.ans.ntime();
        let mut grad = vec![0.0; theta.len()];
        for j in 0..=2 * t {
            let b = legendre(self.ans.config.time_degree, j as f64 / (2 * t) as f64);
            for s in 0..ns {
                let g = gz[j * ns + s];
                if g != 0.0 {
                    for q in 0..p {
                        grad[s * p + q] += g * b[q];
                    }
                }
            }
        }
        (self.weight * val, grad.into_iter().map(|g| self.weight * g).collect())
    }

    /// Root of the penalty: the wrapped L2 endpoint residual on the sub-grid.
    pub fn residual(&self, theta: &[f64]) -> f64 {
        let d = self.ans.model.dim();
        let zs = self.z_table(theta);
        let mut scratch = Vec::new();
        let mut acc = 0.0;
        for p in 0..self.points.len() / d {
            let (end, _) = self.forward(&zs, p, &mut scratch);
            for k in 0..d {
                let r = self.ans.model.wrap(k, end[k] - self.target[p * d + k]);
                acc += r * r;
            }
        }
        (self.weight * acc).sqrt()
    }

    /// RK4 displacement trajectory of one point.
    fn forward(&self, zs: &[Vec<f64>], p: usize, scratch: &mut Vec<Complex64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.ans.model.dim();
        let t = self.ans.config.flow_steps;
        let h = 1.0 / t as f64;
        let x0 = &self.points[p * d..(p + 1) * d];
        let mut v = vec![0.0; d];
        let mut traj = Vec::with_capacity(t + 1);
        traj.push(v.clone());
        let mut k = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
        let mut y = vec![0.0; d];
        for n in 0..t {
            for (stage, (zi, c)) in [(2 * n, 0.0), (2 * n + 1, 0.5), (2 * n + 1, 0.5), (2 * n + 2, 1.0)].iter().enumerate() {
                for a in 0..d {
                    y[a] = x0[a] + v[a] + if stage == 0 { 0.0 } else { c * h * k[stage - 1][a] };
                }
                let (head, tail) = k.split_at_mut(stage);
                let _ = head;
                self.ans.field(&zs[*zi], &y, &mut tail[0], None, scratch);
            }
            for a in 0..d {
                v[a] += h / 6.0 * (k[0][a] + 2.0 * k[1][a] + 2.0 * k[2][a] + k[3][a]);
            }
            traj.push(v.clone());
        }
        (v, traj)
    }

    fn point_adjoint(&self, zs: &[Vec<f64>], p: usize, gz: &mut [f64], scratch: &mut Vec<Complex64>) -> f64 {
        let d = self.ans.model.dim();
        let ns = self.ans.nspatial();
        let t = self.ans.config.flow_steps;
        let h = 1.0 / t as f64;
        let x0 = &self.points[p * d..(p + 1) * d];
        let (end, traj) = self.forward(zs, p, scratch);
        let mut val = 0.0;
        let mut lam = vec![0.0; d];
        for a in 0..d {
            let r = self.ans.model.wrap(a, end[a] - self.target[p * d + a]);
            val += r * r;
            lam[a] = 2.0 * r;
        }
        let stage_z = |n: usize| [2 * n, 2 * n + 1, 2 * n + 1, 2 * n + 2];
        let coef = [0.0, 0.5, 0.5, 1.0];
        let mut ys = vec![vec![0.0; d]; 4];
        let mut ks = vec![vec![0.0; d]; 4];
        let mut gk = vec![vec![0.0; d]; 4];
        let mut gx = vec![0.0; d];
        for n in (0..t).rev() {
            let v = &traj[n];
            let zi = stage_z(n);
            for s in 0..4 {
                for a in 0..d {
                    ys[s][a] = x0[a] + v[a] + if s == 0 { 0.0 } else { coef[s] * h * ks[s - 1][a] };
                }
                let (_, tail) = ks.split_at_mut(s);
                self.ans.field(&zs[zi[s]], &ys[s], &mut tail[0], None, scratch);
            }
            // v_{n+1} = v_n + h/6 (k1 + 2 k2 + 2 k3 + k4)
            let wts = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
            for s in 0..4 {
                for a in 0..d {
                    gk[s][a] = wts[s] * lam[a];
                }
            }
            let mut gv = lam.clone();
            for s in (0..4).rev() {
                let off = zi[s] * ns;
                self.ans.field_vjp(&zs[zi[s]], &ys[s], &gk[s], &mut gz[off..off + ns], &mut gx, scratch);
                // y_s = x0 + v + c_s h k_{s-1}
                for a in 0..d {
                    gv[a] += gx[a];
                    if s > 0 {
                        gk[s - 1][a] += coef[s] * h * gx[a];
                    }
                }
            }
            lam = gv;
        }
        val
    }
}

/// Squared harmonic L2 distance between the ansatz flux and a target class.
pub fn flux_penalty(ans: &PathAnsatz, theta: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let m = &ans.model;
    let d = m.dim();
    let f = ans.flux(theta);
    let diff: Vec<f64> = f.iter().zip(target).map(|(a, b)| a - b).collect();
    let val = forms::harmonic_inner(m, &diff, &diff);
    let mut grad = vec![0.0; theta.len()];
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        grad[k * ans.ntime()] = 2.0 * forms::harmonic_inner(m, &diff, &e);
    }
    (val, grad)
}

/// Relative error between analytic and finite-difference directional derivatives,
/// maximized over random points and directions.
pub fn gradient_check(f: &dyn Fn(&[f64]) -> (f64, Vec<f64>), dim: usize, points: usize, scale: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..dim).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        let dir: Vec<f64> = (0..dim).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        worst = worst.max(directional_error(f, &x, &dir));
    }
    worst
}

/// `|g.u - D_u f| / max(|g.u|, |D_u f|)` with a Richardson-extrapolated central difference.
pub fn directional_error(f: &dyn Fn(&[f64]) -> (f64, Vec<f64>), x: &[f64], dir: &[f64]) -> f64 {
    let (_, g) = f(x);
    let analytic: f64 = g.iter().zip(dir).map(|(a, b)| a * b).sum();
    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    let dnorm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eps = 1e-4 * xnorm / dnorm;
    let central = |e: f64| {
        let xp: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + e * b).collect();
        let xm: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a - e * b).collect();
        (f(&xp).0 - f(&xm).0) / (2.0 * e)
    };
    let d1 = central(eps);
    let d2 = central(eps / 2.0);
    let fd = (4.0 * d2 - d1) / 3.0;
    let denom = analytic.abs().max(fd.abs()).max(1e-300);
    (analytic - fd).abs() / denom
}

/// Lower bound `c * min_gamma |h(F - gamma)|_{L2}`; `None` when `c = 0`.
pub fn distance_lower_flux(flux: &FluxVector, spec: &SeminormSpec, lattice: &FluxLattice) -> Result<Option<f64>> {
    if spec.c == 0.0 {
        log::warn!("flux lower bound is vacuous for c = 0");
        return Ok(None);
    }
    Ok(Some(spec.c * lattice.closest_vector(&flux.coeffs)?.distance))
}

struct SeedResult {
    theta: Vec<f64>,
    feasible: bool,
    length: f64,
    residual: f64,
    seed: u64,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn note_gap(log: &mut String, lower: f64, upper: f64) {
    if upper < lower {
        log.push_str(&format!("; witness length below flux bound by {:.3e} (quadrature)", lower - upper));
    }
}

fn coef_norm(theta: &[f64]) -> f64 {
    theta.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn perturbed_seeds(base: &[f64], cfg: &AnsatzConfig) -> Vec<(u64, Vec<f64>)> {
    let scale = 0.05 * (coef_norm(base) / (base.len() as f64).sqrt()).max(0.02);
    let mut out = vec![(cfg.seed, base.to_vec())];
    for r in 0..cfg.seeds {
        let s = cfg.seed.wrapping_mul(1_000_003).wrapping_add(r as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let th = base.iter().map(|v| v + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        out.push((s, th));
    }
    out
}

fn best_of(mut results: Vec<SeedResult>) -> SeedResult {
    results.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(a.length.total_cmp(&b.length))
            .then(coef_norm(&a.theta).total_cmp(&coef_norm(&b.theta)))
            .then(a.seed.cmp(&b.seed))
    });
    results.into_iter().next().expect("at least one seed")
}

fn penalty_schedule(cfg: &AnsatzConfig) -> Vec<f64> {
    (0..cfg.stages).map(|s| cfg.penalty0 * 10f64.powi(s as i32)).collect()
}

/// Straight-path coefficients for a target map: the constant field equal to its displacement.
pub fn log_map_seed(ans: &PathAnsatz, target: &DiffeoMap) -> Vec<f64> {
    let m = ans.model();
    let d = m.dim();
    // alpha = omega(v, .) with v the displacement
    let comps: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            (0..m.npoints())
                .map(|p| (0..d).map(|i| m.omega(i, j) * target.displacement()[i][p]).sum())
                .collect()
        })
        .collect();
    let alpha = OneFormField::new(m, comps).expect("shape");
    ans.project_constant(&alpha)
}

/// Upper bound on `d(1, target)` from an optimized witness path, with the flux lower bound.
pub fn distance_upper(target: &DiffeoMap, spec: &SeminormSpec, cfg: &AnsatzConfig) -> Result<DistanceEstimate> {
    let start = Instant::now();
    let m = target.model();
    let ans = PathAnsatz::new(m, cfg.clone())?;
    let lattice = FluxLattice::torus(m)?;
    let target_flux = lattice::map_flux(target);
    let lower = distance_lower_flux(&target_flux, spec, &lattice)?.unwrap_or(0.0);
    if target.distance(&DiffeoMap::identity(m)) == 0.0 {
        let witness = IsotopyPath::null(m, cfg.steps);
        return Ok(DistanceEstimate {
            lower: 0.0,
            upper: 0.0,
            witness: Some(witness),
            residual: 0.0,
            seeds: vec![cfg.seed],
            method_log: "identity target: null path".into(),
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    let mut lm = LengthModel::new(&ans, spec)?;
    let pen = EndpointPenalty::new(&ans, target)?;
    let seed0 = log_map_seed(&ans, target);
    let osc_scale = lm.max_grid_osc(&seed0).max(1e-6);
    lm.set_tau(1e-3 * osc_scale);
    let basis = ans.basis_forms();
    let opts = LbfgsOptions { max_iter: cfg.max_iter, ..Default::default() };
    let results: Vec<SeedResult> = perturbed_seeds(&seed0, cfg)
        .into_par_iter()
        .map(|(seed, mut theta)| {
            for rho in penalty_schedule(cfg) {
                let obj = |th: &[f64]| {
                    let (a, ga) = lm.value_grad(th);
                    let (b, gb) = pen.value_grad(th);
                    (a + rho * b, ga.iter().zip(&gb).map(|(x, y)| x + rho * y).collect())
                };
                theta = lbfgs(obj, &theta, &opts).x;
            }
            // snap the flux onto the target coset, which the exact endpoint must satisfy
            if let Ok(cv) = lattice.closest_vector(&sub(&ans.flux(&theta), &target_flux.coeffs)) {
                let snapped: Vec<f64> = target_flux.coeffs.iter().zip(&cv.point).map(|(a, b)| a + b).collect();
                ans.set_flux(&mut theta, &snapped);
            }
            let path = ans.decode_with(&basis, &theta);
            let (residual, length) = match path.endpoint() {
                Ok(end) => (end.distance(target), length(&path, spec).unwrap_or(f64::INFINITY)),
                Err(_) => (f64::INFINITY, f64::INFINITY),
            };
            SeedResult { feasible: residual <= cfg.feasibility_tol, theta, length, residual, seed }
        })
        .collect();
    let seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
    let best = best_of(results);
    if !best.feasible {
        return Err(Error::Infeasible { residual: best.residual, tolerance: cfg.feasibility_tol });
    }
    let mut log = format!(
        "ansatz K={} P={} params={}; {} seeds; penalty stages {:?}; endpoint residual {:.3e}",
        cfg.k_modes,
        cfg.time_degree,
        ans.nparams(),
        seeds.len(),
        penalty_schedule(cfg),
        best.residual
    );
    let upper = best.length;
    note_gap(&mut log, lower, upper);
    Ok(DistanceEstimate {
        lower,
        upper,
        witness: Some(ans.decode_with(&basis, &best.theta)),
        residual: best.residual,
        seeds,
        method_log: log,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `d^s(phi, psi) = (d(phi, psi) + d(psi, phi)) / 2` using left invariance.
pub fn distance_symmetrized(phi: &DiffeoMap, psi: &DiffeoMap, spec: &SeminormSpec, cfg: &AnsatzConfig) -> Result<DistanceEstimate> {
    let start = Instant::now();
    let a = distance_upper(&phi.inverse()?.compose(psi), spec, cfg)?;
    let b = distance_upper(&psi.inverse()?.compose(phi), spec, cfg)?;
    let mut seeds = a.seeds.clone();
    seeds.extend(&b.seeds);
    Ok(DistanceEstimate {
        lower: 0.5 * (a.lower + b.lower),
        upper: 0.5 * (a.upper + b.upper),
        witness: None,
        residual: a.residual.max(b.residual),
        seeds,
        method_log: format!("forward: {}; backward: {}", a.method_log, b.method_log),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Distance to the Hamiltonian group of a map with known flux.
///
/// Lower end: `c` times the lattice distance of the flux. Upper end: the best
/// path whose flux lies in the same lattice coset, which ends at the target
/// up to a Hamiltonian correction.
pub fn delta_to_ham(
    model: &TorusModel,
    flux: &FluxVector,
    spec: &SeminormSpec,
    lattice: &FluxLattice,
    cfg: &AnsatzConfig,
) -> Result<DistanceEstimate> {
    let start = Instant::now();
    if flux.coeffs.len() != model.dim() {
        return Err(Error::Shape(format!("flux has {} entries, expected {}", flux.coeffs.len(), model.dim())));
    }
    let cv = lattice.closest_vector(&flux.coeffs)?;
    let goal: Vec<f64> = flux.coeffs.iter().zip(&cv.point).map(|(a, b)| a - b).collect();
    let lower = distance_lower_flux(flux, spec, lattice)?.unwrap_or(0.0);
    let ans = PathAnsatz::new(model, cfg.clone())?;
    let mut seed0 = vec![0.0; ans.nparams()];
    ans.set_flux(&mut seed0, &goal);
    let mut lm = LengthModel::new(&ans, spec)?;
    lm.set_tau(1e-3 * lm.max_grid_osc(&seed0).max(1e-6));
    let opts = LbfgsOptions { max_iter: cfg.max_iter, ..Default::default() };
    let basis = ans.basis_forms();
    let results: Vec<SeedResult> = perturbed_seeds(&seed0, cfg)
        .into_par_iter()
        .map(|(seed, mut theta)| {
            for rho in penalty_schedule(cfg) {
                let obj = |th: &[f64]| {
                    let (a, ga) = lm.value_grad(th);
                    let (b, gb) = flux_penalty(&ans, th, &goal);
                    (a + rho * b, ga.iter().zip(&gb).map(|(x, y)| x + rho * y).collect())
                };
                theta = lbfgs(obj, &theta, &opts).x;
            }
            ans.set_flux(&mut theta, &goal);
            let path = ans.decode_with(&basis, &theta);
            let length = length(&path, spec).unwrap_or(f64::INFINITY);
            SeedResult { feasible: length.is_finite(), theta, length, residual: 0.0, seed }
        })
        .collect();
    let seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
    let best = best_of(results);
    let witness = ans.decode_with(&basis, &best.theta);
    let residual = {
        let f = witness.flux().coeffs;
        let diff: Vec<f64> = f.iter().zip(&goal).map(|(a, b)| a - b).collect();
        forms::harmonic_l2(model, &diff)
    };
    let mut log = format!(
        "closest lattice point {:?} at distance {:.6}; ansatz params={}; {} seeds",
        cv.coords,
        cv.distance,
        ans.nparams(),
        seeds.len()
    );
    let upper = best.length;
    note_gap(&mut log, lower, upper);
    Ok(DistanceEstimate {
        lower,
        upper,
        witness: Some(witness),
        residual,
        seeds,
        method_log: log,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::SplittingOperator;

    fn small_cfg() -> AnsatzConfig {
        AnsatzConfig { k_modes: 2, time_degree: 2, steps: 16, flow_steps: 16, flow_grid: 8, seeds: 1, stages: 3, max_iter: 60, ..Default::default() }
    }

    #[test]
    fn penalty_gradients_match_differences() {
        let m = TorusModel::standard(1, 16).unwrap();
        let ans = PathAnsatz::new(&m, small_cfg()).unwrap();
        let target = DiffeoMap::translation(&m, &[0.2, 0.1]);
        let pen = EndpointPenalty::new(&ans, &target).unwrap();
        let err = gradient_check(&|t| pen.value_grad(t), ans.nparams(), 4, 0.01, 3);
        assert!(err < 1e-5, "endpoint {err}");
        let goal = vec![0.3, -0.2];
        let err = gradient_check(&|t| flux_penalty(&ans, t, &goal), ans.nparams(), 4, 0.1, 4);
        assert!(err < 1e-6, "flux {err}");
        for base in [BaseNorm::L2OnExact, BaseNorm::HoferOsc] {
            let spec = SeminormSpec::hodge(0.7, base);
            let mut lm = LengthModel::new(&ans, &spec).unwrap();
            lm.set_tau(0.05);
            let err = gradient_check(&|t| lm.value_grad(t), ans.nparams(), 4, 0.1, 5);
            assert!(err < 1e-5, "{base:?} {err}");
        }
    }

    #[test]
    fn translation_distance_brackets_flux_bound() {
        let m = TorusModel::standard(1, 16).unwrap();
        let spec = SeminormSpec::hodge(1.0, BaseNorm::HoferOsc);
        let target = DiffeoMap::translation(&m, &[0.25, 0.0]);
        let est = distance_upper(&target, &spec, &small_cfg()).unwrap();
        assert!((est.lower - 0.25).abs() < 1e-9, "{} {} {}", est.lower, est.upper, est.method_log);
        assert!(est.upper >= est.lower - 1e-9 && est.upper < 0.26, "{} {} {}", est.lower, est.upper, est.method_log);
    }

    #[test]
    fn delta_of_translation() {
        let m = TorusModel::standard(1, 16).unwrap();
        let lat = FluxLattice::torus(&m).unwrap();
        let spec = SeminormSpec::new(SplittingOperator::hodge(), 2.0, BaseNorm::HoferOsc).unwrap();
        let flux = lattice::map_flux(&DiffeoMap::translation(&m, &[0.7, 0.0]));
        let est = delta_to_ham(&m, &flux, &spec, &lat, &small_cfg()).unwrap();
        assert!((est.lower - 0.6).abs() < 1e-9 && (est.upper - 0.6).abs() < 1e-6, "{} {} {}", est.lower, est.upper, est.method_log);
    }
}
