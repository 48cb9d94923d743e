//! FFT-based calculus on the periodic grid and trigonometric interpolation.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::model::TorusModel;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn fft_nd(model: &TorusModel, data: &mut [Complex64], inverse: bool) {
    let n = model.grid_res();
    let d = model.dim();
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);
    let mut line = vec![Complex64::default(); n];
    for axis in 0..d - 1 {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
}

/// Unnormalized forward transform of a real grid array.
pub fn forward(model: &TorusModel, u: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(model, &mut data, false);
    data
}

/// Inverse transform (normalized), keeping the real part.
pub fn inverse_real(model: &TorusModel, mut spec: Vec<Complex64>) -> Vec<f64> {
    fft_nd(model, &mut spec, true);
    let scale = 1.0 / spec.len() as f64;
    spec.into_iter().map(|c| c.re * scale).collect()
}

/// Wavenumber along `axis` of the flat spectral index `flat`.
fn wavenumber_at(model: &TorusModel, flat: usize, axis: usize) -> f64 {
    let n = model.grid_res();
    let d = model.dim();
    let i = (flat / n.pow((d - 1 - axis) as u32)) % n;
    model.wavenumber(axis, i)
}

/// Spectral partial derivative along `axis`.
pub fn derivative(model: &TorusModel, u: &[f64], axis: usize) -> Vec<f64> {
    let mut spec = forward(model, u);
    for (k, c) in spec.iter_mut().enumerate() {
        *c *= Complex64::new(0.0, wavenumber_at(model, k, axis));
    }
    inverse_real(model, spec)
}

/// Spectral gradient `(d_1 u, ..., d_{2n} u)`.
pub fn gradient(model: &TorusModel, u: &[f64]) -> Vec<Vec<f64>> {
    let spec = forward(model, u);
    gradient_from_spectrum(model, &spec)
}

pub fn gradient_from_spectrum(model: &TorusModel, spec: &[Complex64]) -> Vec<Vec<f64>> {
    (0..model.dim())
        .map(|axis| {
            let s: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::new(0.0, wavenumber_at(model, k, axis)))
                .collect();
            inverse_real(model, s)
        })
        .collect()
}

/// Zero-mean `u` with `grad u` the least-squares fit of the given components.
///
/// Solves `lap u = div a` spectrally; exact whenever `a` is a gradient.
pub fn poisson_primitive(model: &TorusModel, comps: &[Vec<f64>]) -> Vec<f64> {
    let d = model.dim();
    let specs: Vec<Vec<Complex64>> = comps.iter().map(|c| forward(model, c)).collect();
    let mut out = vec![Complex64::default(); specs[0].len()];
    for (k, o) in out.iter_mut().enumerate() {
        let mut k2 = 0.0;
        let mut acc = Complex64::default();
        for (axis, s) in specs.iter().enumerate().take(d) {
            let kap = wavenumber_at(model, k, axis);
            k2 += kap * kap;
            acc += s[k] * Complex64::new(0.0, -kap);
        }
        if k2 > 0.0 {
            *o = acc / k2;
        }
    }
    inverse_real(model, out)
}

/// Fraction of spectral energy in modes with some `|frequency| > N/4`.
pub fn tail_fraction(model: &TorusModel, u: &[f64]) -> f64 {
    joint_tail_fraction(model, &[u])
}

/// Tail fraction of a vector-valued grid function, with energies summed over
/// components, so a component at rounding level does not count on its own.
pub fn joint_tail_fraction(model: &TorusModel, comps: &[&[f64]]) -> f64 {
    let n = model.grid_res();
    let d = model.dim();
    let mut idx = vec![0usize; d];
    let (mut tail, mut total) = (0.0, 0.0);
    for u in comps {
        let spec = forward(model, u);
        for (k, c) in spec.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            model.multi_index(k, &mut idx);
            if idx.iter().any(|&i| model.frequency(i).unsigned_abs() as usize > n / 4) {
                tail += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Evaluates `u(x + delta)` on the grid by a spectral phase shift.
pub fn shift(model: &TorusModel, u: &[f64], delta: &[f64]) -> Vec<f64> {
    let mut spec = forward(model, u);
    let n = model.grid_res();
    let d = model.dim();
    let mut idx = vec![0usize; d];
    for (k, c) in spec.iter_mut().enumerate() {
        model.multi_index(k, &mut idx);
        let mut phase = 0.0;
        let mut nyquist = false;
        for a in 0..d {
            if idx[a] == n / 2 {
                nyquist = true;
            }
            phase += 2.0 * PI * model.frequency(idx[a]) as f64 * delta[a] / model.periods()[a];
        }
        if nyquist {
            // real-valued interpolant: the Nyquist mode is a cosine
            *c *= phase.cos();
        } else {
            *c *= Complex64::from_polar(1.0, phase);
        }
    }
    inverse_real(model, spec)
}

/// Sparse trigonometric interpolant of one or more real grid fields.
///
/// Evaluation at arbitrary points reproduces the grid values exactly and is
/// periodic. Coefficients below `1e-13` of the field maximum are dropped.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    dim: usize,
    half: i64,
    periods: Vec<f64>,
    nfields: usize,
    freqs: Vec<i64>,
    wave: Vec<f64>,
    coef: Vec<Complex64>,
    /// Full coefficient tensors `[field][k_0]..[k_{d-1}]`, width `N + 1`, when most modes are present.
    dense: Option<Vec<Complex64>>,
}

impl TrigInterpolant {
    pub fn new(model: &TorusModel, fields: &[&[f64]]) -> Self {
        let d = model.dim();
        let n = model.grid_res();
        let npts = model.npoints() as f64;
        let specs: Vec<Vec<Complex64>> = fields.iter().map(|f| forward(model, f)).collect();
        let thresholds: Vec<f64> = specs
            .iter()
            .map(|s| 1e-13 * s.iter().fold(0.0f64, |m, c| m.max(c.norm())))
            .collect();
        let nfields = fields.len();
        let mut freqs = Vec::new();
        let mut coef = Vec::new();
        let mut idx = vec![0usize; d];
        for k in 0..model.npoints() {
            if !specs.iter().zip(&thresholds).any(|(s, &t)| s[k].norm() > t && s[k].norm() > 0.0) {
                continue;
            }
            model.multi_index(k, &mut idx);
            let nyq: Vec<usize> = (0..d).filter(|&a| idx[a] == n / 2).collect();
            let copies = 1usize << nyq.len();
            let weight = 1.0 / (copies as f64 * npts);
            for mask in 0..copies {
                for (a, &i) in idx.iter().enumerate() {
                    let mut f = model.frequency(i);
                    if let Some(pos) = nyq.iter().position(|&q| q == a) {
                        if mask >> pos & 1 == 1 {
                            f = -f;
                        }
                    }
                    freqs.push(f);
                }
                for s in &specs {
                    coef.push(s[k] * weight);
                }
            }
        }
        let periods = model.periods().to_vec();
        let wave = freqs
            .chunks(d)
            .flat_map(|f| f.iter().enumerate().map(|(a, &k)| 2.0 * PI * k as f64 / periods[a]).collect::<Vec<_>>())
            .collect();
        let half = (n / 2) as i64;
        let width = n + 1;
        let full = width.pow(d as u32);
        let nmodes = freqs.len() / d.max(1);
        // real fields: keep k_0 >= 0 and double the k_0 > 0 slices
        let kept = full / width * (half as usize + 1);
        let dense = (nmodes * 4 > full).then(|| {
            let mut t = vec![Complex64::default(); nfields * kept];
            for m in 0..nmodes {
                let k0 = freqs[m * d];
                if k0 < 0 {
                    continue;
                }
                let mut off = k0 as usize;
                for a in 1..d {
                    off = off * width + (freqs[m * d + a] + half) as usize;
                }
                let w = if k0 > 0 { 2.0 } else { 1.0 };
                for f in 0..nfields {
                    t[f * kept + off] = coef[m * nfields + f] * w;
                }
            }
            t
        });
        TrigInterpolant { dim: d, half, periods, nfields, freqs, wave, coef, dense }
    }

    /// Contracts a dense coefficient tensor against per-axis tables, last axis first.
    fn contract(&self, tensor: &[Complex64], tables: &[&[Complex64]], buf: &mut [Vec<Complex64>; 2]) -> Complex64 {
        let row = |src: &[Complex64], tab: &[Complex64], dst: &mut Vec<Complex64>| {
            dst.clear();
            dst.extend(src.chunks_exact(tab.len()).map(|r| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (c, t) in r.iter().zip(tab) {
                    re += c.re * t.re - c.im * t.im;
                    im += c.re * t.im + c.im * t.re;
                }
                Complex64::new(re, im)
            }));
        };
        let [b0, b1] = buf;
        row(tensor, tables[self.dim - 1], b0);
        let (mut src, mut dst) = (b0, b1);
        for a in (0..self.dim - 1).rev() {
            row(src, tables[a], dst);
            std::mem::swap(&mut src, &mut dst);
        }
        src[0]
    }

    fn dense_eval(&self, dense: &[Complex64], x: &[f64], out: &mut [f64], grads: Option<&mut [f64]>) {
        let d = self.dim;
        let width = (2 * self.half + 1) as usize;
        let full = dense.len() / self.nfields;
        let tables = self.phase_tables(x);
        let h = self.half as usize;
        // axis 0 only needs k_0 >= 0
        let plain: Vec<&[Complex64]> =
            (0..d).map(|a| if a == 0 { &tables[h..width] } else { &tables[a * width..(a + 1) * width] }).collect();
        let mut buf = [Vec::with_capacity(full / width), Vec::with_capacity(full / width)];
        for f in 0..self.nfields {
            out[f] = self.contract(&dense[f * full..(f + 1) * full], &plain, &mut buf).re;
        }
        if let Some(grads) = grads {
            for j in 0..d {
                // d/dx_j multiplies mode k by i * 2 pi k / L_j
                let k0 = if j == 0 { 0 } else { -self.half };
                let dt: Vec<Complex64> = plain[j]
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p * Complex64::new(0.0, 2.0 * PI * (i as i64 + k0) as f64 / self.periods[j]))
                    .collect();
                let mut tabs = plain.clone();
                tabs[j] = &dt;
                for f in 0..self.nfields {
                    grads[f * d + j] = self.contract(&dense[f * full..(f + 1) * full], &tabs, &mut buf).re;
                }
            }
        }
    }

    pub fn nfields(&self) -> usize {
        self.nfields
    }

    pub fn nmodes(&self) -> usize {
        self.freqs.len() / self.dim.max(1)
    }

    fn phase_tables(&self, x: &[f64]) -> Vec<Complex64> {
        let width = (2 * self.half + 1) as usize;
        let mut t = vec![Complex64::default(); width * self.dim];
        for a in 0..self.dim {
            let e = Complex64::from_polar(1.0, 2.0 * PI * x[a] / self.periods[a]);
            let base = a * width + self.half as usize;
            t[base] = Complex64::new(1.0, 0.0);
            for k in 1..=self.half as usize {
                // re-anchor every 16 steps to keep the recurrence accurate
                let v = if k % 16 == 0 {
                    Complex64::from_polar(1.0, 2.0 * PI * x[a] * k as f64 / self.periods[a])
                } else {
                    t[base + k - 1] * e
                };
                t[base + k] = v;
                t[base - k] = v.conj();
            }
        }
        t
    }

    fn mode_phase(&self, tables: &[Complex64], m: usize) -> Complex64 {
        let width = (2 * self.half + 1) as usize;
        let mut p = Complex64::new(1.0, 0.0);
        for a in 0..self.dim {
            p *= tables[a * width + (self.freqs[m * self.dim + a] + self.half) as usize];
        }
        p
    }

    /// Values of all fields at `x`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        if let Some(dense) = &self.dense {
            return self.dense_eval(dense, x, out, None);
        }
        let tables = self.phase_tables(x);
        out.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..self.nmodes() {
            let p = self.mode_phase(&tables, m);
            for f in 0..self.nfields {
                out[f] += (self.coef[m * self.nfields + f] * p).re;
            }
        }
    }

    /// Values and gradients; `grads[f * dim + j]` is `d_j` of field `f`.
    pub fn eval_grad(&self, x: &[f64], vals: &mut [f64], grads: &mut [f64]) {
        if let Some(dense) = &self.dense {
            return self.dense_eval(dense, x, vals, Some(grads));
        }
        let tables = self.phase_tables(x);
        vals.iter_mut().for_each(|v| *v = 0.0);
        grads.iter_mut().for_each(|v| *v = 0.0);
        let d = self.dim;
        for m in 0..self.nmodes() {
            let p = self.mode_phase(&tables, m);
            for f in 0..self.nfields {
                let c = self.coef[m * self.nfields + f] * p;
                vals[f] += c.re;
                // d/dx exp(i k x) = i k exp(i k x); real part of i k c is -k Im c
                for j in 0..d {
                    grads[f * d + j] -= self.wave[m * d + j] * c.im;
                }
            }
        }
    }

    /// Value, gradient and Hessian of field `f` at `x`.
    pub fn eval_hessian(&self, f: usize, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let tables = self.phase_tables(x);
        let d = self.dim;
        let mut v = 0.0;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for m in 0..self.nmodes() {
            let c = self.coef[m * self.nfields + f] * self.mode_phase(&tables, m);
            let w = &self.wave[m * d..(m + 1) * d];
            v += c.re;
            for i in 0..d {
                g[i] -= w[i] * c.im;
                for j in 0..d {
                    h[i * d + j] -= w[i] * w[j] * c.re;
                }
            }
        }
        (v, g, h)
    }

    /// Evaluates all fields at many points (`points` is `m x dim` row-major).
    /// Returns one vector per field.
    pub fn eval_many(&self, points: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim;
        let vals: Vec<Vec<f64>> = points
            .par_chunks(d)
            .map(|x| {
                let mut out = vec![0.0; self.nfields];
                self.eval(x, &mut out);
                out
            })
            .collect();
        (0..self.nfields).map(|f| vals.iter().map(|v| v[f]).collect()).collect()
    }

    /// Values and gradients at many points: `(values[f][p], grads[f*dim+j][p])`.
    pub fn eval_grad_many(&self, points: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.dim;
        let nf = self.nfields;
        let res: Vec<(Vec<f64>, Vec<f64>)> = points
            .par_chunks(d)
            .map(|x| {
                let mut v = vec![0.0; nf];
                let mut g = vec![0.0; nf * d];
                self.eval_grad(x, &mut v, &mut g);
                (v, g)
            })
            .collect();
        let vals = (0..nf).map(|f| res.iter().map(|r| r.0[f]).collect()).collect();
        let grads = (0..nf * d).map(|k| res.iter().map(|r| r.1[k]).collect()).collect();
        (vals, grads)
    }
}

/// Maximum minus minimum of the continuous trigonometric interpolant of `u`.
///
/// Starts from the largest and smallest grid values and polishes with Newton
/// steps on the interpolant, so the result does not depend on where the
/// extrema fall relative to the grid.
pub fn continuous_osc(model: &TorusModel, u: &[f64]) -> f64 {
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return 0.0;
    }
    let interp = TrigInterpolant::new(model, &[u]);
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]));
    // skip repeated values so that functions constant along some axes still get distinct starts
    let distinct = |it: &mut dyn Iterator<Item = usize>| {
        let tol = 1e-12 * (hi - lo);
        let mut out: Vec<usize> = Vec::new();
        for i in it {
            if out.iter().all(|&j| (u[j] - u[i]).abs() > tol) {
                out.push(i);
                if out.len() == 4 {
                    break;
                }
            }
        }
        out
    };
    let top = distinct(&mut order.iter().copied());
    let bottom = distinct(&mut order.iter().rev().copied());
    let max = top
        .iter()
        .map(|&i| polish_extremum(model, &interp, i, 1.0))
        .fold(hi, f64::max);
    let min = bottom
        .iter()
        .map(|&i| -polish_extremum(model, &interp, i, -1.0))
        .fold(lo, f64::min);
    max - min
}

fn polish_extremum(model: &TorusModel, interp: &TrigInterpolant, start: usize, sign: f64) -> f64 {
    let d = model.dim();
    let mut x = vec![0.0; d];
    model.point(start, &mut x);
    let hmin = (0..d).map(|a| model.spacing(a)).fold(f64::INFINITY, f64::min);
    let (v0, _, _) = interp.eval_hessian(0, &x);
    let mut best = sign * v0;
    for _ in 0..30 {
        let (v, g, h) = interp.eval_hessian(0, &x);
        let fv = sign * v;
        best = best.max(fv);
        let gs: Vec<f64> = g.iter().map(|v| sign * v).collect();
        let gnorm = gs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-14 * (1.0 + fv.abs()) {
            break;
        }
        // maximize sign*u: solve (-H) s = g; fall back to gradient ascent
        let hs = nalgebra::DMatrix::from_fn(d, d, |i, j| -sign * h[i * d + j]);
        let gv = nalgebra::DVector::from_vec(gs.clone());
        // Newton on the directions of negative curvature of sign*u, gradient steps elsewhere
        let eig = nalgebra::SymmetricEigen::new(hs);
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut step = nalgebra::DVector::zeros(d);
        for i in 0..d {
            let q = eig.eigenvectors.column(i);
            let gq = q.dot(&gv);
            let lam = eig.eigenvalues[i];
            let coef = if lam > 1e-8 * lmax { gq / lam } else { gq * 0.25 * hmin / gnorm };
            step += q * coef;
        }
        let snorm = step.norm();
        let scale = if snorm > hmin { hmin / snorm } else { 1.0 };
        let mut t = scale;
        let mut improved = false;
        for _ in 0..20 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let mut val = [0.0];
            interp.eval(&trial, &mut val);
            if sign * val[0] >= fv {
                x = trial;
                best = best.max(sign * val[0]);
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || snorm * t < 1e-13 {
            break;
        }
    }
    best
}
