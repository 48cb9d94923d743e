//! Symplectic isotopies represented by their generating 1-forms.

use serde::{Deserialize, Serialize};

use crate::diffeo::DiffeoMap;
use crate::error::{Error, Result};
use crate::forms::{self, OneFormField};
use crate::model::TorusModel;
use crate::spectral::{self, TrigInterpolant};

/// Default number of time intervals.
pub const DEFAULT_STEPS: usize = 64;
/// Symplectic drift tolerated for integrated endpoints.
pub const SYMPLECTIC_TOL: f64 = 1e-4;

/// Smooth non-decreasing surjection of `[0,1]`, constant near both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schedule {
    Identity,
    /// Quintic smoothstep ramp between flat ends of the given width.
    Quintic { flat: f64 },
    /// Septic smoothstep ramp between flat ends of the given width.
    Septic { flat: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Quintic { flat: 0.125 }
    }
}

impl Schedule {
    pub fn septic() -> Self {
        Schedule::Septic { flat: 0.25 }
    }

    fn ramp(&self, x: f64) -> (f64, f64) {
        match self {
            Schedule::Identity => (x, 1.0),
            Schedule::Quintic { .. } => (
                x * x * x * (10.0 - 15.0 * x + 6.0 * x * x),
                30.0 * x * x * (1.0 - x) * (1.0 - x),
            ),
            Schedule::Septic { .. } => {
                let x4 = x.powi(4);
                (
                    x4 * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x),
                    140.0 * x.powi(3) * (1.0 - x).powi(3),
                )
            }
        }
    }

    /// `(rho(tau), rho'(tau))`.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let flat = match self {
            Schedule::Identity => 0.0,
            Schedule::Quintic { flat } | Schedule::Septic { flat } => *flat,
        };
        let w = 1.0 - 2.0 * flat;
        if tau <= flat {
            (0.0, 0.0)
        } else if tau >= 1.0 - flat {
            (1.0, 0.0)
        } else {
            let (r, dr) = self.ramp((tau - flat) / w);
            (r, dr / w)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Identity => Ok(()),
            Schedule::Quintic { flat } | Schedule::Septic { flat } => {
                if (0.0..0.5).contains(flat) {
                    Ok(())
                } else {
                    Err(Error::Config(format!("schedule flat width {flat} must lie in [0, 0.5)")))
                }
            }
        }
    }
}

/// Quadrature weights on `steps + 1` uniform nodes of `[0,1]`:
/// composite Boole when `steps` is a multiple of 4, trapezoid otherwise.
pub fn quadrature_weights(steps: usize) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    let mut w = vec![0.0; steps + 1];
    if steps % 4 == 0 {
        for p in 0..steps / 4 {
            for (j, c) in [7.0, 32.0, 12.0, 32.0, 7.0].iter().enumerate() {
                w[4 * p + j] += 2.0 * h * c / 45.0;
            }
        }
    } else {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == 0 || i == steps { 0.5 * h } else { h };
        }
    }
    w
}

/// Lagrange weights for evaluating at `t` from up to six nodes around it.
fn lagrange_stencil(steps: usize, t: f64) -> Vec<(usize, f64)> {
    let h = 1.0 / steps as f64;
    let pos = t / h;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-12 {
        return vec![(nearest.clamp(0.0, steps as f64) as usize, 1.0)];
    }
    let npts = 6.min(steps + 1);
    let left = pos.floor() as i64 - (npts as i64 / 2 - 1);
    let start = left.clamp(0, (steps + 1 - npts) as i64) as usize;
    let nodes: Vec<usize> = (start..start + npts).collect();
    nodes
        .iter()
        .map(|&j| {
            let mut w = 1.0;
            for &k in &nodes {
                if k != j {
                    w *= (pos - k as f64) / (j as f64 - k as f64);
                }
            }
            (j, w)
        })
        .collect()
}

/// Class in `H^1` of a path, in the basis `[dx_k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxVector {
    pub coeffs: Vec<f64>,
    pub harmonic_l2: f64,
}

impl FluxVector {
    pub fn new(model: &TorusModel, coeffs: Vec<f64>) -> Self {
        let harmonic_l2 = forms::harmonic_l2(model, &coeffs);
        FluxVector { coeffs, harmonic_l2 }
    }
}

/// A path in the symplectomorphism group, starting at the identity, given by
/// its generating forms at uniform times `t_i = i / steps`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsotopyPath {
    model: TorusModel,
    samples: Vec<OneFormField>,
}

impl IsotopyPath {
    pub fn new(model: &TorusModel, samples: Vec<OneFormField>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Shape("a path needs at least two time samples".into()));
        }
        let samples = samples
            .into_iter()
            .map(|s| {
                if !s.model().same_grid(model) {
                    return Err(Error::Shape("path sample on a different grid".into()));
                }
                s.checked()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IsotopyPath { model: model.clone(), samples })
    }

    /// Path generated by `alpha(t)` sampled at `steps + 1` times.
    pub fn from_fn(model: &TorusModel, steps: usize, alpha: impl Fn(f64) -> OneFormField) -> Result<Self> {
        let samples = (0..=steps).map(|i| alpha(i as f64 / steps as f64)).collect();
        Self::new(model, samples)
    }

    /// The constant path; `null` when the form is zero.
    pub fn constant(model: &TorusModel, steps: usize, alpha: &OneFormField) -> Result<Self> {
        Self::new(model, vec![alpha.clone(); steps + 1])
    }

    pub fn null(model: &TorusModel, steps: usize) -> Self {
        IsotopyPath { model: model.clone(), samples: vec![OneFormField::zero(model); steps + 1] }
    }

    pub(crate) fn from_samples_unchecked(model: &TorusModel, samples: Vec<OneFormField>) -> Self {
        IsotopyPath { model: model.clone(), samples }
    }

    pub fn model(&self) -> &TorusModel {
        &self.model
    }

    pub fn samples(&self) -> &[OneFormField] {
        &self.samples
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.steps() as f64
    }

    /// Whether every sample has vanishing harmonic part (within `1e-8`).
    pub fn is_hamiltonian(&self) -> bool {
        self.samples.iter().all(|s| s.harmonic_coeffs().iter().all(|h| h.abs() <= 1e-8))
    }

    /// Generating form at an arbitrary time, by Lagrange interpolation in time.
    pub fn sample_at(&self, t: f64) -> OneFormField {
        let stencil = lagrange_stencil(self.steps(), t.clamp(0.0, 1.0));
        let mut acc = self.samples[stencil[0].0].scale(stencil[0].1);
        for &(j, w) in &stencil[1..] {
            acc = acc.lincomb(1.0, &self.samples[j], w);
        }
        acc
    }

    /// Integrates a per-sample scalar with the path quadrature rule.
    pub fn integrate(&self, f: impl Fn(&OneFormField) -> Result<f64>) -> Result<f64> {
        let w = quadrature_weights(self.steps());
        let mut acc = 0.0;
        for (s, wi) in self.samples.iter().zip(w) {
            acc += wi * f(s)?;
        }
        Ok(acc)
    }

    /// `int_0^1 [alpha_t] dt`.
    pub fn flux(&self) -> FluxVector {
        let w = quadrature_weights(self.steps());
        let mut coeffs = vec![0.0; self.model.dim()];
        for (s, wi) in self.samples.iter().zip(w) {
            for (c, h) in coeffs.iter_mut().zip(s.harmonic_coeffs()) {
                *c += wi * h;
            }
        }
        FluxVector::new(&self.model, coeffs)
    }

    fn vector_field(&self, alpha: &OneFormField) -> Vec<Vec<f64>> {
        let m = &self.model;
        let d = m.dim();
        (0..d)
            .map(|i| {
                let mut x = vec![0.0; m.npoints()];
                for j in 0..d {
                    let a = m.field_map(i, j);
                    if a != 0.0 {
                        for (xv, av) in x.iter_mut().zip(alpha.component(j)) {
                            *xv += a * av;
                        }
                    }
                }
                x
            })
            .collect()
    }

    fn field_interpolant(&self, t: f64) -> TrigInterpolant {
        let x = self.vector_field(&self.sample_at(t));
        let refs: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        TrigInterpolant::new(&self.model, &refs)
    }

    /// Largest `|DX_t|` over samples and grid, the Lipschitz bound used for step control.
    fn lipschitz(&self) -> f64 {
        let m = &self.model;
        let mut lmax = 0.0f64;
        for s in &self.samples {
            for comp in self.vector_field(s) {
                for g in spectral::gradient(m, &comp) {
                    lmax = lmax.max(g.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                }
            }
        }
        lmax
    }

    /// `phi_t` at every node; `maps[0]` is the identity.
    pub fn flow_maps(&self) -> Result<Vec<DiffeoMap>> {
        self.flow(true)
    }

    /// Time-1 map of the path.
    pub fn endpoint(&self) -> Result<DiffeoMap> {
        Ok(self.flow(false)?.pop().expect("flow returns at least one map"))
    }

    fn flow(&self, keep_all: bool) -> Result<Vec<DiffeoMap>> {
        let m = &self.model;
        if self.samples.iter().all(|s| s.max_abs() == 0.0) {
            let n = if keep_all { self.samples.len() } else { 1 };
            return Ok(vec![DiffeoMap::identity(m); n]);
        }
        let h = 1.0 / self.steps() as f64;
        let lip = self.lipschitz();
        if h * lip > 8.0 {
            return Err(Error::Integration(format!(
                "step {h:.3e} times field Lipschitz bound {lip:.3e} is too large"
            )));
        }
        let mut sub = ((h * lip) / 0.5).ceil().max(1.0) as usize;
        loop {
            let maps = self.integrate_rk4(sub, keep_all)?;
            let last = maps.last().expect("at least one map");
            let defect = last.symplectic_defect();
            if defect <= SYMPLECTIC_TOL {
                // intermediate maps are not rechecked individually
                return Ok(maps.into_iter().map(|mp| mp.assume_symplectic(SYMPLECTIC_TOL)).collect());
            }
            if sub >= 64 {
                return Err(Error::Integration(format!("symplectic drift {defect:.2e} after refinement")));
            }
            sub *= 2;
        }
    }

    fn integrate_rk4(&self, sub: usize, keep_all: bool) -> Result<Vec<DiffeoMap>> {
        let m = &self.model;
        let d = m.dim();
        let steps = self.steps();
        let h = 1.0 / (steps * sub) as f64;
        let base = m.grid_points();
        let mut v = vec![0.0; base.len()];
        let mut out = vec![DiffeoMap::identity(m)];
        let mut cur = self.field_interpolant(0.0);
        let to_map = |v: &[f64]| -> Vec<Vec<f64>> {
            (0..d).map(|k| v.chunks(d).map(|p| p[k]).collect()).collect()
        };
        let velocity = |interp: &TrigInterpolant, disp: &[f64]| -> Vec<f64> {
            let pts: Vec<f64> = base.iter().zip(disp).map(|(x, y)| x + y).collect();
            let vals = interp.eval_many(&pts);
            let mut vel = vec![0.0; disp.len()];
            for (i, p) in vel.chunks_mut(d).enumerate() {
                for k in 0..d {
                    p[k] = vals[k][i];
                }
            }
            vel
        };
        for n in 0..steps * sub {
            let t0 = n as f64 * h;
            let mid = self.field_interpolant(t0 + 0.5 * h);
            let next = self.field_interpolant(t0 + h);
            let k1 = velocity(&cur, &v);
            let y: Vec<f64> = v.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = velocity(&mid, &y);
            let y: Vec<f64> = v.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = velocity(&mid, &y);
            let y: Vec<f64> = v.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = velocity(&next, &y);
            for i in 0..v.len() {
                v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Integration("non-finite displacement".into()));
            }
            cur = next;
            if keep_all && (n + 1) % sub == 0 {
                out.push(DiffeoMap::from_displacement_unchecked(m, to_map(&v)));
            }
        }
        if !keep_all {
            out = vec![DiffeoMap::from_displacement(m, to_map(&v))?];
        }
        Ok(out)
    }

    /// `t -> rho'(t) alpha_{rho(t)}` on the same time grid.
    pub fn reparametrize(&self, schedule: Schedule) -> Result<IsotopyPath> {
        schedule.validate()?;
        let samples = (0..=self.steps())
            .map(|i| {
                let (r, dr) = schedule.eval(self.time(i));
                if dr == 0.0 {
                    OneFormField::zero(&self.model)
                } else {
                    self.sample_at(r).scale(dr)
                }
            })
            .collect();
        Ok(IsotopyPath::from_samples_unchecked(&self.model, samples))
    }

    fn halves(first: &IsotopyPath, second: &IsotopyPath, schedule: Schedule) -> Result<IsotopyPath> {
        schedule.validate()?;
        let steps = first.steps().max(second.steps());
        let steps = steps + steps % 2;
        let model = first.model.clone();
        let samples = (0..=steps)
            .map(|i| {
                let t = i as f64 / steps as f64;
                let (path, tau) = if 2 * i <= steps { (first, 2.0 * t) } else { (second, 2.0 * t - 1.0) };
                let (r, dr) = schedule.eval(tau);
                if dr == 0.0 {
                    OneFormField::zero(&model)
                } else {
                    path.sample_at(r).scale(2.0 * dr)
                }
            })
            .collect();
        Ok(IsotopyPath::from_samples_unchecked(&model, samples))
    }

    /// Left concatenation: first `psi_{r(t)}`, then `phi_{s(t)} psi_1`.
    /// Endpoint `phi_1 psi_1`.
    pub fn concat_left(phi: &IsotopyPath, psi: &IsotopyPath, schedule: Schedule) -> Result<IsotopyPath> {
        Self::halves(psi, phi, schedule)
    }

    /// Right concatenation: first `phi_{r(t)}`, then `phi_1 psi_{s(t)}`.
    /// Endpoint `phi_1 psi_1`; the second half is generated by `(phi_1^{-1})^* alpha(Psi)`.
    pub fn concat_right(phi: &IsotopyPath, psi: &IsotopyPath, schedule: Schedule) -> Result<IsotopyPath> {
        let phi1 = phi.endpoint()?;
        let inv = phi1.inverse()?;
        let moved = psi
            .samples
            .iter()
            .map(|s| inv.pullback(s))
            .collect::<Result<Vec<_>>>()?;
        let moved = IsotopyPath::from_samples_unchecked(&psi.model, moved);
        Self::halves(phi, &moved, schedule)
    }

    /// `t -> phi_t^{-1}`, generated by `-phi_t^* alpha(Phi)_t`.
    pub fn invert(&self) -> Result<IsotopyPath> {
        let maps = self.flow_maps()?;
        let samples = self
            .samples
            .iter()
            .zip(&maps)
            .map(|(s, mp)| Ok(mp.pullback(s)?.scale(-1.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(IsotopyPath::from_samples_unchecked(&self.model, samples))
    }

    /// `t -> phi_t psi_t`, generated by `alpha(Phi)_t + (phi_t^{-1})^* alpha(Psi)_t`.
    pub fn compose_timewise(phi: &IsotopyPath, psi: &IsotopyPath) -> Result<IsotopyPath> {
        if phi.steps() != psi.steps() || !phi.model.same_grid(&psi.model) {
            return Err(Error::Shape("time-wise composition needs matching grids".into()));
        }
        let maps = phi.flow_maps()?;
        let samples = phi
            .samples
            .iter()
            .zip(&psi.samples)
            .zip(&maps)
            .map(|((a, b), mp)| Ok(a.add(&mp.inverse()?.pullback(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(IsotopyPath::from_samples_unchecked(&phi.model, samples))
    }

    /// Largest sample L2 norm.
    pub fn max_sample_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.l2_norm()).fold(0.0, f64::max)
    }
}
