//! Sampled Hamiltonian functions used to build exact forms and flows.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::OneFormField;
use crate::model::TorusModel;
use crate::paths::IsotopyPath;

/// A smooth function on the torus described by parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Hamiltonian {
    /// `amplitude * cos(2 pi k.x / L + phase)`
    Mode { amplitude: f64, freq: Vec<i64>, #[serde(default)] phase: f64 },
    /// `amplitude * (1 - r^2/R^2)^power` inside the periodic disc of radius `R`
    Bump { amplitude: f64, center: Vec<f64>, radius: f64, #[serde(default = "default_power")] power: u32 },
    Sum { terms: Vec<Hamiltonian> },
}

fn default_power() -> u32 {
    4
}

impl Hamiltonian {
    pub fn mode(amplitude: f64, freq: &[i64]) -> Self {
        Hamiltonian::Mode { amplitude, freq: freq.to_vec(), phase: 0.0 }
    }

    pub fn bump(amplitude: f64, center: &[f64], radius: f64) -> Self {
        Hamiltonian::Bump { amplitude, center: center.to_vec(), radius, power: default_power() }
    }

    /// Random trigonometric polynomial with frequencies in `[-kmax, kmax]^d`,
    /// coefficient scale decaying like `1/(1+|k|^2)`.
    pub fn random_trig(rng: &mut impl Rng, dim: usize, kmax: i64, amplitude: f64) -> Self {
        let mut terms = Vec::new();
        let mut freq = vec![-kmax; dim];
        loop {
            if freq.iter().any(|&k| k != 0) {
                let k2: i64 = freq.iter().map(|k| k * k).sum();
                let a = amplitude * rng.gen_range(-1.0..1.0) / (1.0 + k2 as f64);
                let phase = rng.gen_range(0.0..2.0 * PI);
                terms.push(Hamiltonian::Mode { amplitude: a, freq: freq.clone(), phase });
            }
            let mut a = 0;
            loop {
                if a == dim {
                    return Hamiltonian::Sum { terms };
                }
                freq[a] += 1;
                if freq[a] <= kmax {
                    break;
                }
                freq[a] = -kmax;
                a += 1;
            }
        }
    }

    pub fn eval(&self, model: &TorusModel, x: &[f64]) -> f64 {
        match self {
            Hamiltonian::Mode { amplitude, freq, phase } => {
                let arg: f64 = freq
                    .iter()
                    .zip(x)
                    .zip(model.periods())
                    .map(|((&k, &xi), &l)| 2.0 * PI * k as f64 * xi / l)
                    .sum();
                amplitude * (arg + phase).cos()
            }
            Hamiltonian::Bump { amplitude, center, radius, power } => {
                let r2: f64 = (0..x.len())
                    .map(|a| {
                        let dx = model.wrap(a, x[a] - center[a]);
                        dx * dx
                    })
                    .sum::<f64>()
                    / (radius * radius);
                if r2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - r2).powi(*power as i32)
                }
            }
            Hamiltonian::Sum { terms } => terms.iter().map(|t| t.eval(model, x)).sum(),
        }
    }

    /// Grid samples.
    pub fn sample(&self, model: &TorusModel) -> Vec<f64> {
        let mut x = vec![0.0; model.dim()];
        (0..model.npoints())
            .map(|i| {
                model.point(i, &mut x);
                self.eval(model, &x)
            })
            .collect()
    }

    /// The exact form `dH`.
    pub fn form(&self, model: &TorusModel) -> OneFormField {
        OneFormField::exact(model, &self.sample(model))
    }

    /// Whether the function is a finite trigonometric sum resolved on the grid.
    pub fn band_limited(&self, model: &TorusModel) -> bool {
        match self {
            Hamiltonian::Mode { freq, .. } => freq.iter().all(|&k| (k.unsigned_abs() as usize) < model.grid_res() / 2),
            Hamiltonian::Bump { .. } => false,
            Hamiltonian::Sum { terms } => terms.iter().all(|t| t.band_limited(model)),
        }
    }
}

/// A smooth random path with `alpha_t = d(H_0 + t H_1 + t^2 H_2) + sum_k (a_k + t b_k) dx_k`.
///
/// The harmonic drift is zero unless `drift > 0`; its coefficients are uniform in `[-drift, drift]`.
pub fn random_path(
    model: &TorusModel,
    rng: &mut impl Rng,
    steps: usize,
    kmax: i64,
    amplitude: f64,
    drift: f64,
) -> Result<IsotopyPath> {
    let d = model.dim();
    let exact: Vec<OneFormField> =
        (0..3).map(|_| Hamiltonian::random_trig(rng, d, kmax, amplitude).form(model)).collect();
    let mut harm = [vec![0.0; d], vec![0.0; d]];
    if drift > 0.0 {
        for h in harm.iter_mut() {
            for v in h.iter_mut() {
                *v = rng.gen_range(-drift..drift);
            }
        }
    }
    IsotopyPath::from_fn(model, steps, |t| {
        let coeffs: Vec<f64> = harm[0].iter().zip(&harm[1]).map(|(a, b)| a + t * b).collect();
        exact[0]
            .lincomb(1.0, &exact[1], t)
            .lincomb(1.0, &exact[2], t * t)
            .add(&OneFormField::constant(model, &coeffs))
    })
}

/// A random path with one spatial shape, `alpha_t = p(t) dH + q(t) sum_k a_k dx_k`,
/// where `p(t) = 1 + c_1 t + c_2 t^2` and `q(t) = 1 + c_3 t` stay positive.
///
/// Both the oscillation of `p(t) H` and the harmonic norm `q(t) |a|` are smooth
/// in time, so lengths of these paths converge at the full order of the time
/// quadrature. The harmonic coefficients `a_k` are uniform in `[-drift, drift]`.
pub fn random_separable_path(
    model: &TorusModel,
    rng: &mut impl Rng,
    steps: usize,
    kmax: i64,
    amplitude: f64,
    drift: f64,
) -> Result<IsotopyPath> {
    let d = model.dim();
    let shape = Hamiltonian::random_trig(rng, d, kmax, amplitude).form(model);
    let (c1, c2, c3) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let harm: Vec<f64> = if drift > 0.0 { (0..d).map(|_| rng.gen_range(-drift..drift)).collect() } else { vec![0.0; d] };
    IsotopyPath::from_fn(model, steps, |t| {
        let coeffs: Vec<f64> = harm.iter().map(|a| a * (1.0 + c3 * t)).collect();
        shape.scale(1.0 + c1 * t + c2 * t * t).add(&OneFormField::constant(model, &coeffs))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode_form_is_analytic_gradient() {
        let m = TorusModel::standard(1, 16).unwrap();
        let h = Hamiltonian::mode(1.0, &[1, 0]);
        let f = h.form(&m);
        let mut x = [0.0; 2];
        for i in 0..m.npoints() {
            m.point(i, &mut x);
            assert!((f.component(0)[i] + 2.0 * PI * (2.0 * PI * x[0]).sin()).abs() < 1e-12);
            assert!(f.component(1)[i].abs() < 1e-12);
        }
    }

    #[test]
    fn bump_is_supported_in_disc() {
        let m = TorusModel::standard(1, 32).unwrap();
        let b = Hamiltonian::bump(1.0, &[0.9, 0.1], 0.2);
        assert_eq!(b.eval(&m, &[0.9, 0.1]), 1.0);
        assert_eq!(b.eval(&m, &[0.5, 0.5]), 0.0);
        // wraps across the boundary
        assert!(b.eval(&m, &[0.05, 0.1]) > 0.0);
    }

    #[test]
    fn random_trig_is_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(Hamiltonian::random_trig(&mut a, 2, 2, 1.0), Hamiltonian::random_trig(&mut b, 2, 2, 1.0));
    }
}
