//! Integrating-factor RK4 in Fourier space.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::{AdvectionPath, Diagnostics, SolverConfig};
use crate::flow::{InstantVelocity, Shape, VelocityProtocol};
use crate::spectral::fft::{index_of, Fft2};
use crate::spectral::{lebesgue_norm_of_values, wavenumber};
use crate::spectral::ScalarField;
use crate::Result;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One Fourier mode `û e^{2πi q·x}` of a velocity field.
#[derive(Clone, Copy, Debug)]
struct VelocityMode {
    qx: i64,
    qy: i64,
    u: Complex64,
    v: Complex64,
}

fn modes_of(shape: &Shape) -> Vec<VelocityMode> {
    let half_i = Complex64::new(0.0, -0.5); // 1/(2i)
    match shape {
        Shape::Zero => Vec::new(),
        Shape::ShearX { phase } => vec![
            VelocityMode { qx: 0, qy: 1, u: Complex64::from_polar(1.0, *phase) * half_i, v: ZERO },
            VelocityMode { qx: 0, qy: -1, u: -Complex64::from_polar(1.0, -*phase) * half_i, v: ZERO },
        ],
        Shape::ShearY { phase } => vec![
            VelocityMode { qx: 1, qy: 0, u: ZERO, v: Complex64::from_polar(1.0, *phase) * half_i },
            VelocityMode { qx: -1, qy: 0, u: ZERO, v: -Complex64::from_polar(1.0, -*phase) * half_i },
        ],
        Shape::Stream(modes) => {
            let mut out = Vec::new();
            for m in modes.iter() {
                if m.kx == 0 && m.ky == 0 || m.amplitude == 0.0 {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    let (qx, qy) = (sign * m.kx as f64, sign * m.ky as f64);
                    let psi = Complex64::from_polar(0.5 * m.amplitude, sign * m.phase);
                    let i2pi = Complex64::new(0.0, 2.0 * PI);
                    out.push(VelocityMode {
                        qx: qx as i64,
                        qy: qy as i64,
                        u: i2pi * qy * psi,
                        v: -i2pi * qx * psi,
                    });
                }
            }
            out
        }
    }
}

/// A velocity mode prepared for the convolution over the retained band.
struct ModalTerm {
    qx: i64,
    qy: i64,
    /// `2πi·v̂`.
    v: Complex64,
    /// `2πi·û·(kx − qx)` for every band column.
    fx: Vec<Complex64>,
}

enum Advection {
    Modal(Vec<ModalTerm>),
    Grid { ux: Vec<f64>, uy: Vec<f64> },
}

/// Spectral state restricted to the square band `|kx|, |ky| ≤ cut`, stored
/// densely as `b×b` with `b = 2·cut + 1` and wavenumbers in increasing order.
pub(crate) struct SpectralEngine {
    n: usize,
    cut: i64,
    b: usize,
    dealias: bool,
    path: AdvectionPath,
    fft: Arc<Fft2>,
    /// Full-grid index of every band entry.
    full: Vec<usize>,
    k2: Vec<f64>,
    e: Vec<f64>,
    e2: Vec<f64>,
    shape: Option<Shape>,
    advection: Advection,
    stages: [Vec<Complex64>; 5],
    grid: [Vec<Complex64>; 3],
}

impl SpectralEngine {
    pub(crate) fn new(config: &SolverConfig) -> Result<Self> {
        let n = config.n;
        let fft = Fft2::cached(n)?;
        // Without dealiasing every mode but the Nyquist row and column is kept.
        let cut = if config.dealias { (n / 3) as i64 } else { n as i64 / 2 - 1 };
        let b = (2 * cut + 1) as usize;
        let mut full = Vec::with_capacity(b * b);
        let mut k2 = Vec::with_capacity(b * b);
        for ky in -cut..=cut {
            for kx in -cut..=cut {
                full.push(index_of(ky, n) * n + index_of(kx, n));
                k2.push(4.0 * PI * PI * (kx * kx + ky * ky) as f64);
            }
        }
        let e = k2.iter().map(|k| (-config.kappa * k * config.dt).exp()).collect();
        let e2 = k2.iter().map(|k| (-0.5 * config.kappa * k * config.dt).exp()).collect();
        let band = vec![ZERO; b * b];
        let grid = vec![ZERO; n * n];
        Ok(SpectralEngine {
            n,
            cut,
            b,
            dealias: config.dealias,
            path: config.advection,
            fft,
            full,
            k2,
            e,
            e2,
            shape: None,
            advection: Advection::Modal(Vec::new()),
            stages: std::array::from_fn(|_| band.clone()),
            grid: std::array::from_fn(|_| grid.clone()),
        })
    }

    /// Band-limited, mean-free copy of the field's coefficients.
    pub(crate) fn load(&self, field: &ScalarField) -> Vec<Complex64> {
        let spectral = field.spectral();
        let mut v: Vec<Complex64> = self.full.iter().map(|&i| spectral[i]).collect();
        v[self.centre()] = ZERO;
        v
    }

    pub(crate) fn to_field(&self, v: &[Complex64]) -> Result<ScalarField> {
        let mut full = vec![ZERO; self.n * self.n];
        self.scatter(v, &mut full);
        ScalarField::from_spectral(self.n, full)
    }

    fn centre(&self) -> usize {
        (self.b * self.b) / 2
    }

    fn scatter(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|c| *c = ZERO);
        for (&i, &c) in self.full.iter().zip(v) {
            out[i] = c;
        }
    }

    fn set_shape(&mut self, shape: &Shape) {
        if self.shape.as_ref() == Some(shape) {
            return;
        }
        let n = self.n;
        let modes = modes_of(shape);
        let limit = n as i64 / 6;
        let modal_ok = self.dealias && modes.iter().all(|m| m.qx.abs() < limit && m.qy.abs() < limit);
        let modal = match self.path {
            AdvectionPath::Auto | AdvectionPath::Modal => modal_ok,
            AdvectionPath::Pseudospectral => false,
        };
        let i2pi = Complex64::new(0.0, 2.0 * PI);
        self.advection = if modal {
            let cut = self.cut;
            Advection::Modal(
                modes
                    .iter()
                    .map(|m| ModalTerm {
                        qx: m.qx,
                        qy: m.qy,
                        v: m.v * i2pi,
                        fx: (-cut..=cut).map(|kx| m.u * i2pi * (kx - m.qx) as f64).collect(),
                    })
                    .collect(),
            )
        } else {
            let u = InstantVelocity { shape: shape.clone(), amplitude: 1.0 };
            let h = 1.0 / n as f64;
            let mut ux = vec![0.0; n * n];
            let mut uy = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let [a, b] = u.velocity(i as f64 * h, j as f64 * h);
                    ux[j * n + i] = a;
                    uy[j * n + i] = b;
                }
            }
            Advection::Grid { ux, uy }
        };
        self.shape = Some(shape.clone());
    }

    /// `out = −amp·P(u·∇θ)^` on the band.
    fn nonlinear(&self, amp: f64, v: &[Complex64], out: &mut [Complex64], grid: &mut [Vec<Complex64>; 3]) {
        let (b, cut) = (self.b, self.cut);
        if amp == 0.0 {
            out.iter_mut().for_each(|c| *c = ZERO);
            return;
        }
        match &self.advection {
            Advection::Modal(terms) => {
                let bi = b as i64;
                // One sweep over target rows; each row stays in cache while
                // every velocity mode adds its shifted source row.
                for r in 0..bi {
                    let row = &mut out[r as usize * b..(r as usize + 1) * b];
                    row.iter_mut().for_each(|c| *c = ZERO);
                    for m in terms {
                        let sr = r - m.qy;
                        if sr < 0 || sr >= bi {
                            continue;
                        }
                        let (c0, c1) = (m.qx.max(0) as usize, (bi + m.qx.min(0)) as usize);
                        let fy = m.v * (sr - cut) as f64;
                        let sc0 = (c0 as i64 - m.qx) as usize;
                        let sr = sr as usize;
                        let src = &v[sr * b + sc0..sr * b + sc0 + (c1 - c0)];
                        for ((d, s), fx) in row[c0..c1].iter_mut().zip(src).zip(&m.fx[c0..c1]) {
                            *d += (*fx + fy) * *s;
                        }
                    }
                    row.iter_mut().for_each(|c| *c *= -amp);
                }
            }
            Advection::Grid { ux, uy } => {
                let n = self.n;
                let [theta, gx, gy] = grid;
                self.scatter(v, theta);
                spectral_gradient(n, theta, gx, gy);
                self.fft.inverse(gx);
                self.fft.inverse(gy);
                for i in 0..n * n {
                    gx[i] = Complex64::new(ux[i] * gx[i].re + uy[i] * gy[i].re, 0.0);
                }
                self.fft.forward(gx);
                for (o, &i) in out.iter_mut().zip(&self.full) {
                    *o = -amp * gx[i];
                }
            }
        }
        out[self.centre()] = ZERO;
    }

    /// Advances `v` from `t` to `t + dt` and returns `∫_t^{t+dt} ‖∇θ‖² dt`
    /// evaluated with the same RK4 weights.
    pub(crate) fn step(&mut self, v: &mut [Complex64], protocol: &VelocityProtocol, t: f64, dt: f64) -> f64 {
        let shape = protocol.shape_at(t + 0.5 * dt);
        self.set_shape(&shape);
        let amps = [protocol.amplitude(t), protocol.amplitude(t + 0.5 * dt), protocol.amplitude(t + dt)];
        let mut stages = std::mem::take(&mut self.stages);
        let mut grid = std::mem::take(&mut self.grid);
        let [ka, kb, kc, kd, stage] = &mut stages;
        let (e, e2) = (&self.e, &self.e2);
        let genergy = |s: &[Complex64]| self.k2.iter().zip(s).map(|(k, c)| k * c.norm_sqr()).sum::<f64>();

        let k2 = &self.k2;
        let g1 = genergy(v);
        self.nonlinear(amps[0], v, ka, &mut grid);
        let mut g2 = 0.0;
        for i in 0..v.len() {
            stage[i] = e2[i] * (v[i] + 0.5 * dt * ka[i]);
            g2 += k2[i] * stage[i].norm_sqr();
        }
        self.nonlinear(amps[1], stage, kb, &mut grid);
        let mut g3 = 0.0;
        for i in 0..v.len() {
            stage[i] = e2[i] * v[i] + 0.5 * dt * kb[i];
            g3 += k2[i] * stage[i].norm_sqr();
        }
        self.nonlinear(amps[1], stage, kc, &mut grid);
        let mut g4 = 0.0;
        for i in 0..v.len() {
            stage[i] = e[i] * v[i] + e2[i] * dt * kc[i];
            g4 += k2[i] * stage[i].norm_sqr();
        }
        self.nonlinear(amps[2], stage, kd, &mut grid);
        for i in 0..v.len() {
            v[i] = e[i] * v[i] + dt / 6.0 * (e[i] * ka[i] + 2.0 * e2[i] * (kb[i] + kc[i]) + kd[i]);
        }
        v[self.centre()] = ZERO;
        self.stages = stages;
        self.grid = grid;
        dt / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
    }

    /// Full diagnostic set for the state `v`.
    /// `‖a − b‖_{Ḣ⁻¹}` of two band states.
    pub(crate) fn h1neg_distance(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        self.k2
            .iter()
            .zip(a.iter().zip(b))
            .filter(|(k, _)| **k > 0.0)
            .map(|(k, (x, y))| (x - y).norm_sqr() / k)
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn diagnostics(&mut self, v: &[Complex64], q: f64) -> Diagnostics {
        let n = self.n;
        let mut grid = std::mem::take(&mut self.grid);
        let [theta, gx, gy] = &mut grid;
        self.scatter(v, theta);
        spectral_gradient(n, theta, gx, gy);
        let spectral = theta.clone();
        self.fft.inverse(theta);
        self.fft.inverse(gx);
        self.fft.inverse(gy);
        let values: Vec<f64> = theta.iter().map(|c| c.re).collect();
        let grads: Vec<(f64, f64)> = gx.iter().zip(gy.iter()).map(|(a, b)| (a.re, b.re)).collect();
        self.grid = grid;
        Diagnostics::from_parts(n, &spectral, &values, &grads, q)
    }
}

/// `(2πi kₓ v, 2πi k_y v)` with the Nyquist row and column zeroed.
fn spectral_gradient(n: usize, v: &[Complex64], gx: &mut [Complex64], gy: &mut [Complex64]) {
    let nyq = n / 2;
    for jy in 0..n {
        let ky = wavenumber(jy, n) as f64;
        for jx in 0..n {
            let idx = jy * n + jx;
            if jx == nyq || jy == nyq {
                gx[idx] = ZERO;
                gy[idx] = ZERO;
                continue;
            }
            let kx = wavenumber(jx, n) as f64;
            let ic = Complex64::new(-v[idx].im, v[idx].re) * (2.0 * PI);
            gx[idx] = ic * kx;
            gy[idx] = ic * ky;
        }
    }
}

impl Diagnostics {
    /// Assembles diagnostics from coefficients plus physical samples of `θ`
    /// and `∇θ`.
    pub(crate) fn from_parts(n: usize, v: &[Complex64], values: &[f64], grads: &[(f64, f64)], q: f64) -> Self {
        let mut l2 = 0.0;
        let mut h1neg = 0.0;
        let mut grad_l2 = 0.0;
        let mut tail = 0.0;
        let outer = (n / 6) as i64;
        for jy in 0..n {
            let ky = wavenumber(jy, n);
            for jx in 0..n {
                let kx = wavenumber(jx, n);
                let e = v[jy * n + jx].norm_sqr();
                if e == 0.0 {
                    continue;
                }
                l2 += e;
                if kx.abs() > outer || ky.abs() > outer {
                    tail += e;
                }
                if kx == 0 && ky == 0 {
                    continue;
                }
                let kk = 4.0 * PI * PI * (kx * kx + ky * ky) as f64;
                h1neg += e / kk;
                grad_l2 += e * kk;
            }
        }
        let count = (n * n) as f64;
        let grad_l1 = grads.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>() / count;
        let lq = lebesgue_norm_of_values(values, q).unwrap_or(f64::NAN);
        let lq_integrand = if q.is_finite() && q >= 2.0 {
            values
                .iter()
                .zip(grads)
                .map(|(t, (a, b))| t.abs().powf(q - 2.0) * (a * a + b * b))
                .sum::<f64>()
                / count
        } else {
            f64::NAN
        };
        Diagnostics {
            l2: l2.sqrt(),
            lq,
            h1neg: h1neg.sqrt(),
            grad_l2: grad_l2.sqrt(),
            grad_l1,
            lq_integrand,
            tail_fraction: if l2 > 0.0 { tail / l2 } else { 0.0 },
        }
    }
}
