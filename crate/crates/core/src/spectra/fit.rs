//! Lorentzian least squares and direct half-maximum widths.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `offset + height·(w/2)² / ((ν − ν₀)² + (w/2)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub center: f64,
    pub fwhm: f64,
    pub height: f64,
    pub offset: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn eval(&self, nu: f64) -> f64 {
        lorentzian(&Vector4::new(self.center, self.fwhm, self.height, self.offset), nu)
    }
}

fn lorentzian(p: &Vector4<f64>, x: f64) -> f64 {
    let hw2 = 0.25 * p[1] * p[1];
    p[3] + p[2] * hw2 / ((x - p[0]).powi(2) + hw2)
}

/// Partial derivatives with respect to (ν₀, w, height, offset).
fn gradient(p: &Vector4<f64>, x: f64) -> Vector4<f64> {
    let hw2 = 0.25 * p[1] * p[1];
    let d = x - p[0];
    let den = d * d + hw2;
    let shape = hw2 / den;
    Vector4::new(
        p[2] * hw2 * 2.0 * d / (den * den),
        p[2] * 0.5 * p[1] * d * d / (den * den),
        shape,
        1.0,
    )
}

/// Indices of strict interior local maxima (`y[i-1] < y[i] ≥ y[i+1]`).
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect()
}

/// Vertex of the parabola through the samples around `i`.
pub fn parabolic_peak(x: &[f64], y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return x[i];
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a < 0.0 {
        (-b / (2.0 * a)).clamp(x0, x2)
    } else {
        x1
    }
}

/// Full width at half of the maximum sample, with linear interpolation of
/// both crossings. Fails if the curve does not drop below half on each side.
pub fn halfmax_width(x: &[f64], y: &[f64]) -> Result<f64> {
    check_samples(x, y)?;
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::Grid("empty sample set".into()))?;
    let half = 0.5 * ymax;
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (0..imax).rev().find(|&i| y[i] < half).map(|i| cross(i, i + 1));
    let right = (imax + 1..y.len()).find(|&i| y[i] < half).map(|i| cross(i - 1, i));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::NoPeak {
            lo: x[0],
            hi: x[x.len() - 1],
        }),
    }
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 5 {
        return Err(Error::InsufficientRows {
            needed: 5,
            got: x.len(),
        });
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid("samples must be finite on a strictly increasing grid".into()));
    }
    Ok(())
}

const MAX_ITER: usize = 500;

/// Levenberg–Marquardt fit to samples containing exactly one interior local
/// maximum. Non-convergence is reported through `converged = false` with the
/// best parameters found.
pub fn fit_lorentzian_samples(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_samples(x, y)?;
    let maxima = local_maxima(y);
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let peak = match maxima.as_slice() {
        [] => return Err(Error::NoPeak { lo, hi }),
        [i] => *i,
        _ => {
            return Err(Error::Grid(format!(
                "window [{lo}, {hi}] contains {} local maxima",
                maxima.len()
            )))
        }
    };

    // work in scaled coordinates so all parameters are O(1)
    let xc = 0.5 * (lo + hi);
    let xs = 0.5 * (hi - lo);
    let ys = y[peak].abs().max(f64::MIN_POSITIVE);
    let u: Vec<f64> = x.iter().map(|v| (v - xc) / xs).collect();
    let v: Vec<f64> = y.iter().map(|w| w / ys).collect();

    let offset0 = 0.5 * (v[0] + v[v.len() - 1]);
    let height0 = v[peak] - offset0;
    let center0 = (parabolic_peak(x, y, peak) - xc) / xs;
    let width0 = {
        let shifted: Vec<f64> = v.iter().map(|w| w - offset0).collect();
        halfmax_width(&u, &shifted).unwrap_or(0.1)
    };
    let mut p = Vector4::new(center0, width0.max(1e-6), height0, offset0);

    let cost = |p: &Vector4<f64>| -> f64 {
        u.iter()
            .zip(&v)
            .map(|(&a, &b)| (lorentzian(p, a) - b).powi(2))
            .sum()
    };
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&a, &b) in u.iter().zip(&v) {
            let g = gradient(&p, a);
            let r = lorentzian(&p, a) - b;
            jtj += g * g.transpose();
            jtr += g * r;
        }
        if jtr.amax() <= 1e-15 * (1.0 + c.sqrt()) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let ct = cost(&trial);
            if ct.is_finite() && ct <= c {
                let small = step.amax() <= 1e-13 * (1.0 + p.amax());
                p = trial;
                let improvement = c - ct;
                c = ct;
                lambda = (lambda * 0.2).max(1e-12);
                accepted = true;
                if small || improvement <= 1e-30 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || converged {
            converged = converged || !accepted;
            break;
        }
    }

    let fwhm = p[1].abs() * xs;
    let center = p[0] * xs + xc;
    let within = center >= lo && center <= hi && fwhm > 0.0;
    Ok(FitResult {
        center,
        fwhm,
        height: p[2] * ys,
        offset: p[3] * ys,
        residual_rms: (c / u.len() as f64).sqrt() * ys,
        converged: converged && within,
        iterations,
    })
}
