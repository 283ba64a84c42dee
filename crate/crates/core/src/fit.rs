//! Lineshape fits for resonances in a spectrum.
//!
//! Lorentzian (Breit-Wigner):
//! f(x) = y₀ + A·(Γ/2)² / ((x − x₀)² + (Γ/2)²)
//!
//! Fano:
//! f(x) = y₀ + A·(q + ε)² / (1 + ε²),  ε = 2(x − x₀)/Γ
//!
//! Both are least-squares fits started from the extremum of the data.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lineshape {
    Lorentzian,
    Fano,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeFit {
    pub shape: Lineshape,
    pub center: f64,
    /// Full width at half maximum Γ.
    pub width: f64,
    pub amplitude: f64,
    pub background: f64,
    /// Fano parameter q; `None` for a Lorentzian.
    pub asymmetry: Option<f64>,
    /// Coefficient of determination on the fitted samples.
    pub r_squared: f64,
}

impl LineshapeFit {
    pub fn eval(&self, x: f64) -> f64 {
        let p = self.params();
        match self.shape {
            Lineshape::Lorentzian => lorentzian(&p, x).0,
            Lineshape::Fano => fano(&p, x).0,
        }
    }

    /// (f(x₀ + Γ) − f(x₀ − Γ)) / |A|: zero for a symmetric profile, 1.6·q
    /// for a Fano profile with positive A.
    pub fn skew(&self) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        (self.eval(self.center + self.width) - self.eval(self.center - self.width)) / self.amplitude.abs()
    }

    fn params(&self) -> Vec<f64> {
        match self.shape {
            Lineshape::Lorentzian => vec![self.center, self.width, self.amplitude, self.background],
            Lineshape::Fano => vec![
                self.center,
                self.width,
                self.amplitude,
                self.asymmetry.unwrap_or(0.0),
                self.background,
            ],
        }
    }
}

/// Value and gradient of the Lorentzian at x for p = [x₀, Γ, A, y₀].
fn lorentzian(p: &[f64], x: f64) -> (f64, Vec<f64>) {
    let (x0, g, a) = (p[0], p[1], p[2]);
    let h2 = 0.25 * g * g;
    let d = x - x0;
    let den = d * d + h2;
    let l = h2 / den;
    let dl_dx0 = 2.0 * d * h2 / (den * den);
    let dl_dg = 0.5 * g * d * d / (den * den);
    (p[3] + a * l, vec![a * dl_dx0, a * dl_dg, l, 1.0])
}

/// Value and gradient of the Fano profile at x for p = [x₀, Γ, A, q, y₀].
fn fano(p: &[f64], x: f64) -> (f64, Vec<f64>) {
    let (x0, g, a, q) = (p[0], p[1], p[2], p[3]);
    let e = 2.0 * (x - x0) / g;
    let den = 1.0 + e * e;
    let s = (q + e).powi(2) / den;
    // ds/dε
    let ds = 2.0 * (q + e) * (1.0 - q * e) / (den * den);
    let de_dx0 = -2.0 / g;
    let de_dg = -e / g;
    let ds_dq = 2.0 * (q + e) / den;
    (p[4] + a * s, vec![a * ds * de_dx0, a * ds * de_dg, s, a * ds_dq, 1.0])
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    p: DVector<f64>,
    f: fn(&[f64], f64) -> (f64, Vec<f64>),
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, p: &DVector<f64>) {
        self.p.copy_from(p);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = self.p.as_slice();
        Some(DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).map(|(&x, &y)| (self.f)(p, x).0 - y),
        ))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let p = self.p.as_slice();
        let mut j = DMatrix::zeros(self.x.len(), p.len());
        for (r, &x) in self.x.iter().enumerate() {
            for (c, g) in (self.f)(p, x).1.into_iter().enumerate() {
                j[(r, c)] = g;
            }
        }
        Some(j)
    }
}

fn r_squared(y: &[f64], model: impl Fn(f64) -> f64, x: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let res: f64 = x.iter().zip(y).map(|(&a, &b)| (model(a) - b).powi(2)).sum();
    if tot == 0.0 {
        if res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - res / tot
    }
}

fn minimize(x: &[f64], y: &[f64], start: Vec<f64>, f: fn(&[f64], f64) -> (f64, Vec<f64>)) -> Option<Vec<f64>> {
    let problem = Problem {
        x,
        y,
        p: DVector::from_vec(start),
        f,
    };
    let (done, report) = LevenbergMarquardt::new()
        .with_tol(1e-15)
        .with_patience(400)
        .minimize(problem);
    let p = done.p.as_slice().to_vec();
    (!report.termination.was_usage_issue() && p.iter().all(|v| v.is_finite())).then_some(p)
}

/// Position and rough half-width of the largest |y − baseline| excursion.
fn initial_guess(x: &[f64], y: &[f64]) -> Option<(usize, f64, f64)> {
    let n = x.len();
    if n < 4 || y.len() != n {
        return None;
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let base = sorted[n / 2];
    let (k, _) = y
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1 - base).abs().total_cmp(&(b.1 - base).abs()))?;
    let height = y[k] - base;
    if height == 0.0 {
        return None;
    }
    // first samples on either side that fall below half height
    let half = |i: usize| ((y[i] - base) / height) < 0.5;
    let lo = (0..k).rev().find(|&i| half(i)).unwrap_or(0);
    let hi = (k + 1..n).find(|&i| half(i)).unwrap_or(n - 1);
    let width = (x[hi] - x[lo]).max(x[1] - x[0]);
    Some((k, width, base))
}

/// Lorentzian fit around the dominant extremum.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Option<LineshapeFit> {
    let (k, width, base) = initial_guess(x, y)?;
    let p = minimize(x, y, vec![x[k], width, y[k] - base, base], lorentzian)?;
    let fit = LineshapeFit {
        shape: Lineshape::Lorentzian,
        center: p[0],
        width: p[1].abs(),
        amplitude: p[2],
        background: p[3],
        asymmetry: None,
        r_squared: 0.0,
    };
    Some(LineshapeFit {
        r_squared: r_squared(y, |v| fit.eval(v), x),
        ..fit
    })
}

/// Fano fit around the dominant extremum; several starting q are tried and
/// the best R² kept.
pub fn fit_fano(x: &[f64], y: &[f64]) -> Option<LineshapeFit> {
    let (k, width, base) = initial_guess(x, y)?;
    let h = y[k] - base;
    let mut best: Option<LineshapeFit> = None;
    for q in [0.0, 0.5, -0.5, 2.0, -2.0] {
        // with q = 0 the profile is a dip of depth A below y₀ + A
        let Some(p) = minimize(x, y, vec![x[k], width, -h, q, base + h], fano) else {
            continue;
        };
        let fit = LineshapeFit {
            shape: Lineshape::Fano,
            center: p[0],
            width: p[1].abs(),
            amplitude: p[2],
            background: p[4],
            asymmetry: Some(p[3]),
            r_squared: 0.0,
        };
        let fit = LineshapeFit {
            r_squared: r_squared(y, |v| fit.eval(v), x),
            ..fit
        };
        if best.is_none_or(|b| fit.r_squared > b.r_squared) {
            best = Some(fit);
        }
    }
    best
}
