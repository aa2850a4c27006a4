//! Gauss-Legendre rules, adaptive Gauss-Kronrod integration and the
//! branch-aware node set used for integrals over the momentum spectrum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that the adaptive integrator can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Two complex integrands evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub Complex64, pub Complex64);

impl Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for Pair {
    type Output = Pair;
    fn sub(self, o: Pair) -> Pair {
        Pair(self.0 - o.0, self.1 - o.1)
    }
}

impl Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, s: f64) -> Pair {
        Pair(self.0 * s, self.1 * s)
    }
}

impl QuadValue for Pair {
    fn zero() -> Self {
        Pair(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    }
    fn magnitude(&self) -> f64 {
        self.0.norm().max(self.1.norm())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::invalid("Gauss-Legendre rule needs at least one node"));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on the three-term recurrence.
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut z = theta.cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 4.0 * f64::EPSILON * z.abs().max(1e-300) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d.is_finite() { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre(n)?;
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    Ok((x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect()))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
    abs: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn kronrod15<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.magnitude() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        let s = f1 + f2;
        k = k + s * WGK[j];
        abs += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let err = ((k - g) * h).magnitude();
    (k * h, err, abs * h.abs())
}

/// Adaptive 15-point Gauss-Kronrod integration of `f` over [a, b].
///
/// Stops once the summed error estimate falls below `abs_tol`, or below the
/// round-off floor 50 eps times the integral of |f|.
pub fn integrate_adaptive<V, F>(f: F, a: f64, b: f64, abs_tol: f64, max_panels: usize) -> Result<Integral<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(Integral { value: V::zero(), error: 0.0, evaluations: 0 });
    }
    let (v, e, mut abs_total) = kronrod15(&f, a, b);
    let mut evaluations = 15;
    let mut total = v;
    let mut total_err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e, abs: abs_total });
    loop {
        let floor = 50.0 * f64::EPSILON * abs_total;
        if !total.magnitude().is_finite() {
            return Err(Error::Overflow("non-finite integrand".into()));
        }
        if total_err <= abs_tol.max(floor) {
            return Ok(Integral { value: total, error: total_err, evaluations });
        }
        if heap.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:.3e} above tolerance {:.3e} after {} panels on [{a}, {b}]",
                abs_tol.max(floor),
                heap.len()
            )));
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1, a1) = kronrod15(&f, p.a, m);
        let (v2, e2, a2) = kronrod15(&f, m, p.b);
        evaluations += 30;
        total = total - p.value + v1 + v2;
        total_err = total_err - p.error + e1 + e2;
        abs_total += a1 + a2 - p.abs;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1, abs: a1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2, abs: a2 });
        // Guard against drift in the running error sum.
        if total_err < 0.0 {
            total_err = heap.iter().map(|q| q.error).sum();
        }
    }
}

/// Nodes and weights for integrals over a window of wavenumbers that may
/// contain the branch point k = a of the evanescent decay constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNodes {
    pub k: Vec<f64>,
    pub weight: Vec<f64>,
}

/// Builds a quadrature on [lo, hi] with `n` nodes in total.
///
/// When the branch point lies inside the window the interval is split there.
/// The evanescent panel is integrated in kappa = sqrt(a^2 - k^2) and the
/// propagating panel in k' = sqrt(k^2 - a^2); both substitutions remove the
/// square-root singularity so each panel's integrand is smooth.
pub fn spectral_nodes(lo: f64, hi: f64, branch: f64, n: usize) -> Result<SpectralNodes> {
    if !(lo >= 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!("bad spectral window [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(Error::invalid("spectral quadrature needs at least two nodes"));
    }
    if branch <= lo || branch >= hi {
        let (k, weight) = gauss_legendre_on(n, lo, hi)?;
        return Ok(SpectralNodes { k, weight });
    }
    let a = branch;
    let frac = (a - lo) / (hi - lo);
    let n_ev = ((n as f64 * frac).round() as usize).clamp(1, n - 1);
    let n_pr = n - n_ev;
    let mut k = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);

    let kappa_max = (a * a - lo * lo).sqrt();
    let (q, wq) = gauss_legendre_on(n_ev, 0.0, kappa_max)?;
    for (kap, w) in q.iter().zip(&wq).rev() {
        let kk = (a * a - kap * kap).sqrt();
        k.push(kk);
        weight.push(w * kap / kk);
    }
    let kp_max = (hi * hi - a * a).sqrt();
    let (q, wq) = gauss_legendre_on(n_pr, 0.0, kp_max)?;
    for (kp, w) in q.iter().zip(&wq) {
        let kk = (a * a + kp * kp).sqrt();
        k.push(kk);
        weight.push(w * kp / kk);
    }
    Ok(SpectralNodes { k, weight })
}
