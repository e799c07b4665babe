//! Truncated polynomials in two variables.
//!
//! [`Poly2`] holds real coefficients of `P^a Q^b`. [`CPoly`] holds complex
//! coefficients of `xi^a eta^b` with `xi = P + iQ`, `eta = P - iQ`, which is
//! where the homological equation is diagonal.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Real polynomial `sum c_ab P^a Q^b` with total degree at most `max_degree`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly2 {
    pub max_degree: u32,
    pub coeffs: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn new(max_degree: u32) -> Self {
        Self {
            max_degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn coeff(&self, a: u32, b: u32) -> f64 {
        self.coeffs.get(&(a, b)).copied().unwrap_or(0.0)
    }

    /// Adds `c P^a Q^b`, dropping terms above the degree cap.
    pub fn add_term(&mut self, a: u32, b: u32, c: f64) {
        if a + b <= self.max_degree && c != 0.0 {
            *self.coeffs.entry((a, b)).or_insert(0.0) += c;
        }
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|((a, b), c)| c * p.powi(*a as i32) * q.powi(*b as i32))
            .sum()
    }

    /// `(d/dP, d/dQ)`.
    pub fn grad(&self, p: f64, q: f64) -> (f64, f64) {
        let mut gp = 0.0;
        let mut gq = 0.0;
        for ((a, b), c) in &self.coeffs {
            if *a > 0 {
                gp += c * *a as f64 * p.powi(*a as i32 - 1) * q.powi(*b as i32);
            }
            if *b > 0 {
                gq += c * *b as f64 * p.powi(*a as i32) * q.powi(*b as i32 - 1);
            }
        }
        (gp, gq)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new(self.max_degree.min(other.max_degree));
        for ((a, b), c) in &self.coeffs {
            for ((d, e), f) in &other.coeffs {
                out.add_term(a + d, b + e, c * f);
            }
        }
        out
    }

    pub fn d_p(&self) -> Self {
        let mut out = Self::new(self.max_degree);
        for ((a, b), c) in &self.coeffs {
            if *a > 0 {
                out.add_term(a - 1, *b, c * *a as f64);
            }
        }
        out
    }

    pub fn d_q(&self) -> Self {
        let mut out = Self::new(self.max_degree);
        for ((a, b), c) in &self.coeffs {
            if *b > 0 {
                out.add_term(*a, b - 1, c * *b as f64);
            }
        }
        out
    }

    /// `{f, g} = f_P g_Q - f_Q g_P`.
    pub fn bracket(&self, other: &Self) -> Self {
        let mut out = self.d_p().mul(&other.d_q());
        for (k, v) in self.d_q().mul(&other.d_p()).coeffs {
            out.add_term(k.0, k.1, -v);
        }
        out
    }

    /// Homogeneous part of total degree `k`.
    pub fn homogeneous(&self, k: u32) -> Self {
        Self {
            max_degree: self.max_degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|((a, b), _)| a + b == k)
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    /// Rewrites in `xi = P + iQ`, `eta = P - iQ`.
    pub fn to_complex(&self) -> CPoly {
        let n = self.max_degree;
        // P = (xi + eta)/2, Q = -i (xi - eta)/2
        let mut p = CPoly::new(n);
        p.add_term(1, 0, Complex64::new(0.5, 0.0));
        p.add_term(0, 1, Complex64::new(0.5, 0.0));
        let mut q = CPoly::new(n);
        q.add_term(1, 0, Complex64::new(0.0, -0.5));
        q.add_term(0, 1, Complex64::new(0.0, 0.5));
        let p_pows = powers(&p, n);
        let q_pows = powers(&q, n);
        let mut out = CPoly::new(n);
        for ((a, b), c) in &self.coeffs {
            let term = p_pows[*a as usize].mul(&q_pows[*b as usize]);
            for (k, v) in term.coeffs {
                out.add_term(k.0, k.1, v * *c);
            }
        }
        out
    }
}

fn powers(base: &CPoly, n: u32) -> Vec<CPoly> {
    let mut one = CPoly::new(n);
    one.add_term(0, 0, Complex64::new(1.0, 0.0));
    let mut out = vec![one];
    for k in 1..=n as usize {
        let next = out[k - 1].mul(base);
        out.push(next);
    }
    out
}

/// Complex polynomial `sum c_ab xi^a eta^b`, degree capped at `max_degree`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CPoly {
    pub max_degree: u32,
    pub coeffs: BTreeMap<(u32, u32), Complex64>,
}

impl CPoly {
    pub fn new(max_degree: u32) -> Self {
        Self {
            max_degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// The coordinate function `xi`.
    pub fn xi(max_degree: u32) -> Self {
        let mut out = Self::new(max_degree);
        out.add_term(1, 0, Complex64::new(1.0, 0.0));
        out
    }

    pub fn coeff(&self, a: u32, b: u32) -> Complex64 {
        self.coeffs.get(&(a, b)).copied().unwrap_or(ZERO)
    }

    pub fn add_term(&mut self, a: u32, b: u32, c: Complex64) {
        if a + b <= self.max_degree && c != ZERO {
            *self.coeffs.entry((a, b)).or_insert(ZERO) += c;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.add_term(k.0, k.1, *v);
        }
        out
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            max_degree: self.max_degree,
            coeffs: self.coeffs.iter().map(|(k, v)| (*k, v * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new(self.max_degree.min(other.max_degree));
        for ((a, b), c) in &self.coeffs {
            for ((d, e), f) in &other.coeffs {
                out.add_term(a + d, b + e, c * f);
            }
        }
        out
    }

    pub fn d_xi(&self) -> Self {
        let mut out = Self::new(self.max_degree);
        for ((a, b), c) in &self.coeffs {
            if *a > 0 {
                out.add_term(a - 1, *b, c * *a as f64);
            }
        }
        out
    }

    pub fn d_eta(&self) -> Self {
        let mut out = Self::new(self.max_degree);
        for ((a, b), c) in &self.coeffs {
            if *b > 0 {
                out.add_term(*a, b - 1, c * *b as f64);
            }
        }
        out
    }

    /// `{f, g} = f_Q g_P - f_P g_Q = 2i (f_xi g_eta - f_eta g_xi)`, the
    /// convention under which `df/dt = {f, H}`.
    pub fn bracket(&self, other: &Self) -> Self {
        let a = self.d_xi().mul(&other.d_eta());
        let b = self.d_eta().mul(&other.d_xi());
        a.add(&b.scaled(Complex64::new(-1.0, 0.0))).scaled(2.0 * I)
    }

    /// `exp(L_chi) f = sum_n {.., {f, chi}, ..} / n!`, truncated at the degree cap.
    pub fn lie_exp(&self, chi: &Self) -> Self {
        let mut out = self.clone();
        let mut term = self.clone();
        for n in 1..=(2 * self.max_degree as usize) {
            term = term.bracket(chi).scaled(Complex64::new(1.0 / n as f64, 0.0));
            if term.coeffs.is_empty() {
                break;
            }
            out = out.add(&term);
        }
        out
    }

    pub fn homogeneous(&self, k: u32) -> Self {
        Self {
            max_degree: self.max_degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|((a, b), _)| a + b == k)
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    pub fn eval(&self, xi: Complex64, eta: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|((a, b), c)| c * xi.powu(*a) * eta.powu(*b))
            .sum()
    }

    /// Value and `(d/dxi, d/deta)` at a point.
    pub fn eval_with_grad(&self, xi: Complex64, eta: Complex64) -> (Complex64, Complex64, Complex64) {
        let mut v = ZERO;
        let mut dx = ZERO;
        let mut de = ZERO;
        for ((a, b), c) in &self.coeffs {
            let (xa, eb) = (xi.powu(*a), eta.powu(*b));
            v += c * xa * eb;
            if *a > 0 {
                dx += c * *a as f64 * xi.powu(a - 1) * eb;
            }
            if *b > 0 {
                de += c * *b as f64 * xa * eta.powu(b - 1);
            }
        }
        (v, dx, de)
    }

    /// Evaluates at the real point `(P, Q)` and returns the real part; the
    /// polynomial must represent a real function.
    pub fn eval_real(&self, p: f64, q: f64) -> f64 {
        let xi = Complex64::new(p, q);
        self.eval(xi, xi.conj()).re
    }

    /// Back to `P, Q` coordinates; imaginary residues are dropped after
    /// being measured, and returned alongside.
    pub fn to_real(&self) -> (Poly2, f64) {
        let n = self.max_degree;
        // xi = P + iQ and eta = P - iQ, with P^a Q^b coefficients held in a
        // CPoly whose two slots stand for P and Q
        let mut base_xi = CPoly::new(n);
        base_xi.add_term(1, 0, Complex64::new(1.0, 0.0));
        base_xi.add_term(0, 1, I);
        let mut base_eta = CPoly::new(n);
        base_eta.add_term(1, 0, Complex64::new(1.0, 0.0));
        base_eta.add_term(0, 1, -I);
        let xp = powers(&base_xi, n);
        let ep = powers(&base_eta, n);
        let mut acc = CPoly::new(n);
        for ((a, b), c) in &self.coeffs {
            let term = xp[*a as usize].mul(&ep[*b as usize]);
            for (k, v) in term.coeffs {
                acc.add_term(k.0, k.1, v * c);
            }
        }
        let mut out = Poly2::new(n);
        let mut imag: f64 = 0.0;
        for ((a, b), v) in acc.coeffs {
            imag = imag.max(v.im.abs());
            out.add_term(a, b, v.re);
        }
        (out, imag)
    }

    /// Largest `|c_ab|` with `a != b`.
    pub fn angle_dependence(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|((a, b), _)| a != b)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Taylor coefficients of `sin` and `cos` through degree `n`, as polynomials
/// in a single variable.
fn sin_cos_series(n: u32) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![0.0; n as usize + 1];
    let mut c = vec![0.0; n as usize + 1];
    let mut fact = 1.0;
    for k in 0..=n as usize {
        if k > 0 {
            fact *= k as f64;
        }
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            s[k] = sign / fact;
        } else {
            c[k] = sign / fact;
        }
    }
    (s, c)
}

/// Taylor expansion of `sigma [P - (sin P + lambda cos P) cos Q] + sigma lambda`
/// (the constant removed) through degree `n`.
pub fn local_hamiltonian_taylor(sigma: f64, lambda: f64, n: u32) -> Poly2 {
    let (s, c) = sin_cos_series(n);
    let mut left = Poly2::new(n);
    for k in 0..=n {
        left.add_term(k, 0, s[k as usize] + lambda * c[k as usize]);
    }
    let mut cos_q = Poly2::new(n);
    for k in 0..=n {
        cos_q.add_term(0, k, c[k as usize]);
    }
    let prod = left.mul(&cos_q);
    let mut out = Poly2::new(n);
    out.add_term(1, 0, sigma);
    for ((a, b), v) in prod.coeffs {
        out.add_term(a, b, -sigma * v);
    }
    out.add_term(0, 0, sigma * lambda);
    out.coeffs.retain(|_, v| *v != 0.0);
    out
}

/// Closed form of the same function.
pub fn local_hamiltonian(sigma: f64, lambda: f64, p: f64, q: f64) -> f64 {
    sigma * (p - (p.sin() + lambda * p.cos()) * q.cos()) + sigma * lambda
}
