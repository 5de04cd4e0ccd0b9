//! Univariate real polynomials, trigonometric polynomials and real-root isolation.

use std::ops::{Add, Mul, Neg, Sub};

/// Coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub c: Vec<f64>,
}

impl Poly {
    pub fn new(c: Vec<f64>) -> Poly {
        Poly { c }
    }

    pub fn constant(k: f64) -> Poly {
        Poly { c: vec![k] }
    }

    /// `a + b x`.
    pub fn linear(a: f64, b: f64) -> Poly {
        Poly { c: vec![a, b] }
    }

    pub fn zero() -> Poly {
        Poly { c: vec![0.0] }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Degree after dropping leading coefficients below `rel · max|c|`; `None` for the zero polynomial.
    pub fn degree_rel(&self, rel: f64) -> Option<usize> {
        let m = self.max_abs();
        if m == 0.0 {
            return None;
        }
        (0..self.c.len()).rev().find(|&i| self.c[i].abs() > rel * m)
    }

    pub fn trimmed(&self, rel: f64) -> Poly {
        match self.degree_rel(rel) {
            None => Poly::zero(),
            Some(d) => Poly { c: self.c[..=d].to_vec() },
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    /// Σ |c_i| |x|^i, the natural magnitude for judging `eval(x)` against zero.
    pub fn eval_abs(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.c.iter().rev().fold(0.0, |acc, &a| acc * ax + a.abs())
    }

    pub fn derivative(&self) -> Poly {
        if self.c.len() <= 1 {
            return Poly::zero();
        }
        Poly { c: self.c.iter().enumerate().skip(1).map(|(i, &a)| a * i as f64).collect() }
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly { c: self.c.iter().map(|a| a * k).collect() }
    }

    pub fn pow(&self, k: usize) -> Poly {
        let mut r = Poly::constant(1.0);
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    /// Divide by `divisor`, returning quotient and remainder.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dv = divisor.trimmed(0.0);
        let dd = dv.c.len() - 1;
        let lead = dv.c[dd];
        let mut rem = self.c.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![0.0; rem.len() - dd];
        for i in (0..q.len()).rev() {
            let f = rem[i + dd] / lead;
            q[i] = f;
            for j in 0..=dd {
                rem[i + j] -= f * dv.c[j];
            }
        }
        rem.truncate(dd.max(1));
        (Poly { c: q }, Poly { c: rem })
    }

    /// Real roots in ascending order, double roots reported once.
    pub fn real_roots(&self) -> Vec<f64> {
        let p = self.trimmed(1e-13);
        let deg = match p.degree_rel(0.0) {
            None | Some(0) => return Vec::new(),
            Some(d) => d,
        };
        if deg == 1 {
            return vec![-p.c[0] / p.c[1]];
        }
        let lead = p.c[deg];
        let bound = 1.0 + p.c[..deg].iter().fold(0.0f64, |m, a| m.max((a / lead).abs()));
        let crit = p.derivative().real_roots();
        let mut marks = vec![-bound];
        marks.extend(crit.iter().copied().filter(|x| x.abs() < bound));
        marks.push(bound);
        let mut roots = Vec::new();
        for w in marks.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (p.eval(lo), p.eval(hi));
            if flo == 0.0 {
                roots.push(lo);
                continue;
            }
            if flo.signum() == fhi.signum() || fhi == 0.0 {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = p.eval(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        if p.eval(bound) == 0.0 {
            roots.push(bound);
        }
        for &x in &crit {
            if p.eval(x).abs() <= 1e-9 * p.eval_abs(x) {
                roots.push(x);
            }
        }
        roots.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::new();
        for r in roots {
            match merged.last() {
                Some(&m) if (r - m).abs() <= 1e-9 * m.abs().max(1.0) => {}
                _ => merged.push(r),
            }
        }
        merged
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly {
            c: (0..n)
                .map(|i| self.c.get(i).copied().unwrap_or(0.0) + o.c.get(i).copied().unwrap_or(0.0))
                .collect(),
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut c = vec![0.0; self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly { c }
    }
}

/// `Σ a_k cos kθ + b_k sin kθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(k: f64) -> TrigPoly {
        TrigPoly { cos: vec![k], sin: vec![0.0] }
    }

    /// `a + b cos θ + c sin θ`.
    pub fn first_order(a: f64, b: f64, c: f64) -> TrigPoly {
        TrigPoly { cos: vec![a, b], sin: vec![0.0, c] }
    }

    pub fn zero() -> TrigPoly {
        TrigPoly::constant(0.0)
    }

    fn order(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn get(v: &[f64], k: usize) -> f64 {
        v.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.cos.iter().chain(&self.sin).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Highest harmonic whose coefficients exceed `rel · max`.
    pub fn degree_rel(&self, rel: f64) -> Option<usize> {
        let m = self.max_abs();
        if m == 0.0 {
            return None;
        }
        (0..self.order()).rev().find(|&k| Self::get(&self.cos, k).abs().max(Self::get(&self.sin, k).abs()) > rel * m)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (0..self.order())
            .map(|k| {
                let a = k as f64 * theta;
                Self::get(&self.cos, k) * a.cos() + Self::get(&self.sin, k) * a.sin()
            })
            .sum()
    }

    pub fn scale(&self, f: f64) -> TrigPoly {
        TrigPoly { cos: self.cos.iter().map(|x| x * f).collect(), sin: self.sin.iter().map(|x| x * f).collect() }
    }

    /// `(1 + u²)^K · T(θ)` with `u = tan(θ/2)`, as a polynomial in `u`, where `K` is the degree.
    pub fn to_half_angle(&self, k_total: usize) -> Poly {
        let mut out = Poly::zero();
        let one_plus_u2 = Poly::new(vec![1.0, 0.0, 1.0]);
        for k in 0..self.order().min(k_total + 1) {
            let (a, b) = (Self::get(&self.cos, k), Self::get(&self.sin, k));
            if a == 0.0 && b == 0.0 {
                continue;
            }
            // (1 + iu)^{2k} = Σ C(2k, j) i^j u^j
            let n = 2 * k;
            let mut re = vec![0.0; n + 1];
            let mut im = vec![0.0; n + 1];
            let mut binom = 1.0;
            for j in 0..=n {
                match j % 4 {
                    0 => re[j] = binom,
                    1 => im[j] = binom,
                    2 => re[j] = -binom,
                    _ => im[j] = -binom,
                }
                binom = binom * (n - j) as f64 / (j + 1) as f64;
            }
            let term = &Poly::new(re).scale(a) + &Poly::new(im).scale(b);
            out = &out + &(&term * &one_plus_u2.pow(k_total - k));
        }
        out
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;
    fn add(self, o: &TrigPoly) -> TrigPoly {
        let n = self.order().max(o.order());
        TrigPoly {
            cos: (0..n).map(|k| TrigPoly::get(&self.cos, k) + TrigPoly::get(&o.cos, k)).collect(),
            sin: (0..n).map(|k| TrigPoly::get(&self.sin, k) + TrigPoly::get(&o.sin, k)).collect(),
        }
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;
    fn sub(self, o: &TrigPoly) -> TrigPoly {
        self + &o.scale(-1.0)
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, o: &TrigPoly) -> TrigPoly {
        let n = self.order() + o.order();
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for i in 0..self.order() {
            let (ca, sa) = (TrigPoly::get(&self.cos, i), TrigPoly::get(&self.sin, i));
            for j in 0..o.order() {
                let (cb, sb) = (TrigPoly::get(&o.cos, j), TrigPoly::get(&o.sin, j));
                let (s, d) = (i + j, i.abs_diff(j));
                // cos·cos, sin·sin, sin·cos, cos·sin via product-to-sum.
                cos[s] += 0.5 * (ca * cb - sa * sb);
                cos[d] += 0.5 * (ca * cb + sa * sb);
                sin[s] += 0.5 * (sa * cb + ca * sb);
                let sign = if i >= j { 1.0 } else { -1.0 };
                sin[d] += 0.5 * sign * (sa * cb - ca * sb);
            }
        }
        sin[0] = 0.0;
        TrigPoly { cos, sin }
    }
}

/// Arithmetic needed to run Cramer's rule over polynomial entries.
pub trait Ring: Clone {
    fn zero() -> Self;
    fn constant(k: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
}

impl Ring for Poly {
    fn zero() -> Self {
        Poly::zero()
    }
    fn constant(k: f64) -> Self {
        Poly::constant(k)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
}

impl Ring for TrigPoly {
    fn zero() -> Self {
        TrigPoly::zero()
    }
    fn constant(k: f64) -> Self {
        TrigPoly::constant(k)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
}

impl Ring for f64 {
    fn zero() -> Self {
        0.0
    }
    fn constant(k: f64) -> Self {
        k
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
}

pub fn det3<R: Ring>(m: &[[R; 3]; 3]) -> R {
    let minor = |a: &R, b: &R, c: &R, d: &R| a.mul(d).sub(&b.mul(c));
    let t0 = m[0][0].mul(&minor(&m[1][1], &m[1][2], &m[2][1], &m[2][2]));
    let t1 = m[0][1].mul(&minor(&m[1][0], &m[1][2], &m[2][0], &m[2][2]));
    let t2 = m[0][2].mul(&minor(&m[1][0], &m[1][1], &m[2][0], &m[2][1]));
    t0.sub(&t1).add(&t2)
}

/// Solve `A x = b` symbolically: returns the numerators of each unknown and the common denominator.
pub fn cramer3<R: Ring>(a: &[[R; 3]; 3], b: &[R; 3]) -> ([R; 3], R) {
    let d = det3(a);
    let num = |col: usize| {
        let mut m = a.clone();
        for r in 0..3 {
            m[r][col] = b[r].clone();
        }
        det3(&m)
    };
    ([num(0), num(1), num(2)], d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_roots_found() {
        // (x-1)(x-2)(x+3)(x-0.5)
        let p = &(&Poly::linear(-1.0, 1.0) * &Poly::linear(-2.0, 1.0)) * &(&Poly::linear(3.0, 1.0) * &Poly::linear(-0.5, 1.0));
        let r = p.real_roots();
        let expect = [-3.0, 0.5, 1.0, 2.0];
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn double_root_reported_once() {
        let p = &Poly::linear(-1.0, 1.0).pow(2) * &Poly::linear(2.0, 1.0);
        let r = p.real_roots();
        assert_eq!(r.len(), 2, "{r:?}");
        assert!((r[0] + 2.0).abs() < 1e-9 && (r[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_real_roots() {
        assert!(Poly::new(vec![1.0, 0.0, 1.0]).real_roots().is_empty());
        assert!(Poly::new(vec![2.0, 0.0, 3.0, 0.0, 1.0]).real_roots().is_empty());
    }

    #[test]
    fn division() {
        let p = &Poly::new(vec![1.0, 0.0, 1.0]) * &Poly::linear(3.0, 2.0);
        let (q, r) = p.div_rem(&Poly::new(vec![1.0, 0.0, 1.0]));
        assert!((q.c[0] - 3.0).abs() < 1e-14 && (q.c[1] - 2.0).abs() < 1e-14);
        assert!(r.max_abs() < 1e-14);
    }

    #[test]
    fn trig_product_matches_pointwise() {
        let a = TrigPoly { cos: vec![0.3, -1.2, 0.5], sin: vec![0.0, 0.7, -0.4] };
        let b = TrigPoly::first_order(1.0, 0.25, -2.0);
        let p = &a * &b;
        for i in 0..20 {
            let t = -3.0 + 0.31 * i as f64;
            assert!((p.eval(t) - a.eval(t) * b.eval(t)).abs() < 1e-12);
        }
        assert_eq!(p.degree_rel(1e-12), Some(3));
    }

    #[test]
    fn half_angle_conversion() {
        let a = TrigPoly { cos: vec![0.3, -1.2, 0.5], sin: vec![0.0, 0.7, -0.4] };
        let p = a.to_half_angle(2);
        for i in 0..20 {
            let t = -3.0 + 0.31 * i as f64;
            let u = (t / 2.0).tan();
            let lhs = p.eval(u);
            let rhs = (1.0 + u * u).powi(2) * a.eval(t);
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn cramer_solves_constant_system() {
        let a = [
            [Poly::constant(2.0), Poly::constant(1.0), Poly::constant(0.0)],
            [Poly::constant(0.0), Poly::constant(3.0), Poly::constant(1.0)],
            [Poly::constant(1.0), Poly::constant(0.0), Poly::constant(1.0)],
        ];
        let b = [Poly::constant(3.0), Poly::constant(4.0), Poly::constant(2.0)];
        let (n, d) = cramer3(&a, &b);
        let x: Vec<f64> = n.iter().map(|v| v.eval(0.0) / d.eval(0.0)).collect();
        assert!((2.0 * x[0] + x[1] - 3.0).abs() < 1e-12);
        assert!((3.0 * x[1] + x[2] - 4.0).abs() < 1e-12);
        assert!((x[0] + x[2] - 2.0).abs() < 1e-12);
    }
}
