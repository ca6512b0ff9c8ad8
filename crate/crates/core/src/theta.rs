//! Theta series: constants with characteristics, lattice thetas, the harmonic
//! theta c4, second-kind thetas, and the one-variable auxiliaries.
//!
//! One-variable series are stored in the τ11 slot (keys (a, 0, 0)); use
//! [`FourierSeries::swap_vars`] to move them to τ22.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};
use crate::series::{ExpKey, FourierSeries};
use crate::symplectic::{c2_inv, c2_mul, SymplecticMat};

/// Characteristic m = (m', m'') with entries in {0, 1}.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThetaChar {
    degree: u8,
    bits: [u8; 4],
}

impl ThetaChar {
    /// Degree-2 characteristic from its four digits m'1 m'2 m''1 m''2.
    pub fn deg2(bits: [u8; 4]) -> Result<ThetaChar> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidCharacteristic(format!("{bits:?}")));
        }
        Ok(ThetaChar { degree: 2, bits })
    }

    /// Degree-1 characteristic (m', m'').
    pub fn deg1(mp: u8, mpp: u8) -> Result<ThetaChar> {
        if mp > 1 || mpp > 1 {
            return Err(Error::InvalidCharacteristic(format!("{mp}{mpp}")));
        }
        Ok(ThetaChar { degree: 1, bits: [mp, mpp, 0, 0] })
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn mp(&self) -> &[u8] {
        &self.bits[..self.degree as usize]
    }

    pub fn mpp(&self) -> &[u8] {
        &self.bits[self.degree as usize..2 * self.degree as usize]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits[..2 * self.degree as usize]
    }

    pub fn to_ints(&self) -> Vec<i64> {
        self.bits().iter().map(|&b| b as i64).collect()
    }

    pub fn is_even(&self) -> bool {
        self.mp().iter().zip(self.mpp()).map(|(a, b)| a * b).sum::<u8>() % 2 == 0
    }

    /// All characteristics of a degree, in binary order.
    pub fn all(degree: u8) -> Vec<ThetaChar> {
        let n = 2 * degree as u32;
        (0..1u32 << n)
            .map(|v| {
                let mut bits = [0u8; 4];
                for (i, b) in bits.iter_mut().enumerate().take(n as usize) {
                    *b = ((v >> (n as usize - 1 - i)) & 1) as u8;
                }
                ThetaChar { degree, bits }
            })
            .collect()
    }

    pub fn even(degree: u8) -> Vec<ThetaChar> {
        Self::all(degree).into_iter().filter(|m| m.is_even()).collect()
    }
}

impl fmt::Display for ThetaChar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for ThetaChar {
    type Err = Error;
    fn from_str(s: &str) -> Result<ThetaChar> {
        let d: Vec<u8> = s
            .chars()
            .map(|c| c.to_digit(2).map(|v| v as u8).ok_or_else(|| Error::InvalidCharacteristic(s.into())))
            .collect::<Result<_>>()?;
        match d.len() {
            2 => ThetaChar::deg1(d[0], d[1]),
            4 => ThetaChar::deg2([d[0], d[1], d[2], d[3]]),
            _ => Err(Error::InvalidCharacteristic(s.into())),
        }
    }
}

fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// θ_m for an arbitrary integral characteristic (length 2·degree), denominator 8.
pub fn theta_const_int(degree: u8, m: &[i64], n: u32) -> Result<FourierSeries> {
    if !(degree == 1 || degree == 2) || m.len() != 2 * degree as usize {
        return Err(Error::InvalidCharacteristic(format!("{m:?}")));
    }
    let mut s = FourierSeries::zero(8, n)?;
    let bound = 8 * n as i64;
    let r = isqrt(bound) + 2;
    // u = 2(p + m'/2) runs over integers congruent to m' mod 2
    let us = |mp: i64| (-r..=r).filter(move |u| (u - mp).rem_euclid(2) == 0 && u * u <= bound);
    if degree == 1 {
        for u in us(m[0]) {
            let phase = CycRat::root_of_unity(u * m[1], 4)?;
            s.add_term(ExpKey::new((u * u) as i32, 0, 0), phase);
        }
    } else {
        for u1 in us(m[0]) {
            for u2 in us(m[1]) {
                let phase = CycRat::root_of_unity(u1 * m[2] + u2 * m[3], 4)?;
                s.add_term(ExpKey::new((u1 * u1) as i32, (2 * u1 * u2) as i32, (u2 * u2) as i32), phase);
            }
        }
    }
    s.weight = Some(Rat::frac(1, 2));
    Ok(s)
}

/// Theta constant θ_m, denominator 8. Odd characteristics give the zero series.
pub fn theta_const(m: &ThetaChar, n: u32) -> Result<FourierSeries> {
    let s = theta_const_int(m.degree, &m.to_ints(), n)?;
    Ok(s.with_label(format!("theta_{m}")))
}

/// Positive definite Gram matrix, stored as the integral matrix 2S.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GramMatrix {
    n: usize,
    twice: Vec<i64>,
}

impl GramMatrix {
    /// From the integral matrix 2S. Requires symmetry, integral xSx^t and positive definiteness.
    pub fn from_twice(n: usize, twice: Vec<i64>) -> Result<GramMatrix> {
        if twice.len() != n * n {
            return Err(Error::Config("Gram matrix has wrong size".into()));
        }
        for i in 0..n {
            if twice[i * n + i] % 2 != 0 {
                return Err(Error::Config("diagonal of S must be integral".into()));
            }
            for j in 0..n {
                if twice[i * n + j] != twice[j * n + i] {
                    return Err(Error::Config("Gram matrix must be symmetric".into()));
                }
            }
        }
        let g = GramMatrix { n, twice };
        for k in 1..=n {
            if g.minor(k).signum() <= 0 {
                return Err(Error::Config("Gram matrix is not positive definite".into()));
            }
        }
        Ok(g)
    }

    /// From integer entries of S.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<GramMatrix> {
        let n = rows.len();
        let twice = rows.iter().flat_map(|r| r.iter().map(|x| 2 * x)).collect();
        GramMatrix::from_twice(n, twice)
    }

    pub fn a2() -> GramMatrix {
        GramMatrix::from_rows(&[vec![2, 1], vec![1, 2]]).unwrap()
    }

    pub fn e6() -> GramMatrix {
        GramMatrix::from_rows(&[
            vec![2, -1, 0, 0, 0, 0],
            vec![-1, 2, -1, 0, 0, 0],
            vec![0, -1, 2, -1, 0, -1],
            vec![0, 0, -1, 2, -1, 0],
            vec![0, 0, 0, -1, 2, 0],
            vec![0, 0, -1, 0, 0, 2],
        ])
        .unwrap()
    }

    pub fn e6s() -> GramMatrix {
        GramMatrix::from_rows(&[
            vec![4, 5, 6, 4, 2, 3],
            vec![5, 10, 12, 8, 4, 6],
            vec![6, 12, 18, 12, 6, 9],
            vec![4, 8, 12, 10, 5, 6],
            vec![2, 4, 6, 5, 4, 3],
            vec![3, 6, 9, 6, 3, 6],
        ])
        .unwrap()
    }

    /// Cartan matrix of E8.
    pub fn e8() -> GramMatrix {
        let mut rows = vec![vec![0i64; 8]; 8];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 2;
        }
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (2, 7)] {
            rows[i][j] = -1;
            rows[j][i] = -1;
        }
        GramMatrix::from_rows(&rows).unwrap()
    }

    /// The form of the harmonic theta c4 (half-integral off the diagonal).
    pub fn s4() -> GramMatrix {
        GramMatrix::from_twice(4, vec![2, 0, 3, 0, 0, 2, 0, 3, 3, 0, 6, 0, 0, 3, 0, 6]).unwrap()
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Entry S_ij.
    pub fn entry(&self, i: usize, j: usize) -> Rat {
        Rat::frac(self.twice[i * self.n + j], 2)
    }

    /// x S x^t.
    pub fn quad(&self, x: &[i64]) -> i64 {
        let mut s = 0;
        for i in 0..self.n {
            s += self.twice[i * self.n + i] / 2 * x[i] * x[i];
            for j in i + 1..self.n {
                s += self.twice[i * self.n + j] * x[i] * x[j];
            }
        }
        s
    }

    /// 2 x S y^t.
    pub fn bil2(&self, x: &[i64], y: &[i64]) -> i64 {
        let mut s = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.twice[i * self.n + j] * x[i] * y[j];
            }
        }
        s
    }

    fn rat_matrix(&self) -> Vec<Vec<Rat>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }

    fn minor(&self, k: usize) -> Rat {
        let m: Vec<Vec<Rat>> = self.rat_matrix().into_iter().take(k).map(|r| r.into_iter().take(k).collect()).collect();
        rat_det(m)
    }

    pub fn det(&self) -> Rat {
        self.minor(self.n)
    }

    pub fn inverse(&self) -> Vec<Vec<Rat>> {
        rat_inverse(self.rat_matrix()).expect("positive definite")
    }

    /// All x with x S x^t ≤ bound (Fincke–Pohst with exact final filtering).
    pub fn short_vectors(&self, bound: i64) -> Vec<Vec<i64>> {
        let n = self.n;
        // q[i][i] = diagonal, q[i][j] (j > i) = Gram–Schmidt coefficients
        let mut q = vec![vec![0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                q[i][j] = self.twice[i * n + j] as f64 / 2.0;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                q[j][i] = q[i][j];
                q[i][j] /= q[i][i];
            }
            for k in i + 1..n {
                for l in k..n {
                    q[k][l] -= q[k][i] * q[i][l];
                }
            }
        }
        let mut out = Vec::new();
        let mut x = vec![0i64; n];
        self.fp_rec(&q, n, bound as f64 + 1e-6, &mut x, bound, &mut out);
        out
    }

    fn fp_rec(&self, q: &[Vec<f64>], i: usize, rem: f64, x: &mut Vec<i64>, bound: i64, out: &mut Vec<Vec<i64>>) {
        if i == 0 {
            if self.quad(x) <= bound {
                out.push(x.clone());
            }
            return;
        }
        let i = i - 1;
        let n = self.n;
        let center: f64 = -(i + 1..n).map(|j| q[i][j] * x[j] as f64).sum::<f64>();
        let rad = (rem.max(0.0) / q[i][i]).sqrt() + 1e-7;
        let lo = (center - rad).ceil() as i64;
        let hi = (center + rad).floor() as i64;
        for v in lo..=hi {
            x[i] = v;
            let t = v as f64 - center;
            let r = rem - q[i][i] * t * t;
            if r < -1e-6 {
                continue;
            }
            self.fp_rec(q, i, r, x, bound, out);
        }
        x[i] = 0;
    }
}

fn rat_det(mut m: Vec<Vec<Rat>>) -> Rat {
    let n = m.len();
    let mut det = Rat::ONE;
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Rat::ZERO;
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let piv = m[c][c].clone();
        det = &det * &piv;
        let inv = piv.inv().unwrap();
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] * &inv;
            for k in c..n {
                let t = &f * &m[c][k];
                m[r][k] = &m[r][k] - &t;
            }
        }
    }
    det
}

pub(crate) fn rat_inverse(m: Vec<Vec<Rat>>) -> Result<Vec<Vec<Rat>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rat>> = m
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.extend((0..n).map(|j| if i == j { Rat::ONE } else { Rat::ZERO }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero()).ok_or(Error::DivisionByZero)?;
        a.swap(p, c);
        let inv = a[c][c].inv()?;
        for k in 0..2 * n {
            a[c][k] = &a[c][k] * &inv;
        }
        for r in 0..n {
            if r == c || a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone();
            for k in 0..2 * n {
                let t = &f * &a[c][k];
                a[r][k] = &a[r][k] - &t;
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// θ_S(τ/scale) by direct enumeration: Σ e(Tr(pSp^t τ)/(2·scale)), p an n×m integral matrix.
pub fn theta_lattice(s: &GramMatrix, degree: u8, scale: u32, n: u32) -> Result<FourierSeries> {
    if !(degree == 1 || degree == 2) {
        return Err(Error::Config("degree must be 1 or 2".into()));
    }
    if !(scale == 1 || scale == 3) {
        return Err(Error::Config("scale must be 1 or 3".into()));
    }
    let denom = if scale == 1 { 2 } else { 24 };
    let f = (denom / (2 * scale)) as i64; // key = value·f
    let bound = (2 * scale * n) as i64;
    let vs = s.short_vectors(bound);
    let mut out = FourierSeries::zero(denom, n)?;
    let one = CycRat::one();
    if degree == 1 {
        for x in &vs {
            out.add_term(ExpKey::new((s.quad(x) * f) as i32, 0, 0), one.clone());
        }
    } else {
        let norms: Vec<i64> = vs.iter().map(|x| s.quad(x)).collect();
        for (x, qx) in vs.iter().zip(&norms) {
            for (y, qy) in vs.iter().zip(&norms) {
                let key = ExpKey::new((qx * f) as i32, (s.bil2(x, y) * f) as i32, (qy * f) as i32);
                out.add_term(key, one.clone());
            }
        }
    }
    out.weight = Some(Rat::frac(s.size() as i64, 2));
    Ok(out)
}

/// Lattices with a fast theta evaluation through A2 gluing.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lattice {
    A2,
    E6,
    E6s,
    E8,
}

impl Lattice {
    pub const ALL: [Lattice; 4] = [Lattice::A2, Lattice::E6, Lattice::E6s, Lattice::E8];

    pub fn gram(self) -> GramMatrix {
        match self {
            Lattice::A2 => GramMatrix::a2(),
            Lattice::E6 => GramMatrix::e6(),
            Lattice::E6s => GramMatrix::e6s(),
            Lattice::E8 => GramMatrix::e8(),
        }
    }

    pub fn rank(self) -> usize {
        match self {
            Lattice::A2 => 2,
            Lattice::E6 | Lattice::E6s => 6,
            Lattice::E8 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lattice::A2 => "A2",
            Lattice::E6 => "E6",
            Lattice::E6s => "E6s",
            Lattice::E8 => "E8",
        }
    }

    /// θ_L|[J] = constant · θ_{L'}(τ/scale), as (constant, L', scale).
    pub fn slash_j(self) -> (CycRat, Lattice, u32) {
        match self {
            Lattice::A2 => (CycRat::frac(-1, 3), Lattice::A2, 3),
            Lattice::E6 => (CycRat::frac(-1, 3), Lattice::E6s, 3),
            Lattice::E6s => (CycRat::frac(-1, 243), Lattice::E6, 3),
            Lattice::E8 => (CycRat::one(), Lattice::E8, 1),
        }
    }

    /// Glue code over F3 describing L (or its rescaled dual) as an overlattice of A2^r,
    /// together with the multiplier λ such that θ_L(τ) = θ_glue(λτ).
    fn glue(self) -> (Vec<Vec<u8>>, u32) {
        match self {
            Lattice::A2 => (vec![vec![0]], 1),
            Lattice::E6 => ((0..3).map(|g| vec![g, g, g]).collect(), 1),
            Lattice::E6s => {
                let mut code = Vec::new();
                for a in 0..3u8 {
                    for b in 0..3u8 {
                        code.push(vec![a, b, (6 - a - b) % 3]);
                    }
                }
                (code, 3)
            }
            Lattice::E8 => {
                let mut code = Vec::new();
                for a in 0..3u8 {
                    for b in 0..3u8 {
                        // tetracode spanned by (0,1,1,1) and (1,0,1,2)
                        code.push(vec![b, a, (a + b) % 3, (a + 2 * b) % 3]);
                    }
                }
                (code, 1)
            }
        }
    }
}

/// Vectors u = 3x for x in the coset A2 + g·w, w = (2, -1)/3, with (u1² + u1u2 + u2²)/3 ≤ 3·t.
fn a2_coset(g: u8, t: u32) -> Vec<(i64, i64)> {
    let lim = 9 * t as i64;
    let r = isqrt(4 * lim / 3) + 2;
    let (g1, g2) = ((2 * g as i64) % 3, (3 - g as i64) % 3);
    let mut out = Vec::new();
    for u1 in -r..=r {
        if (u1 - g1).rem_euclid(3) != 0 {
            continue;
        }
        for u2 in -r..=r {
            if (u2 - g2).rem_euclid(3) != 0 {
                continue;
            }
            if u1 * u1 + u1 * u2 + u2 * u2 <= lim {
                out.push((u1, u2));
            }
        }
    }
    out
}

fn a2n(u: (i64, i64)) -> i64 {
    (u.0 * u.0 + u.0 * u.1 + u.1 * u.1) / 3
}

fn a2b(u: (i64, i64), v: (i64, i64)) -> i64 {
    (2 * u.0 * v.0 + u.0 * v.1 + u.1 * v.0 + 2 * u.1 * v.1) / 3
}

/// Degree-1 coset theta Σ_{x ∈ A2 + g·w} e(Q(x)τ/2), denominator 3.
fn a2_coset_theta1(g: u8, t: u32) -> FourierSeries {
    let mut s = FourierSeries::zero(3, t).unwrap();
    for u in a2_coset(g, t) {
        s.add_term(ExpKey::new(a2n(u) as i32, 0, 0), CycRat::one());
    }
    s
}

/// Degree-2 coset theta for the pair of classes (g, h), denominator 3.
fn a2_coset_theta2(g: u8, h: u8, t: u32) -> FourierSeries {
    let xs = a2_coset(g, t);
    let ys = a2_coset(h, t);
    let mut acc: HashMap<ExpKey, i64> = HashMap::new();
    for &x in &xs {
        for &y in &ys {
            *acc.entry(ExpKey::new(a2n(x) as i32, a2b(x, y) as i32, a2n(y) as i32)).or_default() += 1;
        }
    }
    FourierSeries::from_terms(3, t, acc.into_iter().map(|(k, v)| (k, CycRat::int(v)))).unwrap()
}

/// Multiply exponents by p/q, keeping exactness for keys up to the new truncation.
pub fn rescale(f: &FourierSeries, p: u32, q: u32, new_trunc: u32) -> Result<FourierSeries> {
    // new exponent = e·p/q over denominator D·q, then reduce
    if (f.trunc() as u64) * (p as u64) < (new_trunc as u64) * (q as u64) {
        return Err(Error::TruncationExceeded { requested: new_trunc, available: f.trunc() * p / q });
    }
    let big_d = f.denom() * q;
    let lim = (new_trunc * big_d) as i64;
    let mut g = big_d as i64;
    let mut terms = Vec::new();
    for (k, v) in f.terms() {
        let (a, b, c) = (k.a as i64 * p as i64, k.b as i64 * p as i64, k.c as i64 * p as i64);
        if a > lim || c > lim {
            continue;
        }
        g = num_integer::gcd(num_integer::gcd(num_integer::gcd(g, a), b), c);
        terms.push(((a, b, c), v.clone()));
    }
    let g = g.max(1);
    let d = big_d as i64 / g;
    if 24 % d != 0 {
        return Err(Error::UnsupportedConductor(d));
    }
    let out = FourierSeries::from_terms(
        d as u32,
        new_trunc,
        terms.into_iter().map(|((a, b, c), v)| (ExpKey::new((a / g) as i32, (b / g) as i32, (c / g) as i32), v)),
    )?;
    Ok(out.with_weight(f.weight.clone()))
}

fn canon_pair(g: u8, h: u8) -> (u8, u8) {
    let neg = ((3 - g) % 3, (3 - h) % 3);
    (g, h).min(neg)
}

/// θ_L(τ/scale) via the A2 glue decomposition. Output denominator 2 (scale 1) or 24 (scale 3).
pub fn lattice_theta(l: Lattice, degree: u8, scale: u32, n: u32) -> Result<FourierSeries> {
    if !(scale == 1 || scale == 3) {
        return Err(Error::Config("scale must be 1 or 3".into()));
    }
    let (code, lambda) = l.glue();
    // θ_L(τ/scale) = θ_glue(λτ/scale); the glue series is needed up to n·scale/λ
    let base_t = (n * scale).div_ceil(lambda);
    let comps = code[0].len();
    let base = if degree == 1 {
        let parts: Vec<FourierSeries> = (0..3).map(|g| a2_coset_theta1(g, base_t)).collect();
        let mut counts: HashMap<Vec<u8>, i64> = HashMap::new();
        for c in &code {
            let mut key = c.clone();
            key.sort();
            *counts.entry(key).or_default() += 1;
        }
        let mut acc = FourierSeries::zero(3, base_t)?;
        for (key, cnt) in counts {
            let mut prod = FourierSeries::constant(CycRat::one(), base_t);
            for &g in &key {
                prod = prod.mul(&parts[g as usize])?;
            }
            acc = acc.add(&prod.scale(&CycRat::int(cnt)))?;
        }
        acc
    } else if degree == 2 {
        let mut parts: HashMap<(u8, u8), FourierSeries> = HashMap::new();
        let mut counts: HashMap<Vec<(u8, u8)>, i64> = HashMap::new();
        for c in &code {
            for d in &code {
                let mut key: Vec<(u8, u8)> = (0..comps).map(|i| canon_pair(c[i], d[i])).collect();
                key.sort();
                *counts.entry(key).or_default() += 1;
            }
        }
        let mut keys: Vec<_> = counts.into_iter().collect();
        keys.sort();
        let mut prefix: HashMap<Vec<(u8, u8)>, FourierSeries> = HashMap::new();
        let mut acc = FourierSeries::zero(3, base_t)?;
        for (key, cnt) in keys {
            for &(g, h) in &key {
                parts.entry((g, h)).or_insert_with(|| a2_coset_theta2(g, h, base_t));
            }
            // reuse products of common prefixes
            let mut prod = FourierSeries::constant(CycRat::one(), base_t);
            let mut start = 0;
            for len in (1..key.len()).rev() {
                if let Some(p) = prefix.get(&key[..len]) {
                    prod = p.clone();
                    start = len;
                    break;
                }
            }
            for i in start..key.len() {
                prod = prod.mul(&parts[&key[i]])?;
                if i + 1 < key.len() {
                    prefix.entry(key[..=i].to_vec()).or_insert_with(|| prod.clone());
                }
            }
            acc = acc.add(&prod.scale(&CycRat::int(cnt)))?;
        }
        acc
    } else {
        return Err(Error::Config("degree must be 1 or 2".into()));
    };
    let r = rescale(&base, lambda, scale, n)?;
    let target = if scale == 1 { 2 } else { 24 };
    let out = if target % r.denom() == 0 { r.lift(target)? } else { r };
    Ok(out
        .with_weight(Some(Rat::frac(l.rank() as i64, 2)))
        .with_label(format!("theta_{}_deg{degree}{}", l.name(), if scale == 3 { "_tau3" } else { "" })))
}

/// θ_S|[J] = constant · θ_{S'}(τ/scale) for an even Gram matrix S with S^{-1} = S'/scale.
pub fn slash_lattice_j(s: &GramMatrix) -> Result<(CycRat, GramMatrix, u32)> {
    let inv = s.inverse();
    let n = s.size();
    for scale in [1u32, 2, 3, 4, 6, 12] {
        let sc = Rat::int(scale as i64);
        let entries: Vec<Rat> = inv.iter().flat_map(|r| r.iter().map(|x| x * &sc)).collect();
        if !entries.iter().all(Rat::is_integer) {
            continue;
        }
        let ints: Vec<i64> = entries.iter().map(|x| x.to_i64().unwrap()).collect();
        if (0..n).any(|i| ints[i * n + i] % 2 != 0) {
            continue;
        }
        let twice = ints.iter().map(|x| 2 * x).collect();
        let sp = GramMatrix::from_twice(n, twice)?;
        // (-i)^{nm/2} det(S)^{-n/2} with degree n = 2: (-1)^{m/2}/det S, m = rank
        if n % 2 != 0 {
            return Err(Error::Config("odd rank lattice has non-integral weight".into()));
        }
        let sign = if (n / 2) % 2 == 0 { 1 } else { -1 };
        let c = Rat::int(sign).div(&s.det())?;
        return Ok((CycRat::Rat(c), sp, scale));
    }
    Err(Error::Config("inverse Gram matrix has no even integral rescaling".into()))
}

/// Harmonic theta c4 = Σ (c² - d²) e(xS4x^t τ11 + 2xS4y^t τ12 + yS4y^t τ22), denominator 1.
pub fn theta_harmonic_c4(n: u32) -> Result<FourierSeries> {
    let s4 = GramMatrix::s4();
    let vs = s4.short_vectors(n as i64);
    let mut acc: HashMap<ExpKey, i64> = HashMap::new();
    for x in &vs {
        let qx = s4.quad(x);
        for y in &vs {
            let c = (x[0] * y[2] - x[2] * y[0]) + (x[1] * y[3] - y[1] * x[3]);
            let d = (x[0] * y[3] - x[3] * y[0]) + (x[2] * y[1] - x[1] * y[2]) + (x[0] * y[1] - y[0] * x[1]);
            let w = c * c - d * d;
            if w == 0 {
                continue;
            }
            *acc.entry(ExpKey::new(qx as i32, s4.bil2(x, y) as i32, s4.quad(y) as i32)).or_default() += w;
        }
    }
    let s = FourierSeries::from_terms(1, n, acc.into_iter().map(|(k, v)| (k, CycRat::int(v))))?;
    Ok(s.with_weight(Some(Rat::int(4))).with_label("c4"))
}

/// Second-kind theta ϑ_ν(τ, 0) with its normalized τ-derivatives.
#[derive(Clone, Debug)]
pub struct SecondKind {
    pub value: FourierSeries,
    pub d11: FourierSeries,
    pub d12: FourierSeries,
    pub d22: FourierSeries,
}

/// ϑ_ν(τ, 0) = Σ_p e((p + ν/2)τ(p + ν/2)^t), denominator 4; derivatives as weighted sums.
pub fn theta_second_kind(nu: [u8; 2], n: u32) -> Result<SecondKind> {
    if nu.iter().any(|&v| v > 1) {
        return Err(Error::InvalidCharacteristic(format!("{nu:?}")));
    }
    let bound = 4 * n as i64;
    let r = isqrt(bound) + 2;
    let mut parts: [FourierSeries; 4] = std::array::from_fn(|_| FourierSeries::zero(4, n).unwrap());
    for u1 in (-r..=r).filter(|u| (u - nu[0] as i64).rem_euclid(2) == 0 && u * u <= bound) {
        for u2 in (-r..=r).filter(|u| (u - nu[1] as i64).rem_euclid(2) == 0 && u * u <= bound) {
            let key = ExpKey::new((u1 * u1) as i32, (2 * u1 * u2) as i32, (u2 * u2) as i32);
            parts[0].add_term(key, CycRat::one());
            parts[1].add_term(key, CycRat::frac(u1 * u1, 4));
            parts[2].add_term(key, CycRat::frac(u1 * u2, 2));
            parts[3].add_term(key, CycRat::frac(u2 * u2, 4));
        }
    }
    let [value, d11, d12, d22] = parts;
    Ok(SecondKind { value: value.with_label(format!("vartheta_{}{}", nu[0], nu[1])), d11, d12, d22 })
}

/// Δ = q Π (1 - q^n)^24 in the τ11 slot, denominator 1.
pub fn delta_series(n: u32) -> FourierSeries {
    let len = n as usize + 1;
    let mut p = vec![Rat::ZERO; len];
    p[0] = Rat::ONE;
    for k in 1..len {
        for _ in 0..24 {
            for i in (k..len).rev() {
                let t = p[i - k].clone();
                p[i] = &p[i] - &t;
            }
        }
    }
    let mut s = FourierSeries::zero(1, n).unwrap();
    for (i, c) in p.into_iter().enumerate() {
        if i + 1 < len {
            s.add_term(ExpKey::new(i as i32 + 1, 0, 0), CycRat::Rat(c));
        }
    }
    s.with_weight(Some(Rat::int(12))).with_label("delta")
}

/// (θ0, θ1): θ0 = Σ q^{x²-xy+y²} and θ1 = Σ q^{x²-xy+y²+x-y+1/3}, denominator 3.
pub fn gamma3_thetas(n: u32) -> (FourierSeries, FourierSeries) {
    let t0 = a2_coset_theta1(0, n).with_weight(Some(Rat::ONE)).with_label("gamma3_theta0");
    let t1 = a2_coset_theta1(1, n).with_weight(Some(Rat::ONE)).with_label("gamma3_theta1");
    (t0, t1)
}

type C2 = [[Complex64; 2]; 2];

fn two_pi_i() -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI)
}

/// Smallest eigenvalue of the imaginary part of a symmetric complex 2×2 matrix.
fn im_min_eig(tau: &C2) -> f64 {
    let (a, b, d) = (tau[0][0].im, tau[0][1].im, tau[1][1].im);
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    (tr - disc) / 2.0
}

/// M·τ = (Aτ + B)(Cτ + D)^{-1}.
pub fn act(m: &SymplecticMat, tau: &C2) -> C2 {
    let (a, b, c, d) = m.blocks_c();
    let num = c2_add(&c2_mul(&a, tau), &b);
    let den = c2_add(&c2_mul(&c, tau), &d);
    c2_mul(&num, &c2_inv(&den))
}

fn c2_add(x: &C2, y: &C2) -> C2 {
    [[x[0][0] + y[0][0], x[0][1] + y[0][1]], [x[1][0] + y[1][0], x[1][1] + y[1][1]]]
}

/// Direct summation of the defining series of θ_m (degree 2) at the point M·τ.
pub fn theta_defsum_eval(m: &ThetaChar, tau: &C2, mat: &SymplecticMat) -> Result<Complex64> {
    if m.degree() != 2 {
        return Err(Error::InvalidCharacteristic(m.to_string()));
    }
    let z = act(mat, tau);
    let lam = im_min_eig(&z);
    if lam <= 0.0 {
        return Err(Error::Config("point is not in the Siegel upper half space".into()));
    }
    // terms decay like exp(-π λ |x|²); stop once this is far below double precision
    let r = ((60.0 / (std::f64::consts::PI * lam)).sqrt() as i64) + 3;
    let mi = m.to_ints();
    let mut s = Complex64::new(0.0, 0.0);
    for p1 in -r..=r {
        for p2 in -r..=r {
            let x1 = p1 as f64 + mi[0] as f64 / 2.0;
            let x2 = p2 as f64 + mi[1] as f64 / 2.0;
            let q = z[0][0] * (x1 * x1) + z[0][1] * (2.0 * x1 * x2) + z[1][1] * (x2 * x2);
            let lin = (x1 * mi[2] as f64 + x2 * mi[3] as f64) / 2.0;
            s += (two_pi_i() * (q * 0.5 + lin)).exp();
        }
    }
    Ok(s)
}

/// Numerical θ_L(M·τ) through the A2 coset decomposition.
pub fn lattice_defsum_eval(l: Lattice, tau: &C2, mat: &SymplecticMat) -> Result<Complex64> {
    let z = act(mat, tau);
    let lam = im_min_eig(&z);
    if lam <= 0.0 {
        return Err(Error::Config("point is not in the Siegel upper half space".into()));
    }
    let (code, lambda) = l.glue();
    let lamf = lambda as f64;
    // Q(x) ≥ 2/3 |u|²/... ; bound via exp(-π λ_glue Q) < 1e-26
    let qmax = 60.0 / (std::f64::consts::PI * lam * lamf);
    let t = (qmax / 2.0).ceil() as u32 + 1;
    let mut pair = HashMap::new();
    for g in 0..3u8 {
        for h in 0..3u8 {
            let xs = a2_coset(g, t);
            let ys = a2_coset(h, t);
            let mut s = Complex64::new(0.0, 0.0);
            for &x in &xs {
                for &y in &ys {
                    let e = (z[0][0] * a2n(x) as f64 + z[0][1] * a2b(x, y) as f64 + z[1][1] * a2n(y) as f64) * (lamf / 3.0);
                    s += (two_pi_i() * e).exp();
                }
            }
            pair.insert((g, h), s);
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for c in &code {
        for d in &code {
            let mut p = Complex64::new(1.0, 0.0);
            for i in 0..c.len() {
                p *= pair[&(c[i], d[i])];
            }
            total += p;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(series: &FourierSeries, e: i64) -> CycRat {
        // one-variable coefficient of q^e
        series.coeff(&Rat::int(e), &Rat::ZERO, &Rat::ZERO)
    }

    #[test]
    fn odd_thetas_vanish() {
        for m in ThetaChar::all(2) {
            let s = theta_const(&m, 3).unwrap();
            assert_eq!(s.is_zero(), !m.is_even(), "{m}");
        }
        assert_eq!(ThetaChar::even(2).len(), 10);
    }

    #[test]
    fn theta0000_small_coefficients() {
        let s = theta_const(&"0000".parse().unwrap(), 2).unwrap();
        assert_eq!(s.coeff(&Rat::ZERO, &Rat::ZERO, &Rat::ZERO), CycRat::one());
        assert_eq!(s.coeff(&Rat::frac(1, 2), &Rat::ZERO, &Rat::ZERO), CycRat::int(2));
        assert_eq!(s.coeff(&Rat::frac(1, 2), &Rat::ONE, &Rat::frac(1, 2)), CycRat::int(2));
    }

    #[test]
    fn sign_rule_for_shifted_characteristics() {
        for m in ThetaChar::all(2) {
            let base = theta_const(&m, 2).unwrap();
            let mi = m.to_ints();
            for shift in [[1i64, 0, 0, 1], [0, 1, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1]] {
                let mm: Vec<i64> = mi.iter().zip(shift).map(|(a, s)| a + 2 * s).collect();
                let t = theta_const_int(2, &mm, 2).unwrap();
                let sign = (mi[0] * shift[2] + mi[1] * shift[3]) % 2;
                let expect = if sign == 0 { base.clone() } else { base.neg() };
                assert!(t.equal_upto(&expect, 2).unwrap().is_none());
            }
        }
    }

    #[test]
    fn a2_and_e8_small_coefficients() {
        let a2 = theta_lattice(&GramMatrix::a2(), 1, 1, 4).unwrap();
        let want = [1, 6, 0, 6, 6];
        for (e, w) in want.iter().enumerate() {
            assert_eq!(q(&a2, e as i64), CycRat::int(*w));
        }
        let e8 = lattice_theta(Lattice::E8, 1, 1, 2).unwrap();
        assert_eq!(q(&e8, 0), CycRat::one());
        assert_eq!(q(&e8, 1), CycRat::int(240));
        assert_eq!(q(&e8, 2), CycRat::int(2160));
        let e6s = lattice_theta(Lattice::E6s, 1, 1, 2).unwrap();
        assert_eq!(q(&e6s, 1), CycRat::zero());
        assert_eq!(q(&e6s, 2), CycRat::int(54));
    }

    #[test]
    fn glue_matches_direct_enumeration() {
        for l in [Lattice::A2, Lattice::E6, Lattice::E6s] {
            let g = l.gram();
            for (deg, scale, n) in [(1, 1, 4), (1, 3, 3), (2, 1, 1), (2, 3, 1)] {
                let direct = theta_lattice(&g, deg, scale, n).unwrap();
                let glued = lattice_theta(l, deg, scale, n).unwrap();
                assert!(direct.equal_upto(&glued, n).unwrap().is_none(), "{l:?} {deg} {scale}");
            }
        }
        let direct = theta_lattice(&GramMatrix::e8(), 1, 1, 3).unwrap();
        assert!(direct.equal_upto(&lattice_theta(Lattice::E8, 1, 1, 3).unwrap(), 3).unwrap().is_none());
    }

    #[test]
    fn inverse_formula_constants() {
        let (c, sp, s) = slash_lattice_j(&GramMatrix::a2()).unwrap();
        assert_eq!((c, s), (CycRat::frac(-1, 3), 3));
        assert_eq!(sp.det(), Rat::int(3));
        let (c, sp, s) = slash_lattice_j(&GramMatrix::e6()).unwrap();
        assert_eq!((c, s), (CycRat::frac(-1, 3), 3));
        assert_eq!(sp, GramMatrix::e6s());
        let (c, sp, s) = slash_lattice_j(&GramMatrix::e6s()).unwrap();
        assert_eq!((c, s), (CycRat::frac(-1, 243), 3));
        assert_eq!(sp, GramMatrix::e6());
        let (c, _, s) = slash_lattice_j(&GramMatrix::e8()).unwrap();
        assert_eq!((c, s), (CycRat::one(), 1));
        for l in Lattice::ALL {
            let (c, _, s) = l.slash_j();
            let (c2, _, s2) = slash_lattice_j(&l.gram()).unwrap();
            assert_eq!((c, s), (c2, s2));
        }
    }

    #[test]
    fn e6s_is_three_times_inverse_e6() {
        let inv = GramMatrix::e6().inverse();
        let e6s = GramMatrix::e6s();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(&inv[i][j] * &Rat::int(3), e6s.entry(i, j));
            }
        }
    }

    #[test]
    fn non_positive_definite_rejected() {
        assert!(GramMatrix::from_rows(&[vec![2, 3], vec![3, 2]]).is_err());
    }

    #[test]
    fn delta_coefficients() {
        let d = delta_series(5);
        let want = [0, 1, -24, 252, -1472, 4830];
        for (e, w) in want.iter().enumerate() {
            assert_eq!(q(&d, e as i64), CycRat::int(*w));
        }
    }

    #[test]
    fn gamma3_leading_terms() {
        let (t0, t1) = gamma3_thetas(3);
        assert_eq!(q(&t0, 1), CycRat::int(6));
        let third = |e: i64| t1.coeff(&Rat::frac(e, 3), &Rat::ZERO, &Rat::ZERO);
        assert_eq!(third(1), CycRat::int(3));
        assert_eq!(third(4), CycRat::int(3));
        assert_eq!(third(7), CycRat::int(6));
    }

    #[test]
    fn second_kind_derivatives_agree() {
        use crate::series::Deriv;
        for nu in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let t = theta_second_kind(nu, 3).unwrap();
            assert_eq!(t.value.d_partial(Deriv::D11), t.d11.clone().with_weight(None));
            assert_eq!(t.value.d_partial(Deriv::D12), t.d12.clone().with_weight(None));
            assert_eq!(t.value.d_partial(Deriv::D22), t.d22.clone().with_weight(None));
            assert!(t.d12.witt().is_zero());
            assert_eq!(t.value.involution(), t.value);
        }
    }

    #[test]
    fn harmonic_c4_is_cusp_form_on_diagonal() {
        let c4 = theta_harmonic_c4(3).unwrap();
        assert!(!c4.is_zero());
        assert!(c4.witt().is_zero());
        assert!(c4.involution().equal_upto(&c4, 3).unwrap().is_none());
    }

    #[test]
    fn defsum_matches_series_at_identity() {
        let tau = [
            [Complex64::new(0.1, 1.3), Complex64::new(0.05, 0.1)],
            [Complex64::new(0.05, 0.1), Complex64::new(-0.2, 1.7)],
        ];
        let id = SymplecticMat::identity();
        for m in ThetaChar::even(2) {
            let s = theta_const(&m, 8).unwrap().float_eval(tau);
            let d = theta_defsum_eval(&m, &tau, &id).unwrap();
            assert!((s - d).norm() < 1e-12, "{m}: {s} vs {d}");
        }
        let s = lattice_theta(Lattice::E6, 2, 1, 5).unwrap().float_eval(tau);
        let d = lattice_defsum_eval(Lattice::E6, &tau, &id).unwrap();
        assert!((s - d).norm() < 1e-9 * s.norm(), "{s} vs {d}");
    }
}
