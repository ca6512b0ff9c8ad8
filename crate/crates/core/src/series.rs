//! Truncated Fourier expansions in e((a·τ11 + b·τ12 + c·τ22)/D).
//!
//! A series with denominator `D` and truncation `N` is exact for every key with
//! `a ≤ N·D` and `c ≤ N·D`; keys outside that box are never stored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use rustc_hash::FxHashMap;
use serde_json::{json, Value};

use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};

/// Exponent triple of e((a·τ11 + b·τ12 + c·τ22)/D). Ordered by (a, c, b).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExpKey {
    pub a: i32,
    pub b: i32,
    pub c: i32,
}

impl ExpKey {
    pub const fn new(a: i32, b: i32, c: i32) -> ExpKey {
        ExpKey { a, b, c }
    }

    fn scaled(self, f: i32) -> ExpKey {
        ExpKey::new(self.a * f, self.b * f, self.c * f)
    }
}

impl Ord for ExpKey {
    fn cmp(&self, o: &ExpKey) -> Ordering {
        (self.a, self.c, self.b).cmp(&(o.a, o.c, o.b))
    }
}

impl PartialOrd for ExpKey {
    fn partial_cmp(&self, o: &ExpKey) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Partial derivative index, normalized so that ∂ij multiplies the coefficient
/// of e(T·τ/D) by the corresponding exponent over D.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Deriv {
    D11,
    D12,
    D22,
}

impl Deriv {
    pub const ALL: [Deriv; 3] = [Deriv::D11, Deriv::D12, Deriv::D22];

    pub fn index(self) -> usize {
        match self {
            Deriv::D11 => 0,
            Deriv::D12 => 1,
            Deriv::D22 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Deriv::D11 => "d11",
            Deriv::D12 => "d12",
            Deriv::D22 => "d22",
        }
    }
}

/// First mismatch found by [`FourierSeries::equal_upto`]. Exponents are rational.
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub exponent: [Rat; 3],
    pub lhs: CycRat,
    pub rhs: CycRat,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "at ({}, {}, {}): {} != {}",
            self.exponent[0], self.exponent[1], self.exponent[2], self.lhs, self.rhs
        )
    }
}

/// Equality ignores `label`.
#[derive(Clone, Debug)]
pub struct FourierSeries {
    denom: u32,
    trunc: u32,
    terms: BTreeMap<ExpKey, CycRat>,
    pub weight: Option<Rat>,
    pub label: Option<String>,
}

impl PartialEq for FourierSeries {
    fn eq(&self, o: &Self) -> bool {
        self.denom == o.denom && self.trunc == o.trunc && self.weight == o.weight && self.terms == o.terms
    }
}

fn check_denom(d: u32) -> Result<()> {
    if d == 0 || 24 % d != 0 {
        return Err(Error::UnsupportedConductor(d as i64));
    }
    Ok(())
}

fn lcm_denom(a: u32, b: u32) -> Result<u32> {
    let l = a.lcm(&b);
    check_denom(l)?;
    Ok(l)
}

impl FourierSeries {
    pub fn zero(denom: u32, trunc: u32) -> Result<FourierSeries> {
        check_denom(denom)?;
        Ok(FourierSeries { denom, trunc, terms: BTreeMap::new(), weight: None, label: None })
    }

    pub fn constant(c: CycRat, trunc: u32) -> FourierSeries {
        let mut s = FourierSeries::zero(1, trunc).expect("denominator 1");
        s.add_term(ExpKey::new(0, 0, 0), c);
        s
    }

    /// Build from keys at denominator `denom`; keys outside the box are discarded.
    pub fn from_terms<I>(denom: u32, trunc: u32, terms: I) -> Result<FourierSeries>
    where
        I: IntoIterator<Item = (ExpKey, CycRat)>,
    {
        let mut s = FourierSeries::zero(denom, trunc)?;
        for (k, v) in terms {
            s.add_term(k, v);
        }
        Ok(s)
    }

    pub fn with_weight(mut self, w: Option<Rat>) -> Self {
        self.weight = w;
        self
    }

    pub fn with_label(mut self, l: impl Into<String>) -> Self {
        self.label = Some(l.into());
        self
    }

    pub fn denom(&self) -> u32 {
        self.denom
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExpKey, &CycRat)> {
        self.terms.iter()
    }

    fn bound(&self) -> i32 {
        (self.trunc * self.denom) as i32
    }

    fn in_box(&self, k: &ExpKey) -> bool {
        let n = self.bound();
        k.a <= n && k.c <= n
    }

    /// Accumulate a term; zero results are removed and out-of-box keys ignored.
    pub fn add_term(&mut self, k: ExpKey, v: CycRat) {
        if v.is_zero() || !self.in_box(&k) {
            return;
        }
        match self.terms.entry(k) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(v);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &v;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Coefficient at key (a, b, c) relative to this series' denominator.
    pub fn get(&self, a: i32, b: i32, c: i32) -> CycRat {
        self.terms.get(&ExpKey::new(a, b, c)).cloned().unwrap_or_default()
    }

    /// Coefficient of e(a·τ11 + b·τ12 + c·τ22) for rational exponents.
    pub fn coeff(&self, a: &Rat, b: &Rat, c: &Rat) -> CycRat {
        let d = Rat::int(self.denom as i64);
        let conv = |x: &Rat| -> Option<i32> { (x * &d).to_i64().and_then(|v| i32::try_from(v).ok()) };
        match (conv(a), conv(b), conv(c)) {
            (Some(a), Some(b), Some(c)) => self.get(a, b, c),
            _ => CycRat::zero(),
        }
    }

    /// Re-express over a multiple of the current denominator.
    pub fn lift(&self, new_denom: u32) -> Result<FourierSeries> {
        check_denom(new_denom)?;
        if new_denom % self.denom != 0 {
            return Err(Error::Internal(format!("cannot lift denominator {} to {new_denom}", self.denom)));
        }
        if new_denom == self.denom {
            return Ok(self.clone());
        }
        let f = (new_denom / self.denom) as i32;
        Ok(FourierSeries {
            denom: new_denom,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(k, v)| (k.scaled(f), v.clone())).collect(),
            weight: self.weight.clone(),
            label: self.label.clone(),
        })
    }

    /// Smallest denominator representing the same series (at least 1).
    pub fn reduce_denom(&self) -> FourierSeries {
        let mut g = self.denom as i32;
        for k in self.terms.keys() {
            g = g.gcd(&k.a).gcd(&k.b).gcd(&k.c);
            if g == 1 {
                return self.clone();
            }
        }
        let g = g.max(1);
        FourierSeries {
            denom: self.denom / g as u32,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(k, v)| (ExpKey::new(k.a / g, k.b / g, k.c / g), v.clone())).collect(),
            weight: self.weight.clone(),
            label: self.label.clone(),
        }
    }

    /// Restrict to a smaller truncation.
    pub fn truncate(&self, n: u32) -> Result<FourierSeries> {
        if n > self.trunc {
            return Err(Error::TruncationExceeded { requested: n, available: self.trunc });
        }
        let bound = (n * self.denom) as i32;
        Ok(FourierSeries {
            denom: self.denom,
            trunc: n,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.a <= bound && k.c <= bound)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            weight: self.weight.clone(),
            label: self.label.clone(),
        })
    }

    fn common(&self, o: &FourierSeries) -> Result<(FourierSeries, FourierSeries)> {
        let d = lcm_denom(self.denom, o.denom)?;
        let n = self.trunc.min(o.trunc);
        Ok((self.lift(d)?.truncate(n)?, o.lift(d)?.truncate(n)?))
    }

    fn combine_weight(a: &Option<Rat>, b: &Option<Rat>) -> Option<Rat> {
        match (a, b) {
            (Some(x), Some(y)) if x == y => Some(x.clone()),
            _ => None,
        }
    }

    pub fn add(&self, o: &FourierSeries) -> Result<FourierSeries> {
        let (mut x, y) = self.common(o)?;
        for (k, v) in y.terms {
            x.add_term(k, v);
        }
        x.weight = Self::combine_weight(&self.weight, &o.weight);
        x.label = None;
        Ok(x)
    }

    pub fn sub(&self, o: &FourierSeries) -> Result<FourierSeries> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> FourierSeries {
        FourierSeries {
            denom: self.denom,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(k, v)| (*k, -v)).collect(),
            weight: self.weight.clone(),
            label: None,
        }
    }

    pub fn scale(&self, c: &CycRat) -> FourierSeries {
        let terms = if c.is_zero() {
            BTreeMap::new()
        } else {
            self.terms.iter().map(|(k, v)| (*k, v * c)).collect()
        };
        FourierSeries { denom: self.denom, trunc: self.trunc, terms, weight: self.weight.clone(), label: None }
    }

    pub fn scale_rat(&self, r: &Rat) -> FourierSeries {
        self.scale(&CycRat::Rat(r.clone()))
    }

    pub fn mul(&self, o: &FourierSeries) -> Result<FourierSeries> {
        let d = lcm_denom(self.denom, o.denom)?;
        let n = self.trunc.min(o.trunc);
        let bound = (n * d) as i32;
        let fx = (d / self.denom) as i32;
        let fy = (d / o.denom) as i32;
        let xs: Vec<(ExpKey, &CycRat)> =
            self.terms.iter().map(|(k, v)| (k.scaled(fx), v)).filter(|(k, _)| k.a <= bound && k.c <= bound).collect();
        let ys: Vec<(ExpKey, &CycRat)> =
            o.terms.iter().map(|(k, v)| (k.scaled(fy), v)).filter(|(k, _)| k.a <= bound && k.c <= bound).collect();
        let mut acc: FxHashMap<ExpKey, CycRat> = FxHashMap::default();
        // keys are sorted by a (BTreeMap order is (a, c, b)), so the inner loop can stop early
        for (kx, vx) in &xs {
            for (ky, vy) in &ys {
                let a = kx.a + ky.a;
                if a > bound {
                    break;
                }
                let c = kx.c + ky.c;
                if c > bound {
                    continue;
                }
                let key = ExpKey::new(a, kx.b + ky.b, c);
                let p = *vx * *vy;
                match acc.get_mut(&key) {
                    Some(slot) => *slot += &p,
                    None => {
                        acc.insert(key, p);
                    }
                }
            }
        }
        let terms: BTreeMap<ExpKey, CycRat> = acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        let weight = match (&self.weight, &o.weight) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Ok(FourierSeries { denom: d, trunc: n, terms, weight, label: None })
    }

    pub fn pow(&self, e: u32) -> Result<FourierSeries> {
        let mut acc = FourierSeries::constant(CycRat::one(), self.trunc);
        acc.weight = self.weight.as_ref().map(|_| Rat::ZERO);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Normalized partial derivative ∂ij. The weight tag is dropped.
    pub fn d_partial(&self, ij: Deriv) -> FourierSeries {
        self.d_multi([
            (ij == Deriv::D11) as u8,
            (ij == Deriv::D12) as u8,
            (ij == Deriv::D22) as u8,
        ])
    }

    /// ∂11^α0 ∂12^α1 ∂22^α2.
    pub fn d_multi(&self, alpha: [u8; 3]) -> FourierSeries {
        let d = Rat::int(self.denom as i64);
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            let mut f = Rat::ONE;
            for (e, x) in alpha.iter().zip([k.a, k.b, k.c]) {
                if *e > 0 {
                    f = &f * &Rat::new(x as i64, 1).unwrap().div(&d).unwrap().pow(*e as u32);
                }
            }
            if !f.is_zero() {
                terms.insert(*k, v.scale(&f));
            }
        }
        let weight = if alpha == [0, 0, 0] { self.weight.clone() } else { None };
        FourierSeries { denom: self.denom, trunc: self.trunc, terms, weight, label: None }
    }

    /// Restriction to τ12 = 0: sums coefficients over b.
    pub fn witt(&self) -> FourierSeries {
        let mut out = FourierSeries::zero(self.denom, self.trunc).unwrap();
        for (k, v) in &self.terms {
            out.add_term(ExpKey::new(k.a, 0, k.c), v.clone());
        }
        out.weight = self.weight.clone();
        out
    }

    /// Whether the series has no τ12 dependence.
    pub fn is_diagonal(&self) -> bool {
        self.terms.keys().all(|k| k.b == 0)
    }

    /// The involution τ12 ↦ -τ12.
    pub fn involution(&self) -> FourierSeries {
        FourierSeries {
            denom: self.denom,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(k, v)| (ExpKey::new(k.a, -k.b, k.c), v.clone())).collect(),
            weight: self.weight.clone(),
            label: None,
        }
    }

    /// Exchange τ11 and τ22.
    pub fn swap_vars(&self) -> FourierSeries {
        FourierSeries {
            denom: self.denom,
            trunc: self.trunc,
            terms: self.terms.iter().map(|(k, v)| (ExpKey::new(k.c, k.b, k.a), v.clone())).collect(),
            weight: self.weight.clone(),
            label: None,
        }
    }

    /// ((f + If)/2, (f - If)/2).
    pub fn split_types(&self) -> (FourierSeries, FourierSeries) {
        let i = self.involution();
        let half = CycRat::frac(1, 2);
        let plus = self.add(&i).unwrap().scale(&half);
        let minus = self.sub(&i).unwrap().scale(&half);
        (plus.with_weight(self.weight.clone()), minus.with_weight(self.weight.clone()))
    }

    /// f(τ + S) for a symmetric integral S = [[s11, s12], [s12, s22]].
    pub fn translate(&self, s: [[i64; 2]; 2]) -> Result<FourierSeries> {
        if s[0][1] != s[1][0] {
            return Err(Error::Config("translation matrix must be symmetric".into()));
        }
        let d = self.denom as i64;
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            let num = k.a as i64 * s[0][0] + k.b as i64 * s[0][1] + k.c as i64 * s[1][1];
            let phase = CycRat::root_of_unity(num, d)?;
            terms.insert(*k, v * &phase);
        }
        Ok(FourierSeries { denom: self.denom, trunc: self.trunc, terms, weight: self.weight.clone(), label: None })
    }

    /// Compare on the box a, c ≤ N. Returns the first mismatch in key order.
    pub fn equal_upto(&self, o: &FourierSeries, n: u32) -> Result<Option<Mismatch>> {
        let avail = self.trunc.min(o.trunc);
        if n > avail {
            return Err(Error::TruncationExceeded { requested: n, available: avail });
        }
        let diff = self.truncate(n)?.sub(&o.truncate(n)?)?;
        Ok(diff.terms.keys().next().map(|k| {
            let d = Rat::int(diff.denom as i64);
            let x = self.lift(diff.denom).unwrap();
            let y = o.lift(diff.denom).unwrap();
            Mismatch {
                exponent: [k.a, k.b, k.c].map(|t| Rat::int(t as i64).div(&d).unwrap()),
                lhs: x.get(k.a, k.b, k.c),
                rhs: y.get(k.a, k.b, k.c),
            }
        }))
    }

    /// Terms of minimal total degree a + c, as rational exponents.
    pub fn leading_terms(&self) -> Vec<([Rat; 3], CycRat)> {
        let Some(min) = self.terms.keys().map(|k| k.a + k.c).min() else {
            return Vec::new();
        };
        let d = Rat::int(self.denom as i64);
        self.terms
            .iter()
            .filter(|(k, _)| k.a + k.c == min)
            .map(|(k, v)| ([k.a, k.b, k.c].map(|t| Rat::int(t as i64).div(&d).unwrap()), v.clone()))
            .collect()
    }

    /// Numerical value at τ = [[τ11, τ12], [τ12, τ22]].
    pub fn float_eval(&self, tau: [[Complex64; 2]; 2]) -> Complex64 {
        let d = self.denom as f64;
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let mut z = Complex64::new(0.0, 0.0);
        for (k, v) in &self.terms {
            let arg = (tau[0][0] * k.a as f64 + tau[0][1] * k.b as f64 + tau[1][1] * k.c as f64) / d;
            z += v.to_complex() * (two_pi_i * arg).exp();
        }
        z
    }

    pub fn to_json(&self) -> Value {
        let mut keys: Vec<&ExpKey> = self.terms.keys().collect();
        keys.sort();
        let terms: Vec<Value> = keys.iter().map(|k| json!([k.a, k.b, k.c, self.terms[*k].to_json()])).collect();
        let mut obj = json!({ "denom": self.denom, "trunc": self.trunc, "terms": terms });
        if let Some(w) = &self.weight {
            obj["weight"] = Value::String(w.to_string());
        }
        if let Some(l) = &self.label {
            obj["label"] = Value::String(l.clone());
        }
        obj
    }

    pub fn from_json(v: &Value) -> Result<FourierSeries> {
        let bad = |m: &str| Error::Parse(format!("series json: {m}"));
        let denom = v["denom"].as_u64().ok_or_else(|| bad("denom"))? as u32;
        let trunc = v["trunc"].as_u64().ok_or_else(|| bad("trunc"))? as u32;
        let mut s = FourierSeries::zero(denom, trunc)?;
        for t in v["terms"].as_array().ok_or_else(|| bad("terms"))? {
            let t = t.as_array().ok_or_else(|| bad("term"))?;
            if t.len() != 4 {
                return Err(bad("term length"));
            }
            let g = |i: usize| t[i].as_i64().map(|x| x as i32).ok_or_else(|| bad("exponent"));
            s.add_term(ExpKey::new(g(0)?, g(1)?, g(2)?), CycRat::from_json(&t[3])?);
        }
        if let Some(w) = v.get("weight").and_then(Value::as_str) {
            s.weight = Some(w.parse()?);
        }
        if let Some(l) = v.get("label").and_then(Value::as_str) {
            s.label = Some(l.to_string());
        }
        Ok(s)
    }
}

impl fmt::Display for FourierSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 + O({})", self.trunc);
        }
        for (i, (k, v)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({v})e(({}, {}, {})/{})", k.a, k.b, k.c, self.denom)?;
        }
        Ok(())
    }
}

/// Which coefficient of a quadratic form in (u1, u2).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Sym2Comp {
    /// u1^2
    H20,
    /// u1·u2
    H11,
    /// u2^2
    H02,
}

impl Sym2Comp {
    pub fn name(self) -> &'static str {
        match self {
            Sym2Comp::H20 => "h20",
            Sym2Comp::H11 => "h11",
            Sym2Comp::H02 => "h02",
        }
    }
}

/// Sym²-valued series h20·u1² + h11·u1u2 + h02·u2².
#[derive(Clone, Debug, PartialEq)]
pub struct Sym2Series {
    pub h20: FourierSeries,
    pub h11: FourierSeries,
    pub h02: FourierSeries,
    pub weight: Option<Rat>,
}

impl Sym2Series {
    pub fn new(h20: FourierSeries, h11: FourierSeries, h02: FourierSeries, weight: Option<Rat>) -> Sym2Series {
        Sym2Series { h20, h11, h02, weight }
    }

    pub fn zero(denom: u32, trunc: u32) -> Result<Sym2Series> {
        let z = FourierSeries::zero(denom, trunc)?;
        Ok(Sym2Series::new(z.clone(), z.clone(), z, None))
    }

    pub fn comp(&self, c: Sym2Comp) -> &FourierSeries {
        match c {
            Sym2Comp::H20 => &self.h20,
            Sym2Comp::H11 => &self.h11,
            Sym2Comp::H02 => &self.h02,
        }
    }

    pub fn trunc(&self) -> u32 {
        self.h20.trunc().min(self.h11.trunc()).min(self.h02.trunc())
    }

    pub fn map(&self, f: impl Fn(&FourierSeries) -> FourierSeries) -> Sym2Series {
        Sym2Series::new(f(&self.h20), f(&self.h11), f(&self.h02), self.weight.clone())
    }

    pub fn try_map(&self, f: impl Fn(&FourierSeries) -> Result<FourierSeries>) -> Result<Sym2Series> {
        Ok(Sym2Series::new(f(&self.h20)?, f(&self.h11)?, f(&self.h02)?, self.weight.clone()))
    }

    pub fn add(&self, o: &Sym2Series) -> Result<Sym2Series> {
        Ok(Sym2Series::new(
            self.h20.add(&o.h20)?,
            self.h11.add(&o.h11)?,
            self.h02.add(&o.h02)?,
            if self.weight == o.weight { self.weight.clone() } else { None },
        ))
    }

    pub fn sub(&self, o: &Sym2Series) -> Result<Sym2Series> {
        self.add(&o.scale(&CycRat::int(-1)))
    }

    pub fn scale(&self, c: &CycRat) -> Sym2Series {
        self.map(|s| s.scale(c))
    }

    pub fn mul_scalar(&self, f: &FourierSeries) -> Result<Sym2Series> {
        let weight = match (&self.weight, &f.weight) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let mut out = self.try_map(|s| f.mul(s))?;
        out.weight = weight;
        Ok(out)
    }

    pub fn witt(&self) -> Sym2Series {
        self.map(FourierSeries::witt)
    }

    pub fn involution(&self) -> Sym2Series {
        self.map(FourierSeries::involution)
    }

    pub fn is_zero(&self) -> bool {
        self.h20.is_zero() && self.h11.is_zero() && self.h02.is_zero()
    }

    pub fn equal_upto(&self, o: &Sym2Series, n: u32) -> Result<Option<(Sym2Comp, Mismatch)>> {
        for c in [Sym2Comp::H20, Sym2Comp::H11, Sym2Comp::H02] {
            if let Some(m) = self.comp(c).equal_upto(o.comp(c), n)? {
                return Ok(Some((c, m)));
            }
        }
        Ok(None)
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "h20": self.h20.to_json(), "h11": self.h11.to_json(), "h02": self.h02.to_json() });
        if let Some(w) = &self.weight {
            v["weight"] = Value::String(w.to_string());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_series(d: u32, n: u32, seed: &[(i32, i32, i32, i64)]) -> FourierSeries {
        FourierSeries::from_terms(d, n, seed.iter().map(|&(a, b, c, v)| (ExpKey::new(a, b, c), CycRat::int(v)))).unwrap()
    }

    fn arb_series(d: u32, n: u32) -> impl Strategy<Value = FourierSeries> {
        let m = (d * n) as i32;
        proptest::collection::vec((0..=m, -m..=m, 0..=m, -5i64..5), 0..12)
            .prop_map(move |v| small_series(d, n, &v))
    }

    #[test]
    fn key_order_is_a_c_b() {
        let mut v = vec![ExpKey::new(1, 5, 0), ExpKey::new(0, 0, 2), ExpKey::new(0, -1, 1), ExpKey::new(0, 1, 1)];
        v.sort();
        assert_eq!(v, vec![ExpKey::new(0, -1, 1), ExpKey::new(0, 1, 1), ExpKey::new(0, 0, 2), ExpKey::new(1, 5, 0)]);
    }

    #[test]
    fn mul_respects_truncation_and_lifts() {
        let f = small_series(2, 2, &[(0, 0, 0, 1), (1, 1, 1, 2)]);
        let g = small_series(3, 1, &[(0, 0, 0, 1), (3, 0, 3, 5)]);
        let p = f.mul(&g).unwrap();
        assert_eq!(p.denom(), 6);
        assert_eq!(p.trunc(), 1);
        assert_eq!(p.get(3, 3, 3), CycRat::int(2));
        assert_eq!(p.get(6, 0, 6), CycRat::int(5));
        assert_eq!(p.get(9, 3, 9), CycRat::zero());
    }

    #[test]
    fn lcm_outside_24_is_error() {
        let f = FourierSeries::zero(16, 1);
        assert!(f.is_err());
    }

    #[test]
    fn translate_phase() {
        let f = small_series(3, 2, &[(1, 1, 1, 1)]);
        let t = f.translate([[0, 1], [1, 0]]).unwrap();
        assert_eq!(t.get(1, 1, 1), CycRat::root_of_unity(1, 3).unwrap());
    }

    #[test]
    fn equal_upto_reports_first_mismatch() {
        let f = small_series(1, 3, &[(1, 0, 1, 1), (2, 0, 1, 4)]);
        let g = small_series(1, 3, &[(1, 0, 1, 1), (2, 0, 1, 3)]);
        assert!(f.equal_upto(&g, 1).unwrap().is_none());
        let m = f.equal_upto(&g, 2).unwrap().unwrap();
        assert_eq!(m.exponent, [Rat::int(2), Rat::int(0), Rat::int(1)]);
        assert!(f.equal_upto(&g, 4).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let f = small_series(8, 2, &[(1, 2, 3, 7), (0, 0, 0, -1)])
            .translate([[1, 0], [0, 0]])
            .unwrap()
            .with_weight(Some(Rat::frac(1, 2)));
        let g = FourierSeries::from_json(&f.to_json()).unwrap();
        assert_eq!(f.terms, g.terms);
        assert_eq!(g.weight, Some(Rat::frac(1, 2)));
    }

    proptest! {
        #[test]
        fn witt_is_multiplicative(f in arb_series(2, 2), g in arb_series(2, 2)) {
            let lhs = f.mul(&g).unwrap().witt();
            let rhs = f.witt().mul(&g.witt()).unwrap();
            prop_assert!(lhs.equal_upto(&rhs, 2).unwrap().is_none());
        }

        #[test]
        fn involution_is_involutive(f in arb_series(4, 2)) {
            prop_assert_eq!(f.involution().involution().terms, f.terms.clone());
            let (p, m) = f.split_types();
            prop_assert!(p.add(&m).unwrap().equal_upto(&f, 2).unwrap().is_none());
            prop_assert!(p.involution().equal_upto(&p, 2).unwrap().is_none());
        }

        #[test]
        fn leibniz(f in arb_series(2, 2), g in arb_series(3, 2)) {
            for d in Deriv::ALL {
                let lhs = f.mul(&g).unwrap().d_partial(d);
                let rhs = f.d_partial(d).mul(&g).unwrap().add(&f.mul(&g.d_partial(d)).unwrap()).unwrap();
                prop_assert!(lhs.equal_upto(&rhs, 2).unwrap().is_none());
            }
        }

        #[test]
        fn mul_commutes_and_distributes(f in arb_series(2, 2), g in arb_series(2, 2), h in arb_series(1, 2)) {
            prop_assert!(f.mul(&g).unwrap().equal_upto(&g.mul(&f).unwrap(), 2).unwrap().is_none());
            let lhs = f.mul(&g.add(&h).unwrap()).unwrap();
            let rhs = f.mul(&g).unwrap().add(&f.mul(&h).unwrap()).unwrap();
            prop_assert!(lhs.equal_upto(&rhs, 2).unwrap().is_none());
        }

        #[test]
        fn translation_is_a_ring_map(f in arb_series(2, 1), g in arb_series(3, 1), s11 in -2i64..3, s12 in -2i64..3, s22 in -2i64..3) {
            let s = [[s11, s12], [s12, s22]];
            let lhs = f.mul(&g).unwrap().translate(s).unwrap();
            let rhs = f.translate(s).unwrap().mul(&g.translate(s).unwrap()).unwrap();
            prop_assert!(lhs.equal_upto(&rhs, 1).unwrap().is_none());
        }
    }
}
