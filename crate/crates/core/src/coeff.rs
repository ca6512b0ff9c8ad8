//! Exact coefficients: reduced rationals and elements of the cyclotomic field Q(ζ24).
//!
//! `CycRat` stores an element in the power basis 1, ζ, ..., ζ^7 of Q(ζ24), where
//! ζ = e(1/24) and Φ24(x) = x^8 - x^4 + 1. Rational values are kept unboxed.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Reduced rational number with an `i128` fast path.
///
/// Invariant: `Small(n, d)` has `d > 0`, `gcd(n, d) = 1`; `Big` is used only
/// when the reduced value does not fit in `i128`.
#[derive(Clone, Debug)]
pub enum Rat {
    Small(i128, i128),
    Big(BigRational),
}

impl Rat {
    pub const ZERO: Rat = Rat::Small(0, 1);
    pub const ONE: Rat = Rat::Small(1, 1);

    pub fn int(n: i64) -> Rat {
        Rat::Small(n as i128, 1)
    }

    pub fn new(num: i64, den: i64) -> Result<Rat> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(Rat::reduce_i128(num as i128, den as i128).expect("i64 inputs fit"))
    }

    /// Panicking constructor for literal constants.
    pub fn frac(num: i64, den: i64) -> Rat {
        Rat::new(num, den).expect("nonzero denominator")
    }

    fn reduce_i128(n: i128, d: i128) -> Option<Rat> {
        if n == 0 {
            return Some(Rat::ZERO);
        }
        let g = n.gcd(&d);
        let (mut n, mut d) = (n / g, d / g);
        if d < 0 {
            n = n.checked_neg()?;
            d = d.checked_neg()?;
        }
        Some(Rat::Small(n, d))
    }

    fn from_big(b: BigRational) -> Rat {
        match (b.numer().to_i128(), b.denom().to_i128()) {
            (Some(n), Some(d)) => Rat::Small(n, d),
            _ => Rat::Big(b),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Rat::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Rat::Big(b) => b.clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match self {
            Rat::Small(n, _) => BigInt::from(*n),
            Rat::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match self {
            Rat::Small(_, d) => BigInt::from(*d),
            Rat::Big(b) => b.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Rat::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Rat::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Rat::Small(_, d) => *d == 1,
            Rat::Big(b) => b.is_integer(),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Rat::Small(n, _) => n.signum() as i32,
            Rat::Big(b) => {
                if b.is_negative() {
                    -1
                } else {
                    1
                }
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Rat::Small(n, d) => *n as f64 / *d as f64,
            Rat::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Integer value, if this is an integer fitting in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        match self {
            Rat::Small(n, 1) => i64::try_from(*n).ok(),
            _ => None,
        }
    }

    pub fn inv(&self) -> Result<Rat> {
        match self {
            Rat::Small(0, _) => Err(Error::DivisionByZero),
            Rat::Small(n, d) => {
                if *n < 0 {
                    Ok(Rat::Small(-d, -n))
                } else {
                    Ok(Rat::Small(*d, *n))
                }
            }
            Rat::Big(b) => Ok(Rat::from_big(b.recip())),
        }
    }

    pub fn div(&self, other: &Rat) -> Result<Rat> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, e: u32) -> Rat {
        let mut acc = Rat::ONE;
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Fractional part in `[0, 1)`.
    pub fn frac_part(&self) -> Rat {
        match self {
            Rat::Small(n, d) => Rat::Small(n.rem_euclid(*d), *d),
            Rat::Big(b) => {
                let f = b - b.floor();
                Rat::from_big(f)
            }
        }
    }

    pub fn denom_i64(&self) -> Option<i64> {
        match self {
            Rat::Small(_, d) => i64::try_from(*d).ok(),
            Rat::Big(_) => None,
        }
    }
}

impl Default for Rat {
    fn default() -> Self {
        Rat::ZERO
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Rat) -> bool {
        match (self, other) {
            (Rat::Small(a, b), Rat::Small(c, d)) => a == c && b == d,
            (Rat::Big(a), Rat::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Rat {}

impl std::hash::Hash for Rat {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Rat::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Rat::Big(b) => {
                1u8.hash(state);
                b.hash(state);
            }
        }
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, other) {
            if let (Some(l), Some(r)) = (a.checked_mul(*d), c.checked_mul(*b)) {
                return l.cmp(&r);
            }
        }
        self.to_big().cmp(&other.to_big())
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::int(n)
    }
}

impl From<BigRational> for Rat {
    fn from(b: BigRational) -> Rat {
        Rat::from_big(b)
    }
}

impl From<BigInt> for Rat {
    fn from(b: BigInt) -> Rat {
        Rat::from_big(BigRational::from_integer(b))
    }
}

fn add_small(a: i128, b: i128, c: i128, d: i128) -> Option<Rat> {
    if b == 1 && d == 1 {
        return Some(Rat::Small(a.checked_add(c)?, 1));
    }
    if b == d {
        let n = a.checked_add(c)?;
        return Rat::reduce_i128(n, b);
    }
    let g = b.gcd(&d);
    let bg = b / g;
    let dg = d / g;
    let n = a.checked_mul(dg)?.checked_add(c.checked_mul(bg)?)?;
    let den = b.checked_mul(dg)?;
    Rat::reduce_i128(n, den)
}

fn mul_small(a: i128, b: i128, c: i128, d: i128) -> Option<Rat> {
    if a == 0 || c == 0 {
        return Some(Rat::ZERO);
    }
    if b == 1 && d == 1 {
        return Some(Rat::Small(a.checked_mul(c)?, 1));
    }
    let g1 = a.gcd(&d);
    let g2 = c.gcd(&b);
    let n = (a / g1).checked_mul(c / g2)?;
    let den = (b / g2).checked_mul(d / g1)?;
    Some(Rat::Small(n, den))
}

impl<'a> Add<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn add(self, o: &Rat) -> Rat {
        if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, o) {
            if let Some(r) = add_small(*a, *b, *c, *d) {
                return r;
            }
        }
        Rat::from_big(self.to_big() + o.to_big())
    }
}

impl<'a> Sub<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn sub(self, o: &Rat) -> Rat {
        self + &(-o)
    }
}

impl<'a> Mul<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn mul(self, o: &Rat) -> Rat {
        if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, o) {
            if let Some(r) = mul_small(*a, *b, *c, *d) {
                return r;
            }
        }
        Rat::from_big(self.to_big() * o.to_big())
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match self {
            Rat::Small(n, d) => match n.checked_neg() {
                Some(m) => Rat::Small(m, *d),
                None => Rat::from_big(-self.to_big()),
            },
            Rat::Big(b) => Rat::from_big(-b.clone()),
        }
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        -&self
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, o: Rat) -> Rat {
        &self + &o
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, o: Rat) -> Rat {
        &self - &o
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, o: Rat) -> Rat {
        &self * &o
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, o: &Rat) {
        *self = &*self + o;
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, o: &Rat) {
        *self = &*self - o;
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, o: &Rat) {
        *self = &*self * o;
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rat::Small(n, 1) => write!(f, "{n}"),
            Rat::Small(n, d) => write!(f, "{n}/{d}"),
            Rat::Big(b) => {
                if b.is_integer() {
                    write!(f, "{}", b.numer())
                } else {
                    write!(f, "{}/{}", b.numer(), b.denom())
                }
            }
        }
    }
}

impl FromStr for Rat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Rat> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid rational {s:?}"));
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rat::from_big(BigRational::new(n, d)))
    }
}

/// Order of the cyclotomic field.
pub const CYC_ORDER: i64 = 24;
const DEG: usize = 8;

/// Power-basis coordinates of ζ^k for k = 0..24 (integer entries).
fn zeta_pow_table() -> &'static [[i64; DEG]; 24] {
    use std::sync::OnceLock;
    static T: OnceLock<[[i64; DEG]; 24]> = OnceLock::new();
    T.get_or_init(|| {
        let mut t = [[0i64; DEG]; 24];
        let mut cur = [0i64; DEG];
        cur[0] = 1;
        for row in t.iter_mut() {
            *row = cur;
            // multiply by ζ: shift, then ζ^8 = ζ^4 - 1
            let top = cur[DEG - 1];
            let mut next = [0i64; DEG];
            next[1..DEG].copy_from_slice(&cur[..DEG - 1]);
            next[4] += top;
            next[0] -= top;
            cur = next;
        }
        t
    })
}

/// Element of Q(ζ24).
///
/// Invariant: the `Cyc` variant always has a nonzero irrational coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CycRat {
    Rat(Rat),
    Cyc(Box<[Rat; DEG]>),
}

impl Default for CycRat {
    fn default() -> Self {
        CycRat::zero()
    }
}

impl From<Rat> for CycRat {
    fn from(r: Rat) -> CycRat {
        CycRat::Rat(r)
    }
}

impl From<i64> for CycRat {
    fn from(n: i64) -> CycRat {
        CycRat::Rat(Rat::int(n))
    }
}

impl CycRat {
    pub fn zero() -> CycRat {
        CycRat::Rat(Rat::ZERO)
    }

    pub fn one() -> CycRat {
        CycRat::Rat(Rat::ONE)
    }

    pub fn int(n: i64) -> CycRat {
        CycRat::Rat(Rat::int(n))
    }

    pub fn frac(n: i64, d: i64) -> CycRat {
        CycRat::Rat(Rat::frac(n, d))
    }

    /// Build from power-basis coordinates, normalizing to the rational variant when possible.
    pub fn from_coords(c: [Rat; DEG]) -> CycRat {
        if c[1..].iter().all(Rat::is_zero) {
            let [c0, ..] = c;
            CycRat::Rat(c0)
        } else {
            CycRat::Cyc(Box::new(c))
        }
    }

    pub fn coords(&self) -> [Rat; DEG] {
        match self {
            CycRat::Rat(r) => {
                let mut c: [Rat; DEG] = Default::default();
                c[0] = r.clone();
                c
            }
            CycRat::Cyc(c) => (**c).clone(),
        }
    }

    /// e(num/den) = exp(2πi·num/den); `den` must divide 24.
    pub fn root_of_unity(num: i64, den: i64) -> Result<CycRat> {
        if den == 0 || CYC_ORDER % den != 0 {
            return Err(Error::UnsupportedConductor(den));
        }
        let k = (num * (CYC_ORDER / den)).rem_euclid(CYC_ORDER) as usize;
        Ok(Self::zeta_pow(k))
    }

    /// e(r) for a rational r with denominator dividing 24.
    pub fn e(r: &Rat) -> Result<CycRat> {
        let f = r.frac_part();
        match f {
            Rat::Small(n, d) => {
                let d64 = i64::try_from(d).map_err(|_| Error::UnsupportedConductor(i64::MAX))?;
                Self::root_of_unity(n as i64, d64)
            }
            Rat::Big(_) => Err(Error::UnsupportedConductor(i64::MAX)),
        }
    }

    fn zeta_pow(k: usize) -> CycRat {
        let row = &zeta_pow_table()[k % 24];
        let mut c: [Rat; DEG] = Default::default();
        for (dst, &v) in c.iter_mut().zip(row.iter()) {
            *dst = Rat::int(v);
        }
        CycRat::from_coords(c)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CycRat::Rat(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, CycRat::Rat(r) if r.is_one())
    }

    pub fn as_rat(&self) -> Option<&Rat> {
        match self {
            CycRat::Rat(r) => Some(r),
            CycRat::Cyc(_) => None,
        }
    }

    pub fn scale(&self, r: &Rat) -> CycRat {
        match self {
            CycRat::Rat(a) => CycRat::Rat(a * r),
            CycRat::Cyc(c) => {
                if r.is_zero() {
                    return CycRat::zero();
                }
                let mut out = (**c).clone();
                for x in out.iter_mut() {
                    *x = &*x * r;
                }
                CycRat::Cyc(Box::new(out))
            }
        }
    }

    /// Galois conjugate ζ ↦ ζ^j, for j coprime to 24.
    pub fn galois(&self, j: i64) -> CycRat {
        match self {
            CycRat::Rat(_) => self.clone(),
            CycRat::Cyc(c) => {
                let mut acc = CycRat::zero();
                for (i, ci) in c.iter().enumerate() {
                    if ci.is_zero() {
                        continue;
                    }
                    let k = ((i as i64) * j).rem_euclid(CYC_ORDER) as usize;
                    acc += &Self::zeta_pow(k).scale(ci);
                }
                acc
            }
        }
    }

    /// Complex conjugate.
    pub fn conj(&self) -> CycRat {
        self.galois(23)
    }

    pub fn inv(&self) -> Result<CycRat> {
        match self {
            CycRat::Rat(r) => Ok(CycRat::Rat(r.inv()?)),
            CycRat::Cyc(_) => {
                // a^{-1} = (product of the other conjugates) / norm
                let mut others = CycRat::one();
                for j in [5, 7, 11, 13, 17, 19, 23] {
                    others = &others * &self.galois(j);
                }
                let norm = &others * self;
                let n = norm
                    .as_rat()
                    .cloned()
                    .ok_or_else(|| Error::Internal("norm not rational".into()))?;
                Ok(others.scale(&n.inv()?))
            }
        }
    }

    pub fn div(&self, other: &CycRat) -> Result<CycRat> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, e: u32) -> CycRat {
        let mut acc = CycRat::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            CycRat::Rat(r) => Complex64::new(r.to_f64(), 0.0),
            CycRat::Cyc(c) => {
                let mut z = Complex64::new(0.0, 0.0);
                for (i, ci) in c.iter().enumerate() {
                    if ci.is_zero() {
                        continue;
                    }
                    let ang = 2.0 * std::f64::consts::PI * i as f64 / 24.0;
                    z += Complex64::from_polar(ci.to_f64(), ang);
                }
                z
            }
        }
    }

    /// Serialized form: a list of 8 "num/den" strings in the power basis.
    pub fn to_strings(&self) -> Vec<String> {
        self.coords().iter().map(|r| r.to_string()).collect()
    }

    pub fn from_strings<S: AsRef<str>>(v: &[S]) -> Result<CycRat> {
        if v.len() != DEG {
            return Err(Error::Parse(format!("expected {DEG} coordinates, got {}", v.len())));
        }
        let mut c: [Rat; DEG] = Default::default();
        for (dst, s) in c.iter_mut().zip(v) {
            *dst = s.as_ref().parse()?;
        }
        Ok(CycRat::from_coords(c))
    }

    /// JSON value: a rational string when rational, otherwise the 8-coordinate list.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CycRat::Rat(r) => serde_json::Value::String(r.to_string()),
            CycRat::Cyc(_) => serde_json::Value::Array(
                self.to_strings().into_iter().map(serde_json::Value::String).collect(),
            ),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<CycRat> {
        match v {
            serde_json::Value::String(s) => Ok(CycRat::Rat(s.parse()?)),
            serde_json::Value::Number(n) => Ok(CycRat::Rat(n.to_string().parse()?)),
            serde_json::Value::Array(a) => {
                let strs: Vec<String> = a
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::String(s) => Ok(s.clone()),
                        serde_json::Value::Number(n) => Ok(n.to_string()),
                        _ => Err(Error::Parse("bad coordinate".into())),
                    })
                    .collect::<Result<_>>()?;
                CycRat::from_strings(&strs)
            }
            _ => Err(Error::Parse("bad coefficient".into())),
        }
    }
}

fn reduce_poly(mut p: [Rat; 2 * DEG - 1]) -> [Rat; DEG] {
    for k in (DEG..2 * DEG - 1).rev() {
        let top = std::mem::take(&mut p[k]);
        if top.is_zero() {
            continue;
        }
        p[k - 4] += &top;
        p[k - 8] -= &top;
    }
    let mut out: [Rat; DEG] = Default::default();
    for (dst, src) in out.iter_mut().zip(p.iter_mut()) {
        *dst = std::mem::take(src);
    }
    out
}

impl<'a> Add<&'a CycRat> for &'a CycRat {
    type Output = CycRat;
    fn add(self, o: &CycRat) -> CycRat {
        match (self, o) {
            (CycRat::Rat(a), CycRat::Rat(b)) => CycRat::Rat(a + b),
            _ => {
                let mut a = self.coords();
                let b = o.coords();
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
                CycRat::from_coords(a)
            }
        }
    }
}

impl<'a> Sub<&'a CycRat> for &'a CycRat {
    type Output = CycRat;
    fn sub(self, o: &CycRat) -> CycRat {
        match (self, o) {
            (CycRat::Rat(a), CycRat::Rat(b)) => CycRat::Rat(a - b),
            _ => {
                let mut a = self.coords();
                let b = o.coords();
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x -= y;
                }
                CycRat::from_coords(a)
            }
        }
    }
}

impl<'a> Mul<&'a CycRat> for &'a CycRat {
    type Output = CycRat;
    fn mul(self, o: &CycRat) -> CycRat {
        match (self, o) {
            (CycRat::Rat(a), CycRat::Rat(b)) => CycRat::Rat(a * b),
            (CycRat::Rat(a), c) | (c, CycRat::Rat(a)) => c.scale(a),
            (CycRat::Cyc(x), CycRat::Cyc(y)) => {
                let mut p: [Rat; 2 * DEG - 1] = Default::default();
                for (i, xi) in x.iter().enumerate() {
                    if xi.is_zero() {
                        continue;
                    }
                    for (j, yj) in y.iter().enumerate() {
                        if yj.is_zero() {
                            continue;
                        }
                        p[i + j] += &(xi * yj);
                    }
                }
                CycRat::from_coords(reduce_poly(p))
            }
        }
    }
}

impl Neg for &CycRat {
    type Output = CycRat;
    fn neg(self) -> CycRat {
        match self {
            CycRat::Rat(a) => CycRat::Rat(-a),
            CycRat::Cyc(c) => {
                let mut out = (**c).clone();
                for x in out.iter_mut() {
                    *x = -&*x;
                }
                CycRat::Cyc(Box::new(out))
            }
        }
    }
}

impl Neg for CycRat {
    type Output = CycRat;
    fn neg(self) -> CycRat {
        -&self
    }
}

impl Add for CycRat {
    type Output = CycRat;
    fn add(self, o: CycRat) -> CycRat {
        &self + &o
    }
}

impl Sub for CycRat {
    type Output = CycRat;
    fn sub(self, o: CycRat) -> CycRat {
        &self - &o
    }
}

impl Mul for CycRat {
    type Output = CycRat;
    fn mul(self, o: CycRat) -> CycRat {
        &self * &o
    }
}

impl AddAssign<&CycRat> for CycRat {
    fn add_assign(&mut self, o: &CycRat) {
        if let (CycRat::Rat(a), CycRat::Rat(b)) = (&mut *self, o) {
            *a += b;
            return;
        }
        *self = &*self + o;
    }
}

impl SubAssign<&CycRat> for CycRat {
    fn sub_assign(&mut self, o: &CycRat) {
        if let (CycRat::Rat(a), CycRat::Rat(b)) = (&mut *self, o) {
            *a -= b;
            return;
        }
        *self = &*self - o;
    }
}

impl MulAssign<&CycRat> for CycRat {
    fn mul_assign(&mut self, o: &CycRat) {
        *self = &*self * o;
    }
}

impl fmt::Display for CycRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycRat::Rat(r) => write!(f, "{r}"),
            CycRat::Cyc(c) => {
                let mut first = true;
                for (i, ci) in c.iter().enumerate() {
                    if ci.is_zero() {
                        continue;
                    }
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    match i {
                        0 => write!(f, "{ci}")?,
                        1 => write!(f, "({ci})*z")?,
                        _ => write!(f, "({ci})*z^{i}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

impl FromStr for CycRat {
    type Err = Error;
    fn from_str(s: &str) -> Result<CycRat> {
        Ok(CycRat::Rat(s.parse()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_rat() -> impl Strategy<Value = Rat> {
        (-50i64..50, 1i64..30).prop_map(|(n, d)| Rat::frac(n, d))
    }

    fn arb_cyc() -> impl Strategy<Value = CycRat> {
        proptest::array::uniform8(arb_rat()).prop_map(CycRat::from_coords)
    }

    #[test]
    fn rational_basics() {
        let a = Rat::frac(6, -4);
        assert_eq!(a.to_string(), "-3/2");
        assert_eq!((&a + &Rat::frac(1, 2)).to_string(), "-1");
        assert!(Rat::ZERO.inv().is_err());
        assert_eq!("12/-8".parse::<Rat>().unwrap(), Rat::frac(-3, 2));
    }

    #[test]
    fn overflow_promotes_to_big() {
        let big = Rat::int(i64::MAX);
        let sq = &(&big * &big) * &big;
        let back = (&sq.div(&big).unwrap()).div(&big).unwrap();
        assert_eq!(back, big);
        assert!(matches!(sq, Rat::Big(_)));
    }

    #[test]
    fn roots_of_unity() {
        let i = CycRat::root_of_unity(1, 4).unwrap();
        assert_eq!(&i * &i, CycRat::int(-1));
        let w = CycRat::root_of_unity(1, 3).unwrap();
        assert_eq!(&(&w * &w) + &(&w + &CycRat::one()), CycRat::zero());
        assert!(CycRat::root_of_unity(1, 5).is_err());
        assert!(CycRat::root_of_unity(1, 48).is_err());
        let z = CycRat::root_of_unity(1, 24).unwrap();
        assert_eq!(z.pow(24), CycRat::one());
        assert_ne!(z.pow(12), CycRat::one());
        assert_eq!(CycRat::root_of_unity(-1, 8).unwrap(), CycRat::root_of_unity(7, 8).unwrap());
    }

    #[test]
    fn complex_value_of_roots() {
        for k in 0..24 {
            let z = CycRat::root_of_unity(k, 24).unwrap().to_complex();
            let ang = 2.0 * std::f64::consts::PI * k as f64 / 24.0;
            assert!((z - Complex64::from_polar(1.0, ang)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_inverse_is_error() {
        assert!(CycRat::zero().inv().is_err());
    }

    #[test]
    fn string_roundtrip() {
        let x = &CycRat::root_of_unity(5, 24).unwrap() + &CycRat::frac(-7, 3);
        let s = x.to_strings();
        assert_eq!(CycRat::from_strings(&s).unwrap(), x);
        assert_eq!(CycRat::from_json(&x.to_json()).unwrap(), x);
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_cyc(), b in arb_cyc(), c in arb_cyc()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a - &a, CycRat::zero());
        }

        #[test]
        fn inverse(a in arb_cyc()) {
            prop_assume!(!a.is_zero());
            prop_assert_eq!(&a * &a.inv().unwrap(), CycRat::one());
        }

        #[test]
        fn complex_is_homomorphism(a in arb_cyc(), b in arb_cyc()) {
            let lhs = (&a * &b).to_complex();
            let rhs = a.to_complex() * b.to_complex();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
        }

        #[test]
        fn rat_field(a in arb_rat(), b in arb_rat()) {
            prop_assume!(!b.is_zero());
            prop_assert_eq!(&a.div(&b).unwrap() * &b, a.clone());
            prop_assert!(((&a + &b).to_f64() - (a.to_f64() + b.to_f64())).abs() < 1e-9);
        }
    }
}
