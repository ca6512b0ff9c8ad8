//! Integral symplectic matrices of size 4, their action on theta characteristics,
//! κ², and the structured slash of theta monomials.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};
use crate::theta::ThetaChar;

type M2 = [[i64; 2]; 2];

/// M = [[A, B], [C, D]] with M J M^t = J, J = [[0, -1], [1, 0]].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymplecticMat {
    m: [[i64; 4]; 4],
}

fn mul4(x: &[[i64; 4]; 4], y: &[[i64; 4]; 4]) -> [[i64; 4]; 4] {
    let mut r = [[0i64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            r[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    r
}

const JMAT: [[i64; 4]; 4] = [[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]];

fn transpose4(x: &[[i64; 4]; 4]) -> [[i64; 4]; 4] {
    let mut r = [[0i64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            r[i][j] = x[j][i];
        }
    }
    r
}

fn det2(x: &M2) -> i64 {
    x[0][0] * x[1][1] - x[0][1] * x[1][0]
}

fn mul2(x: &M2, y: &M2) -> M2 {
    let mut r = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

fn t2(x: &M2) -> M2 {
    [[x[0][0], x[1][0]], [x[0][1], x[1][1]]]
}

fn mv2(x: &M2, v: [i64; 2]) -> [i64; 2] {
    [x[0][0] * v[0] + x[0][1] * v[1], x[1][0] * v[0] + x[1][1] * v[1]]
}

pub const S0: M2 = [[0, 1], [1, 0]];
const ONE2: M2 = [[1, 0], [0, 1]];
const ZERO2: M2 = [[0, 0], [0, 0]];

impl SymplecticMat {
    pub fn new(m: [[i64; 4]; 4]) -> Result<SymplecticMat> {
        if mul4(&mul4(&m, &JMAT), &transpose4(&m)) != JMAT {
            return Err(Error::NotSymplectic);
        }
        Ok(SymplecticMat { m })
    }

    /// From a row-major list of 16 integers.
    pub fn from_row_major(v: &[i64]) -> Result<SymplecticMat> {
        if v.len() != 16 {
            return Err(Error::Parse(format!("expected 16 entries, got {}", v.len())));
        }
        let mut m = [[0i64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = v[4 * i + j];
            }
        }
        SymplecticMat::new(m)
    }

    pub fn row_major(&self) -> Vec<i64> {
        self.m.iter().flatten().copied().collect()
    }

    pub fn from_blocks(a: M2, b: M2, c: M2, d: M2) -> Result<SymplecticMat> {
        let mut m = [[0i64; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][j];
                m[i][j + 2] = b[i][j];
                m[i + 2][j] = c[i][j];
                m[i + 2][j + 2] = d[i][j];
            }
        }
        SymplecticMat::new(m)
    }

    pub fn rows(&self) -> [[i64; 4]; 4] {
        self.m
    }

    pub fn blocks(&self) -> (M2, M2, M2, M2) {
        let g = |r: usize, c: usize| [[self.m[r][c], self.m[r][c + 1]], [self.m[r + 1][c], self.m[r + 1][c + 1]]];
        (g(0, 0), g(0, 2), g(2, 0), g(2, 2))
    }

    pub fn blocks_c(&self) -> ([[Complex64; 2]; 2], [[Complex64; 2]; 2], [[Complex64; 2]; 2], [[Complex64; 2]; 2]) {
        let (a, b, c, d) = self.blocks();
        let f = |x: M2| x.map(|r| r.map(|v| Complex64::new(v as f64, 0.0)));
        (f(a), f(b), f(c), f(d))
    }

    pub fn identity() -> SymplecticMat {
        SymplecticMat { m: [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]] }
    }

    pub fn is_identity(&self) -> bool {
        *self == SymplecticMat::identity()
    }

    pub fn mul(&self, o: &SymplecticMat) -> SymplecticMat {
        SymplecticMat { m: mul4(&self.m, &o.m) }
    }

    pub fn pow(&self, e: u32) -> SymplecticMat {
        (0..e).fold(SymplecticMat::identity(), |acc, _| acc.mul(self))
    }

    /// M^{-1} = [[D^t, -B^t], [-C^t, A^t]].
    pub fn inverse(&self) -> SymplecticMat {
        let (a, b, c, d) = self.blocks();
        let neg = |x: M2| x.map(|r| r.map(|v| -v));
        SymplecticMat::from_blocks(t2(&d), neg(t2(&b)), neg(t2(&c)), t2(&a)).expect("inverse of symplectic")
    }

    /// [[1, S], [0, 1]] for symmetric S.
    pub fn upper(s: M2) -> SymplecticMat {
        SymplecticMat::from_blocks(ONE2, s, ZERO2, ONE2).expect("symmetric S")
    }

    /// [[1, 0], [S, 1]] for symmetric S.
    pub fn lower(s: M2) -> SymplecticMat {
        SymplecticMat::from_blocks(ONE2, ZERO2, s, ONE2).expect("symmetric S")
    }

    /// diag(U, U^{-t}) for U in GL2(Z).
    pub fn rotation(u: M2) -> Result<SymplecticMat> {
        let det = det2(&u);
        if det.abs() != 1 {
            return Err(Error::NotSymplectic);
        }
        let inv = [[u[1][1] * det, -u[0][1] * det], [-u[1][0] * det, u[0][0] * det]];
        SymplecticMat::from_blocks(u, ZERO2, ZERO2, t2(&inv))
    }

    pub fn j() -> SymplecticMat {
        SymplecticMat { m: JMAT }
    }

    pub fn m1() -> SymplecticMat {
        SymplecticMat::lower(S0)
    }

    pub fn m2() -> SymplecticMat {
        SymplecticMat::upper(S0)
    }

    /// [[1, -1 - S0], [1, -S0]].
    pub fn m3() -> SymplecticMat {
        SymplecticMat::from_blocks(ONE2, [[-1, -1], [-1, -1]], ONE2, [[0, -1], [-1, 0]]).expect("M3 is symplectic")
    }

    /// K = J·M2 = [[0, -1], [1, S0]].
    pub fn k() -> SymplecticMat {
        SymplecticMat::j().mul(&SymplecticMat::m2())
    }

    /// diag(1, -1, 1, -1), realizing τ12 ↦ -τ12.
    pub fn involution() -> SymplecticMat {
        SymplecticMat::rotation([[1, 0], [0, -1]]).unwrap()
    }

    pub fn by_name(name: &str) -> Result<SymplecticMat> {
        Ok(match name {
            "1" | "id" | "identity" => SymplecticMat::identity(),
            "J" => SymplecticMat::j(),
            "K" => SymplecticMat::k(),
            "M1" => SymplecticMat::m1(),
            "M1^2" | "M1sq" => SymplecticMat::m1().pow(2),
            "M2" => SymplecticMat::m2(),
            "M3" => SymplecticMat::m3(),
            "I" => SymplecticMat::involution(),
            _ => return Err(Error::UnknownName(format!("matrix {name}"))),
        })
    }

    /// Short name of a named matrix, if any.
    pub fn name(&self) -> Option<&'static str> {
        [("1", Self::identity()), ("J", Self::j()), ("K", Self::k()), ("M1", Self::m1()), ("M1^2", Self::m1().pow(2)), ("M2", Self::m2()), ("M3", Self::m3()), ("I", Self::involution())]
            .into_iter()
            .find(|(_, m)| m == self)
            .map(|(n, _)| n)
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.blocks().2 == ZERO2
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.blocks().1 == ZERO2
    }

    pub fn is_triangular(&self) -> bool {
        self.is_upper_triangular() || self.is_lower_triangular()
    }

    /// If M = J·[[1, S], [0, 1]], return S.
    pub fn as_j_translation(&self) -> Option<M2> {
        let x = SymplecticMat::j().inverse().mul(self);
        let (a, b, c, d) = x.blocks();
        (a == ONE2 && c == ZERO2 && d == ONE2).then_some(b)
    }

    /// If M = [[1, S], [0, 1]], return S.
    pub fn as_translation(&self) -> Option<M2> {
        let (a, b, c, d) = self.blocks();
        (a == ONE2 && c == ZERO2 && d == ONE2).then_some(b)
    }

    /// M∘m = [[D, -C], [-B, A]] m + ((C D^t)_0, (A B^t)_0), as an integral vector.
    pub fn char_action_int(&self, m: &[i64; 4]) -> [i64; 4] {
        let (a, b, c, d) = self.blocks();
        let mp = [m[0], m[1]];
        let mpp = [m[2], m[3]];
        let cd = mul2(&c, &t2(&d));
        let ab = mul2(&a, &t2(&b));
        let top = mv2(&d, mp);
        let top2 = mv2(&c, mpp);
        let bot = mv2(&b, mp);
        let bot2 = mv2(&a, mpp);
        [
            top[0] - top2[0] + cd[0][0],
            top[1] - top2[1] + cd[1][1],
            -bot[0] + bot2[0] + ab[0][0],
            -bot[1] + bot2[1] + ab[1][1],
        ]
    }

    /// M∘m reduced mod 2.
    pub fn char_action(&self, m: &ThetaChar) -> ThetaChar {
        let mi = m.to_ints();
        let v = self.char_action_int(&[mi[0], mi[1], mi[2], mi[3]]);
        ThetaChar::deg2(v.map(|x| x.rem_euclid(2) as u8)).expect("bits")
    }

    /// φ_m(M) = -(1/8)(m'^t B^t D m' + m''^t A^t C m'' - 2 m'^t B^t C m'' - 2 (AB^t)_0^t (D m' - C m'')), mod 1.
    pub fn phi(&self, m: &[i64; 4]) -> Rat {
        // only s mod 8 matters, and wrapping arithmetic is exact mod 2^64
        let (a, b, c, d) = self.blocks();
        let mul = |x: &M2, y: &M2| {
            let e = |i: usize, j: usize| x[i][0].wrapping_mul(y[0][j]).wrapping_add(x[i][1].wrapping_mul(y[1][j]));
            [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
        };
        let mv = |x: &M2, v: [i64; 2]| {
            [
                x[0][0].wrapping_mul(v[0]).wrapping_add(x[0][1].wrapping_mul(v[1])),
                x[1][0].wrapping_mul(v[0]).wrapping_add(x[1][1].wrapping_mul(v[1])),
            ]
        };
        let dot = |u: [i64; 2], v: [i64; 2]| u[0].wrapping_mul(v[0]).wrapping_add(u[1].wrapping_mul(v[1]));
        let mp = [m[0], m[1]];
        let mpp = [m[2], m[3]];
        let ab = mul(&a, &t2(&b));
        let ab0 = [ab[0][0], ab[1][1]];
        let dm = mv(&d, mp);
        let cm = mv(&c, mpp);
        let s = dot(mp, mv(&mul(&t2(&b), &d), mp))
            .wrapping_add(dot(mpp, mv(&mul(&t2(&a), &c), mpp)))
            .wrapping_sub(dot(mp, mv(&mul(&t2(&b), &c), mpp)).wrapping_mul(2))
            .wrapping_sub(dot(ab0, [dm[0].wrapping_sub(cm[0]), dm[1].wrapping_sub(cm[1])]).wrapping_mul(2));
        Rat::frac(s.wrapping_neg().rem_euclid(8), 8)
    }

    /// Factorization into block-triangular symplectic matrices whose product is M.
    pub fn decompose_triangular(&self) -> Vec<SymplecticMat> {
        if self.is_triangular() {
            return vec![*self];
        }
        let j_parts = || vec![
            SymplecticMat::upper([[-1, 0], [0, -1]]),
            SymplecticMat::lower(ONE2),
            SymplecticMat::upper([[-1, 0], [0, -1]]),
        ];
        if *self == SymplecticMat::j() {
            return j_parts();
        }
        let rest = SymplecticMat::j().inverse().mul(self);
        if rest.is_triangular() {
            let mut v = j_parts();
            v.push(rest);
            return v;
        }
        // left-multiply by triangular ops until C = 0; M = ops^{-1} ... · M'
        let mut cur = *self;
        let mut ops: Vec<SymplecticMat> = Vec::new();
        let apply = |cur: &mut SymplecticMat, ops: &mut Vec<SymplecticMat>, op: SymplecticMat| {
            *cur = op.mul(cur);
            ops.push(op);
        };
        let diag = |i: usize, x: i64| {
            let mut s = ZERO2;
            s[i][i] = x;
            s
        };
        let euclid = |cur: &mut SymplecticMat, ops: &mut Vec<SymplecticMat>, i: usize, col: usize| {
            loop {
                let top = cur.m[i][col];
                let bot = cur.m[i + 2][col];
                if bot == 0 {
                    break;
                }
                if top == 0 {
                    apply(cur, ops, SymplecticMat::upper(diag(i, 1)));
                    continue;
                }
                let q = bot.div_euclid(top);
                if q != 0 {
                    apply(cur, ops, SymplecticMat::lower(diag(i, -q)));
                }
                let bot = cur.m[i + 2][col];
                if bot == 0 {
                    break;
                }
                let q2 = cur.m[i][col].div_euclid(bot);
                apply(cur, ops, SymplecticMat::upper(diag(i, -q2)));
            }
        };
        euclid(&mut cur, &mut ops, 0, 0);
        euclid(&mut cur, &mut ops, 1, 0);
        let (x, y) = (cur.m[0][0], cur.m[1][0]);
        if !(x == 1 && y == 0) {
            let (g, s, t) = ext_gcd(x, y);
            debug_assert_eq!(g.abs(), 1);
            let u = [[s * g, t * g], [-y, x]];
            apply(&mut cur, &mut ops, SymplecticMat::rotation(u).expect("unimodular"));
        }
        euclid(&mut cur, &mut ops, 1, 1);
        debug_assert!(cur.is_upper_triangular());
        let mut out: Vec<SymplecticMat> = ops.iter().map(SymplecticMat::inverse).collect();
        out.push(cur);
        merge_adjacent(out)
    }

    /// κ(M)², folded from the block-triangular factorization.
    pub fn kappa_sq(&self) -> CycRat {
        kappa_sq_of(&self.decompose_triangular())
    }
}

fn merge_adjacent(v: Vec<SymplecticMat>) -> Vec<SymplecticMat> {
    let mut out: Vec<SymplecticMat> = Vec::new();
    for m in v {
        if let Some(last) = out.last_mut() {
            let p = last.mul(&m);
            let same_kind = (last.is_upper_triangular() && m.is_upper_triangular())
                || (last.is_lower_triangular() && m.is_lower_triangular());
            if same_kind {
                *last = p;
                continue;
            }
        }
        out.push(m);
    }
    out.retain(|m| !m.is_identity());
    if out.is_empty() {
        out.push(SymplecticMat::identity());
    }
    out
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        return (a, 1, 0);
    }
    let (g, s, t) = ext_gcd(b, a.rem_euclid(b));
    (g, t, s - a.div_euclid(b) * t)
}

/// κ² of the product M1·M2·…·Mr of block-triangular factors.
pub fn kappa_sq_of(factors: &[SymplecticMat]) -> CycRat {
    let mut it = factors.iter().rev();
    let Some(last) = it.next() else {
        return CycRat::one();
    };
    let tri = |m: &SymplecticMat| {
        debug_assert!(m.is_triangular());
        CycRat::int(det2(&m.blocks().3))
    };
    let mut p = *last;
    let mut k = tri(last);
    for m in it {
        let m0 = p.char_action_int(&[0, 0, 0, 0]);
        let phase = CycRat::e(&(&Rat::int(2) * &m.phi(&m0))).expect("eighth roots");
        k = &(&k * &tri(m)) * &phase;
        p = m.mul(&p);
    }
    k
}

impl fmt::Display for SymplecticMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.name() {
            return write!(f, "{n}");
        }
        let rows: Vec<String> = self.m.iter().map(|r| format!("{r:?}")).collect();
        write!(f, "[{}]", rows.join(", "))
    }
}

impl FromStr for SymplecticMat {
    type Err = Error;
    /// A named matrix (`M1`, `K`, ...) or 16 comma-separated integers in row-major order.
    fn from_str(s: &str) -> Result<SymplecticMat> {
        if let Ok(m) = SymplecticMat::by_name(s.trim()) {
            return Ok(m);
        }
        let v: Vec<i64> = s
            .trim_matches(|c| c == '[' || c == ']')
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<i64>().map_err(|_| Error::Parse(format!("matrix entry {t:?}"))))
            .collect::<Result<_>>()?;
        SymplecticMat::from_row_major(&v)
    }
}

impl Serialize for SymplecticMat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymplecticMat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        SymplecticMat::from_row_major(&v).map_err(serde::de::Error::custom)
    }
}

/// Result of slashing a product of theta constants: factor · Π θ_{chars_out}.
#[derive(Clone, Debug, PartialEq)]
pub struct SlashFactor {
    pub factor: CycRat,
    pub chars_out: Vec<ThetaChar>,
}

/// (Π θ_{n_i})|_t[M] for an even number 2t of degree-2 theta constants.
pub fn slash_theta_product(chars: &[ThetaChar], m: &SymplecticMat) -> Result<SlashFactor> {
    if chars.len() % 2 != 0 {
        return Err(Error::OddThetaProduct(chars.len()));
    }
    let ksq = m.kappa_sq();
    let mut factor = ksq.pow((chars.len() / 2) as u32);
    let mut out = Vec::with_capacity(chars.len());
    for n in chars {
        if n.degree() != 2 {
            return Err(Error::InvalidCharacteristic(n.to_string()));
        }
        let ni = n.to_ints();
        let src = ThetaChar::all(2)
            .into_iter()
            .find(|c| m.char_action(c) == *n)
            .ok_or_else(|| Error::Internal("characteristic action is not surjective".into()))?;
        let si = src.to_ints();
        let src4 = [si[0], si[1], si[2], si[3]];
        let v = m.char_action_int(&src4);
        // v = n + 2k and θ_v = (-1)^{n'·k''} θ_n
        let k2 = [(v[2] - ni[2]) / 2, (v[3] - ni[3]) / 2];
        if (ni[0] * k2[0] + ni[1] * k2[1]).rem_euclid(2) == 1 {
            factor = -factor;
        }
        factor = &factor * &CycRat::e(&m.phi(&src4))?;
        out.push(src);
    }
    Ok(SlashFactor { factor, chars_out: out })
}

/// Groups with hard-coded coset data.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupId {
    Gamma2,
    Gamma0_2,
    Gamma0_3Psi,
    Gamma0_4Psi,
    Gamma00_2Psi,
}

impl GroupId {
    pub const ALL: [GroupId; 5] =
        [GroupId::Gamma2, GroupId::Gamma0_2, GroupId::Gamma0_3Psi, GroupId::Gamma0_4Psi, GroupId::Gamma00_2Psi];

    pub fn id(self) -> &'static str {
        match self {
            GroupId::Gamma2 => "gamma2",
            GroupId::Gamma0_2 => "gamma0_2",
            GroupId::Gamma0_3Psi => "gamma0_3psi",
            GroupId::Gamma0_4Psi => "gamma0_4psi",
            GroupId::Gamma00_2Psi => "gamma00_2psi",
        }
    }

    /// Prefix of this group's names in the form and identity registries.
    pub fn prefix(self) -> &'static str {
        match self {
            GroupId::Gamma2 => "level1",
            GroupId::Gamma0_2 => "level2",
            GroupId::Gamma0_3Psi => "level3",
            GroupId::Gamma0_4Psi => "level4.g04",
            GroupId::Gamma00_2Psi => "level4.g002",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            GroupId::Gamma2 => "Γ2",
            GroupId::Gamma0_2 => "Γ0(2)",
            GroupId::Gamma0_3Psi => "Γ0(3)^ψ",
            GroupId::Gamma0_4Psi => "Γ0(4)^ψ",
            GroupId::Gamma00_2Psi => "Γ0^0(2)^ψ",
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for GroupId {
    type Err = Error;
    fn from_str(s: &str) -> Result<GroupId> {
        let t = s.trim().to_ascii_lowercase();
        GroupId::ALL
            .into_iter()
            .find(|g| g.id() == t || g.prefix() == t)
            .ok_or_else(|| Error::UnknownName(format!("group {s}")))
    }
}

/// Representatives used for the Witt condition of each group.
pub fn coset_reps(g: GroupId) -> Vec<SymplecticMat> {
    let id = SymplecticMat::identity();
    match g {
        GroupId::Gamma2 => vec![id],
        GroupId::Gamma0_2 => vec![id, SymplecticMat::m1()],
        GroupId::Gamma0_3Psi => vec![id, SymplecticMat::k()],
        GroupId::Gamma0_4Psi => vec![id, SymplecticMat::m1(), SymplecticMat::m1().pow(2)],
        GroupId::Gamma00_2Psi => vec![id, SymplecticMat::m1(), SymplecticMat::m2(), SymplecticMat::m3()],
    }
}

/// The four families of right coset representatives of Γ0(p) in Sp(2, Z), with a, b, c mod p.
/// Entries that fail the symplectic check are reported as errors.
pub fn gamma0p_right_reps(p: i64) -> Vec<Result<SymplecticMat>> {
    let mut out = Vec::new();
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                out.push(SymplecticMat::new([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, a, b], [0, -1, b, c]]));
            }
        }
    }
    for a in 0..p {
        for b in 0..p {
            out.push(SymplecticMat::new([[0, 0, 1, 0], [0, 1, 0, 0], [-1, b, a, 0], [0, 0, b, 1]]));
        }
    }
    for a in 0..p {
        out.push(SymplecticMat::new([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, -1, 0, a]]));
    }
    out.push(Ok(SymplecticMat::identity()));
    out
}

pub(crate) fn c2_mul(x: &[[Complex64; 2]; 2], y: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

pub(crate) fn c2_inv(x: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = x[0][0] * x[1][1] - x[0][1] * x[1][0];
    [[x[1][1] / det, -x[0][1] / det], [-x[1][0] / det, x[0][0] / det]]
}

pub(crate) fn c2_det(x: &[[Complex64; 2]; 2]) -> Complex64 {
    x[0][0] * x[1][1] - x[0][1] * x[1][0]
}

/// det(Cτ + D).
pub fn automorphy_det(m: &SymplecticMat, tau: &[[Complex64; 2]; 2]) -> Complex64 {
    let (_, _, c, d) = m.blocks_c();
    let ct = c2_mul(&c, tau);
    let s = [[ct[0][0] + d[0][0], ct[0][1] + d[0][1]], [ct[1][0] + d[1][0], ct[1][1] + d[1][1]]];
    c2_det(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_sym() -> impl Strategy<Value = M2> {
        (-3i64..4, -3i64..4, -3i64..4).prop_map(|(a, b, c)| [[a, b], [b, c]])
    }

    fn arb_mat() -> impl Strategy<Value = SymplecticMat> {
        proptest::collection::vec((0u8..3, arb_sym()), 1..6).prop_map(|ops| {
            ops.into_iter().fold(SymplecticMat::identity(), |acc, (k, s)| {
                let op = match k {
                    0 => SymplecticMat::upper(s),
                    1 => SymplecticMat::lower(s),
                    _ => SymplecticMat::j(),
                };
                acc.mul(&op)
            })
        })
    }

    #[test]
    fn named_matrices_are_symplectic() {
        for n in ["J", "K", "M1", "M2", "M3", "I", "M1^2"] {
            SymplecticMat::by_name(n).unwrap();
        }
        assert!(SymplecticMat::new([[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]).is_err());
        assert_eq!(SymplecticMat::k().rows(), [[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 1], [0, 1, 1, 0]]);
    }

    #[test]
    fn right_reps_count() {
        for p in [2, 3] {
            let reps = gamma0p_right_reps(p);
            assert_eq!(reps.len() as i64, p * p * p + p * p + p + 1);
        }
    }

    #[test]
    fn decomposition_of_j_and_k() {
        let d = SymplecticMat::j().decompose_triangular();
        assert_eq!(d.len(), 3);
        assert_eq!(d.iter().fold(SymplecticMat::identity(), |a, m| a.mul(m)), SymplecticMat::j());
        let dk = SymplecticMat::k().decompose_triangular();
        assert_eq!(dk.len(), 4);
        assert_eq!(&dk[..3], &d[..]);
        assert_eq!(dk[3], SymplecticMat::m2());
    }

    #[test]
    fn kappa_of_triangular() {
        let m = SymplecticMat::rotation([[0, 1], [1, 0]]).unwrap();
        assert_eq!(m.kappa_sq(), CycRat::int(-1));
        assert_eq!(SymplecticMat::identity().kappa_sq(), CycRat::one());
    }

    #[test]
    fn char_action_is_mod2_action() {
        let ms = [SymplecticMat::j(), SymplecticMat::m1(), SymplecticMat::m3(), SymplecticMat::k()];
        for a in &ms {
            for b in &ms {
                for m in ThetaChar::all(2) {
                    assert_eq!(a.mul(b).char_action(&m), a.char_action(&b.char_action(&m)));
                }
            }
        }
    }

    #[test]
    fn odd_product_rejected() {
        let c: ThetaChar = "0000".parse().unwrap();
        assert!(matches!(slash_theta_product(&[c], &SymplecticMat::m1()), Err(Error::OddThetaProduct(1))));
    }

    #[test]
    fn identity_slash_is_trivial() {
        let cs: Vec<ThetaChar> = ["0000", "0110", "1001", "1111"].iter().map(|s| s.parse().unwrap()).collect();
        let r = slash_theta_product(&cs, &SymplecticMat::identity()).unwrap();
        assert_eq!(r.factor, CycRat::one());
        assert_eq!(r.chars_out, cs);
    }

    proptest! {
        #[test]
        fn decomposition_multiplies_back(m in arb_mat()) {
            let d = m.decompose_triangular();
            prop_assert!(d.iter().all(SymplecticMat::is_triangular));
            prop_assert_eq!(d.iter().fold(SymplecticMat::identity(), |a, x| a.mul(x)), m);
        }

        #[test]
        fn kappa_is_decomposition_independent(m in arb_mat(), s in arb_sym(), t in arb_sym()) {
            // M = (M X^{-1}) X with X triangular gives a second factorization
            let x = SymplecticMat::upper(s).mul(&SymplecticMat::lower(t));
            let mut alt = m.mul(&x.inverse()).decompose_triangular();
            alt.push(SymplecticMat::upper(s));
            alt.push(SymplecticMat::lower(t));
            prop_assert_eq!(alt.iter().fold(SymplecticMat::identity(), |a, y| a.mul(y)), m);
            prop_assert_eq!(kappa_sq_of(&alt), m.kappa_sq());
        }

        #[test]
        fn kappa_cocycle_with_inverse(m in arb_mat()) {
            let inv = m.inverse();
            let m0 = inv.char_action_int(&[0, 0, 0, 0]);
            let ph = CycRat::e(&(&Rat::int(2) * &m.phi(&m0))).unwrap();
            prop_assert_eq!(&(&m.kappa_sq() * &inv.kappa_sq()) * &ph, CycRat::one());
        }

        #[test]
        fn kappa_sq_is_fourth_root(m in arb_mat()) {
            prop_assert_eq!(m.kappa_sq().pow(4), CycRat::one());
        }

        #[test]
        fn slash_factor_is_root_of_unity(m in arb_mat(), idx in proptest::collection::vec(0usize..10, 2..7)) {
            let even = ThetaChar::even(2);
            let mut chars: Vec<ThetaChar> = idx.iter().map(|&i| even[i]).collect();
            if chars.len() % 2 == 1 { chars.pop(); }
            let r = slash_theta_product(&chars, &m).unwrap();
            prop_assert_eq!(r.factor.pow(24), CycRat::one());
            prop_assert!(r.chars_out.iter().all(ThetaChar::is_even));
        }
    }
}
