//! Named forms for the five groups, Hilbert series data, and exact rank.
//!
//! Every form is an [`Expr`]: base generators are polynomial leaves in theta
//! constants or lattice thetas, everything else is built from them. Names are
//! namespaced by group prefix (`level2.K6`, `level4.g002.d3`); unprefixed names
//! are global (`theta_0110`, `A`, `F1`, `delta`, `c4`).

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::coeff::CycRat;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Atom, Expr, ExprRef, Fixed, Leaf, Poly, Var};
use crate::series::{ExpKey, FourierSeries};
use crate::symplectic::{coset_reps, GroupId, SymplecticMat};
use crate::theta::{Lattice, ThetaChar};

/// Sign making the leading coefficient of χ5 equal to -1 at e((τ11 + τ12 + τ22)/2).
pub const CHI5_SIGN: i64 = 1;

/// Registry of named expressions.
pub struct Library {
    map: BTreeMap<String, ExprRef>,
}

fn even_chars() -> Vec<String> {
    ThetaChar::even(2).iter().map(|c| format!("theta_{c}")).collect()
}

impl Library {
    /// The shared catalog of all groups.
    pub fn standard() -> &'static Library {
        static LIB: OnceLock<Library> = OnceLock::new();
        LIB.get_or_init(|| Library::build().expect("catalog definitions parse"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<ExprRef> {
        self.map.get(name).cloned().ok_or_else(|| {
            let close: Vec<&str> = self.names().filter(|n| n.ends_with(name) || n.contains(name)).take(8).collect();
            Error::UnknownName(if close.is_empty() { name.to_string() } else { format!("{name} (did you mean: {})", close.join(", ")) })
        })
    }

    /// Look up `scope.name`, then each shorter scope prefix, then `name`.
    pub fn resolve(&self, name: &str, scope: &str) -> Option<ExprRef> {
        let mut s = scope;
        loop {
            if !s.is_empty() {
                if let Some(e) = self.map.get(&format!("{s}.{name}")) {
                    return Some(e.clone());
                }
            }
            match s.rfind('.') {
                Some(i) => s = &s[..i],
                None if !s.is_empty() => s = "",
                None => return self.map.get(name).cloned(),
            }
        }
    }

    pub fn parse(&self, src: &str, scope: &str) -> Result<ExprRef> {
        parse_expr(src, &|n| self.resolve(n, scope))
    }

    fn insert(&mut self, name: String, e: ExprRef) {
        self.map.insert(name, e);
    }

    fn atom(&mut self, name: &str, a: Atom) {
        self.insert(name.to_string(), Expr::leaf(Leaf::new(name, Poly::atom(a))));
    }

    /// A slashable leaf defined by a polynomial in atoms.
    fn poly(&mut self, scope: &str, name: &str, src: &str) -> Result<()> {
        let full = format!("{scope}.{name}");
        let p = self.parse(src, scope)?.to_poly()?;
        self.insert(full.clone(), Expr::leaf(Leaf::new(full, p)));
        Ok(())
    }

    /// An expression alias.
    fn def(&mut self, scope: &str, name: &str, src: &str) -> Result<()> {
        let e = self.parse(src, scope)?;
        self.insert(format!("{scope}.{name}"), e);
        Ok(())
    }

    fn build() -> Result<Library> {
        let mut lib = Library { map: BTreeMap::new() };
        for c in ThetaChar::all(2) {
            lib.atom(&format!("theta_{c}"), Atom::Theta(c));
        }
        for l in Lattice::ALL {
            lib.atom(&format!("theta_{}", l.name()), Atom::lattice(l));
            lib.atom(&format!("theta_{}_deg2", l.name()), Atom::lattice(l));
            lib.atom(&format!("theta_{}_deg1", l.name()), Atom::Fixed(Fixed::Lattice1(l, Var::T11)));
        }
        for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            lib.atom(&format!("theta1_{p}{q}"), Atom::Fixed(Fixed::Theta1(p, q, Var::T11)));
            lib.atom(&format!("theta1_{p}{q}_t22"), Atom::Fixed(Fixed::Theta1(p, q, Var::T22)));
        }
        for (up, lo, (p, q)) in [("A", "a", (0, 0)), ("B", "b", (0, 1)), ("C", "c", (1, 0))] {
            lib.atom(up, Atom::Fixed(Fixed::Theta1(p, q, Var::T11)));
            lib.atom(lo, Atom::Fixed(Fixed::Theta1(p, q, Var::T22)));
        }
        lib.atom("F1", Atom::Fixed(Fixed::Lattice1(Lattice::A2, Var::T11)));
        lib.atom("F2", Atom::Fixed(Fixed::Lattice1(Lattice::E6, Var::T11)));
        lib.atom("G1", Atom::Fixed(Fixed::Lattice1(Lattice::A2, Var::T22)));
        lib.atom("G2", Atom::Fixed(Fixed::Lattice1(Lattice::E6, Var::T22)));
        lib.atom("x0", Atom::Fixed(Fixed::Gamma3(0, Var::T11)));
        lib.atom("x1", Atom::Fixed(Fixed::Gamma3(1, Var::T11)));
        lib.atom("y0", Atom::Fixed(Fixed::Gamma3(0, Var::T22)));
        lib.atom("y1", Atom::Fixed(Fixed::Gamma3(1, Var::T22)));
        lib.atom("gamma3_theta0", Atom::Fixed(Fixed::Gamma3(0, Var::T11)));
        lib.atom("gamma3_theta1", Atom::Fixed(Fixed::Gamma3(1, Var::T11)));
        lib.atom("delta", Atom::Fixed(Fixed::Delta(Var::T11)));
        lib.atom("delta_t22", Atom::Fixed(Fixed::Delta(Var::T22)));
        lib.atom("c4", Atom::Fixed(Fixed::HarmonicC4));
        lib.atom("c4_harmonic", Atom::Fixed(Fixed::HarmonicC4));

        let ten = even_chars().join(" ");

        // level one
        let s = "level1";
        lib.def(s, "phi4", "theta_E8")?;
        lib.poly(s, "chi10", &format!("(/ (^ (* {ten}) 2) 4096)"))?;
        lib.poly(s, "chi5", &format!("(* {CHI5_SIGN}/64 {ten})"))?;

        // level two
        let s = "level2";
        lib.poly(s, "X2", "(/ (+ (^ theta_0000 4) (^ theta_0001 4) (^ theta_0010 4) (^ theta_0011 4)) 4)")?;
        lib.poly(s, "Y4", "(^ (* theta_0000 theta_0001 theta_0010 theta_0011) 2)")?;
        lib.poly(s, "Z4", "(/ (^ (- (^ theta_0100 4) (^ theta_0110 4)) 2) 16384)")?;
        lib.poly(s, "K6", "(/ (^ (* theta_0100 theta_0110 theta_1000 theta_1001 theta_1100 theta_1111) 2) 4096)")?;
        lib.def(s, "chi19", "(/ (b4 X2 Y4 Z4 K6) 512)")?;
        lib.def(s, "chi10", "level1.chi10")?;
        lib.def(s, "H19", "(+ (* 1/38912 Y4 Z4 (b3 X2 Y4 Z4)) (* 1/38 K6 (b3 X2 Z4 K6)))")?;
        lib.def(s, "H19_printed", "(+ (* 1/4864 Y4 Z4 (b3 X2 Y4 Z4)) (* 1/19 K6 (b3 X2 Z4 K6)))")?;
        // slash table right-hand sides at M1
        lib.poly(s, "X2_M1", "(/ (+ (^ theta_0000 4) (^ theta_0110 4) (^ theta_1001 4) (^ theta_1111 4)) 4)")?;
        lib.poly(s, "Y4_M1", "(* -1 (^ (* theta_0000 theta_0110 theta_1001 theta_1111) 2))")?;
        lib.poly(s, "Z4_M1", "(/ (^ (- (^ theta_0110 4) (^ theta_0010 4)) 2) 16384)")?;
        lib.poly(s, "K6_M1", "(/ (^ (* theta_0100 theta_0010 theta_1000 theta_0001 theta_1100 theta_0011) 2) -4096)")?;

        // level three
        let s = "level3";
        lib.def(s, "a1", "theta_A2")?;
        lib.def(s, "b3", "theta_E6")?;
        lib.def(s, "E6s", "theta_E6s")?;
        lib.def(s, "phi4", "theta_E8")?;
        lib.def(s, "e3", "(+ b3 (* -12 (^ a1 3)) (* 27 E6s))")?;
        lib.def(s, "f3", "(+ (* -12 (^ a1 3)) (* 3 b3) (* 9 E6s))")?;
        lib.def(s, "c4", "(/ (+ (* -27 (^ a1 4)) (* 12 a1 b3) (* a1 e3) (- phi4)) 162)")?;
        lib.def(s, "c4_alt", "(/ (+ (* 12 a1 b3) (* -27 (^ a1 4)) (- phi4)) 162)")?;
        lib.def(s, "c4h", "c4_harmonic")?;
        lib.def(s, "beta3", "(+ b3 (* -10 (^ a1 3)) (* 9 E6s))")?;
        lib.def(s, "delta3", "(- b3 (* 9 E6s))")?;
        lib.def(s, "chi14", "(/ (b4 a1 beta3 c4 delta3) 30233088)")?;
        lib.def(s, "X14", "(b4 a1 b3 c4 e3)")?;
        lib.def(s, "chi10", "level1.chi10")?;
        lib.def(s, "H14", "(+ (* -1/108864 e3 f3 (b3 a1 b3 e3)) (* -1/84 a1 c4 (b3 a1 b3 phi4)))")?;
        lib.def(s, "H14_printed", "(+ (* -1/108864 e3 f3 (b3 a1 b3 e3)) (* 1/84 a1 c4 (b3 a1 b3 phi4)))")?;
        for f in ["a1", "b3", "e3", "f3", "c4", "phi4", "E6s"] {
            lib.def(s, &format!("{f}s"), &format!("(slash K {f})"))?;
        }

        // level four, Γ0(4)^ψ
        let s = "level4.g04";
        let q = ["theta_0000", "theta_0001", "theta_0010", "theta_0011"];
        let power_sum = |k: u32| format!("(+ {})", q.iter().map(|t| format!("(^ {t} {k})")).collect::<Vec<_>>().join(" "));
        lib.poly(s, "a1", &power_sum(2))?;
        lib.poly(s, "b2", &power_sum(4))?;
        lib.poly(s, "c2", "(* theta_0000 theta_0001 theta_0010 theta_0011)")?;
        lib.poly(s, "d3", &power_sum(6))?;
        lib.def(s, "f3", "(+ d3 (* 1/2 a1 (- (^ a1 2) (* 3 b2) (* 6 c2))))")?;
        lib.def(s, "g3", "(+ d3 (* 1/2 a1 (+ (^ a1 2) (* -3 b2) (* 6 c2))))")?;
        lib.def(
            s,
            "F0",
            "(+ (* -1/6 (^ a1 5)) (* 5/6 (^ a1 3) b2) (- (* a1 (^ b2 2))) (* -1/3 (^ a1 2) d3) (* 8 a1 (^ c2 2)) (* 2/3 b2 d3))",
        )?;
        lib.def(s, "X11", "(b4 a1 b2 c2 d3)")?;
        lib.def(s, "chi11", "(/ X11 -786432)")?;
        lib.def(s, "H11", "(* -3/352 F0 (b3 a1 b2 c2))")?;
        lib.def(s, "H11_printed", "(* 3/176 F0 (b3 a1 b2 c2))")?;
        lib.def(s, "K6", "level2.K6")?;
        lib.def(s, "chi10", "level1.chi10")?;
        lib.poly(s, "a1_M1", "(+ (^ theta_0000 2) (^ theta_1001 2) (^ theta_0110 2) (- (^ theta_1111 2)))")?;
        lib.poly(s, "b2_M1", "(+ (^ theta_0000 4) (^ theta_1001 4) (^ theta_0110 4) (^ theta_1111 4))")?;
        lib.poly(s, "c2_M1", "(* (e -1/4) theta_0000 theta_1001 theta_0110 theta_1111)")?;
        lib.poly(s, "d3_M1", "(+ (^ theta_0000 6) (^ theta_1001 6) (^ theta_0110 6) (- (^ theta_1111 6)))")?;

        // level four, Γ0^0(2)^ψ
        let s = "level4.g002";
        lib.poly(s, "a1", "(^ theta_0000 2)")?;
        lib.poly(s, "b2", &power_sum(4))?;
        lib.poly(s, "c2", "(+ (^ theta_0000 4) (^ theta_0100 4) (^ theta_1000 4) (^ theta_1100 4))")?;
        lib.poly(s, "d3", "(^ (* theta_0001 theta_0010 theta_0011) 2)")?;
        lib.poly(s, "f3", "(^ (* theta_0110 theta_1001 theta_1111) 2)")?;
        lib.poly(s, "g3", "(^ (* theta_0100 theta_1000 theta_1100) 2)")?;
        lib.def(s, "f3_poly", "(+ (- d3) (* -2 (^ a1 3)) (* 2/3 a1 b2) (* 1/3 a1 c2))")?;
        lib.def(s, "g3_poly", "(+ d3 (* -1/3 a1 b2) (* 1/3 a1 c2))")?;
        lib.def(s, "F1", "(* -1/9 a1 (+ (* -6 (^ a1 2) b2) (* 6 (^ a1 2) c2) (* 2 (^ b2 2)) (- (* b2 c2)) (- (^ c2 2))))")?;
        lib.def(
            s,
            "F2",
            "(+ (* 4 (^ a1 4)) (* -8/9 (^ b2 2)) (* 2 (^ a1 2) c2) (* -14/9 b2 c2) (* 4/9 (^ c2 2)) (* 18 a1 d3))",
        )?;
        lib.def(
            s,
            "F3",
            "(+ (* -4 (^ a1 4)) (* 2/9 (^ b2 2)) (* -2 (^ a1 2) c2) (* 8/9 b2 c2) (* 8/9 (^ c2 2)) (* -6 a1 d3))",
        )?;
        lib.def(s, "F4", "d3")?;
        lib.def(s, "H", "(+ (* F1 (b3 a1 b2 c2)) (* F2 (b3 a1 b2 d3)) (* F3 (b3 a1 c2 d3)) (* F4 (b3 b2 c2 d3)))")?;
        lib.def(s, "X11", "(b4 a1 b2 c2 d3)")?;
        lib.def(s, "chi11", "(/ X11 -786432)")?;
        lib.def(s, "H11", "(/ H 176)")?;
        lib.def(s, "K6", "level2.K6")?;
        lib.def(s, "Y4", "level2.Y4")?;
        lib.def(s, "chi10", "level1.chi10")?;
        lib.poly(s, "b2_M1", "(+ (^ theta_0000 4) (^ theta_1001 4) (^ theta_0110 4) (^ theta_1111 4))")?;
        lib.poly(s, "d3_M1", "(* -1 (^ (* theta_0110 theta_1001 theta_1111) 2))")?;
        lib.poly(s, "c2_M2", "(+ (^ theta_0000 4) (^ theta_0110 4) (^ theta_1001 4) (^ theta_1111 4))")?;
        lib.poly(s, "a1_M3", "(^ theta_1111 2)")?;
        lib.poly(s, "b2_M3", "(+ (^ theta_1111 4) (^ theta_1001 4) (^ theta_0110 4) (^ theta_0000 4))")?;
        lib.poly(s, "c2_M3", "(+ (^ theta_1111 4) (- (^ theta_1000 4)) (- (^ theta_0100 4)) (^ theta_0011 4))")?;
        lib.poly(s, "d3_M3", "(* -1 (^ (* theta_0000 theta_0110 theta_1001) 2))")?;
        Ok(lib)
    }
}

/// Which graded object a Hilbert series describes.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Space {
    /// The ring A^I of type-I forms.
    AI,
    /// Type-I Jacobi forms.
    JI,
    /// Type-II Jacobi forms.
    JII,
}

impl std::str::FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Space> {
        match s.to_ascii_uppercase().replace(['^', '_'], "").as_str() {
            "AI" | "A" => Ok(Space::AI),
            "JI" => Ok(Space::JI),
            "JII" => Ok(Space::JII),
            _ => Err(Error::Config(format!("unknown space {s:?} (expected AI, JI or JII)"))),
        }
    }
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::AI => "AI",
            Space::JI => "JI",
            Space::JII => "JII",
        }
    }
}

/// Numerator exponents over Π (1 - t^d).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HilbertData {
    pub numerator: Vec<u32>,
    pub denominator: Vec<u32>,
}

impl HilbertData {
    /// Coefficients of t^0..t^k.
    pub fn coeffs(&self, k: usize) -> Vec<i64> {
        let mut c = vec![0i64; k + 1];
        for &e in &self.numerator {
            if (e as usize) <= k {
                c[e as usize] += 1;
            }
        }
        for &d in &self.denominator {
            let d = d as usize;
            for i in d..=k {
                c[i] += c[i - d];
            }
        }
        c
    }
}

/// Per-group data.
#[derive(Clone, Debug)]
pub struct GroupCatalog {
    pub group: GroupId,
    /// (name, weight) of the polynomial generators of A^I.
    pub ring_generators: Vec<(String, i64)>,
    pub coset_reps: Vec<SymplecticMat>,
    pub hilbert_ai: HilbertData,
    pub hilbert_ji: HilbertData,
    pub hilbert_jii: HilbertData,
    /// Ring generators available here (level one lacks φ6 and χ12).
    pub in_scope_ring: Vec<(String, i64)>,
}

impl GroupCatalog {
    pub fn hilbert(&self, s: Space) -> &HilbertData {
        match s {
            Space::AI => &self.hilbert_ai,
            Space::JI => &self.hilbert_ji,
            Space::JII => &self.hilbert_jii,
        }
    }

    pub fn qualify(&self, name: &str) -> String {
        format!("{}.{name}", self.group.prefix())
    }

    pub fn form(&self, name: &str) -> Result<ExprRef> {
        Library::standard().resolve(name, self.group.prefix()).ok_or_else(|| Error::UnknownName(self.qualify(name)))
    }
}

fn gens(v: &[(&str, i64)]) -> Vec<(String, i64)> {
    v.iter().map(|(n, k)| (n.to_string(), *k)).collect()
}

fn hd(num: &[u32], den: &[u32]) -> HilbertData {
    HilbertData { numerator: num.to_vec(), denominator: den.to_vec() }
}

/// Catalog for one group (forms are resolved lazily through [`Library::standard`]).
pub fn build_catalog(g: GroupId) -> GroupCatalog {
    let reps = coset_reps(g);
    match g {
        GroupId::Gamma2 => GroupCatalog {
            group: g,
            ring_generators: gens(&[("phi4", 4), ("phi6", 6), ("chi10", 10), ("chi12", 12)]),
            in_scope_ring: gens(&[("phi4", 4), ("chi10", 10)]),
            coset_reps: reps,
            hilbert_ai: hd(&[0], &[4, 6, 10, 12]),
            hilbert_ji: hd(&[4, 6, 10, 12], &[4, 6, 10, 12]),
            hilbert_jii: hd(&[21, 27, 29, 35], &[4, 6, 10, 12]),
        },
        GroupId::Gamma0_2 => GroupCatalog {
            group: g,
            ring_generators: gens(&[("X2", 2), ("Y4", 4), ("Z4", 4), ("K6", 6)]),
            in_scope_ring: gens(&[("X2", 2), ("Y4", 4), ("Z4", 4), ("K6", 6)]),
            coset_reps: reps,
            hilbert_ai: hd(&[0], &[2, 4, 4, 6]),
            hilbert_ji: hd(&[2, 4, 4, 6], &[2, 4, 4, 6]),
            hilbert_jii: hd(&[13, 15, 17, 19], &[2, 4, 4, 6]),
        },
        GroupId::Gamma0_3Psi => GroupCatalog {
            group: g,
            ring_generators: gens(&[("a1", 1), ("b3", 3), ("e3", 3), ("phi4", 4)]),
            in_scope_ring: gens(&[("a1", 1), ("b3", 3), ("e3", 3), ("phi4", 4)]),
            coset_reps: reps,
            hilbert_ai: hd(&[0], &[1, 3, 3, 4]),
            hilbert_ji: hd(&[1, 3, 4, 6], &[1, 3, 3, 4]),
            hilbert_jii: hd(&[9, 11, 12, 14], &[1, 3, 3, 4]),
        },
        GroupId::Gamma0_4Psi => GroupCatalog {
            group: g,
            ring_generators: gens(&[("a1", 1), ("b2", 2), ("c2", 2), ("d3", 3)]),
            in_scope_ring: gens(&[("a1", 1), ("b2", 2), ("c2", 2), ("d3", 3)]),
            coset_reps: reps,
            hilbert_ai: hd(&[0], &[1, 2, 2, 3]),
            hilbert_ji: hd(&[1, 2, 3, 4], &[1, 2, 2, 3]),
            hilbert_jii: hd(&[7, 9, 11, 11], &[1, 2, 2, 3]),
        },
        GroupId::Gamma00_2Psi => GroupCatalog {
            group: g,
            ring_generators: gens(&[("a1", 1), ("b2", 2), ("c2", 2), ("d3", 3)]),
            in_scope_ring: gens(&[("a1", 1), ("b2", 2), ("c2", 2), ("d3", 3)]),
            coset_reps: reps,
            hilbert_ai: hd(&[0], &[1, 2, 2, 3]),
            hilbert_ji: hd(&[1, 2, 2, 3], &[1, 2, 2, 3]),
            hilbert_jii: hd(&[9, 10, 10, 11], &[1, 2, 2, 3]),
        },
    }
}

/// Power-series coefficients t^0..t^k of the closed-form generating function.
pub fn hilbert_coeffs(g: GroupId, s: Space, k: usize) -> Vec<i64> {
    build_catalog(g).hilbert(s).coeffs(k)
}

/// All exponent vectors of weight `k` in generators of the given weights.
pub fn monomials_of_weight(weights: &[i64], k: i64) -> Vec<Vec<u32>> {
    fn rec(w: &[i64], k: i64, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if w.is_empty() {
            if k == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let mut e = 0;
        while e as i64 * w[0] <= k {
            cur.push(e);
            rec(&w[1..], k - e as i64 * w[0], cur, out);
            cur.pop();
            e += 1;
        }
    }
    let mut out = Vec::new();
    if k >= 0 {
        rec(weights, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Product of generators raised to the given exponents (the constant 1 for the empty monomial).
pub fn monomial_expr(gens: &[ExprRef], exps: &[u32]) -> Result<ExprRef> {
    let mut factors = Vec::new();
    for (g, &e) in gens.iter().zip(exps) {
        if e > 0 {
            factors.push(Expr::pow(g.clone(), e)?);
        }
    }
    if factors.is_empty() {
        return Ok(Expr::constant(CycRat::one()));
    }
    Expr::product(factors)
}

// ---------------------------------------------------------------------------
// Linear algebra

/// Dense matrix over Q(ζ24).
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    pub rows: Vec<Vec<CycRat>>,
    pub ncols: usize,
}

impl RationalMatrix {
    /// Coefficient vectors of the series on the union of their keys inside the N-box.
    pub fn from_series(rows: &[Vec<&FourierSeries>], n: u32) -> Result<RationalMatrix> {
        let denom = rows.iter().flatten().try_fold(1u32, |d, s| {
            let l = num_integer::lcm(d, s.denom());
            if 24 % l != 0 {
                return Err(Error::UnsupportedConductor(l as i64));
            }
            Ok(l)
        })?;
        let ncomp = rows.first().map_or(0, Vec::len);
        let mut keys: Vec<BTreeMap<ExpKey, usize>> = vec![BTreeMap::new(); ncomp];
        let lifted: Vec<Vec<FourierSeries>> = rows
            .iter()
            .map(|r| r.iter().map(|s| s.truncate(n).and_then(|t| t.lift(denom))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        for r in &lifted {
            if r.len() != ncomp {
                return Err(Error::Internal("ragged rows".into()));
            }
            for (i, s) in r.iter().enumerate() {
                for (k, _) in s.terms() {
                    keys[i].insert(*k, 0);
                }
            }
        }
        let mut offset = 0;
        for km in keys.iter_mut() {
            for v in km.values_mut() {
                *v = offset;
                offset += 1;
            }
        }
        let out = lifted
            .iter()
            .map(|r| {
                let mut v = vec![CycRat::zero(); offset];
                for (i, s) in r.iter().enumerate() {
                    for (k, c) in s.terms() {
                        v[keys[i][k]] = c.clone();
                    }
                }
                v
            })
            .collect();
        Ok(RationalMatrix { rows: out, ncols: offset })
    }

    /// Exact rank by Gaussian elimination with first-nonzero pivoting.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<CycRat>> = self.rows.clone();
        let mut rank = 0;
        let mut col = 0;
        while rank < rows.len() && col < self.ncols {
            let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
                col += 1;
                continue;
            };
            rows.swap(rank, p);
            let inv = rows[rank][col].inv().expect("nonzero pivot");
            let pivot: Vec<CycRat> = rows[rank].iter().map(|x| x * &inv).collect();
            for r in rank + 1..rows.len() {
                if rows[r][col].is_zero() {
                    continue;
                }
                let f = rows[r][col].clone();
                for c in col..self.ncols {
                    if !pivot[c].is_zero() {
                        let t = &f * &pivot[c];
                        rows[r][c] -= &t;
                    }
                }
            }
            rows[rank] = pivot;
            rank += 1;
            col += 1;
        }
        rank
    }

    /// Rank of the reduction modulo a prime p ≡ 1 (mod 24), a lower bound for the exact rank.
    /// Returns None if a denominator vanishes mod p.
    pub fn rank_mod_p(&self) -> Option<usize> {
        let (p, zeta) = modp::prime_and_root();
        let pows: Vec<u64> = (0..8).map(|i| modp::pow(zeta, i, p)).collect();
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let mut v = Vec::with_capacity(self.ncols);
            for x in r {
                v.push(modp::reduce_cyc(x, &pows, p)?);
            }
            rows.push(v);
        }
        Some(modp::rank(rows, self.ncols, p))
    }
}

/// Coefficients x with Σ x_i rows_i = target, or None if the system is inconsistent.
/// Free variables are set to zero.
pub fn solve_combination(rows: &[Vec<CycRat>], target: &[CycRat]) -> Option<Vec<CycRat>> {
    let n = rows.len();
    let mut eqs: Vec<Vec<CycRat>> = (0..target.len())
        .map(|j| rows.iter().map(|r| r[j].clone()).chain(std::iter::once(target[j].clone())).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..eqs.len()).find(|&i| !eqs[i][col].is_zero()) else { continue };
        eqs.swap(r, p);
        let inv = eqs[r][col].inv().expect("nonzero pivot");
        let pivot: Vec<CycRat> = eqs[r].iter().map(|x| x * &inv).collect();
        for (i, e) in eqs.iter_mut().enumerate() {
            if i == r || e[col].is_zero() {
                continue;
            }
            let f = e[col].clone();
            for c in col..=n {
                if !pivot[c].is_zero() {
                    let t = &f * &pivot[c];
                    e[c] -= &t;
                }
            }
        }
        eqs[r] = pivot;
        pivots.push(col);
        r += 1;
    }
    if eqs[r..].iter().any(|e| !e[n].is_zero()) {
        return None;
    }
    let mut x = vec![CycRat::zero(); n];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = eqs[i][n].clone();
    }
    Some(x)
}

/// Rank of the coefficient matrix of `rows` restricted to the N-box.
pub fn rank_over_field(rows: &[FourierSeries], n: u32) -> Result<usize> {
    let r: Vec<Vec<&FourierSeries>> = rows.iter().map(|s| vec![s]).collect();
    Ok(RationalMatrix::from_series(&r, n)?.rank())
}

mod modp {
    use crate::coeff::{CycRat, Rat};
    use num_bigint::BigInt;
    use num_traits::{ToPrimitive, Zero};
    use std::sync::OnceLock;

    pub fn mulm(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 * b as u128) % p as u128) as u64
    }

    pub fn pow(mut b: u64, mut e: u64, p: u64) -> u64 {
        let mut r = 1;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                r = mulm(r, b, p);
            }
            b = mulm(b, b, p);
            e >>= 1;
        }
        r
    }

    fn is_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            if n % q == 0 {
                return n == q;
            }
        }
        let mut d = n - 1;
        let mut s = 0;
        while d % 2 == 0 {
            d /= 2;
            s += 1;
        }
        'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            let mut x = pow(a, d, n);
            if x == 1 || x == n - 1 {
                continue;
            }
            for _ in 1..s {
                x = mulm(x, x, n);
                if x == n - 1 {
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// A prime p ≡ 1 (mod 24) below 2^62 and a primitive 24th root of unity mod p.
    pub fn prime_and_root() -> (u64, u64) {
        static PR: OnceLock<(u64, u64)> = OnceLock::new();
        *PR.get_or_init(|| {
            let mut p = (1u64 << 62) / 24 * 24 + 1;
            while !is_prime(p) {
                p -= 24;
            }
            for g in 2.. {
                let z = pow(g, (p - 1) / 24, p);
                if pow(z, 12, p) != 1 && pow(z, 8, p) != 1 {
                    return (p, z);
                }
            }
            unreachable!()
        })
    }

    fn big_mod(x: &BigInt, p: u64) -> u64 {
        let r = x % BigInt::from(p);
        let r = if r < BigInt::zero() { r + BigInt::from(p) } else { r };
        r.to_u64().unwrap()
    }

    fn reduce_rat(r: &Rat, p: u64) -> Option<u64> {
        let d = big_mod(&r.denom(), p);
        if d == 0 {
            return None;
        }
        Some(mulm(big_mod(&r.numer(), p), pow(d, p - 2, p), p))
    }

    pub fn reduce_cyc(x: &CycRat, pows: &[u64], p: u64) -> Option<u64> {
        if let Some(r) = x.as_rat() {
            return reduce_rat(r, p);
        }
        let mut acc = 0;
        for (c, z) in x.coords().iter().zip(pows) {
            if !c.is_zero() {
                acc = (acc + mulm(reduce_rat(c, p)?, *z, p)) % p;
            }
        }
        Some(acc)
    }

    pub fn rank(mut rows: Vec<Vec<u64>>, ncols: usize, p: u64) -> usize {
        let mut rank = 0;
        for col in 0..ncols {
            if rank == rows.len() {
                break;
            }
            let Some(piv) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else { continue };
            rows.swap(rank, piv);
            let inv = pow(rows[rank][col], p - 2, p);
            let pivot: Vec<u64> = rows[rank].iter().map(|&x| mulm(x, inv, p)).collect();
            for r in rank + 1..rows.len() {
                let f = rows[r][col];
                if f == 0 {
                    continue;
                }
                for c in col..ncols {
                    if pivot[c] != 0 {
                        rows[r][c] = (rows[r][c] + p - mulm(f, pivot[c], p)) % p;
                    }
                }
            }
            rows[rank] = pivot;
            rank += 1;
        }
        rank
    }
}

/// Coefficient vector for the leading-term reports: exponents as strings.
pub fn describe_leading(s: &FourierSeries) -> Vec<(String, String)> {
    s.leading_terms()
        .into_iter()
        .map(|(e, c)| (format!("({}, {}, {})", e[0], e[1], e[2]), c.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Engine;

    #[test]
    fn hilbert_expansion_matches_brute_force() {
        // frozen from an independent expansion of the closed form
        let h = hilbert_coeffs(GroupId::Gamma0_3Psi, Space::JI, 8);
        assert_eq!(&h[1..], &[1, 1, 2, 5, 6, 9, 15, 18]);
        let brute = |num: &[i64], den: &[i64], k: i64| -> i64 {
            num.iter().map(|&s| monomials_of_weight(den, k - s).len() as i64).sum()
        };
        for g in GroupId::ALL {
            let c = build_catalog(g);
            for s in [Space::AI, Space::JI, Space::JII] {
                let hdata = c.hilbert(s);
                let num: Vec<i64> = hdata.numerator.iter().map(|&x| x as i64).collect();
                let den: Vec<i64> = hdata.denominator.iter().map(|&x| x as i64).collect();
                let coeffs = hdata.coeffs(40);
                for k in 0..=40 {
                    assert_eq!(coeffs[k], brute(&num, &den, k as i64), "{g:?} {s:?} {k}");
                }
            }
        }
        let jii = hilbert_coeffs(GroupId::Gamma2, Space::JII, 21);
        assert!(jii[..21].iter().all(|&x| x == 0) && jii[21] == 1);
    }

    #[test]
    fn every_definition_resolves() {
        let lib = Library::standard();
        assert!(lib.get("level4.g04.f3").is_ok());
        assert!(lib.get("level3.c4s").is_ok());
        assert!(lib.get("nonexistent").is_err());
        assert_eq!(lib.resolve("K6", "level4.g002").unwrap().to_string(), "level2.K6");
        assert_eq!(lib.resolve("c4", "").unwrap().to_string(), "c4");
    }

    #[test]
    fn rank_small_cases() {
        let e = Engine::new(2);
        let lib = Library::standard();
        let f = e.eval_scalar(&lib.get("level2.X2").unwrap(), &SymplecticMat::identity()).unwrap();
        let g = f.scale(&CycRat::int(2));
        assert_eq!(rank_over_field(&[f.clone(), g], 2).unwrap(), 1);
        let y = e.eval_scalar(&lib.get("level2.Y4").unwrap(), &SymplecticMat::identity()).unwrap();
        let x2 = f.mul(&f).unwrap();
        let m = RationalMatrix::from_series(&[vec![&x2], vec![&y]], 2).unwrap();
        assert_eq!(m.rank(), 2);
        assert_eq!(m.rank_mod_p(), Some(2));
    }
}
