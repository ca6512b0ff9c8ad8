//! Jacobi forms of index one as ξ-pairs (f0, ĥ), with ĥ = ξ_{k,2}/(2πi)².
//!
//! Holomorphy is certified by the Witt condition
//! W(ĥ11|M + (1/k) ∂12(f0|M)) = 0 over the coset representatives of the group.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{build_catalog, hilbert_coeffs, monomials_of_weight, solve_combination, GroupCatalog, Library, RationalMatrix, Space};
use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};
use crate::expr::{Engine, Expr, ExprRef, Kind};
use crate::operators::{bracket2, WeightedForm};
use crate::series::{FourierSeries, Sym2Comp, Sym2Series};
use crate::symplectic::{coset_reps, GroupId, SymplecticMat};
use crate::theta::theta_second_kind;

/// Parity class of a Jacobi form.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum JType {
    I,
    II,
}

impl JType {
    pub fn space(self) -> Space {
        match self {
            JType::I => Space::JI,
            JType::II => Space::JII,
        }
    }
}

impl std::str::FromStr for JType {
    type Err = Error;
    fn from_str(s: &str) -> Result<JType> {
        match s.trim().to_ascii_uppercase().trim_start_matches("J^").trim_start_matches('J') {
            "I" | "1" => Ok(JType::I),
            "II" | "2" => Ok(JType::II),
            _ => Err(Error::Config(format!("unknown Jacobi type {s:?}"))),
        }
    }
}

/// A candidate image (f0, ĥ) of the ξ-map. `None` stands for zero.
#[derive(Clone, Debug)]
pub struct XiPair {
    pub name: String,
    pub f0: Option<ExprRef>,
    pub hhat: Option<ExprRef>,
    pub weight: i64,
    pub group: GroupId,
    pub jtype: JType,
}

impl XiPair {
    pub fn new(
        name: impl Into<String>,
        f0: Option<ExprRef>,
        hhat: Option<ExprRef>,
        weight: i64,
        group: GroupId,
        jtype: JType,
    ) -> Result<XiPair> {
        let name = name.into();
        let k = Rat::int(weight);
        if let Some(f) = &f0 {
            if f.kind != Kind::Scalar || f.weight.as_ref() != Some(&k) {
                return Err(Error::WeightMismatch(format!("{name}: f0 = {f} is not a scalar form of weight {weight}")));
            }
        }
        if let Some(h) = &hhat {
            if h.kind != Kind::Sym2 || h.weight.as_ref() != Some(&k) {
                return Err(Error::WeightMismatch(format!("{name}: hhat = {h} is not a Sym² form of weight {weight}")));
            }
        }
        if weight <= 0 {
            return Err(Error::WeightMismatch(format!("{name}: weight must be positive")));
        }
        Ok(XiPair { name, f0, hhat, weight, group, jtype })
    }

    /// Build from S-expressions resolved in the group's scope.
    pub fn parse(
        name: &str,
        group: GroupId,
        jtype: JType,
        weight: i64,
        f0: Option<&str>,
        hhat: Option<&str>,
    ) -> Result<XiPair> {
        let lib = Library::standard();
        let f0 = f0.map(|s| lib.parse(s, group.prefix())).transpose()?;
        let hhat = hhat.map(|s| lib.parse(s, group.prefix())).transpose()?;
        XiPair::new(name, f0, hhat, weight, group, jtype)
    }

    /// Full expansions of f0|M and ĥ|M.
    pub fn values(&self, engine: &Engine, m: &SymplecticMat) -> Result<(FourierSeries, Sym2Series)> {
        let n = engine.trunc();
        let f0 = match &self.f0 {
            Some(f) => engine.eval_scalar(f, m)?,
            None => FourierSeries::zero(1, n)?,
        };
        let h = match &self.hhat {
            Some(h) => engine.eval_sym2(h, m)?,
            None => Sym2Series::zero(1, n)?,
        };
        Ok((f0, h))
    }

    pub fn describe(&self) -> String {
        let show = |e: &Option<ExprRef>| e.as_ref().map_or("0".to_string(), |e| e.to_string());
        format!("{} = ({}, {}) weight {}", self.name, show(&self.f0), show(&self.hhat), self.weight)
    }
}

/// Residual W(ĥ11|M + (1/k) ∂12(f0|M)).
pub fn witt_residual(engine: &Engine, p: &XiPair, m: &SymplecticMat) -> Result<FourierSeries> {
    let mut acc = FourierSeries::zero(1, engine.trunc())?;
    if let Some(h) = &p.hhat {
        acc = acc.add(&*engine.jet_comp(h, Sym2Comp::H11, m, [0, 0, 0])?)?;
    }
    if let Some(f) = &p.f0 {
        let d = engine.jet(f, m, [0, 1, 0])?;
        acc = acc.add(&d.scale_rat(&Rat::frac(1, p.weight)))?;
    }
    Ok(acc)
}

/// Result of one Witt-condition check.
#[derive(Clone, Debug)]
pub struct WittOutcome {
    pub matrix: SymplecticMat,
    pub residual: FourierSeries,
}

impl WittOutcome {
    pub fn passed(&self) -> bool {
        self.residual.is_zero()
    }
}

pub fn witt_condition(engine: &Engine, p: &XiPair, m: &SymplecticMat) -> Result<WittOutcome> {
    Ok(WittOutcome { matrix: *m, residual: witt_residual(engine, p, m)? })
}

/// The Witt condition at every coset representative of the pair's group.
pub fn witt_all(engine: &Engine, p: &XiPair) -> Result<Vec<WittOutcome>> {
    coset_reps(p.group).iter().map(|m| witt_condition(engine, p, m)).collect()
}

/// f·(g, ĥ) = (fg, fĥ + {f, g}/(k_g(k_f + k_g))).
pub fn module_action(f: &ExprRef, p: &XiPair) -> Result<XiPair> {
    let kf = f
        .weight
        .as_ref()
        .and_then(Rat::to_i64)
        .filter(|_| f.kind == Kind::Scalar && f.is_modular())
        .ok_or_else(|| Error::Kind(format!("{f} is not a scalar modular form of integral weight")))?;
    let kg = p.weight;
    let f0 = p.f0.as_ref().map(|g| Expr::mul(f.clone(), g.clone())).transpose()?;
    let mut terms = Vec::new();
    if let Some(h) = &p.hhat {
        terms.push(Expr::mul(f.clone(), h.clone())?);
    }
    if let Some(g) = &p.f0 {
        if kf != 0 {
            let c = CycRat::frac(1, kg * (kf + kg));
            terms.push(Expr::scale(c, Expr::bracket2(f.clone(), g.clone())?));
        }
    }
    let hhat = if terms.is_empty() { None } else { Some(Expr::add(terms)?) };
    XiPair::new(format!("{f}*{}", p.name), f0, hhat, kf + kg, p.group, p.jtype)
}

/// Componentwise difference of two pairs at M, as (f0, ĥ).
pub fn pair_difference(engine: &Engine, a: &XiPair, b: &XiPair, m: &SymplecticMat) -> Result<(FourierSeries, Sym2Series)> {
    let (fa, ha) = a.values(engine, m)?;
    let (fb, hb) = b.values(engine, m)?;
    Ok((fa.sub(&fb)?, ha.sub(&hb)?))
}

/// Whether f0 and ĥ have the parity of the pair's type under τ12 → -τ12.
pub fn check_parity(engine: &Engine, p: &XiPair) -> Result<bool> {
    let (f0, h) = p.values(engine, &SymplecticMat::identity())?;
    let sign = |s: &FourierSeries, even: bool| -> bool {
        let i = s.involution();
        if even {
            i == *s
        } else {
            i == s.neg()
        }
    };
    let even = p.jtype == JType::I;
    Ok(sign(&f0, even) && sign(&h.h20, even) && sign(&h.h02, even) && sign(&h.h11, !even))
}

/// Constants c with W(Σ c_i piece_i,11|M + (1/k) ∂12(f0|M)) = 0 for every M in `reps`.
pub fn fit_hhat_constants(
    engine: &Engine,
    f0: &ExprRef,
    weight: i64,
    pieces: &[ExprRef],
    reps: &[SymplecticMat],
) -> Result<Option<Vec<CycRat>>> {
    let mut rows: Vec<Vec<FourierSeries>> = vec![Vec::new(); pieces.len() + 1];
    for m in reps {
        for (i, piece) in pieces.iter().enumerate() {
            rows[i].push((*engine.jet_comp(piece, Sym2Comp::H11, m, [0, 0, 0])?).clone());
        }
        let d = engine.jet(f0, m, [0, 1, 0])?.scale_rat(&Rat::frac(-1, weight));
        rows[pieces.len()].push(d);
    }
    let refs: Vec<Vec<&FourierSeries>> = rows.iter().map(|r| r.iter().collect()).collect();
    let mat = RationalMatrix::from_series(&refs, engine.trunc())?;
    let (target, coeffs) = mat.rows.split_last().expect("target row");
    Ok(solve_combination(coeffs, target))
}

fn pair(name: &str, g: GroupId, t: JType, k: i64, f0: Option<&str>, h: Option<&str>) -> XiPair {
    XiPair::parse(name, g, t, k, f0, h).unwrap_or_else(|e| panic!("generator {name}: {e}"))
}

/// Generators listed for each group and type; for Γ2 only the theta-expressible type-I ones.
pub fn generators(g: GroupId, t: JType) -> Vec<XiPair> {
    use GroupId::*;
    use JType::*;
    let p = |name: &str, k: i64, f0: Option<&str>, h: Option<&str>| pair(name, g, t, k, f0, h);
    match (g, t) {
        (Gamma2, I) => vec![p("Phi4", 4, Some("phi4"), None), p("Phi10", 10, Some("chi10"), None)],
        (Gamma2, II) => vec![],
        (Gamma0_2, I) => vec![
            p("Phi2", 2, Some("X2"), None),
            p("Phi4_1", 4, Some("Y4"), None),
            p("Phi4_2", 4, Some("Z4"), None),
            p("Phi6", 6, Some("K6"), None),
        ],
        (Gamma0_2, II) => vec![
            p("Phi13", 13, None, Some("(b3 X2 Y4 K6)")),
            p("Phi15", 15, None, Some("(b3 Y4 Z4 K6)")),
            p("Phi17", 17, None, Some("(* K6 (b3 X2 Y4 Z4))")),
            p("Phi19", 19, Some("chi19"), Some("H19")),
        ],
        (Gamma0_3Psi, I) => vec![
            p("Phi1", 1, Some("a1"), None),
            p("Phi3", 3, Some("b3"), None),
            p("Phi4", 4, Some("phi4"), None),
            p("Phi6", 6, Some("(^ e3 2)"), None),
        ],
        (Gamma0_3Psi, II) => vec![
            p("Phi9", 9, None, Some("(b3 a1 c4 e3)")),
            p("Phi11", 11, None, Some("(b3 b3 c4 e3)")),
            p("Phi12", 12, None, Some("(* c4 (b3 a1 b3 e3))")),
            p("Phi14", 14, Some("X14"), Some("H14")),
        ],
        (Gamma0_4Psi, I) => vec![
            p("Phi1", 1, Some("a1"), None),
            p("Phi2", 2, Some("b2"), None),
            p("Phi3", 3, Some("d3"), None),
            p("Phi4", 4, Some("(^ c2 2)"), None),
        ],
        (Gamma0_4Psi, II) => vec![
            p("Phi7", 7, None, Some("(b3 a1 c2 g3)")),
            p("Phi9", 9, None, Some("(- (* g3 (b3 a1 b2 c2)) (* a1 (b3 b2 c2 g3)))")),
            p("Phi11", 11, Some("X11"), Some("H11")),
            p("Phi11b", 11, None, Some("(* f3 (b3 b2 c2 g3))")),
        ],
        (Gamma00_2Psi, I) => vec![
            p("Phi1", 1, Some("a1"), None),
            p("Phi2_1", 2, Some("b2"), None),
            p("Phi2_2", 2, Some("c2"), None),
            p("Phi3", 3, Some("d3"), None),
        ],
        (Gamma00_2Psi, II) => vec![
            p(
                "Phi9",
                9,
                None,
                Some("(+ (* d3 (b3 a1 b2 c2)) (* (- (* 2 (^ a1 2)) c2) (b3 a1 b2 d3)) (* (- b2 (* 2 (^ a1 2))) (b3 a1 c2 d3)))"),
            ),
            p("Phi10_1", 10, None, Some("(* f3 (- (b3 a1 b2 d3) (b3 a1 c2 d3)))")),
            p("Phi10_2", 10, None, Some("(* g3 (+ (* 2 (b3 a1 b2 d3)) (b3 a1 c2 d3)))")),
            p("Phi11", 11, Some("X11"), Some("H11")),
        ],
    }
}

pub fn generator(g: GroupId, t: JType, name: &str) -> Result<XiPair> {
    generators(g, t)
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownName(format!("{} generator {name} of type {t:?}", g.id())))
}

/// All Witt conditions for a named generator.
pub fn verify_jacobi_generator(engine: &Engine, g: GroupId, t: JType, name: &str) -> Result<Vec<WittOutcome>> {
    witt_all(engine, &generator(g, t, name)?)
}

/// One row of a dimension table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DimRow {
    pub weight: i64,
    /// Coefficient of the closed-form Hilbert series.
    pub predicted: i64,
    /// Number of module elements of this weight built from in-scope generators.
    pub spanning: usize,
    /// Rank of those elements at the truncation used.
    pub rank: usize,
    /// Coefficient restricted to in-scope generators (differs from `predicted` only for Γ2).
    pub in_scope: i64,
}

impl DimRow {
    pub fn confirmed(&self) -> bool {
        self.rank as i64 == self.in_scope && self.spanning as i64 == self.in_scope
    }
}

fn ring_gen_exprs(cat: &GroupCatalog) -> Result<Vec<(ExprRef, i64)>> {
    cat.in_scope_ring.iter().map(|(n, k)| Ok((cat.form(n)?, *k))).collect()
}

/// Rank with a modular certificate: full modular rank implies full exact rank.
pub fn certified_rank(m: &RationalMatrix) -> usize {
    match m.rank_mod_p() {
        Some(r) if r == m.rows.len() => r,
        _ => m.rank(),
    }
}

fn rank_of_pairs(pairs: &[(FourierSeries, Sym2Series)], n: u32) -> Result<usize> {
    if pairs.is_empty() {
        return Ok(0);
    }
    let refs: Vec<Vec<&FourierSeries>> = pairs.iter().map(|(f, h)| vec![f, &h.h20, &h.h11, &h.h02]).collect();
    Ok(certified_rank(&RationalMatrix::from_series(&refs, n)?))
}

struct MonomialCache<'a> {
    engine: &'a Engine,
    gens: Vec<FourierSeries>,
    weights: Vec<i64>,
    cache: HashMap<Vec<u32>, FourierSeries>,
}

impl<'a> MonomialCache<'a> {
    fn new(engine: &'a Engine, gens: &[(ExprRef, i64)]) -> Result<MonomialCache<'a>> {
        let id = SymplecticMat::identity();
        let vals = gens.iter().map(|(e, _)| engine.eval_scalar(e, &id)).collect::<Result<Vec<_>>>()?;
        Ok(MonomialCache { engine, gens: vals, weights: gens.iter().map(|g| g.1).collect(), cache: HashMap::new() })
    }

    fn get(&mut self, exps: &[u32]) -> Result<FourierSeries> {
        if let Some(s) = self.cache.get(exps) {
            return Ok(s.clone());
        }
        let s = match exps.iter().position(|&e| e > 0) {
            None => FourierSeries::constant(CycRat::one(), self.engine.trunc()),
            Some(i) => {
                let mut rest = exps.to_vec();
                rest[i] -= 1;
                self.get(&rest)?.mul(&self.gens[i])?
            }
        };
        let w: i64 = exps.iter().zip(&self.weights).map(|(e, w)| *e as i64 * w).sum();
        let s = s.with_weight(Some(Rat::int(w)));
        self.cache.insert(exps.to_vec(), s.clone());
        Ok(s)
    }
}

/// Ranks of the weight-k part of A^I for k ≤ kmax (freeness of the ring).
pub fn verify_ring_structure(engine: &Engine, g: GroupId, kmax: i64) -> Result<Vec<DimRow>> {
    let cat = build_catalog(g);
    let gens = ring_gen_exprs(&cat)?;
    let weights: Vec<i64> = gens.iter().map(|g| g.1).collect();
    let predicted = hilbert_coeffs(g, Space::AI, kmax.max(0) as usize);
    let mut mc = MonomialCache::new(engine, &gens)?;
    let mut out = Vec::new();
    for k in 1..=kmax {
        let monos = monomials_of_weight(&weights, k);
        let series = monos.iter().map(|e| mc.get(e)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<Vec<&FourierSeries>> = series.iter().map(|s| vec![s]).collect();
        let rank = if refs.is_empty() { 0 } else { certified_rank(&RationalMatrix::from_series(&refs, engine.trunc())?) };
        out.push(DimRow { weight: k, predicted: predicted[k as usize], spanning: monos.len(), rank, in_scope: monos.len() as i64 });
    }
    Ok(out)
}

/// Rank of A^I-multiples of the generators in each weight k ≤ kmax, against the Hilbert series.
pub fn verify_module_structure(engine: &Engine, g: GroupId, t: JType, kmax: i64) -> Result<Vec<DimRow>> {
    let cat = build_catalog(g);
    let ring = ring_gen_exprs(&cat)?;
    let ring_weights: Vec<i64> = ring.iter().map(|r| r.1).collect();
    let gens = generators(g, t);
    let kmax_u = kmax.max(0) as usize;
    let predicted = hilbert_coeffs(g, t.space(), kmax_u);
    let id = SymplecticMat::identity();
    let gen_vals = gens.iter().map(|p| p.values(engine, &id)).collect::<Result<Vec<_>>>()?;
    let mut mc = MonomialCache::new(engine, &ring)?;
    let mut out = Vec::new();
    for k in 1..=kmax {
        let mut elems = Vec::new();
        for (p, (gf, gh)) in gens.iter().zip(&gen_vals) {
            for exps in monomials_of_weight(&ring_weights, k - p.weight) {
                let m = mc.get(&exps)?;
                let km = k - p.weight;
                let f0 = m.mul(gf)?;
                let mut h = gh.mul_scalar(&m)?;
                if km > 0 && !gf.is_zero() {
                    let mf = WeightedForm::new(m.clone(), Rat::int(km), "m");
                    let gw = WeightedForm::new(gf.clone(), Rat::int(p.weight), p.name.clone());
                    let b = bracket2(&mf, &gw)?.scale(&CycRat::frac(1, p.weight * k));
                    h = h.add(&b)?;
                }
                elems.push((f0, h));
            }
        }
        let in_scope = if cat.in_scope_ring.len() == cat.ring_generators.len() {
            predicted[k as usize]
        } else {
            // Γ2: only C[φ4, χ10]-multiples of (φ4, 0) and (χ10, 0)
            gens.iter().map(|p| monomials_of_weight(&ring_weights, k - p.weight).len() as i64).sum()
        };
        let rank = rank_of_pairs(&elems, engine.trunc())?;
        out.push(DimRow { weight: k, predicted: predicted[k as usize], spanning: elems.len(), rank, in_scope });
    }
    Ok(out)
}

/// Θ: rows (ϑ_ν, ∂11ϑ_ν, ∂12ϑ_ν, ∂22ϑ_ν), columns ν = 00, 01, 10, 11.
pub fn theta_matrix(n: u32) -> Result<Vec<Vec<FourierSeries>>> {
    let cols = [[0, 0], [0, 1], [1, 0], [1, 1]]
        .into_par_iter()
        .map(|nu| theta_second_kind(nu, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        cols.iter().map(|c| c.value.clone()).collect(),
        cols.iter().map(|c| c.d11.clone()).collect(),
        cols.iter().map(|c| c.d12.clone()).collect(),
        cols.iter().map(|c| c.d22.clone()).collect(),
    ])
}

/// 4·det Θ.
pub fn theta_matrix_det(n: u32) -> Result<FourierSeries> {
    let m = theta_matrix(n)?;
    let mut acc = FourierSeries::zero(4, n)?;
    for (perm, sign) in crate::expr::permutations_signed(4) {
        let mut t = m[0][perm[0]].clone();
        for r in 1..4 {
            t = t.mul(&m[r][perm[r]])?;
        }
        acc = acc.add(&t.scale(&CycRat::int(4 * sign)))?;
    }
    Ok(acc.with_weight(Some(Rat::int(5))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_lists_match_weight_table() {
        let table: [(GroupId, [i64; 4], [i64; 4]); 4] = [
            (GroupId::Gamma0_2, [2, 4, 4, 6], [13, 15, 17, 19]),
            (GroupId::Gamma0_3Psi, [1, 3, 4, 6], [9, 11, 12, 14]),
            (GroupId::Gamma0_4Psi, [1, 2, 3, 4], [7, 9, 11, 11]),
            (GroupId::Gamma00_2Psi, [1, 2, 2, 3], [9, 10, 10, 11]),
        ];
        for (g, w1, w2) in table {
            let got1: Vec<i64> = generators(g, JType::I).iter().map(|p| p.weight).collect();
            let got2: Vec<i64> = generators(g, JType::II).iter().map(|p| p.weight).collect();
            assert_eq!(got1, w1.to_vec(), "{g}");
            assert_eq!(got2, w2.to_vec(), "{g}");
            let c = build_catalog(g);
            assert_eq!(c.hilbert_ji.numerator, w1.iter().map(|&x| x as u32).collect::<Vec<_>>());
            let mut n2 = w2.map(|x| x as u32).to_vec();
            n2.sort();
            assert_eq!(c.hilbert_jii.numerator, n2);
        }
    }

    #[test]
    fn module_action_weights_add() {
        let lib = Library::standard();
        let f = lib.get("level2.X2").unwrap();
        let p = generator(GroupId::Gamma0_2, JType::I, "Phi4_1").unwrap();
        let q = module_action(&f, &p).unwrap();
        assert_eq!(q.weight, 6);
        assert!(q.hhat.is_some());
        let z = XiPair::new("z", None, None, 3, GroupId::Gamma0_2, JType::I).unwrap();
        assert!(module_action(&f, &z).unwrap().hhat.is_none());
    }
}
