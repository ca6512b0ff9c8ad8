//! The named check registry and its runner.
//!
//! Check names are namespaced: `theta.*`, `level1.*` .. `level4.*`, `jacobi.*`,
//! `module.*`, `brackets.*`, `dims.*`, `negctrl.*` (controls that must fail), and
//! `printed.*` (formulas exactly as printed where they disagree with the computation).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{build_catalog, monomial_expr, monomials_of_weight, Library, Space};
use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};
use crate::expr::{Engine, Expr, ExprRef, Value};
use crate::jacobi::{
    check_parity, fit_hhat_constants, generator, generators, module_action, theta_matrix_det, verify_module_structure,
    verify_ring_structure, witt_all, witt_condition, DimRow, JType, XiPair,
};
use crate::operators::{bracket2, bracket3, bracket4, WeightedForm};
use crate::series::{Deriv, ExpKey, FourierSeries, Sym2Series};
use crate::symplectic::{coset_reps, GroupId, SymplecticMat};
use crate::theta::{theta_const, theta_const_int, ThetaChar};

pub const REPORT_SCHEMA: &str = "jacobi2.report/1";
pub const MAX_TRUNC: u32 = 16;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

/// One line of a report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub status: Status,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<DimRow>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub trunc: u32,
    pub ceiling: u32,
    /// Glob patterns; empty selects everything.
    pub filter: Vec<String>,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig { trunc: 4, ceiling: 8, filter: Vec::new(), jobs: None }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trunc < 1 || self.trunc > self.ceiling || self.ceiling > MAX_TRUNC {
            return Err(Error::Config(format!(
                "need 1 <= trunc <= ceiling <= {MAX_TRUNC}, got trunc {} ceiling {}",
                self.trunc, self.ceiling
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        for f in &self.filter {
            glob::Pattern::new(f).map_err(|e| Error::Config(format!("bad filter {f:?}: {e}")))?;
        }
        Ok(())
    }

    fn matches(&self, name: &str) -> bool {
        self.filter.is_empty()
            || self.filter.iter().any(|f| glob::Pattern::new(f).map(|p| p.matches(name)).unwrap_or(false))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub config: RunConfig,
    pub results: Vec<CheckReport>,
    pub summary: Summary,
}

impl RunReport {
    /// 0 all pass, 1 any failure, 3 inconclusive only (0 with `allow_inconclusive`).
    pub fn exit_code(&self, allow_inconclusive: bool) -> i32 {
        if self.summary.fail > 0 {
            1
        } else if self.summary.inconclusive > 0 && !allow_inconclusive {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let w = self.results.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:<12}  {:>2}  detail", "check", "status", "N");
        for r in &self.results {
            let mut d = String::new();
            if let Some(m) = &r.first_mismatch {
                d.push_str(&format!("first mismatch {m}"));
            }
            if let Some(x) = &r.detail {
                if !d.is_empty() {
                    d.push_str("; ");
                }
                d.push_str(x);
            }
            let _ = writeln!(s, "{:<w$}  {:<12}  {:>2}  {}", r.check, r.status.name(), r.n, d);
        }
        let _ = writeln!(
            s,
            "{} checks: {} pass, {} fail, {} inconclusive",
            self.results.len(),
            self.summary.pass,
            self.summary.fail,
            self.summary.inconclusive
        );
        s
    }

    pub fn get(&self, name: &str) -> Option<&CheckReport> {
        self.results.iter().find(|r| r.check == name)
    }
}

/// What a check evaluated to.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub first_mismatch: Option<String>,
    pub detail: Option<String>,
}

impl Outcome {
    fn pass() -> Outcome {
        Outcome { status: Status::Pass, first_mismatch: None, detail: None }
    }

    fn fail(mismatch: impl Into<String>) -> Outcome {
        Outcome { status: Status::Fail, first_mismatch: Some(mismatch.into()), detail: None }
    }

    fn with_detail(mut self, d: impl Into<String>) -> Outcome {
        self.detail = Some(d.into());
        self
    }

    fn from_mismatch(m: Option<String>) -> Outcome {
        match m {
            None => Outcome::pass(),
            Some(m) => Outcome::fail(m),
        }
    }
}

#[derive(Clone, Debug)]
enum Expect {
    Holomorphic,
    FailsAt(&'static str),
}

type CustomFn = fn(&Engine) -> Result<Outcome>;

#[derive(Clone)]
enum CheckKind {
    /// lhs = rhs exactly; `None` is zero.
    Equal { scope: String, lhs: String, rhs: Option<String> },
    /// W(lhs) = W(rhs) for scalar expressions.
    Witt { scope: String, lhs: String, rhs: Option<String> },
    /// The terms of least total degree a + c are exactly `expected`.
    Leading { scope: String, expr: String, witt: bool, expected: Vec<([Rat; 3], CycRat)> },
    Coefficient { scope: String, expr: String, key: [Rat; 3], value: CycRat },
    NonZeroWitt { scope: String, expr: String },
    /// Slash-table row: (form|M) = printed, and W(form|M) = witt.
    Row { scope: String, form: String, matrix: &'static str, printed: Option<String>, witt: String },
    Generator { group: GroupId, jtype: JType, name: String },
    Pair { group: GroupId, jtype: JType, weight: i64, f0: Option<String>, hhat: Option<String>, pieces: Vec<String>, expect: Expect },
    Dims { group: GroupId, space: Space },
    Brackets { group: GroupId, cases: usize },
    BracketTuples { group: GroupId },
    Module { group: GroupId, cases: usize },
    Custom(CustomFn),
}

/// A registry entry.
#[derive(Clone)]
pub struct Check {
    pub name: String,
    /// Smallest truncation at which the check is meaningful.
    pub min_n: u32,
    kind: CheckKind,
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Check({})", self.name)
    }
}

fn c(name: impl Into<String>, min_n: u32, kind: CheckKind) -> Check {
    Check { name: name.into(), min_n, kind }
}

fn eq(name: &str, scope: &str, lhs: &str, rhs: &str) -> Check {
    c(name, 1, CheckKind::Equal { scope: scope.into(), lhs: lhs.into(), rhs: Some(rhs.into()) })
}

fn zero(name: &str, scope: &str, e: &str) -> Check {
    c(name, 1, CheckKind::Equal { scope: scope.into(), lhs: e.into(), rhs: None })
}

fn witt(name: &str, scope: &str, lhs: &str, rhs: &str) -> Check {
    c(name, 1, CheckKind::Witt { scope: scope.into(), lhs: lhs.into(), rhs: Some(rhs.into()) })
}

fn witt0(name: &str, scope: &str, e: &str) -> Check {
    c(name, 1, CheckKind::Witt { scope: scope.into(), lhs: e.into(), rhs: None })
}

fn key(a: (i64, i64), b: (i64, i64), cc: (i64, i64)) -> [Rat; 3] {
    [Rat::frac(a.0, a.1), Rat::frac(b.0, b.1), Rat::frac(cc.0, cc.1)]
}

fn row(scope: &str, form: &str, matrix: &'static str, printed: Option<&str>, w: &str) -> Check {
    let tag = if matrix == "1" { "id".to_string() } else { matrix.replace("^2", "sq") };
    c(
        format!("{scope}.table.{form}.{tag}"),
        1,
        CheckKind::Row { scope: scope.into(), form: form.into(), matrix, printed: printed.map(Into::into), witt: w.into() },
    )
}

fn pair(name: &str, group: GroupId, jtype: JType, weight: i64, f0: Option<&str>, hhat: Option<&str>, pieces: &[&str], expect: Expect) -> Check {
    c(
        name,
        1,
        CheckKind::Pair {
            group,
            jtype,
            weight,
            f0: f0.map(Into::into),
            hhat: hhat.map(Into::into),
            pieces: pieces.iter().map(|s| s.to_string()).collect(),
            expect,
        },
    )
}

/// Witt-image monomials used by the level-4 tables.
const MONO_244: &str = "(* (^ A 2) (^ B 4) (^ C 4) (^ a 2) (^ b 4) (^ c 4))";
const MONO_222: &str = "(* (^ A 2) (^ B 2) (^ C 2) (^ a 2) (^ b 2) (^ c 2))";
const MONO_444: &str = "(* (^ A 4) (^ B 4) (^ C 4) (^ a 4) (^ b 4) (^ c 4))";

/// Every check, in report order.
pub fn registry() -> Vec<Check> {
    let mut v = Vec::new();

    // theta foundations
    v.push(c("level1.theta_jacobi_quartic", 8, CheckKind::Equal {
        scope: String::new(),
        lhs: "(^ A 4)".into(),
        rhs: Some("(+ (^ B 4) (^ C 4))".into()),
    }));
    v.push(c("theta.sign_rule", 1, CheckKind::Custom(check_sign_rule)));
    v.push(c("theta.odd_vanish", 1, CheckKind::Custom(check_odd_vanish)));
    v.push(c("theta.d12_theta1111", 6, CheckKind::Witt {
        scope: String::new(),
        lhs: "(d12 theta_1111)".into(),
        rhs: Some("(* -1/4 A B C a b c)".into()),
    }));

    // level one
    let s = "level1";
    v.push(c("level1.chi10_a111", 1, CheckKind::Coefficient {
        scope: s.into(),
        expr: "chi10".into(),
        key: key((1, 1), (1, 1), (1, 1)),
        value: CycRat::one(),
    }));
    v.push(c("level1.chi5_leading", 1, CheckKind::Leading {
        scope: s.into(),
        expr: "chi5".into(),
        witt: false,
        expected: vec![(key((1, 2), (-1, 2), (1, 2)), CycRat::one()), (key((1, 2), (1, 2), (1, 2)), CycRat::int(-1))],
    }));
    v.push(eq("level1.chi5_sq_chi10", s, "(^ chi5 2)", "chi10"));
    v.push(c("level1.det_theta_neg_chi5", 1, CheckKind::Custom(check_det_neg_chi5)));
    v.push(c("level1.det_theta_witt", 1, CheckKind::Custom(check_det_witt)));
    v.push(c("level1.chi10_d12sq", 5, CheckKind::Witt {
        scope: s.into(),
        lhs: "(d12 (d12 chi10))".into(),
        rhs: Some("(* 2 delta delta_t22)".into()),
    }));
    v.push(c("level1.delta_product", 4, CheckKind::Custom(check_delta)));

    // level two
    let s = "level2";
    for f in ["X2", "Y4", "K6"] {
        v.push(eq(&format!("level2.slash.{f}.M1"), s, &format!("(slash M1 {f})"), &format!("{f}_M1")));
    }
    v.push(eq("level2.slash.Z4.M1", s, "(slash M1 Z4)", "(/ (^ (- (^ theta_0010 4) (^ theta_0100 4)) 2) 16384)"));
    v.push(witt0("level2.witt.Y4_M1", s, "(slash M1 Y4)"));
    v.push(witt("level2.witt.d12sq_Y4_M1", s, "(d12 (d12 (slash M1 Y4)))", &format!("(* -1/8 {MONO_444})")));
    v.push(witt("level2.witt.K6_M1", s, "(slash M1 K6)", &format!("(* -1/4096 {MONO_444})")));
    v.push(witt("level2.witt.d12sq_Y4_M1_theta", s, "(d12 (d12 (slash M1 Y4)))", &format!("(* -2 {MONO_222} (^ (d12 theta_1111) 2))")));
    v.push(witt0("level2.witt.K6", s, "K6"));
    v.push(witt("level2.d12sq_K6", s, "(d12 (d12 K6))", "(/ (* Y4 Z4) 2)"));
    v.push(witt0("level2.chi19_witt", s, "(+ (* 512 (d12 chi19)) (* 1/4 Y4 Z4 (h11 (b3 X2 Y4 Z4))))"));
    v.push(witt("level2.M1_Y4_K6", s, "(d12 (d12 (slash M1 Y4)))", "(* 512 (slash M1 K6))"));

    // level three
    let s = "level3";
    v.push(eq("level3.chi10_c4e3sq", s, "chi10", "(/ (* c4 (^ e3 2)) 6144)"));
    v.push(eq("level3.c4_formula", s, "c4h", "c4"));
    v.push(witt("level3.d12sq_c4", s, "(d12 (d12 c4))", "(* 1/3888 e3 f3)"));
    v.push(c("level3.eta6_F", 1, CheckKind::Custom(check_eta6_f)));
    v.push(eq("level3.X14_chi14", s, "X14", "(* -45349632 chi14)"));
    v.push(eq("level3.X14_phi4", s, "X14", "(* -1/162 (b4 a1 b3 phi4 e3))"));
    v.push(witt0("level3.witt_c4", s, "c4"));
    v.push(witt("level3.witt.a1", s, "a1", "(* F1 G1)"));
    v.push(witt("level3.witt.b3", s, "b3", "(* F2 G2)"));
    v.push(witt("level3.witt.E6s", s, "E6s", "(/ (* (- (* 4 (^ F1 3)) F2) (- (* 4 (^ G1 3)) G2)) 9)"));
    v.push(witt("level3.witt.e3", s, "e3", "(* 4 (- (* 3 (^ F1 3)) F2) (- (* 3 (^ G1 3)) G2))"));
    v.push(witt("level3.witt.f3", s, "f3", "(* 4 (- (^ F1 3) F2) (- (^ G1 3) G2))"));
    v.push(witt("level3.witt.a1s", s, "a1s", "(* -1/3 (+ (* x0 y0) (* 2 x1 y0) (* 2 x0 y1) (* -2 x1 y1)))"));
    v.push(witt(
        "level3.witt.b3s",
        s,
        "b3s",
        "(* -1/3 (+ (* (^ x0 3) (^ y0 3)) (* 6 x0 (^ x1 2) (^ y0 3)) (* 2 (^ x1 3) (^ y0 3)) (* 6 (^ x0 3) y0 (^ y1 2)) \
         (* -18 x0 (^ x1 2) y0 (^ y1 2)) (* 12 (^ x1 3) y0 (^ y1 2)) (* 2 (^ x0 3) (^ y1 3)) (* 12 x0 (^ x1 2) (^ y1 3)) \
         (* 4 (^ x1 3) (^ y1 3))))",
    ));
    v.push(witt0("level3.witt.e3s", s, "e3s"));
    v.push(witt("level3.witt.phi4", s, "phi4", "(* (+ (^ x0 4) (* 8 x0 (^ x1 3))) (+ (^ y0 4) (* 8 y0 (^ y1 3))))"));
    v.push(witt(
        "level3.witt.c4s",
        s,
        "c4s",
        "(* -8/81 x1 y1 (- x0 x1) (- y0 y1) (+ (^ x0 2) (* x0 x1) (^ x1 2)) (+ (^ y0 2) (* y0 y1) (^ y1 2)))",
    ));
    v.push(witt("level3.witt.d12sq_e3s", s, "(d12 (d12 e3s))", "(* 54 a1s c4s)"));
    v.push(witt(
        "level3.witt.d12sq_e3s_explicit",
        s,
        "(d12 (d12 e3s))",
        "(* 16/9 (+ (* x0 y0) (* 2 x1 y0) (* 2 x0 y1) (* -2 x1 y1)) x1 y1 (- x0 x1) (- y0 y1) (+ (^ x0 2) (* x0 x1) (^ x1 2)) (+ (^ y0 2) (* y0 y1) (^ y1 2)))",
    ));
    v.push(c("level3.leading.a1b3e3", 1, CheckKind::Leading {
        scope: s.into(),
        expr: "(/ (h11 (b3 a1 b3 e3)) 2)".into(),
        witt: true,
        expected: vec![(key((1, 1), (0, 1), (2, 1)), CycRat::int(-1889568)), (key((2, 1), (0, 1), (1, 1)), CycRat::int(1889568))],
    }));
    v.push(c("level3.leading.starred", 1, CheckKind::Leading {
        scope: s.into(),
        expr: "(/ (h11 (b3 a1s b3s c4s)) 2)".into(),
        witt: true,
        expected: vec![(key((1, 3), (0, 1), (2, 3)), CycRat::frac(-16, 81)), (key((2, 3), (0, 1), (1, 3)), CycRat::frac(16, 81))],
    }));
    v.push(c("level3.leading.det3", 1, CheckKind::Custom(check_level3_det3)));
    v.push(zero(
        "level3.relation_c4",
        s,
        "(+ (* 4 c4 (b3 a1 b3 e3)) (* -1 a1 (b3 b3 e3 c4)) (* 3 b3 (b3 e3 c4 a1)) (* -3 e3 (b3 c4 a1 b3)))",
    ));

    // level four, Γ0(4)^ψ
    let s = "level4.g04";
    v.push(eq("level4.f3g3_K6", s, "(* f3 g3)", "(* -36864 K6)"));
    v.push(eq("level4.g04.chi10", s, "chi10", "(/ (* (^ c2 2) f3 g3) -36864)"));
    v.push(witt("level4.g04.d12sq_f3", s, "(d12 (d12 f3))", "(* -3/16 F0)"));
    v.push(witt(
        "level4.g04.d12sq_f3_explicit",
        s,
        "(d12 (d12 f3))",
        "(* -3/16 (^ A 2) (^ B 2) (^ a 2) (^ b 2) (+ (^ A 2) (^ B 2)) (^ (- (^ A 2) (^ B 2)) 2) (+ (^ a 2) (^ b 2)) (^ (- (^ a 2) (^ b 2)) 2))",
    ));
    v.push(witt("level4.g04.d12sq_K6", s, "(* 4096 (d12 (d12 K6)))", "(* 1/8 (^ A 4) (^ B 4) (^ C 8) (^ a 4) (^ b 4) (^ c 8))"));
    v.push(witt(
        "level4.g04.witt_g3",
        s,
        "g3",
        "(* 6 (^ A 2) (^ a 2) (^ B 2) (^ b 2) (+ (^ A 2) (^ B 2)) (+ (^ a 2) (^ b 2)))",
    ));
    v.push(witt0("level4.g04.witt_f3", s, "f3"));
    v.push(witt("level4.g04.d12_c2_M1", s, "(d12 (slash M1 c2))", &format!("(* 1/4 (e 1/4) {MONO_222})")));
    v.push(witt0("level4.g04.d12_c2sq_M1", s, "(d12 (slash M1 (^ c2 2)))"));
    v.push(eq("level4.g04.F0_M1sq", s, "(slash M1^2 F0)", "F0"));
    v.push(eq("level4.g04.g3_from_f3", s, "(slash M1^2 f3)", "g3"));
    v.push(zero(
        "level4.g04.triple",
        s,
        "(+ (* 3 f3 (b3 a1 b2 c2)) (* -1 a1 (b3 b2 c2 f3)) (* 2 b2 (b3 a1 c2 f3)) (* -2 c2 (b3 a1 b2 f3)))",
    ));
    v.push(eq("level4.g04.chi11", s, "chi11", "(/ (b4 a1 b2 c2 d3) -786432)"));
    let t04: [(&str, [Option<&str>; 3], [&str; 3]); 4] = [
        ("a1", [None, Some("a1_M1"), Some("a1")], ["(* (+ (^ A 2) (^ B 2)) (+ (^ a 2) (^ b 2)))", "(+ (* (^ A 2) (^ a 2)) (* (^ B 2) (^ c 2)) (* (^ C 2) (^ b 2)))", "(* (+ (^ A 2) (^ B 2)) (+ (^ a 2) (^ b 2)))"]),
        ("b2", [None, Some("b2_M1"), Some("b2")], ["(* (+ (^ A 4) (^ B 4)) (+ (^ a 4) (^ b 4)))", "(+ (* (^ A 4) (^ a 4)) (* (^ B 4) (^ c 4)) (* (^ C 4) (^ b 4)))", "(* (+ (^ A 4) (^ B 4)) (+ (^ a 4) (^ b 4)))"]),
        ("c2", [None, Some("c2_M1"), Some("(- c2)")], ["(* (^ A 2) (^ B 2) (^ a 2) (^ b 2))", "0", "(* -1 (^ A 2) (^ B 2) (^ a 2) (^ b 2))"]),
        ("d3", [None, Some("d3_M1"), Some("d3")], ["(* (+ (^ A 6) (^ B 6)) (+ (^ a 6) (^ b 6)))", "(+ (* (^ A 6) (^ a 6)) (* (^ B 6) (^ c 6)) (* (^ C 6) (^ b 6)))", "(* (+ (^ A 6) (^ B 6)) (+ (^ a 6) (^ b 6)))"]),
    ];
    for (m_i, m) in ["1", "M1", "M1^2"].into_iter().enumerate() {
        for (f, printed, w) in &t04 {
            v.push(row(s, f, m, printed[m_i], w[m_i]));
        }
    }

    // level four, Γ0^0(2)^ψ
    let s = "level4.g002";
    v.push(eq("level4.g002.K6", s, "K6", "(/ (* f3 g3) 4096)"));
    v.push(eq("level4.g002.Y4", s, "Y4", "(* a1 d3)"));
    v.push(eq("level4.g002.chi10", s, "chi10", "(/ (* a1 d3 f3 g3) 4096)"));
    v.push(eq("level4.g002.f3_poly", s, "f3", "f3_poly"));
    v.push(eq("level4.g002.g3_poly", s, "g3", "g3_poly"));
    v.push(witt0("level4.g002.kerW", s, "(+ (* 6 (^ a1 3)) (* -2 a1 b2) (- (* a1 c2)) (* 3 d3))"));
    v.push(witt("level4.g002.d12sq_f3", s, "(d12 (d12 f3))", &format!("(* 1/8 {MONO_244})")));
    v.push(witt("level4.g002.d12sq_d3_M1", s, "(d12 (d12 (slash M1 d3)))", &format!("(* -1/8 {MONO_244})")));
    v.push(witt("level4.g002.d12sq_g3_M2", s, "(d12 (d12 (slash M2 g3)))", &format!("(* -1/8 {MONO_244})")));
    v.push(witt("level4.g002.d12sq_a1_M3", s, "(d12 (d12 (slash M3 a1)))", &format!("(* 1/8 {MONO_222})")));
    v.push(witt("level4.g002.F0_M1", s, "(slash M1 F1)", &format!("(- {MONO_244})")));
    for (i, m, mono, b) in [
        (1, "1", MONO_244, "(b3 a1 b2 c2)"),
        (2, "M1", MONO_244, "(b3 a1 b2 c2)"),
        (3, "M2", MONO_244, "(b3 a1 b2 c2)"),
        (4, "M3", MONO_222, "(b3 b2 c2 d3)"),
    ] {
        v.push(witt(&format!("level4.g002.shiki{i}"), s, &format!("(h11 (slash {m} H))"), &format!("(* -1 {mono} (h11 (slash {m} {b})))")));
    }
    for x in ["d3", "f3", "g3"] {
        v.push(zero(
            &format!("level4.g002.fund00_{x}"),
            s,
            &format!("(+ (* a1 (b3 b2 c2 {x})) (* -2 b2 (b3 a1 c2 {x})) (* 2 c2 (b3 a1 b2 {x})) (* -3 {x} (b3 a1 b2 c2)))"),
        ));
    }
    for (i, lhs, rhs) in [
        (1, "(b3 a1 b2 d3)", "(+ (- (b3 a1 b2 f3)) (* 1/3 a1 (b3 a1 b2 c2)))"),
        (2, "(b3 a1 c2 d3)", "(+ (- (b3 a1 c2 f3)) (* -2/3 a1 (b3 a1 b2 c2)))"),
        (3, "(b3 b2 c2 d3)", "(+ (- (b3 b2 c2 f3)) (* (+ (* -6 (^ a1 2)) (* 2/3 b2) (* 1/3 c2)) (b3 a1 b2 c2)))"),
        (4, "(b3 a1 b2 d3)", "(+ (b3 a1 b2 g3) (* -1/3 a1 (b3 a1 b2 c2)))"),
        (5, "(b3 a1 c2 d3)", "(+ (b3 a1 c2 g3) (* -1/3 a1 (b3 a1 b2 c2)))"),
        (6, "(b3 b2 c2 d3)", "(+ (b3 b2 c2 g3) (* (+ (* 1/3 b2) (* -1/3 c2)) (b3 a1 b2 c2)))"),
    ] {
        v.push(eq(&format!("level4.g002.bracket_rewrite{i}"), s, lhs, rhs));
    }
    let t002: [(&str, [Option<&str>; 4], [&str; 4]); 4] = [
        ("a1", [None, Some("a1"), Some("a1"), Some("a1_M3")], ["(* (^ A 2) (^ a 2))", "(* (^ A 2) (^ a 2))", "(* (^ A 2) (^ a 2))", "0"]),
        (
            "b2",
            [None, Some("b2_M1"), Some("b2"), Some("b2_M3")],
            [
                "(* (+ (^ A 4) (^ B 4)) (+ (^ a 4) (^ b 4)))",
                "(+ (* (^ A 4) (^ a 4)) (* (^ B 4) (^ c 4)) (* (^ C 4) (^ b 4)))",
                "(* (+ (^ A 4) (^ B 4)) (+ (^ a 4) (^ b 4)))",
                "(+ (* (^ A 4) (^ a 4)) (* (^ B 4) (^ c 4)) (* (^ C 4) (^ b 4)))",
            ],
        ),
        (
            "c2",
            [None, Some("c2"), Some("c2_M2"), Some("c2_M3")],
            [
                "(* (+ (^ A 4) (^ C 4)) (+ (^ a 4) (^ c 4)))",
                "(* (+ (^ A 4) (^ C 4)) (+ (^ a 4) (^ c 4)))",
                "(+ (* (^ A 4) (^ a 4)) (* (^ B 4) (^ c 4)) (* (^ C 4) (^ b 4)))",
                "(+ (* -1 (^ A 4) (^ c 4)) (* -1 (^ C 4) (^ a 4)) (* (^ B 4) (^ b 4)))",
            ],
        ),
        (
            "d3",
            [None, Some("d3_M1"), Some("d3"), Some("d3_M3")],
            ["(* (^ A 2) (^ B 4) (^ a 2) (^ b 4))", "0", "(* (^ A 2) (^ B 4) (^ a 2) (^ b 4))", "(* -1 (^ A 2) (^ B 2) (^ C 2) (^ a 2) (^ b 2) (^ c 2))"],
        ),
    ];
    for (m_i, m) in ["1", "M1", "M2", "M3"].into_iter().enumerate() {
        for (f, printed, w) in &t002 {
            v.push(row(s, f, m, printed[m_i], w[m_i]));
        }
    }

    // brackets and the module action
    for g in GroupId::ALL {
        let p = g.prefix();
        v.push(c(format!("brackets.{p}.tuples"), 1, CheckKind::BracketTuples { group: g }));
        v.push(c(format!("brackets.{p}.random"), 1, CheckKind::Brackets { group: g, cases: 50 }));
        v.push(c(format!("module.{p}.relations"), 1, CheckKind::Module { group: g, cases: 20 }));
    }

    // Jacobi generators
    for g in GroupId::ALL {
        for t in [JType::I, JType::II] {
            for p in generators(g, t) {
                v.push(c(
                    format!("jacobi.{}.{:?}.{}", g.prefix(), t, p.name),
                    1,
                    CheckKind::Generator { group: g, jtype: t, name: p.name.clone() },
                ));
            }
        }
    }

    // negative controls
    use GroupId::*;
    v.push(pair("negctrl.level3.e3_K", Gamma0_3Psi, JType::I, 3, Some("e3"), None, &[], Expect::FailsAt("K")));
    v.push(pair("negctrl.level4.g04.c2_M1", Gamma0_4Psi, JType::I, 2, Some("c2"), None, &[], Expect::FailsAt("M1")));
    v.push(c("negctrl.level2.X2Y4Z4_h11", 1, CheckKind::NonZeroWitt { scope: "level2".into(), expr: "(h11 (b3 X2 Y4 Z4))".into() }));
    v.push(pair("negctrl.level2.chi19_no_h", Gamma0_2, JType::II, 19, Some("chi19"), None, &[], Expect::FailsAt("1")));
    v.push(pair("negctrl.level4.g002.d3_M1_witt", Gamma00_2Psi, JType::II, 11, Some("X11"), None, &[], Expect::FailsAt("M1")));

    // dimension tables
    for g in GroupId::ALL {
        for sp in [Space::AI, Space::JI, Space::JII] {
            v.push(c(format!("dims.{}.{}", g.prefix(), sp.name()), 1, CheckKind::Dims { group: g, space: sp }));
        }
    }

    // as printed, where the printed formula does not hold
    v.push(c("printed.level1.det_theta_chi5", 1, CheckKind::Custom(check_det_chi5_printed)));
    v.push(eq("printed.level2.slash_Z4_M1", "level2", "(slash M1 Z4)", "Z4_M1"));
    v.push(eq("printed.level3.c4_short", "level3", "c4h", "c4_alt"));
    v.push(eq("printed.level3.delta_F", "level3", "delta", "(* -1/432 (- (^ F1 3) F2) (- (* 3 (^ F1 3)) F2))"));
    v.push(eq("printed.level3.X14_chi14", "level3", "X14", "(* 45349632 chi14)"));
    v.push(witt(
        "printed.level3.witt_c4s",
        "level3",
        "c4s",
        "(* 8/81 x1 y1 (- x0 x1) (- y0 y1) (+ (^ x0 2) (* x0 x1) (^ x1 2)) (+ (^ y0 2) (* y0 y1) (^ y1 2)))",
    ));
    v.push(witt("printed.level3.d12sq_e3s", "level3", "(d12 (d12 e3s))", "(* -54 a1s c4s)"));
    v.push(c("printed.level3.leading_starred", 1, CheckKind::Leading {
        scope: "level3".into(),
        expr: "(/ (h11 (b3 a1s b3s c4s)) 2)".into(),
        witt: true,
        expected: vec![(key((1, 3), (0, 1), (2, 3)), CycRat::frac(16, 243)), (key((2, 3), (0, 1), (1, 3)), CycRat::frac(-16, 243))],
    }));
    v.push(c("printed.level3.det3", 1, CheckKind::Custom(check_level3_det3_printed)));
    v.push(zero(
        "printed.level3.relation_c4",
        "level3",
        "(+ (* 4 c4 (b3 a1 b3 e3)) (* a1 (b3 b3 e3 c4)) (* 3 b3 (b3 e3 c4 a1)) (* 3 e3 (b3 c4 a1 b3)))",
    ));
    v.push(zero(
        "printed.level4.g04.triple",
        "level4.g04",
        "(+ (* 3 f3 (b3 a1 b2 c2)) (* a1 (b3 b2 c2 f3)) (* b2 (b3 a1 c2 f3)) (* c2 (b3 a1 b2 f3)))",
    ));
    v.push(zero(
        "printed.level4.g002.fund00",
        "level4.g002",
        "(+ (* a1 (b3 b2 c2 d3)) (* b2 (b3 a1 c2 d3)) (* c2 (b3 a1 b2 d3)) (* d3 (b3 a1 b2 c2)))",
    ));
    v.push(zero(
        "printed.brackets.rel3",
        "level3",
        "(+ (* a1 (b3 b3 c4 e3)) (* 3 b3 (b3 c4 e3 a1)) (* 4 c4 (b3 e3 a1 b3)) (* 3 e3 (b3 a1 b3 c4)))",
    ));
    v.push(witt("printed.level3.witt_E6s", "level3", "E6s", "(/ (* (- (* 4 (^ F1 3)) F2) (- (* 3 (^ G1 3)) G2)) 9)"));
    v.push(pair(
        "printed.level2.Phi19",
        Gamma0_2,
        JType::II,
        19,
        Some("chi19"),
        Some("H19_printed"),
        &["(* Y4 Z4 (b3 X2 Y4 Z4))", "(* K6 (b3 X2 Z4 K6))"],
        Expect::Holomorphic,
    ));
    v.push(pair(
        "printed.level3.Phi14",
        Gamma0_3Psi,
        JType::II,
        14,
        Some("X14"),
        Some("H14_printed"),
        &["(* e3 f3 (b3 a1 b3 e3))", "(* a1 c4 (b3 a1 b3 phi4))"],
        Expect::Holomorphic,
    ));
    v.push(pair(
        "printed.level4.g04.Phi11",
        Gamma0_4Psi,
        JType::II,
        11,
        Some("X11"),
        Some("H11_printed"),
        &["(* F0 (b3 a1 b2 c2))"],
        Expect::Holomorphic,
    ));
    v.push(pair(
        "printed.level4.g04.Phi9",
        Gamma0_4Psi,
        JType::II,
        9,
        None,
        Some("(- (* g3 (b3 a1 b2 c2)) (* a1 (b3 b2 c2 f3)))"),
        &[],
        Expect::Holomorphic,
    ));
    v
}

/// Registry entries matching the filter.
pub fn select(config: &RunConfig) -> Vec<Check> {
    registry().into_iter().filter(|c| config.matches(&c.name)).collect()
}

/// Engines shared between checks, one per truncation.
#[derive(Default)]
pub struct EnginePool {
    engines: Mutex<BTreeMap<u32, Arc<Engine>>>,
}

impl EnginePool {
    pub fn get(&self, n: u32) -> Arc<Engine> {
        self.engines.lock().unwrap().entry(n).or_insert_with(|| Arc::new(Engine::new(n))).clone()
    }
}

/// Run the selected checks.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let checks = select(config);
    let pool = EnginePool::default();
    let work = || checks.par_iter().map(|ch| run_check(ch, config, &pool)).collect::<Vec<_>>();
    let results = match config.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let count = |s: Status| results.iter().filter(|r| r.status == s).count();
    let summary = Summary { pass: count(Status::Pass), fail: count(Status::Fail), inconclusive: count(Status::Inconclusive) };
    Ok(RunReport { schema: REPORT_SCHEMA, config: config.clone(), results, summary })
}

/// Run one check, escalating the truncation for rank checks.
pub fn run_check(ch: &Check, config: &RunConfig, pool: &EnginePool) -> CheckReport {
    let n = config.trunc.max(ch.min_n);
    let report = |n: u32, o: Outcome, rows: Option<Vec<DimRow>>| CheckReport {
        check: ch.name.clone(),
        status: o.status,
        n,
        first_mismatch: o.first_mismatch,
        detail: o.detail,
        rows,
    };
    if n > config.ceiling {
        let o = Outcome { status: Status::Inconclusive, first_mismatch: None, detail: Some(format!("needs N = {n} above the ceiling")) };
        return report(config.ceiling, o, None);
    }
    if let CheckKind::Dims { group, space } = &ch.kind {
        return match dims_escalate(pool, *group, *space, dims_kmax(*group, *space), n, config.ceiling) {
            Ok((n, rows, o)) => report(n, o, Some(rows)),
            Err(e) => report(n, Outcome::fail(format!("error: {e}")), None),
        };
    }
    let engine = pool.get(n);
    let o = evaluate(&ch.kind, &engine).unwrap_or_else(|e| Outcome::fail(format!("error: {e}")));
    report(n, o, None)
}

/// Top weight of a dimension table.
pub fn dims_kmax(group: GroupId, space: Space) -> i64 {
    match space {
        Space::AI | Space::JI => 10,
        Space::JII => generators(group, JType::II).iter().map(|p| p.weight).max().unwrap_or(0).max(14),
    }
}

pub fn dims_table(engine: &Engine, group: GroupId, space: Space, kmax: i64) -> Result<Vec<DimRow>> {
    match space {
        Space::AI => verify_ring_structure(engine, group, kmax),
        Space::JI => verify_module_structure(engine, group, JType::I, kmax),
        Space::JII => verify_module_structure(engine, group, JType::II, kmax),
    }
}

/// Rank table up to `kmax`, doubling the truncation from `n` while some rank falls short, up to `ceiling`.
pub fn dims_escalate(pool: &EnginePool, group: GroupId, space: Space, kmax: i64, n: u32, ceiling: u32) -> Result<(u32, Vec<DimRow>, Outcome)> {
    let mut n = n;
    loop {
        let rows = dims_table(&pool.get(n), group, space, kmax)?;
        let (o, deficient) = judge_dims(&rows);
        if !deficient {
            return Ok((n, rows, o));
        }
        if n >= ceiling {
            let o = Outcome { status: Status::Inconclusive, ..o }.with_detail(format!("rank below prediction up to the ceiling N = {n}"));
            return Ok((n, rows, o));
        }
        n = (2 * n).min(ceiling);
    }
}

/// (outcome, whether some row is short of rank only).
pub fn judge_dims(rows: &[DimRow]) -> (Outcome, bool) {
    if let Some(r) = rows.iter().find(|r| r.spanning as i64 != r.in_scope) {
        return (Outcome::fail(format!("weight {}: {} spanning elements, {} predicted", r.weight, r.spanning, r.in_scope)), false);
    }
    match rows.iter().find(|r| r.rank as i64 != r.in_scope) {
        None => (Outcome::pass(), false),
        Some(r) => (Outcome::fail(format!("weight {}: rank {} < {}", r.weight, r.rank, r.in_scope)), true),
    }
}

fn lib() -> &'static Library {
    Library::standard()
}

fn id() -> SymplecticMat {
    SymplecticMat::identity()
}

fn value_mismatch(a: &Value, b: &Value, n: u32) -> Result<Option<String>> {
    Ok(match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => x.equal_upto(y, n)?.map(|m| m.to_string()),
        (Value::Sym2(x), Value::Sym2(y)) => x.equal_upto(y, n)?.map(|(c, m)| format!("{} {m}", c.name())),
        _ => return Err(Error::Kind("comparing a scalar with a Sym² value".into())),
    })
}

fn zero_mismatch(a: &Value, n: u32) -> Result<Option<String>> {
    let z = match a {
        Value::Scalar(_) => Value::Scalar(FourierSeries::zero(1, n)?),
        Value::Sym2(_) => Value::Sym2(Sym2Series::zero(1, n)?),
    };
    value_mismatch(a, &z, n)
}

fn leading_mismatch(s: &FourierSeries, expected: &[([Rat; 3], CycRat)]) -> Option<String> {
    let mut got = s.leading_terms();
    let mut want = expected.to_vec();
    let k = |t: &([Rat; 3], CycRat)| (t.0[0].to_f64() + t.0[2].to_f64(), t.0[0].to_f64(), t.0[1].to_f64());
    got.sort_by(|a, b| k(a).partial_cmp(&k(b)).unwrap());
    want.sort_by(|a, b| k(a).partial_cmp(&k(b)).unwrap());
    if got == want {
        return None;
    }
    let show = |v: &[([Rat; 3], CycRat)]| {
        v.iter().map(|(e, c)| format!("{c} at ({}, {}, {})", e[0], e[1], e[2])).collect::<Vec<_>>().join(", ")
    };
    Some(format!("leading terms [{}], expected [{}]", show(&got), show(&want)))
}

fn evaluate(kind: &CheckKind, engine: &Engine) -> Result<Outcome> {
    let n = engine.trunc();
    let id = id();
    Ok(match kind {
        CheckKind::Equal { scope, lhs, rhs } => {
            let a = engine.eval(&*lib().parse(lhs, scope)?, &id)?;
            let m = match rhs {
                Some(r) => value_mismatch(&a, &*engine.eval(&*lib().parse(r, scope)?, &id)?, n)?,
                None => zero_mismatch(&a, n)?,
            };
            Outcome::from_mismatch(m)
        }
        CheckKind::Witt { scope, lhs, rhs } => {
            let a = engine.witt(&*lib().parse(lhs, scope)?, &id)?;
            let b = match rhs {
                Some(r) => (*engine.witt(&*lib().parse(r, scope)?, &id)?).clone(),
                None => FourierSeries::zero(1, n)?,
            };
            Outcome::from_mismatch(a.equal_upto(&b, n)?.map(|m| m.to_string()))
        }
        CheckKind::Leading { scope, expr, witt, expected } => {
            let e = lib().parse(expr, scope)?;
            let s = if *witt { (*engine.witt(&e, &id)?).clone() } else { engine.eval_scalar(&e, &id)? };
            Outcome::from_mismatch(leading_mismatch(&s, expected))
        }
        CheckKind::Coefficient { scope, expr, key, value } => {
            let s = engine.eval_scalar(&*lib().parse(expr, scope)?, &id)?;
            let got = s.coeff(&key[0], &key[1], &key[2]);
            if got == *value {
                Outcome::pass()
            } else {
                Outcome::fail(format!("at ({}, {}, {}): {got} != {value}", key[0], key[1], key[2]))
            }
        }
        CheckKind::NonZeroWitt { scope, expr } => {
            let s = engine.witt(&*lib().parse(expr, scope)?, &id)?;
            if s.is_zero() {
                Outcome::fail("Witt image vanishes to the truncation")
            } else {
                Outcome::pass().with_detail(format!("nonzero as required, leading {:?}", crate::catalog::describe_leading(&s)))
            }
        }
        CheckKind::Row { scope, form, matrix, printed, witt } => {
            let m = SymplecticMat::by_name(matrix)?;
            let slashed = Expr::slash(m, lib().parse(form, scope)?);
            if let Some(p) = printed {
                let a = engine.eval_scalar(&slashed, &id)?;
                let b = engine.eval_scalar(&*lib().parse(p, scope)?, &id)?;
                if let Some(mm) = a.equal_upto(&b, n)? {
                    return Ok(Outcome::fail(format!("transformation {mm}")));
                }
            }
            let a = engine.witt(&slashed, &id)?;
            let b = engine.witt(&*lib().parse(witt, scope)?, &id)?;
            Outcome::from_mismatch(a.equal_upto(&b, n)?.map(|mm| format!("Witt image {mm}")))
        }
        CheckKind::Generator { group, jtype, name } => {
            let p = generator(*group, *jtype, name)?;
            let mut o = witt_outcome(engine, &p)?;
            if o.status == Status::Pass && !check_parity(engine, &p)? {
                o = Outcome::fail("parity of (f0, hhat) does not match the type");
            }
            o
        }
        CheckKind::Pair { group, jtype, weight, f0, hhat, pieces, expect } => {
            let p = XiPair::parse("pair", *group, *jtype, *weight, f0.as_deref(), hhat.as_deref())?;
            match expect {
                Expect::Holomorphic => {
                    let o = witt_outcome(engine, &p)?;
                    if o.status == Status::Fail && !pieces.is_empty() {
                        let f0 = p.f0.clone().ok_or_else(|| Error::Internal("fit needs f0".into()))?;
                        let ps = pieces.iter().map(|s| lib().parse(s, group.prefix())).collect::<Result<Vec<_>>>()?;
                        let fit = fit_hhat_constants(engine, &f0, *weight, &ps, &coset_reps(*group))?;
                        let d = match fit {
                            Some(cs) => format!("fitted constants [{}]", cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")),
                            None => "no constants fit".to_string(),
                        };
                        o.with_detail(d)
                    } else {
                        o
                    }
                }
                Expect::FailsAt(mname) => {
                    let m = SymplecticMat::by_name(mname)?;
                    let w = witt_condition(engine, &p, &m)?;
                    if w.passed() {
                        Outcome::fail(format!("Witt condition holds at {mname}"))
                    } else {
                        Outcome::pass().with_detail(format!(
                            "fails at {mname} as required, residual leading {:?}",
                            crate::catalog::describe_leading(&w.residual)
                        ))
                    }
                }
            }
        }
        CheckKind::Dims { .. } => unreachable!("handled by run_check"),
        CheckKind::Brackets { group, cases } => check_random_brackets(engine, *group, *cases)?,
        CheckKind::BracketTuples { group } => check_bracket_tuples(engine, *group)?,
        CheckKind::Module { group, cases } => check_module_relations(engine, *group, *cases)?,
        CheckKind::Custom(f) => f(engine)?,
    })
}

fn witt_outcome(engine: &Engine, p: &XiPair) -> Result<Outcome> {
    for w in witt_all(engine, p)? {
        if !w.passed() {
            let m = w.matrix.name().unwrap_or("M").to_string();
            return Ok(Outcome::fail(format!(
                "Witt residual at {m} nonzero, leading {:?}",
                crate::catalog::describe_leading(&w.residual)
            )));
        }
    }
    Ok(Outcome::pass())
}

fn check_sign_rule(engine: &Engine) -> Result<Outcome> {
    let n = engine.trunc();
    let shifts: [[i64; 4]; 7] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [1, 1, 1, 1], [-1, 0, 1, 0], [0, 1, 0, -1]];
    for m in ThetaChar::all(2) {
        let mi = m.to_ints();
        let base = theta_const(&m, n)?;
        for s in shifts {
            let shifted: Vec<i64> = (0..4).map(|i| mi[i] + 2 * s[i]).collect();
            let t = theta_const_int(2, &shifted, n)?;
            let e = mi[0] * s[2] + mi[1] * s[3];
            let expect = if e.rem_euclid(2) == 0 { base.clone() } else { base.neg() };
            if let Some(mm) = t.equal_upto(&expect, n)? {
                return Ok(Outcome::fail(format!("theta_{m} shifted by 2{s:?}: {mm}")));
            }
        }
    }
    Ok(Outcome::pass())
}

fn check_odd_vanish(engine: &Engine) -> Result<Outcome> {
    for m in ThetaChar::all(2).into_iter().filter(|m| !m.is_even()) {
        if !theta_const(&m, engine.trunc())?.is_zero() {
            return Ok(Outcome::fail(format!("theta_{m} is not zero")));
        }
    }
    Ok(Outcome::pass())
}

fn chi5(engine: &Engine) -> Result<FourierSeries> {
    engine.eval_scalar(&*lib().get("level1.chi5")?, &id())
}

fn check_det_neg_chi5(engine: &Engine) -> Result<Outcome> {
    let d = theta_matrix_det(engine.trunc())?;
    Ok(Outcome::from_mismatch(d.equal_upto(&chi5(engine)?.neg(), engine.trunc())?.map(|m| m.to_string())))
}

fn check_det_chi5_printed(engine: &Engine) -> Result<Outcome> {
    let d = theta_matrix_det(engine.trunc())?;
    let o = Outcome::from_mismatch(d.equal_upto(&chi5(engine)?, engine.trunc())?.map(|m| m.to_string()));
    Ok(o.with_detail(format!("4 det Theta leading {:?}", crate::catalog::describe_leading(&d))))
}

fn check_det_witt(engine: &Engine) -> Result<Outcome> {
    let d = theta_matrix_det(engine.trunc())?;
    Ok(if d.witt().is_zero() { Outcome::pass() } else { Outcome::fail("W(det Theta) is not zero") })
}

fn check_delta(engine: &Engine) -> Result<Outcome> {
    let d = engine.eval_scalar(&*lib().get("delta")?, &id())?;
    // q - 24q^2 + 252q^3 - 1472q^4
    for (k, v) in [(1, 1), (2, -24), (3, 252), (4, -1472)] {
        let got = d.get(k, 0, 0);
        if got != CycRat::int(v) {
            return Ok(Outcome::fail(format!("coefficient of q^{k}: {got} != {v}")));
        }
    }
    Ok(Outcome::pass())
}

fn det3(m: &[[FourierSeries; 3]; 3]) -> Result<FourierSeries> {
    let d2 = |a: &FourierSeries, b: &FourierSeries, c: &FourierSeries, d: &FourierSeries| -> Result<FourierSeries> { a.mul(d)?.sub(&b.mul(c)?) };
    let c0 = d2(&m[1][1], &m[1][2], &m[2][1], &m[2][2])?;
    let c1 = d2(&m[1][0], &m[1][2], &m[2][0], &m[2][2])?;
    let c2 = d2(&m[1][0], &m[1][1], &m[2][0], &m[2][1])?;
    m[0][0].mul(&c0)?.sub(&m[0][1].mul(&c1)?)?.add(&m[0][2].mul(&c2)?)
}

/// det of the component matrix of ({a1,e3}, {b3,e3}, {φ4,e3}).
pub fn level3_det3(engine: &Engine) -> Result<FourierSeries> {
    let rows = ["(b2 a1 e3)", "(b2 b3 e3)", "(b2 phi4 e3)"]
        .iter()
        .map(|s| engine.eval_sym2(&*lib().parse(s, "level3")?, &id()))
        .collect::<Result<Vec<_>>>()?;
    let m = [0, 1, 2].map(|i| [rows[i].h20.clone(), rows[i].h11.clone(), rows[i].h02.clone()]);
    det3(&m)
}

/// c(e(-τ12) - e(τ12))(e(2τ11 + 3τ22) + s·e(3τ11 + 2τ22)).
fn det3_pattern(c: &CycRat, s: i64) -> Vec<([Rat; 3], CycRat)> {
    let d = c.scale(&Rat::int(s));
    vec![
        (key((2, 1), (-1, 1), (3, 1)), c.clone()),
        (key((2, 1), (1, 1), (3, 1)), c.neg_()),
        (key((3, 1), (-1, 1), (2, 1)), d.clone()),
        (key((3, 1), (1, 1), (2, 1)), d.neg_()),
    ]
}

/// Leading terms have the shape c(e(-τ12) - e(τ12))(e(2τ11 + 3τ22) - e(3τ11 + 2τ22)) with c != 0;
/// swapping τ11 and τ22 fixes each bracket column and swaps the u1², u2² rows, so the determinant is odd.
fn check_level3_det3(engine: &Engine) -> Result<Outcome> {
    let d = level3_det3(engine)?;
    let c = d.coeff(&Rat::int(2), &Rat::int(-1), &Rat::int(3));
    if c.is_zero() {
        return Ok(Outcome::fail("coefficient at (2, -1, 3) vanishes"));
    }
    Ok(Outcome::from_mismatch(leading_mismatch(&d, &det3_pattern(&c, -1))).with_detail(format!("c = {c}")))
}

fn check_level3_det3_printed(engine: &Engine) -> Result<Outcome> {
    let d = level3_det3(engine)?;
    Ok(Outcome::from_mismatch(leading_mismatch(&d, &det3_pattern(&CycRat::int(16874416668672), 1))))
}

/// -(F1^3 - F2)(3F1^3 - F2)/108 = η(τ)^6 η(3τ)^6 in τ11.
fn check_eta6_f(engine: &Engine) -> Result<Outcome> {
    let n = engine.trunc();
    let lhs = engine.eval_scalar(&*lib().parse("(* -1/108 (- (^ F1 3) F2) (- (* 3 (^ F1 3)) F2))", "level3")?, &id())?;
    // coefficients of q ∏ (1 - q^m)^6 (1 - q^3m)^6 up to q^n
    let len = n as usize + 1;
    let mut p = vec![0i64; len];
    p[1] = 1;
    for m in 1..len {
        for step in [m, 3 * m] {
            for _ in 0..6 {
                for i in (step..len).rev() {
                    p[i] -= p[i - step];
                }
            }
        }
    }
    let eta = FourierSeries::from_terms(1, n, p.iter().enumerate().map(|(i, &c)| (ExpKey::new(i as i32, 0, 0), CycRat::int(c))))?;
    Ok(Outcome::from_mismatch(lhs.equal_upto(&eta, n)?.map(|m| m.to_string())))
}

trait NegExt {
    fn neg_(&self) -> Self;
}

impl NegExt for CycRat {
    fn neg_(&self) -> CycRat {
        self.scale(&Rat::int(-1))
    }
}

/// Ring-generator series of a group with their weights.
fn ring_forms(g: GroupId) -> Result<Vec<(ExprRef, i64)>> {
    let cat = build_catalog(g);
    cat.in_scope_ring.iter().map(|(name, k)| Ok((cat.form(name)?, *k))).collect()
}

fn random_monomial(rng: &mut StdRng, gens: &[(ExprRef, i64)], max_w: i64) -> Result<ExprRef> {
    let weights: Vec<i64> = gens.iter().map(|g| g.1).collect();
    loop {
        let k = rng.gen_range(1..=max_w);
        let monos = monomials_of_weight(&weights, k);
        if monos.is_empty() {
            continue;
        }
        let exps = &monos[rng.gen_range(0..monos.len())];
        let g: Vec<ExprRef> = gens.iter().map(|g| g.0.clone()).collect();
        return monomial_expr(&g, exps);
    }
}

fn weighted(engine: &Engine, e: &ExprRef) -> Result<WeightedForm> {
    WeightedForm::from_series(engine.eval_scalar(e, &id())?.with_label(e.to_string()))
}

fn rel2(f: &[WeightedForm; 3]) -> Result<Sym2Series> {
    let mut acc: Option<Sym2Series> = None;
    for i in 0..3 {
        let (a, b, cc) = (&f[i], &f[(i + 1) % 3], &f[(i + 2) % 3]);
        let t = bracket2(b, cc)?.mul_scalar(&a.series.scale_rat(&a.weight))?;
        acc = Some(match acc {
            None => t,
            Some(x) => x.add(&t)?,
        });
    }
    Ok(acc.unwrap())
}

/// Σ (-1)^i k_i f_i {f_(i+1), f_(i+2), f_(i+3)}, indices mod 4.
fn rel3(f: &[WeightedForm; 4]) -> Result<Sym2Series> {
    let mut acc: Option<Sym2Series> = None;
    for i in 0..4 {
        let sign = Rat::int(if i % 2 == 0 { 1 } else { -1 });
        let t = bracket3(&f[(i + 1) % 4], &f[(i + 2) % 4], &f[(i + 3) % 4])?.mul_scalar(&f[i].series.scale_rat(&(&f[i].weight * &sign)))?;
        acc = Some(match acc {
            None => t,
            Some(x) => x.add(&t)?,
        });
    }
    Ok(acc.unwrap())
}

/// Left side minus right side of the ∂12 identity for the four-fold bracket.
fn ref4(f: &[WeightedForm; 4]) -> Result<FourierSeries> {
    let mut acc = bracket4(&f[0], &f[1], &f[2], &f[3])?.series.scale_rat(&Rat::int(-2));
    for i in 0..4 {
        let t = f[i].series.d_partial(Deriv::D12).mul(&bracket3(&f[(i + 1) % 4], &f[(i + 2) % 4], &f[(i + 3) % 4])?.h11)?;
        acc = if i % 2 == 0 { acc.add(&t)? } else { acc.sub(&t)? };
    }
    Ok(acc)
}

fn sym2_zero(s: &Sym2Series, n: u32, what: &str) -> Result<Option<String>> {
    Ok(s.equal_upto(&Sym2Series::zero(1, n)?, n)?.map(|(c, m)| format!("{what}: {} {m}", c.name())))
}

fn scalar_zero(s: &FourierSeries, n: u32, what: &str) -> Result<Option<String>> {
    Ok(s.equal_upto(&FourierSeries::zero(1, n)?, n)?.map(|m| format!("{what}: {m}")))
}

/// The three Jacobi-type identities on every triple and quadruple of ring generators.
fn check_bracket_tuples(engine: &Engine, g: GroupId) -> Result<Outcome> {
    let n = engine.trunc();
    let gens = ring_forms(g)?;
    let fs = gens.iter().map(|(e, _)| weighted(engine, e)).collect::<Result<Vec<_>>>()?;
    let mut count = 0;
    for i in 0..fs.len() {
        for j in i + 1..fs.len() {
            for k in j + 1..fs.len() {
                count += 1;
                let t = [fs[i].clone(), fs[j].clone(), fs[k].clone()];
                if let Some(m) = sym2_zero(&rel2(&t)?, n, &format!("rel2 ({i},{j},{k})"))? {
                    return Ok(Outcome::fail(m));
                }
            }
        }
    }
    if fs.len() >= 4 {
        let q = [fs[0].clone(), fs[1].clone(), fs[2].clone(), fs[3].clone()];
        count += 2;
        if let Some(m) = sym2_zero(&rel3(&q)?, n, "rel3")? {
            return Ok(Outcome::fail(m));
        }
        if let Some(m) = scalar_zero(&ref4(&q)?, n, "ref4")? {
            return Ok(Outcome::fail(m));
        }
    }
    Ok(Outcome::pass().with_detail(format!("{count} identities")))
}

/// Randomized identities: antisymmetry, repeated arguments, and the three Jacobi-type relations.
fn check_random_brackets(engine: &Engine, g: GroupId, cases: usize) -> Result<Outcome> {
    let n = engine.trunc();
    let gens = ring_forms(g)?;
    let max_w = gens.iter().map(|g| g.1).max().unwrap_or(1).min(6);
    let mut rng = StdRng::seed_from_u64(0x5eed ^ g as u64);
    for case in 0..cases {
        let pick = |rng: &mut StdRng| -> Result<WeightedForm> { weighted(engine, &random_monomial(rng, &gens, max_w)?) };
        let f = [pick(&mut rng)?, pick(&mut rng)?, pick(&mut rng)?, pick(&mut rng)?];
        let what = format!("case {case} ({}, {}, {}, {})", f[0].label, f[1].label, f[2].label, f[3].label);
        let bad = match case % 7 {
            0 => sym2_zero(&bracket2(&f[0], &f[1])?.add(&bracket2(&f[1], &f[0])?)?, n, &format!("{what} {{f,g}} antisymmetry"))?
                .or(sym2_zero(&bracket2(&f[0], &f[0])?, n, &format!("{what} {{f,f}}"))?),
            1 => sym2_zero(&bracket3(&f[0], &f[1], &f[2])?.add(&bracket3(&f[1], &f[0], &f[2])?)?, n, &format!("{what} three-fold antisymmetry"))?
                .or(sym2_zero(&bracket3(&f[0], &f[1], &f[0])?, n, &format!("{what} three-fold repeated"))?),
            2 => scalar_zero(&bracket4(&f[0], &f[1], &f[2], &f[3])?.series.add(&bracket4(&f[0], &f[1], &f[3], &f[2])?.series)?, n, &format!("{what} four-fold antisymmetry"))?
                .or(scalar_zero(&bracket4(&f[0], &f[1], &f[2], &f[1])?.series, n, &format!("{what} four-fold repeated"))?),
            3 => sym2_zero(&rel2(&[f[0].clone(), f[1].clone(), f[2].clone()])?, n, &format!("{what} rel2"))?,
            4 => sym2_zero(&rel3(&f)?, n, &format!("{what} rel3"))?,
            5 => scalar_zero(&ref4(&f)?, n, &format!("{what} ref4"))?,
            _ => {
                let fg = WeightedForm::new(f[0].series.mul(&f[1].series)?, &f[0].weight + &f[1].weight, "fg");
                let rhs = bracket2(&f[1], &f[2])?.mul_scalar(&f[0].series)?.add(&bracket2(&f[0], &f[2])?.mul_scalar(&f[1].series)?)?;
                sym2_zero(&bracket2(&fg, &f[2])?.sub(&rhs)?, n, &format!("{what} Leibniz"))?
            }
        };
        if let Some(m) = bad {
            return Ok(Outcome::fail(m));
        }
    }
    Ok(Outcome::pass().with_detail(format!("{cases} cases")))
}

/// The module-action identities on random pairs of ring elements.
fn check_module_relations(engine: &Engine, g: GroupId, cases: usize) -> Result<Outcome> {
    let n = engine.trunc();
    let gens = ring_forms(g)?;
    let max_w = gens.iter().map(|g| g.1).max().unwrap_or(1).min(6);
    let mut rng = StdRng::seed_from_u64(0xacce ^ g as u64);
    let idm = id();
    for case in 0..cases {
        let f = random_monomial(&mut rng, &gens, max_w)?;
        let gg = random_monomial(&mut rng, &gens, max_w)?;
        let k1 = f.weight.as_ref().and_then(Rat::to_i64).unwrap();
        let k2 = gg.weight.as_ref().and_then(Rat::to_i64).unwrap();
        let pf = XiPair::new("f", Some(f.clone()), None, k1, g, JType::I)?;
        let pg = XiPair::new("g", Some(gg.clone()), None, k2, g, JType::I)?;
        let (af, ah) = module_action(&f, &pg)?.values(engine, &idm)?;
        let (bf, bh) = module_action(&gg, &pf)?.values(engine, &idm)?;
        let what = format!("case {case} (f = {f}, g = {gg})");
        // rel1
        let br = bracket2(&weighted(engine, &f)?, &weighted(engine, &gg)?)?;
        let lhs = ah.sub(&bh)?.scale(&CycRat::int(k1 * k2));
        if let Some(m) = scalar_zero(&af.sub(&bf)?, n, &format!("{what} rel1 f0"))? {
            return Ok(Outcome::fail(m));
        }
        if let Some((cpt, m)) = lhs.equal_upto(&br, n)? {
            return Ok(Outcome::fail(format!("{what} rel1 {} {m}", cpt.name())));
        }
        // rel4
        let h4 = ah.scale(&CycRat::frac(k2, k1 + k2)).add(&bh.scale(&CycRat::frac(k1, k1 + k2)))?;
        if let Some(m) = sym2_zero(&h4, n, &format!("{what} rel4"))? {
            return Ok(Outcome::fail(m));
        }
        // rel5 with h = {f, g}
        let h = Expr::bracket2(f.clone(), gg.clone())?;
        let p0 = XiPair::new("h", None, Some(h.clone()), k1 + k2, g, JType::II)?;
        let (cf, ch) = module_action(&f, &p0)?.values(engine, &idm)?;
        let want = engine.eval_sym2(&*Expr::mul(f.clone(), h)?, &idm)?;
        if !cf.is_zero() {
            return Ok(Outcome::fail(format!("{what} rel5 f0 not zero")));
        }
        if let Some((cpt, m)) = ch.equal_upto(&want, n)? {
            return Ok(Outcome::fail(format!("{what} rel5 {} {m}", cpt.name())));
        }
    }
    Ok(Outcome::pass().with_detail(format!("{cases} cases")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_namespaced() {
        let r = registry();
        let mut names: Vec<&str> = r.iter().map(|c| c.name.as_str()).collect();
        let before = names.len();
        names.sort();
        names.dedup();
        assert_eq!(before, names.len());
        let spaces = ["theta.", "level1.", "level2.", "level3.", "level4.", "jacobi.", "module.", "brackets.", "dims.", "negctrl.", "printed."];
        for n in names {
            assert!(spaces.iter().any(|s| n.starts_with(s)), "{n}");
        }
    }

    #[test]
    fn filter_globs() {
        let cfg = RunConfig { filter: vec!["level3.witt.*".into()], ..RunConfig::default() };
        let sel = select(&cfg);
        assert!(sel.len() >= 10);
        assert!(sel.iter().all(|c| c.name.starts_with("level3.witt.")));
        let bad = RunConfig { trunc: 9, ceiling: 8, ..RunConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn exit_codes() {
        let mk = |p, f, i| RunReport { schema: REPORT_SCHEMA, config: RunConfig::default(), results: vec![], summary: Summary { pass: p, fail: f, inconclusive: i } };
        assert_eq!(mk(3, 0, 0).exit_code(false), 0);
        assert_eq!(mk(3, 1, 1).exit_code(false), 1);
        assert_eq!(mk(3, 0, 1).exit_code(false), 3);
        assert_eq!(mk(3, 0, 1).exit_code(true), 0);
    }

    #[test]
    fn dims_judgement() {
        let r = |rank, spanning, in_scope| DimRow { weight: 1, predicted: in_scope, spanning, rank, in_scope };
        assert_eq!(judge_dims(&[r(2, 2, 2)]).0.status, Status::Pass);
        let (o, short) = judge_dims(&[r(1, 2, 2)]);
        assert!(short && o.status == Status::Fail);
        let (o, short) = judge_dims(&[r(2, 3, 2)]);
        assert!(!short && o.status == Status::Fail);
    }
}
