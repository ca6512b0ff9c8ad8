//! One line per acceptance criterion. Exits non-zero only when a check that is expected
//! to hold fails; criteria whose printed statement is wrong are reported as FAIL with the reason.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;

use jacobi2_core::expr::{Atom, Leaf, Node};
use jacobi2_core::jacobi::{generators, JType};
use jacobi2_core::suite::{run, RunConfig, RunReport, Status};
use jacobi2_core::symplectic::{automorphy_det, coset_reps};
use jacobi2_core::theta::{act, lattice_defsum_eval, theta_defsum_eval};
use jacobi2_core::{Engine, Expr, GroupId, SymplecticMat};
use num_complex::Complex64;

type C2 = [[Complex64; 2]; 2];

struct Criterion {
    id: u32,
    text: &'static str,
    /// Checks that must pass.
    holds: &'static [&'static str],
    /// Checks encoding a statement exactly as printed; a failure here marks the criterion FAIL
    /// without failing the target.
    literal: &'static [(&'static str, &'static str)],
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        text: "theta foundations: A^4 = B^4 + C^4 at N = 8, sign rule, odd thetas vanish",
        holds: &["level1.theta_jacobi_quartic", "theta.sign_rule", "theta.odd_vanish"],
        literal: &[],
    },
    Criterion {
        id: 2,
        text: "W(d12 theta_1111) = -(1/4) A B C a b c at N = 6",
        holds: &["theta.d12_theta1111"],
        literal: &[],
    },
    Criterion {
        id: 3,
        text: "level 1: a(1,1,1; chi10) = 1, 4 det(Theta) leading coefficient -1, W(d12^2 chi10) = 2 Delta Delta",
        holds: &["level1.chi10_a111", "level1.chi5_leading", "level1.chi5_sq_chi10", "level1.det_theta_neg_chi5", "level1.det_theta_witt", "level1.chi10_d12sq"],
        literal: &[("printed.level1.det_theta_chi5", "4 det(Theta) = -chi5, so its coefficient at (1/2,1/2,1/2) is +1")],
    },
    Criterion {
        id: 4,
        text: "level 2: W(d12^2 K6) = W(Y4 Z4)/2, chi19 Witt identity, M1 identity, slash table at N = 4",
        holds: &["level2.*"],
        literal: &[("printed.level2.slash_Z4_M1", "Z4|M1 equals (theta_0010^4 - theta_0100^4)^2/16384, not the printed theta_0110 form")],
    },
    Criterion {
        id: 5,
        text: "level 3: chi10 = c4 e3^2/6144, c4 formula, W(d12^2 c4), Delta in F1 F2, starred Witt images, leading coefficients",
        holds: &["level3.chi10_c4e3sq", "level3.c4_formula", "level3.d12sq_c4", "level3.eta6_F", "level3.witt.*", "level3.leading.*"],
        literal: &[
            ("printed.level3.delta_F", "the printed Delta identity has weight 6; -(F1^3-F2)(3F1^3-F2)/108 = eta^6(tau) eta^6(3 tau)"),
            ("printed.level3.witt_c4s", "W(c4*) carries -8/81, not +8/81"),
            ("printed.level3.d12sq_e3s", "W(d12^2 e3*) = +54 W(a1* c4*)"),
            ("printed.level3.leading_starred", "starred leading coefficient is -16/81 at (1/3,0,2/3), not 16/243"),
        ],
    },
    Criterion {
        id: 6,
        text: "level 4 Gamma0(4): f3 g3 = -36864 K6, chi10, W(d12^2 f3) = -(3/16) W(F0), W(g3), 12-row table",
        holds: &["level4.f3g3_K6", "level4.g04.*"],
        literal: &[],
    },
    Criterion {
        id: 7,
        text: "level 4 Gamma0^0(2): K6, Y4, chi10, d12^2 Witt values, F1..F4 equations, 16-row table",
        holds: &["level4.g002.*"],
        literal: &[],
    },
    Criterion {
        id: 8,
        text: "bracket identities rel2, rel3, ref4 on generator tuples; 50 randomized cases per group",
        holds: &["brackets.level*", "module.*"],
        literal: &[("printed.brackets.rel3", "rel3 needs alternating signs: sum (-1)^i k_i f_i {f_(i+1), f_(i+2), f_(i+3)} = 0")],
    },
    Criterion {
        id: 9,
        text: "every in-scope generator passes the Witt condition at every coset representative; negative controls fail",
        holds: &["jacobi.*", "negctrl.*"],
        literal: &[],
    },
    Criterion {
        id: 10,
        text: "ranks match Hilbert coefficients (weight <= 10 type I, <= 14 type II) at N <= 8",
        holds: &["dims.*"],
        literal: &[],
    },
];

fn glob_match(pat: &str, name: &str) -> bool {
    match pat.strip_suffix('*') {
        Some(p) => name.starts_with(p),
        None => pat == name,
    }
}

struct Line {
    pass: bool,
    hard_fail: bool,
    reason: String,
}

fn judge(c: &Criterion, report: &RunReport) -> Line {
    let mut bad = Vec::new();
    let mut count = 0;
    for r in &report.results {
        if c.holds.iter().any(|p| glob_match(p, &r.check)) {
            count += 1;
            if r.status != Status::Pass {
                bad.push(format!("{} {}", r.check, r.status.name()));
            }
        }
    }
    if count == 0 {
        return Line { pass: false, hard_fail: true, reason: "no checks selected".into() };
    }
    if !bad.is_empty() {
        return Line { pass: false, hard_fail: true, reason: bad.join("; ") };
    }
    let mut notes = Vec::new();
    for (name, why) in c.literal {
        match report.get(name) {
            Some(r) if r.status == Status::Pass => {}
            Some(r) => notes.push(format!("{name} {}: {why}", r.status.name())),
            None => notes.push(format!("{name} missing")),
        }
    }
    if notes.is_empty() {
        Line { pass: true, hard_fail: false, reason: format!("{count} checks") }
    } else {
        Line { pass: false, hard_fail: false, reason: format!("as printed: {}; corrected forms pass ({count} checks)", notes.join("; ")) }
    }
}

fn tau0() -> C2 {
    let z = |re: f64, im: f64| Complex64::new(re, im);
    [[z(0.0, 1.3), z(0.0, 0.1)], [z(0.0, 0.1), z(0.0, 1.7)]]
}

fn collect(e: &Expr, m: SymplecticMat, out: &mut BTreeSet<(String, SymplecticMat)>, leaves: &mut Vec<(Arc<Leaf>, SymplecticMat)>) {
    match &e.node {
        Node::Leaf(l) => {
            if out.insert((l.name.clone(), m)) {
                leaves.push((l.clone(), m));
            }
        }
        Node::Const(_) => {}
        Node::Add(v) => v.iter().for_each(|x| collect(x, m, out, leaves)),
        Node::Mul(a, b) => {
            collect(a, m, out, leaves);
            collect(b, m, out, leaves);
        }
        Node::Scale(_, x) | Node::Pow(x, _) | Node::Deriv(_, x) | Node::Comp(_, x) => collect(x, m, out, leaves),
        Node::Bracket2(v) => v.iter().for_each(|x| collect(x, m, out, leaves)),
        Node::Bracket3(v) => v.iter().for_each(|x| collect(x, m, out, leaves)),
        Node::Bracket4(v) => v.iter().for_each(|x| collect(x, m, out, leaves)),
        Node::Slash(g, x) => collect(x, g.mul(&m), out, leaves),
    }
}

/// Value of an atom at z; None for atoms without a closed degree-two definition.
fn atom_at(a: &Atom, z: &C2) -> Option<Complex64> {
    let id = SymplecticMat::identity();
    match a {
        Atom::Theta(ch) => theta_defsum_eval(ch, z, &id).ok(),
        Atom::Lattice { lattice, scale, shift } => {
            let s = *scale as f64;
            let w = [
                [(z[0][0] + shift[0][0] as f64) / s, (z[0][1] + shift[0][1] as f64) / s],
                [(z[1][0] + shift[1][0] as f64) / s, (z[1][1] + shift[1][1] as f64) / s],
            ];
            lattice_defsum_eval(*lattice, &w, &id).ok()
        }
        Atom::Fixed(_) => None,
    }
}

/// Σ c·monomial at z, with the sum of absolute term sizes for the tolerance.
fn poly_at(p: &jacobi2_core::expr::Poly, z: &C2) -> Option<(Complex64, f64)> {
    let mut s = Complex64::new(0.0, 0.0);
    let mut size = 0.0;
    for (c, mono) in &p.terms {
        let mut t = c.to_complex();
        for (a, e) in mono {
            t *= atom_at(a, z)?.powu(*e);
        }
        size += t.norm();
        s += t;
    }
    Some((s, size))
}

struct SmokeResult {
    compared: usize,
    skipped: usize,
    failures: Vec<String>,
}

fn transformation_smoke() -> SmokeResult {
    let engine = Engine::new(1);
    let tau = tau0();
    let mut res = SmokeResult { compared: 0, skipped: 0, failures: Vec::new() };
    for g in GroupId::ALL {
        for t in [JType::I, JType::II] {
            for p in generators(g, t) {
                for rep in coset_reps(g) {
                    let mut seen = BTreeSet::new();
                    let mut leaves = Vec::new();
                    for e in p.f0.iter().chain(p.hhat.iter()) {
                        collect(e, rep, &mut seen, &mut leaves);
                    }
                    for (leaf, m) in &leaves {
                        let k = match &leaf.weight {
                            Some(w) if w.is_integer() => w.to_f64().round() as i32,
                            _ => {
                                res.skipped += 1;
                                continue;
                            }
                        };
                        let Ok(slashed) = engine.slashed_leaf(leaf, m) else {
                            res.failures.push(format!("{} {}: structural slash failed", p.name, leaf.name));
                            continue;
                        };
                        let direct = poly_at(&leaf.poly, &act(m, &tau));
                        let structural = poly_at(&slashed, &tau);
                        let (Some((d, dsize)), Some((s, ssize))) = (direct, structural) else {
                            res.skipped += 1;
                            continue;
                        };
                        let d = d * automorphy_det(m, &tau).powi(-k);
                        let scale = (dsize * automorphy_det(m, &tau).norm().powi(-k)).max(ssize);
                        res.compared += 1;
                        if (d - s).norm() > 1e-9 * scale {
                            res.failures.push(format!("{}.{} {} at {m}: direct {d} vs structural {s}", g.prefix(), p.name, leaf.name));
                        }
                    }
                }
            }
        }
    }
    res
}

fn main() -> ExitCode {
    let config = RunConfig { trunc: 4, ceiling: 8, ..RunConfig::default() };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            println!("suite error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut hard = false;
    for c in CRITERIA {
        let l = judge(c, &report);
        hard |= l.hard_fail;
        println!("AC{} {}: {} ({})", c.id, if l.pass { "PASS" } else { "FAIL" }, c.text, l.reason);
    }
    let smoke = transformation_smoke();
    let ok = smoke.failures.is_empty() && smoke.compared > 0;
    hard |= !ok;
    let reason = if ok {
        format!("{} leaf/representative pairs agree to 1e-9, {} with non-theta atoms or half-integral weight skipped", smoke.compared, smoke.skipped)
    } else {
        format!("{} mismatches, first: {}", smoke.failures.len(), smoke.failures.first().map(String::as_str).unwrap_or("none compared"))
    };
    println!(
        "AC11 {}: float evaluation at diag(1.3i, 1.7i) + 0.1i S0 matches the structural slash ({reason})",
        if ok { "PASS" } else { "FAIL" }
    );
    if hard {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
