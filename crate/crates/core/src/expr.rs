//! Symbolic expressions over named forms.
//!
//! Leaves are polynomials in *atoms* (theta constants, lattice thetas, fixed
//! one-variable series). Slashing is structural: an expression is slashed by
//! slashing its leaves, which is valid for every modular node (sums, products,
//! brackets). `Deriv` and `Comp` nodes are evaluated on the slashed argument,
//! so `(d12 f)` under M means ∂12(f|M).
//!
//! Two evaluators share the caches of an [`Engine`]: [`Engine::eval`] builds
//! full series, [`Engine::jet`] computes W(∂^α(e|M)) through the Leibniz rule
//! without ever forming three-variable products.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};
use crate::operators::{self, Row, WeightedForm, B3_H02, B3_H11, B3_H20, B4_ROWS};
use crate::series::{Deriv, FourierSeries, Sym2Comp, Sym2Series};
use crate::symplectic::{slash_theta_product, SymplecticMat};
use crate::theta::{delta_series, gamma3_thetas, lattice_theta, theta_const, theta_harmonic_c4, Lattice, ThetaChar};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Which diagonal variable a one-variable series lives in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T11,
    T22,
}

/// One-variable series, usable only unslashed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fixed {
    /// Degree-one theta constant θ_{m'm''}.
    Theta1(u8, u8, Var),
    /// Degree-one lattice theta.
    Lattice1(Lattice, Var),
    /// Γ(3) thetas θ0, θ1.
    Gamma3(u8, Var),
    Delta(Var),
    /// The harmonic theta c4 (degree two).
    HarmonicC4,
}

impl Fixed {
    fn weight(self) -> Rat {
        match self {
            Fixed::Theta1(..) => Rat::frac(1, 2),
            Fixed::Lattice1(l, _) => Rat::frac(l.rank() as i64, 2),
            Fixed::Gamma3(..) => Rat::ONE,
            Fixed::Delta(_) => Rat::int(12),
            Fixed::HarmonicC4 => Rat::int(4),
        }
    }

    fn series(self, n: u32) -> Result<FourierSeries> {
        let (s, var) = match self {
            Fixed::Theta1(a, b, v) => (theta_const(&ThetaChar::deg1(a, b)?, n)?, v),
            Fixed::Lattice1(l, v) => (lattice_theta(l, 1, 1, n)?, v),
            Fixed::Gamma3(i, v) => {
                let (t0, t1) = gamma3_thetas(n);
                (if i == 0 { t0 } else { t1 }, v)
            }
            Fixed::Delta(v) => (delta_series(n), v),
            Fixed::HarmonicC4 => return theta_harmonic_c4(n),
        };
        Ok(if var == Var::T22 { s.swap_vars() } else { s })
    }
}

/// A factor of a leaf polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// Degree-two theta constant, weight 1/2.
    Theta(ThetaChar),
    /// θ_L(τ/scale + S) in degree two.
    Lattice { lattice: Lattice, scale: u32, shift: [[i64; 2]; 2] },
    Fixed(Fixed),
}

impl Atom {
    pub fn lattice(l: Lattice) -> Atom {
        Atom::Lattice { lattice: l, scale: 1, shift: [[0, 0], [0, 0]] }
    }

    fn weight(&self) -> Rat {
        match self {
            Atom::Theta(_) => Rat::frac(1, 2),
            Atom::Lattice { lattice, .. } => Rat::frac(lattice.rank() as i64, 2),
            Atom::Fixed(f) => f.weight(),
        }
    }

    fn series(&self, n: u32) -> Result<FourierSeries> {
        match self {
            Atom::Theta(m) => theta_const(m, n),
            Atom::Lattice { lattice, scale, shift } => {
                let s = lattice_theta(*lattice, 2, *scale, n)?;
                if *shift == [[0, 0], [0, 0]] {
                    Ok(s)
                } else {
                    s.translate(*shift)
                }
            }
            Atom::Fixed(f) => f.series(n),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Theta(m) => write!(f, "theta_{m}"),
            Atom::Lattice { lattice, scale, shift } => {
                write!(f, "theta_{}", lattice.name())?;
                if *scale != 1 {
                    write!(f, "(tau/{scale})")?;
                }
                if *shift != [[0, 0], [0, 0]] {
                    write!(f, "[+{shift:?}]")?;
                }
                Ok(())
            }
            Atom::Fixed(x) => write!(f, "{x:?}"),
        }
    }
}

/// Sorted list of (atom, exponent).
pub type Monomial = Vec<(Atom, u32)>;

/// Σ c · monomial.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    pub terms: Vec<(CycRat, Monomial)>,
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut m: BTreeMap<Atom, u32> = BTreeMap::new();
    for (x, e) in a.iter().chain(b.iter()) {
        *m.entry(x.clone()).or_default() += e;
    }
    m.into_iter().collect()
}

impl Poly {
    pub fn constant(c: CycRat) -> Poly {
        Poly { terms: if c.is_zero() { vec![] } else { vec![(c, vec![])] } }
    }

    pub fn atom(a: Atom) -> Poly {
        Poly { terms: vec![(CycRat::one(), vec![(a, 1)])] }
    }

    fn collect(it: impl IntoIterator<Item = (CycRat, Monomial)>) -> Poly {
        let mut acc: BTreeMap<Monomial, CycRat> = BTreeMap::new();
        for (c, m) in it {
            *acc.entry(m).or_default() += &c;
        }
        Poly { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|(m, c)| (c, m)).collect() }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        Poly::collect(self.terms.iter().chain(o.terms.iter()).cloned())
    }

    pub fn scale(&self, c: &CycRat) -> Poly {
        Poly::collect(self.terms.iter().map(|(x, m)| (x * c, m.clone())))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = Vec::new();
        for (c1, m1) in &self.terms {
            for (c2, m2) in &o.terms {
                out.push((c1 * c2, mono_mul(m1, m2)));
            }
        }
        Poly::collect(out)
    }

    pub fn pow(&self, e: u32) -> Poly {
        (0..e).fold(Poly::constant(CycRat::one()), |acc, _| acc.mul(self))
    }

    /// Common weight of all monomials, if homogeneous.
    pub fn weight(&self) -> Option<Rat> {
        let mut w: Option<Rat> = None;
        for (_, m) in &self.terms {
            let mw = m.iter().fold(Rat::ZERO, |acc, (a, e)| &acc + &(&a.weight() * &Rat::int(*e as i64)));
            match &w {
                None => w = Some(mw),
                Some(x) if *x == mw => {}
                Some(_) => return None,
            }
        }
        w.or(Some(Rat::ZERO))
    }

    /// Structural slash: theta monomials via the theta transformation law,
    /// lattice thetas by translations and J·translations.
    pub fn slash(&self, m: &SymplecticMat, name: &str) -> Result<Poly> {
        if m.is_identity() {
            return Ok(self.clone());
        }
        let unslashable = |reason: &str| Error::Unslashable { form: name.to_string(), reason: reason.to_string() };
        let trans = m.as_translation();
        let jtrans = m.as_j_translation();
        let mut out = Vec::new();
        for (c, mono) in &self.terms {
            let mut coef = c.clone();
            let mut chars = Vec::new();
            let mut rest: Monomial = Vec::new();
            for (a, e) in mono {
                match a {
                    Atom::Theta(ch) => chars.extend(std::iter::repeat(*ch).take(*e as usize)),
                    Atom::Lattice { lattice, scale: 1, shift } if *shift == [[0, 0], [0, 0]] => {
                        if let Some(s) = trans {
                            rest.push((Atom::Lattice { lattice: *lattice, scale: 1, shift: s }, *e));
                        } else if let Some(s) = jtrans {
                            let (k, l2, sc) = lattice.slash_j();
                            coef = &coef * &k.pow(*e);
                            rest.push((Atom::Lattice { lattice: l2, scale: sc, shift: s }, *e));
                        } else {
                            return Err(unslashable("lattice thetas are slashed only by translations and J-translations"));
                        }
                    }
                    Atom::Lattice { .. } => return Err(unslashable("lattice theta already transformed")),
                    Atom::Fixed(_) => return Err(unslashable("fixed series cannot be slashed")),
                }
            }
            if !chars.is_empty() {
                let sf = slash_theta_product(&chars, m)?;
                coef = &coef * &sf.factor;
                let mut cm: BTreeMap<ThetaChar, u32> = BTreeMap::new();
                for ch in sf.chars_out {
                    *cm.entry(ch).or_default() += 1;
                }
                rest.extend(cm.into_iter().map(|(ch, e)| (Atom::Theta(ch), e)));
            }
            rest.sort();
            out.push((coef, rest));
        }
        Ok(Poly::collect(out))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, m)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (a, e) in m {
                if *e == 1 {
                    write!(f, "*{a}")?;
                } else {
                    write!(f, "*{a}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// A named polynomial in atoms.
#[derive(Debug)]
pub struct Leaf {
    id: u64,
    pub name: String,
    pub poly: Poly,
    pub weight: Option<Rat>,
}

impl Leaf {
    pub fn new(name: impl Into<String>, poly: Poly) -> Arc<Leaf> {
        let weight = poly.weight();
        Arc::new(Leaf { id: fresh_id(), name: name.into(), poly, weight })
    }
}

/// Scalar or Sym²-valued.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Scalar,
    Sym2,
}

#[derive(Debug)]
pub enum Node {
    Leaf(Arc<Leaf>),
    Const(CycRat),
    Add(Vec<ExprRef>),
    /// Scalar times scalar or Sym².
    Mul(ExprRef, ExprRef),
    Scale(CycRat, ExprRef),
    Pow(ExprRef, u32),
    Bracket2([ExprRef; 2]),
    Bracket3([ExprRef; 3]),
    Bracket4([ExprRef; 4]),
    Deriv(Deriv, ExprRef),
    Comp(Sym2Comp, ExprRef),
    Slash(SymplecticMat, ExprRef),
}

pub type ExprRef = Arc<Expr>;

#[derive(Debug)]
pub struct Expr {
    id: u64,
    pub node: Node,
    pub kind: Kind,
    pub weight: Option<Rat>,
}

fn mk(node: Node, kind: Kind, weight: Option<Rat>) -> ExprRef {
    Arc::new(Expr { id: fresh_id(), node, kind, weight })
}

fn need_scalar(e: &Expr, what: &str) -> Result<()> {
    if e.kind != Kind::Scalar {
        return Err(Error::Kind(format!("{what} needs a scalar argument, got {e}")));
    }
    Ok(())
}

fn need_weight(e: &Expr) -> Result<Rat> {
    e.weight.clone().ok_or_else(|| Error::WeightMismatch(format!("bracket argument {e} has no weight")))
}

impl Expr {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn leaf(l: Arc<Leaf>) -> ExprRef {
        let w = l.weight.clone();
        mk(Node::Leaf(l), Kind::Scalar, w)
    }

    pub fn constant(c: CycRat) -> ExprRef {
        mk(Node::Const(c), Kind::Scalar, Some(Rat::ZERO))
    }

    pub fn add(terms: Vec<ExprRef>) -> Result<ExprRef> {
        let Some(first) = terms.first() else {
            return Err(Error::Parse("empty sum".into()));
        };
        let kind = first.kind;
        let weight = first.weight.clone();
        for t in &terms {
            if t.kind != kind {
                return Err(Error::Kind(format!("cannot add {first} and {t}")));
            }
            if t.weight != weight {
                return Err(Error::WeightMismatch(format!("cannot add {first} and {t}")));
            }
        }
        if terms.len() == 1 {
            return Ok(terms.into_iter().next().unwrap());
        }
        Ok(mk(Node::Add(terms), kind, weight))
    }

    pub fn sub(a: ExprRef, b: ExprRef) -> Result<ExprRef> {
        Expr::add(vec![a, Expr::scale(CycRat::int(-1), b)])
    }

    pub fn scale(c: CycRat, e: ExprRef) -> ExprRef {
        let (k, w) = (e.kind, e.weight.clone());
        mk(Node::Scale(c, e), k, w)
    }

    pub fn mul(a: ExprRef, b: ExprRef) -> Result<ExprRef> {
        let (a, b) = if a.kind == Kind::Sym2 { (b, a) } else { (a, b) };
        need_scalar(&a, "product")?;
        if let Node::Const(c) = &a.node {
            return Ok(Expr::scale(c.clone(), b));
        }
        if let Node::Const(c) = &b.node {
            return Ok(Expr::scale(c.clone(), a));
        }
        let w = match (&a.weight, &b.weight) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        let k = b.kind;
        Ok(mk(Node::Mul(a, b), k, w))
    }

    pub fn product(factors: Vec<ExprRef>) -> Result<ExprRef> {
        let mut it = factors.into_iter();
        let first = it.next().ok_or_else(|| Error::Parse("empty product".into()))?;
        it.try_fold(first, Expr::mul)
    }

    pub fn pow(e: ExprRef, n: u32) -> Result<ExprRef> {
        need_scalar(&e, "power")?;
        if n == 1 {
            return Ok(e);
        }
        let w = e.weight.as_ref().map(|w| w * &Rat::int(n as i64));
        Ok(mk(Node::Pow(e, n), Kind::Scalar, w))
    }

    pub fn bracket2(f: ExprRef, g: ExprRef) -> Result<ExprRef> {
        need_scalar(&f, "bracket")?;
        need_scalar(&g, "bracket")?;
        let w = &need_weight(&f)? + &need_weight(&g)?;
        Ok(mk(Node::Bracket2([f, g]), Kind::Sym2, Some(w)))
    }

    pub fn bracket3(f: ExprRef, g: ExprRef, h: ExprRef) -> Result<ExprRef> {
        let mut w = Rat::ONE;
        for x in [&f, &g, &h] {
            need_scalar(x, "bracket")?;
            w = &w + &need_weight(x)?;
        }
        Ok(mk(Node::Bracket3([f, g, h]), Kind::Sym2, Some(w)))
    }

    pub fn bracket4(f: ExprRef, g: ExprRef, h: ExprRef, k: ExprRef) -> Result<ExprRef> {
        let mut w = Rat::int(3);
        for x in [&f, &g, &h, &k] {
            need_scalar(x, "bracket")?;
            w = &w + &need_weight(x)?;
        }
        Ok(mk(Node::Bracket4([f, g, h, k]), Kind::Scalar, Some(w)))
    }

    pub fn deriv(d: Deriv, e: ExprRef) -> Result<ExprRef> {
        need_scalar(&e, "derivative")?;
        Ok(mk(Node::Deriv(d, e), Kind::Scalar, None))
    }

    pub fn comp(c: Sym2Comp, e: ExprRef) -> Result<ExprRef> {
        if e.kind != Kind::Sym2 {
            return Err(Error::Kind(format!("component of scalar {e}")));
        }
        Ok(mk(Node::Comp(c, e), Kind::Scalar, None))
    }

    pub fn slash(m: SymplecticMat, e: ExprRef) -> ExprRef {
        let (k, w) = (e.kind, e.weight.clone());
        mk(Node::Slash(m, e), k, w)
    }

    /// Whether the expression is free of derivative and component nodes.
    pub fn is_modular(&self) -> bool {
        match &self.node {
            Node::Leaf(_) | Node::Const(_) => true,
            Node::Deriv(..) | Node::Comp(..) => false,
            Node::Add(v) => v.iter().all(|e| e.is_modular()),
            Node::Mul(a, b) => a.is_modular() && b.is_modular(),
            Node::Scale(_, e) | Node::Pow(e, _) | Node::Slash(_, e) => e.is_modular(),
            Node::Bracket2(v) => v.iter().all(|e| e.is_modular()),
            Node::Bracket3(v) => v.iter().all(|e| e.is_modular()),
            Node::Bracket4(v) => v.iter().all(|e| e.is_modular()),
        }
    }

    /// Expand into a polynomial in atoms. Only sums, products, powers and constants are allowed.
    pub fn to_poly(&self) -> Result<Poly> {
        Ok(match &self.node {
            Node::Leaf(l) => l.poly.clone(),
            Node::Const(c) => Poly::constant(c.clone()),
            Node::Add(v) => v.iter().try_fold(Poly::default(), |acc, e| Ok::<_, Error>(acc.add(&e.to_poly()?)))?,
            Node::Mul(a, b) => a.to_poly()?.mul(&b.to_poly()?),
            Node::Scale(c, e) => e.to_poly()?.scale(c),
            Node::Pow(e, n) => e.to_poly()?.pow(*n),
            _ => return Err(Error::Kind(format!("{self} is not a polynomial in atoms"))),
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, v: &[ExprRef]| -> fmt::Result {
            write!(f, "({head}")?;
            for e in v {
                write!(f, " {e}")?;
            }
            write!(f, ")")
        };
        match &self.node {
            Node::Leaf(l) => write!(f, "{}", l.name),
            Node::Const(c) => write!(f, "{c}"),
            Node::Add(v) => list(f, "+", v),
            Node::Mul(a, b) => write!(f, "(* {a} {b})"),
            Node::Scale(c, e) => write!(f, "(* {c} {e})"),
            Node::Pow(e, n) => write!(f, "(^ {e} {n})"),
            Node::Bracket2(v) => list(f, "b2", v),
            Node::Bracket3(v) => list(f, "b3", v),
            Node::Bracket4(v) => list(f, "b4", v),
            Node::Deriv(d, e) => write!(f, "({} {e})", d.name()),
            Node::Comp(c, e) => write!(f, "({} {e})", c.name()),
            Node::Slash(m, e) => match m.name() {
                Some(n) => write!(f, "(slash {n} {e})"),
                None => write!(f, "(slash {} {e})", m.row_major().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
            },
        }
    }
}

/// Result of full evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(FourierSeries),
    Sym2(Sym2Series),
}

impl Value {
    pub fn scalar(&self) -> Result<&FourierSeries> {
        match self {
            Value::Scalar(s) => Ok(s),
            Value::Sym2(_) => Err(Error::Kind("expected a scalar value".into())),
        }
    }

    pub fn sym2(&self) -> Result<&Sym2Series> {
        match self {
            Value::Sym2(s) => Ok(s),
            Value::Scalar(_) => Err(Error::Kind("expected a Sym2 value".into())),
        }
    }
}

/// Multi-index of a derivative ∂11^a ∂12^b ∂22^c.
pub type Alpha = [u8; 3];

fn alpha_add(a: Alpha, b: Alpha) -> Alpha {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn deriv_alpha(d: Deriv) -> Alpha {
    let mut a = [0; 3];
    a[d.index()] = 1;
    a
}

fn row_alpha(r: Row) -> Alpha {
    match r {
        Row::K => [0; 3],
        Row::D(d) => deriv_alpha(d),
    }
}

fn sub_alphas(a: Alpha) -> impl Iterator<Item = Alpha> {
    (0..=a[0]).flat_map(move |x| (0..=a[1]).flat_map(move |y| (0..=a[2]).map(move |z| [x, y, z])))
}

fn binom(n: u8, k: u8) -> i64 {
    (0..k as i64).fold(1, |acc, i| acc * (n as i64 - i) / (i + 1))
}

fn multi_binom(a: Alpha, b: Alpha) -> i64 {
    (0..3).map(|i| binom(a[i], b[i])).product()
}

pub(crate) fn permutations_signed(n: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<(Vec<usize>, i64)>) {
        if prefix.len() == n {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if prefix[i] > prefix[j] {
                        inv += 1;
                    }
                }
            }
            out.push((prefix.clone(), if inv % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for x in 0..n {
            if !prefix.contains(&x) {
                prefix.push(x);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, &mut out);
    out
}

type JetKey = (u64, SymplecticMat, Alpha, u8);

/// Evaluation context with a fixed truncation and shared caches.
pub struct Engine {
    n: u32,
    atoms: Mutex<HashMap<Atom, Arc<FourierSeries>>>,
    atom_jets: Mutex<HashMap<(Atom, Alpha), Arc<FourierSeries>>>,
    slashed: Mutex<HashMap<(u64, SymplecticMat), Arc<Poly>>>,
    leaves: Mutex<HashMap<(u64, SymplecticMat), Arc<FourierSeries>>>,
    values: Mutex<HashMap<(u64, SymplecticMat), Arc<Value>>>,
    jets: Mutex<HashMap<JetKey, Arc<FourierSeries>>>,
}

impl Engine {
    pub fn new(n: u32) -> Engine {
        Engine {
            n,
            atoms: Mutex::default(),
            atom_jets: Mutex::default(),
            slashed: Mutex::default(),
            leaves: Mutex::default(),
            values: Mutex::default(),
            jets: Mutex::default(),
        }
    }

    pub fn trunc(&self) -> u32 {
        self.n
    }

    fn one(&self) -> FourierSeries {
        FourierSeries::constant(CycRat::one(), self.n)
    }

    fn zero(&self) -> FourierSeries {
        FourierSeries::zero(1, self.n).unwrap()
    }

    pub fn atom(&self, a: &Atom) -> Result<Arc<FourierSeries>> {
        if let Some(s) = self.atoms.lock().unwrap().get(a) {
            return Ok(s.clone());
        }
        let s = Arc::new(a.series(self.n)?);
        self.atoms.lock().unwrap().insert(a.clone(), s.clone());
        Ok(s)
    }

    fn atom_jet(&self, a: &Atom, alpha: Alpha) -> Result<Arc<FourierSeries>> {
        let key = (a.clone(), alpha);
        if let Some(s) = self.atom_jets.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.atom(a)?.d_multi(alpha).witt().with_weight(None));
        self.atom_jets.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    /// The leaf's polynomial slashed by M (cached).
    pub fn slashed_leaf(&self, l: &Leaf, m: &SymplecticMat) -> Result<Arc<Poly>> {
        let key = (l.id, *m);
        if let Some(p) = self.slashed.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(l.poly.slash(m, &l.name)?);
        self.slashed.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    pub fn poly_series(&self, p: &Poly) -> Result<FourierSeries> {
        let mut acc = self.zero();
        for (c, mono) in &p.terms {
            let mut prod = self.one();
            for (a, e) in mono {
                prod = prod.mul(&self.atom(a)?.pow(*e)?)?;
            }
            acc = acc.add(&prod.scale(c))?;
        }
        Ok(acc.with_weight(p.weight()))
    }

    fn leaf_series(&self, l: &Leaf, m: &SymplecticMat) -> Result<Arc<FourierSeries>> {
        let key = (l.id, *m);
        if let Some(s) = self.leaves.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let p = self.slashed_leaf(l, m)?;
        let s = Arc::new(self.poly_series(&p)?.with_weight(l.weight.clone()).with_label(l.name.clone()));
        self.leaves.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    /// Full evaluation of e|M.
    pub fn eval(&self, e: &Expr, m: &SymplecticMat) -> Result<Arc<Value>> {
        let key = (e.id, *m);
        if let Some(v) = self.values.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.eval_uncached(e, m)?);
        self.values.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// Full evaluation of a scalar expression.
    pub fn eval_scalar(&self, e: &Expr, m: &SymplecticMat) -> Result<FourierSeries> {
        Ok(self.eval(e, m)?.scalar()?.clone())
    }

    pub fn eval_sym2(&self, e: &Expr, m: &SymplecticMat) -> Result<Sym2Series> {
        Ok(self.eval(e, m)?.sym2()?.clone())
    }

    fn weighted(&self, e: &Expr, m: &SymplecticMat) -> Result<WeightedForm> {
        let s = self.eval_scalar(e, m)?;
        Ok(WeightedForm::new(s, need_weight(e)?, e.to_string()))
    }

    fn eval_uncached(&self, e: &Expr, m: &SymplecticMat) -> Result<Value> {
        let tag = |s: FourierSeries| s.with_weight(e.weight.clone());
        Ok(match &e.node {
            Node::Leaf(l) => Value::Scalar((*self.leaf_series(l, m)?).clone()),
            Node::Const(c) => Value::Scalar(FourierSeries::constant(c.clone(), self.n).with_weight(Some(Rat::ZERO))),
            Node::Add(v) => {
                let mut acc = (*self.eval(&v[0], m)?).clone();
                for t in &v[1..] {
                    let x = self.eval(t, m)?;
                    acc = match (&acc, &*x) {
                        (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a.add(b)?),
                        (Value::Sym2(a), Value::Sym2(b)) => Value::Sym2(a.add(b)?),
                        _ => return Err(Error::Kind("mixed sum".into())),
                    };
                }
                match acc {
                    Value::Scalar(s) => Value::Scalar(tag(s)),
                    Value::Sym2(mut s) => {
                        s.weight = e.weight.clone();
                        Value::Sym2(s)
                    }
                }
            }
            Node::Mul(a, b) => {
                let x = self.eval(a, m)?;
                let x = x.scalar()?;
                match &*self.eval(b, m)? {
                    Value::Scalar(y) => Value::Scalar(tag(x.mul(y)?)),
                    Value::Sym2(y) => {
                        let mut s = y.mul_scalar(x)?;
                        s.weight = e.weight.clone();
                        Value::Sym2(s)
                    }
                }
            }
            Node::Scale(c, x) => match &*self.eval(x, m)? {
                Value::Scalar(s) => Value::Scalar(tag(s.scale(c))),
                Value::Sym2(s) => Value::Sym2(s.scale(c)),
            },
            Node::Pow(x, k) => Value::Scalar(tag(self.eval_scalar(x, m)?.pow(*k)?)),
            Node::Bracket2([f, g]) => Value::Sym2(operators::bracket2(&self.weighted(f, m)?, &self.weighted(g, m)?)?),
            Node::Bracket3([f, g, h]) => {
                Value::Sym2(operators::bracket3(&self.weighted(f, m)?, &self.weighted(g, m)?, &self.weighted(h, m)?)?)
            }
            Node::Bracket4([f, g, h, k]) => Value::Scalar(
                operators::bracket4(&self.weighted(f, m)?, &self.weighted(g, m)?, &self.weighted(h, m)?, &self.weighted(k, m)?)?
                    .series,
            ),
            Node::Deriv(d, x) => Value::Scalar(self.eval_scalar(x, m)?.d_partial(*d)),
            Node::Comp(c, x) => Value::Scalar(self.eval_sym2(x, m)?.comp(*c).clone().with_weight(None)),
            Node::Slash(g, x) => (*self.eval(x, &g.mul(m))?).clone(),
        })
    }

    /// Leibniz rule: W∂^α Π_r ∂^{shift_r} g_r where `jet(r, β)` returns W∂^β g_r.
    fn leibniz(
        &self,
        shifts: &[Alpha],
        alpha: Alpha,
        jet: &dyn Fn(usize, Alpha) -> Result<Arc<FourierSeries>>,
    ) -> Result<FourierSeries> {
        let mut partial: HashMap<Alpha, FourierSeries> = HashMap::new();
        partial.insert([0; 3], self.one());
        for (r, shift) in shifts.iter().enumerate() {
            let last = r + 1 == shifts.len();
            let mut next: HashMap<Alpha, FourierSeries> = HashMap::new();
            let targets: Vec<Alpha> = if last { vec![alpha] } else { sub_alphas(alpha).collect() };
            for g in targets {
                let mut acc: Option<FourierSeries> = None;
                for b in sub_alphas(g) {
                    let rest = [g[0] - b[0], g[1] - b[1], g[2] - b[2]];
                    let Some(p) = partial.get(&rest) else { continue };
                    let j = jet(r, alpha_add(b, *shift))?;
                    if j.is_zero() {
                        continue;
                    }
                    let mut t = p.mul(&j)?;
                    let c = multi_binom(g, b);
                    if c != 1 {
                        t = t.scale(&CycRat::int(c));
                    }
                    acc = Some(match acc {
                        None => t,
                        Some(a) => a.add(&t)?,
                    });
                }
                if let Some(a) = acc.filter(|a| !a.is_zero()) {
                    next.insert(g, a);
                }
            }
            partial = next;
            if partial.is_empty() {
                break;
            }
        }
        Ok(partial.remove(&alpha).unwrap_or_else(|| self.zero()))
    }

    fn poly_jet(&self, p: &Poly, alpha: Alpha) -> Result<FourierSeries> {
        let mut acc = self.zero();
        for (c, mono) in &p.terms {
            let factors: Vec<&Atom> = mono.iter().flat_map(|(a, e)| std::iter::repeat(a).take(*e as usize)).collect();
            let t = if factors.is_empty() {
                if alpha == [0; 3] {
                    self.one()
                } else {
                    self.zero()
                }
            } else {
                let shifts = vec![[0; 3]; factors.len()];
                self.leibniz(&shifts, alpha, &|r, b| self.atom_jet(factors[r], b))?
            };
            acc = acc.add(&t.scale(c))?;
        }
        Ok(acc)
    }

    /// W(∂^α (e|M)) for a scalar expression.
    pub fn jet(&self, e: &Expr, m: &SymplecticMat, alpha: Alpha) -> Result<Arc<FourierSeries>> {
        need_scalar(e, "jet")?;
        self.jet_cached(e, m, alpha, 0)
    }

    /// W(∂^α (c-component of e|M)) for a Sym² expression.
    pub fn jet_comp(&self, e: &Expr, c: Sym2Comp, m: &SymplecticMat, alpha: Alpha) -> Result<Arc<FourierSeries>> {
        if e.kind != Kind::Sym2 {
            return Err(Error::Kind(format!("component of scalar {e}")));
        }
        let tag = match c {
            Sym2Comp::H20 => 1,
            Sym2Comp::H11 => 2,
            Sym2Comp::H02 => 3,
        };
        self.jet_cached(e, m, alpha, tag)
    }

    fn jet_cached(&self, e: &Expr, m: &SymplecticMat, alpha: Alpha, comp: u8) -> Result<Arc<FourierSeries>> {
        let key = (e.id, *m, alpha, comp);
        if let Some(s) = self.jets.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.jet_uncached(e, m, alpha, comp)?.with_weight(None));
        self.jets.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    fn sub_jet(&self, e: &Expr, m: &SymplecticMat, alpha: Alpha, comp: u8) -> Result<Arc<FourierSeries>> {
        self.jet_cached(e, m, alpha, comp)
    }

    /// Σ_σ sgn(σ) Π_r row_r(f_σ(r)), jetted.
    fn det_jet(&self, rows: &[Row], args: &[ExprRef], m: &SymplecticMat, alpha: Alpha) -> Result<FourierSeries> {
        let ks: Vec<Rat> = args.iter().map(|a| need_weight(a)).collect::<Result<_>>()?;
        let shifts: Vec<Alpha> = rows.iter().map(|r| row_alpha(*r)).collect();
        let mut acc = self.zero();
        for (perm, sign) in permutations_signed(args.len()) {
            let mut c = Rat::int(sign);
            for (r, row) in rows.iter().enumerate() {
                if *row == Row::K {
                    c = &c * &ks[perm[r]];
                }
            }
            if c.is_zero() {
                continue;
            }
            let t = self.leibniz(&shifts, alpha, &|r, b| self.sub_jet(&args[perm[r]], m, b, 0))?;
            acc = acc.add(&t.scale_rat(&c))?;
        }
        Ok(acc)
    }

    fn jet_uncached(&self, e: &Expr, m: &SymplecticMat, alpha: Alpha, comp: u8) -> Result<FourierSeries> {
        Ok(match &e.node {
            Node::Leaf(l) => {
                let p = self.slashed_leaf(l, m)?;
                self.poly_jet(&p, alpha)?
            }
            Node::Const(c) => {
                if alpha == [0; 3] {
                    FourierSeries::constant(c.clone(), self.n)
                } else {
                    self.zero()
                }
            }
            Node::Add(v) => {
                let mut acc = self.zero();
                for t in v {
                    acc = acc.add(&*self.sub_jet(t, m, alpha, comp)?)?;
                }
                acc
            }
            Node::Scale(c, x) => self.sub_jet(x, m, alpha, comp)?.scale(c),
            Node::Mul(a, b) => {
                let args = [a, b];
                let comps = [0, comp];
                self.leibniz(&[[0; 3], [0; 3]], alpha, &|r, b| self.sub_jet(args[r], m, b, comps[r]))?
            }
            Node::Pow(x, k) => {
                let shifts = vec![[0; 3]; *k as usize];
                self.leibniz(&shifts, alpha, &|_, b| self.sub_jet(x, m, b, 0))?
            }
            Node::Deriv(d, x) => (*self.sub_jet(x, m, alpha_add(alpha, deriv_alpha(*d)), 0)?).clone(),
            Node::Comp(c, x) => (*self.jet_comp(x, *c, m, alpha)?).clone(),
            Node::Slash(g, x) => (*self.sub_jet(x, &g.mul(m), alpha, comp)?).clone(),
            Node::Bracket2([f, g]) => {
                let d = match comp {
                    1 => Deriv::D11,
                    2 => Deriv::D12,
                    3 => Deriv::D22,
                    _ => return Err(Error::Internal("bracket2 jet without component".into())),
                };
                let rows = [Row::K, Row::D(d)];
                // k_f f ∂g - k_g g ∂f is the 2×2 determinant with rows (k f; ∂ f)
                self.det_jet(&rows, &[f.clone(), g.clone()], m, alpha)?
            }
            Node::Bracket3(args) => {
                let (rows, c) = match comp {
                    1 => (B3_H20, 1),
                    2 => (B3_H11, -2),
                    3 => (B3_H02, 1),
                    _ => return Err(Error::Internal("bracket3 jet without component".into())),
                };
                self.det_jet(&rows, args, m, alpha)?.scale(&CycRat::int(c))
            }
            Node::Bracket4(args) => self.det_jet(&B4_ROWS, args, m, alpha)?,
        })
    }

    /// W(e|M) for a scalar expression.
    pub fn witt(&self, e: &Expr, m: &SymplecticMat) -> Result<Arc<FourierSeries>> {
        self.jet(e, m, [0; 3])
    }
}

/// Slash a Sym²-valued expression by re-bracketing slashed leaves.
pub fn slash_sym2_structural(engine: &Engine, h: &Expr, m: &SymplecticMat) -> Result<Sym2Series> {
    if h.kind != Kind::Sym2 {
        return Err(Error::Kind(format!("{h} is not Sym2-valued")));
    }
    engine.eval_sym2(h, m)
}

// ---------------------------------------------------------------------------
// S-expressions

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(s: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(Tok::Atom(std::mem::take(&mut cur)));
                }
                out.push(if ch == '(' { Tok::Open } else { Tok::Close });
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(Tok::Atom(std::mem::take(&mut cur)));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(Tok::Atom(cur));
    }
    out
}

#[derive(Clone, Debug)]
enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

fn read(toks: &[Tok], pos: &mut usize) -> Result<SExp> {
    match toks.get(*pos) {
        None => Err(Error::Parse("unexpected end of expression".into())),
        Some(Tok::Close) => Err(Error::Parse("unexpected ')'".into())),
        Some(Tok::Atom(a)) => {
            *pos += 1;
            Ok(SExp::Atom(a.clone()))
        }
        Some(Tok::Open) => {
            *pos += 1;
            let mut v = Vec::new();
            loop {
                match toks.get(*pos) {
                    Some(Tok::Close) => {
                        *pos += 1;
                        return Ok(SExp::List(v));
                    }
                    None => return Err(Error::Parse("missing ')'".into())),
                    _ => v.push(read(toks, pos)?),
                }
            }
        }
    }
}

fn number(s: &str) -> Option<Rat> {
    let first = s.chars().next()?;
    if first.is_ascii_digit() || ((first == '-' || first == '+') && s.len() > 1 && s[1..].starts_with(|c: char| c.is_ascii_digit())) {
        s.parse().ok()
    } else {
        None
    }
}

/// Parse an S-expression. Names are resolved by `resolve`.
///
/// Forms: numbers (`3`, `-1/2`), names, `(gen x)`, `(+ ...)`, `(- a b ...)`, `(* ...)`,
/// `(/ e q)`, `(^ e n)`, `(e r)` for the root of unity e(r), `(b2 f g)`, `(b3 f g h)`,
/// `(b4 f g h k)`, `(d11 e)`, `(d12 e)`, `(d22 e)`, `(h20 e)`, `(h11 e)`, `(h02 e)`,
/// `(slash M e)` with M a matrix name or 16 comma-separated integers.
pub fn parse_expr(src: &str, resolve: &dyn Fn(&str) -> Option<ExprRef>) -> Result<ExprRef> {
    let toks = tokenize(src);
    let mut pos = 0;
    let s = read(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(Error::Parse(format!("trailing input in {src:?}")));
    }
    build(&s, resolve)
}

fn build(s: &SExp, resolve: &dyn Fn(&str) -> Option<ExprRef>) -> Result<ExprRef> {
    let name_of = |s: &SExp| -> Result<String> {
        match s {
            SExp::Atom(a) => Ok(a.clone()),
            SExp::List(_) => Err(Error::Parse("expected a name".into())),
        }
    };
    let lookup = |n: &str| resolve(n).ok_or_else(|| Error::UnknownName(n.to_string()));
    match s {
        SExp::Atom(a) => {
            if let Some(r) = number(a) {
                return Ok(Expr::constant(CycRat::Rat(r)));
            }
            lookup(a)
        }
        SExp::List(v) => {
            let Some((head, rest)) = v.split_first() else {
                return Err(Error::Parse("empty list".into()));
            };
            let head = name_of(head)?;
            let args = || rest.iter().map(|x| build(x, resolve)).collect::<Result<Vec<_>>>();
            let arity = |n: usize| -> Result<()> {
                if rest.len() != n {
                    return Err(Error::Parse(format!("{head} takes {n} arguments")));
                }
                Ok(())
            };
            match head.as_str() {
                "gen" => {
                    arity(1)?;
                    lookup(&name_of(&rest[0])?)
                }
                "+" => Expr::add(args()?),
                "-" => {
                    let mut a = args()?;
                    if a.is_empty() {
                        return Err(Error::Parse("empty difference".into()));
                    }
                    let first = a.remove(0);
                    if a.is_empty() {
                        return Ok(Expr::scale(CycRat::int(-1), first));
                    }
                    let mut terms = vec![first];
                    terms.extend(a.into_iter().map(|x| Expr::scale(CycRat::int(-1), x)));
                    Expr::add(terms)
                }
                "*" => Expr::product(args()?),
                "/" => {
                    arity(2)?;
                    let e = build(&rest[0], resolve)?;
                    let q = number(&name_of(&rest[1])?).ok_or_else(|| Error::Parse("divisor must be a number".into()))?;
                    Ok(Expr::scale(CycRat::Rat(q.inv()?), e))
                }
                "^" => {
                    arity(2)?;
                    let e = build(&rest[0], resolve)?;
                    let n: u32 = name_of(&rest[1])?.parse().map_err(|_| Error::Parse("exponent must be a natural number".into()))?;
                    Expr::pow(e, n)
                }
                "e" => {
                    arity(1)?;
                    let r = number(&name_of(&rest[0])?).ok_or_else(|| Error::Parse("e() takes a rational".into()))?;
                    Ok(Expr::constant(CycRat::e(&r)?))
                }
                "b2" => {
                    arity(2)?;
                    let a = args()?;
                    Expr::bracket2(a[0].clone(), a[1].clone())
                }
                "b3" => {
                    arity(3)?;
                    let a = args()?;
                    Expr::bracket3(a[0].clone(), a[1].clone(), a[2].clone())
                }
                "b4" => {
                    arity(4)?;
                    let a = args()?;
                    Expr::bracket4(a[0].clone(), a[1].clone(), a[2].clone(), a[3].clone())
                }
                "d11" | "d12" | "d22" => {
                    arity(1)?;
                    let d = match head.as_str() {
                        "d11" => Deriv::D11,
                        "d12" => Deriv::D12,
                        _ => Deriv::D22,
                    };
                    Expr::deriv(d, build(&rest[0], resolve)?)
                }
                "h20" | "h11" | "h02" => {
                    arity(1)?;
                    let c = match head.as_str() {
                        "h20" => Sym2Comp::H20,
                        "h11" => Sym2Comp::H11,
                        _ => Sym2Comp::H02,
                    };
                    Expr::comp(c, build(&rest[0], resolve)?)
                }
                "slash" => {
                    arity(2)?;
                    let m: SymplecticMat = name_of(&rest[0])?.parse()?;
                    Ok(Expr::slash(m, build(&rest[1], resolve)?))
                }
                other => Err(Error::Parse(format!("unknown operator {other:?}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta(s: &str) -> ExprRef {
        let ch: ThetaChar = s.parse().unwrap();
        Expr::leaf(Leaf::new(format!("theta_{s}"), Poly::atom(Atom::Theta(ch))))
    }

    fn resolver(name: &str) -> Option<ExprRef> {
        if let Some(rest) = name.strip_prefix("theta_") {
            if rest.len() == 4 {
                return Some(theta(rest));
            }
            let l = match rest {
                "A2" => Lattice::A2,
                "E6" => Lattice::E6,
                "E6s" => Lattice::E6s,
                "E8" => Lattice::E8,
                _ => return None,
            };
            return Some(Expr::leaf(Leaf::new(name, Poly::atom(Atom::lattice(l)))));
        }
        None
    }

    fn poly_leaf(name: &str, src: &str) -> ExprRef {
        let e = parse_expr(src, &resolver).unwrap();
        Expr::leaf(Leaf::new(name, e.to_poly().unwrap()))
    }

    #[test]
    fn parse_and_print_roundtrip() {
        let e = parse_expr("(b3 theta_A2 (^ theta_A2 3) theta_E6)", &resolver).unwrap();
        assert_eq!(e.kind, Kind::Sym2);
        assert_eq!(e.weight, Some(Rat::int(8)));
        assert!(e.to_string().starts_with("(b3 theta_A2 (^ theta_A2 3) theta_E6)"));
        assert!(parse_expr("(+ theta_A2 theta_E6)", &resolver).is_err());
        assert!(parse_expr("(b2 theta_A2)", &resolver).is_err());
        assert!(parse_expr("(foo)", &resolver).is_err());
    }

    #[test]
    fn jets_agree_with_full_evaluation() {
        let engine = Engine::new(2);
        let x = poly_leaf("X", "(* 1/4 (+ (^ theta_0000 4) (^ theta_0001 4) (^ theta_0010 4) (^ theta_0011 4)))");
        let y = poly_leaf("Y", "(^ (* theta_0000 theta_0001 theta_0010 theta_0011) 2)");
        let z = poly_leaf("Z", "(^ (- (^ theta_0100 4) (^ theta_0110 4)) 2)");
        let exprs = [
            Expr::comp(Sym2Comp::H11, Expr::bracket3(x.clone(), y.clone(), z.clone()).unwrap()).unwrap(),
            Expr::comp(Sym2Comp::H20, Expr::mul(x.clone(), Expr::bracket2(y.clone(), z.clone()).unwrap()).unwrap()).unwrap(),
            Expr::deriv(Deriv::D12, Expr::bracket4(x.clone(), y.clone(), z.clone(), Expr::pow(x.clone(), 2).unwrap()).unwrap()).unwrap(),
        ];
        for m in [SymplecticMat::identity(), SymplecticMat::m1()] {
            for e in &exprs {
                for alpha in [[0, 0, 0], [0, 1, 0], [1, 0, 1]] {
                    let full = engine.eval_scalar(e, &m).unwrap().d_multi(alpha).witt();
                    let jet = engine.jet(e, &m, alpha).unwrap();
                    assert_eq!(full.equal_upto(&jet, 2).unwrap(), None, "{e} at {m:?} {alpha:?}");
                }
            }
        }
    }

    #[test]
    fn slash_composes() {
        let engine = Engine::new(2);
        let y = poly_leaf("Y", "(^ (* theta_0000 theta_0001 theta_0010 theta_0011) 2)");
        let m1 = SymplecticMat::m1();
        let twice = Expr::slash(m1, Expr::slash(m1, y.clone()));
        let direct = engine.eval_scalar(&y, &m1.pow(2)).unwrap();
        assert_eq!(engine.eval_scalar(&twice, &SymplecticMat::identity()).unwrap(), direct);
    }

    #[test]
    fn lattice_slash_by_k() {
        let engine = Engine::new(2);
        let a = poly_leaf("a1", "theta_A2");
        let k = SymplecticMat::k();
        let s = engine.eval_scalar(&a, &k).unwrap();
        let want = lattice_theta(Lattice::A2, 2, 3, 2).unwrap().translate([[0, 1], [1, 0]]).unwrap().scale(&CycRat::frac(-1, 3));
        assert_eq!(s.equal_upto(&want, 2).unwrap(), None);
        let odd = poly_leaf("t", "theta_0000");
        assert!(engine.eval_scalar(&odd, &SymplecticMat::m1()).is_err());
    }
}
