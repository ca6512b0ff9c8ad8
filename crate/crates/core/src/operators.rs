//! Differential brackets on weight-tagged series, and D2.
//!
//! All derivatives are the normalized ∂ij, so the brackets have exact
//! cyclotomic-rational coefficients.

use crate::coeff::{CycRat, Rat};
use crate::error::{Error, Result};
use crate::series::{Deriv, FourierSeries, Sym2Series};

/// A series together with its weight k.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedForm {
    pub series: FourierSeries,
    pub weight: Rat,
    pub label: String,
}

impl WeightedForm {
    pub fn new(series: FourierSeries, weight: Rat, label: impl Into<String>) -> WeightedForm {
        WeightedForm { series, weight, label: label.into() }
    }

    /// Uses the series' own weight tag.
    pub fn from_series(series: FourierSeries) -> Result<WeightedForm> {
        let weight = series
            .weight
            .clone()
            .ok_or_else(|| Error::WeightMismatch("series has no weight tag".into()))?;
        let label = series.label.clone().unwrap_or_default();
        Ok(WeightedForm { series, weight, label })
    }

    fn k_times(&self) -> FourierSeries {
        self.series.scale_rat(&self.weight)
    }
}

/// One row of a bracket determinant: either k·f or a derivative ∂ij f.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub(crate) enum Row {
    K,
    D(Deriv),
}

fn row_entry(r: Row, f: &WeightedForm) -> FourierSeries {
    match r {
        Row::K => f.k_times(),
        Row::D(d) => f.series.d_partial(d),
    }
}

fn det2(a: &FourierSeries, b: &FourierSeries, c: &FourierSeries, d: &FourierSeries) -> Result<FourierSeries> {
    a.mul(d)?.sub(&b.mul(c)?)
}

fn det3(m: &[[FourierSeries; 3]; 3]) -> Result<FourierSeries> {
    let c0 = det2(&m[1][1], &m[1][2], &m[2][1], &m[2][2])?;
    let c1 = det2(&m[1][0], &m[1][2], &m[2][0], &m[2][2])?;
    let c2 = det2(&m[1][0], &m[1][1], &m[2][0], &m[2][1])?;
    m[0][0].mul(&c0)?.sub(&m[0][1].mul(&c1)?)?.add(&m[0][2].mul(&c2)?)
}

fn det4(m: &[[FourierSeries; 4]; 4]) -> Result<FourierSeries> {
    // Laplace expansion along the first two rows
    let mut acc: Option<FourierSeries> = None;
    for i in 0..4 {
        for j in i + 1..4 {
            let rest: Vec<usize> = (0..4).filter(|&c| c != i && c != j).collect();
            let top = det2(&m[0][i], &m[0][j], &m[1][i], &m[1][j])?;
            if top.is_zero() {
                continue;
            }
            let bot = det2(&m[2][rest[0]], &m[2][rest[1]], &m[3][rest[0]], &m[3][rest[1]])?;
            let mut t = top.mul(&bot)?;
            if (i + j + 1) % 2 == 1 {
                t = t.neg();
            }
            acc = Some(match acc {
                None => t,
                Some(a) => a.add(&t)?,
            });
        }
    }
    Ok(acc.unwrap_or_else(|| FourierSeries::zero(1, m[0][0].trunc()).unwrap()))
}

fn bracket3_rows(rows: [Row; 3], fs: [&WeightedForm; 3]) -> Result<FourierSeries> {
    let m = rows.map(|r| fs.map(|f| row_entry(r, f)));
    det3(&m)
}

pub(crate) const B3_H20: [Row; 3] = [Row::D(Deriv::D11), Row::D(Deriv::D12), Row::K];
pub(crate) const B3_H11: [Row; 3] = [Row::D(Deriv::D11), Row::K, Row::D(Deriv::D22)];
pub(crate) const B3_H02: [Row; 3] = [Row::K, Row::D(Deriv::D12), Row::D(Deriv::D22)];
pub(crate) const B4_ROWS: [Row; 4] = [Row::K, Row::D(Deriv::D11), Row::D(Deriv::D12), Row::D(Deriv::D22)];

/// {f, g} = Σ_{i≤j} (k_f f ∂ij g - k_g g ∂ij f) u_i u_j, weight k_f + k_g.
pub fn bracket2(f: &WeightedForm, g: &WeightedForm) -> Result<Sym2Series> {
    let kf = f.k_times();
    let kg = g.k_times();
    let comp = |d: Deriv| -> Result<FourierSeries> { kf.mul(&g.series.d_partial(d))?.sub(&kg.mul(&f.series.d_partial(d))?) };
    Ok(Sym2Series::new(comp(Deriv::D11)?, comp(Deriv::D12)?, comp(Deriv::D22)?, Some(&f.weight + &g.weight)))
}

/// The three-fold bracket; the u1u2 coefficient carries the factor -2. Weight Σk + 1.
pub fn bracket3(f1: &WeightedForm, f2: &WeightedForm, f3: &WeightedForm) -> Result<Sym2Series> {
    let fs = [f1, f2, f3];
    let h20 = bracket3_rows(B3_H20, fs)?;
    let h11 = bracket3_rows(B3_H11, fs)?.scale(&CycRat::int(-2));
    let h02 = bracket3_rows(B3_H02, fs)?;
    let w = &(&(&f1.weight + &f2.weight) + &f3.weight) + &Rat::ONE;
    Ok(Sym2Series::new(h20, h11, h02, Some(w)))
}

/// The four-fold bracket det(k f; ∂11 f; ∂12 f; ∂22 f), weight Σk + 3.
pub fn bracket4(f1: &WeightedForm, f2: &WeightedForm, f3: &WeightedForm, f4: &WeightedForm) -> Result<WeightedForm> {
    let fs = [f1, f2, f3, f4];
    let m = B4_ROWS.map(|r| fs.map(|f| row_entry(r, f)));
    let w = &(&(&(&f1.weight + &f2.weight) + &f3.weight) + &f4.weight) + &Rat::int(3);
    let s = det4(&m)?.with_weight(Some(w.clone()));
    Ok(WeightedForm::new(s, w, format!("{{{},{},{},{}}}", f1.label, f2.label, f3.label, f4.label)))
}

/// D2 f = (k/2)∂12² f - ∂11∂22 f.
pub fn d2_op(f: &WeightedForm) -> Result<FourierSeries> {
    let half_k = &f.weight * &Rat::frac(1, 2);
    f.series.d_multi([0, 2, 0]).scale_rat(&half_k).sub(&f.series.d_multi([1, 0, 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::ExpKey;
    use crate::theta::{lattice_theta, theta_const, Lattice, ThetaChar};

    fn wf(s: FourierSeries, k: i64) -> WeightedForm {
        WeightedForm::new(s, Rat::int(k), "f")
    }

    fn lat(l: Lattice, n: u32) -> WeightedForm {
        WeightedForm::from_series(lattice_theta(l, 2, 1, n).unwrap()).unwrap()
    }

    #[test]
    fn bracket2_of_monomials() {
        // f = e(τ11), g = e(τ22): {f,g} = (0, 0, k_f)·e(τ11+τ22) on u2², minus nothing
        let f = FourierSeries::from_terms(1, 2, [(ExpKey::new(1, 0, 0), CycRat::one())]).unwrap();
        let g = FourierSeries::from_terms(1, 2, [(ExpKey::new(0, 0, 1), CycRat::one())]).unwrap();
        let b = bracket2(&wf(f, 2), &wf(g, 3)).unwrap();
        assert_eq!(b.h20.get(1, 0, 1), CycRat::int(-3));
        assert!(b.h11.is_zero());
        assert_eq!(b.h02.get(1, 0, 1), CycRat::int(2));
        assert_eq!(b.weight, Some(Rat::int(5)));
    }

    #[test]
    fn repeated_arguments_vanish() {
        let a = lat(Lattice::A2, 2);
        let e = lat(Lattice::E6, 2);
        assert!(bracket2(&a, &a).unwrap().is_zero());
        assert!(bracket3(&a, &e, &a).unwrap().is_zero());
        assert!(bracket4(&a, &e, &e, &a).unwrap().series.is_zero());
    }

    #[test]
    fn d2_of_constant_is_zero() {
        let c = wf(FourierSeries::constant(CycRat::int(5), 3), 4);
        assert!(d2_op(&c).unwrap().is_zero());
    }

    #[test]
    fn type_one_bracket_has_vanishing_witt_h11() {
        let a = lat(Lattice::A2, 2);
        let e = lat(Lattice::E8, 2);
        let b = bracket2(&a, &e).unwrap();
        assert!(b.h11.witt().is_zero());
        assert_eq!(b.h20.involution(), b.h20);
        assert_eq!(b.h11.involution(), b.h11.neg());
    }

    #[test]
    fn four_bracket_matches_cofactor_expansion() {
        let n = 2;
        let t = |s: &str| {
            let p: Vec<ThetaChar> = s.split(',').map(|c| c.parse().unwrap()).collect();
            p.iter().fold(FourierSeries::constant(CycRat::one(), n), |acc, c| acc.mul(&theta_const(c, n).unwrap()).unwrap())
        };
        let fs = [wf(t("0000,0000"), 1), wf(t("0001,0001,0001,0001"), 2), wf(t("0010,0010,0010,0010"), 2), wf(t("0011,0011,0011,0011,0011,0011"), 3)];
        let b = bracket4(&fs[0], &fs[1], &fs[2], &fs[3]).unwrap().series;
        // expand along the k·f row instead
        let mut acc = FourierSeries::zero(8, n).unwrap();
        for i in 0..4 {
            let others: Vec<&WeightedForm> = (0..4).filter(|&j| j != i).map(|j| &fs[j]).collect();
            let rows = [Row::D(Deriv::D11), Row::D(Deriv::D12), Row::D(Deriv::D22)];
            let minor = bracket3_rows(rows, [others[0], others[1], others[2]]).unwrap();
            let t = fs[i].k_times().mul(&minor).unwrap();
            acc = if i % 2 == 0 { acc.add(&t).unwrap() } else { acc.sub(&t).unwrap() };
        }
        assert_eq!(b.equal_upto(&acc, n).unwrap(), None);
    }
}
