use jacobi2_core::symplectic::{automorphy_det, slash_theta_product, SymplecticMat};
use jacobi2_core::theta::{lattice_defsum_eval, theta_defsum_eval, Lattice};
use jacobi2_core::ThetaChar;
use num_complex::Complex64;

type C2 = [[Complex64; 2]; 2];

fn points() -> Vec<C2> {
    let p = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        let b = Complex64::new(b.0, b.1);
        [[Complex64::new(a.0, a.1), b], [b, Complex64::new(c.0, c.1)]]
    };
    vec![
        p((0.1, 1.1), (0.05, 0.2), (-0.2, 0.9)),
        p((-0.3, 0.8), (0.2, -0.1), (0.4, 1.2)),
        p((0.25, 1.0), (-0.15, 0.3), (0.1, 1.0)),
    ]
}

fn mats() -> Vec<SymplecticMat> {
    let mut v: Vec<SymplecticMat> = ["J", "K", "M1", "M2", "M3", "I", "M1^2"]
        .iter()
        .map(|n| SymplecticMat::by_name(n).unwrap())
        .collect();
    let j = SymplecticMat::j();
    let m1 = SymplecticMat::m1();
    let t = SymplecticMat::upper([[1, 0], [0, 0]]);
    v.push(j.mul(&m1).mul(&t));
    v.push(t.mul(&j).mul(&SymplecticMat::m3()));
    v.push(SymplecticMat::rotation([[2, 1], [1, 1]]).unwrap().mul(&j).mul(&SymplecticMat::upper([[0, 1], [1, 2]])));
    v
}

#[test]
fn theta_product_slash_matches_direct_summation() {
    let even = ThetaChar::even(2);
    let id = SymplecticMat::identity();
    let pairs: Vec<Vec<ThetaChar>> = vec![
        vec![even[0], even[0]],
        vec![even[1], even[4]],
        vec![even[2], even[7], even[9], even[3]],
        vec![even[5], even[6]],
        vec![even[8], even[8], even[1], even[2]],
    ];
    for m in mats() {
        for tau in points() {
            let j = automorphy_det(&m, &tau);
            for chars in &pairs {
                let t = (chars.len() / 2) as i32;
                let mut lhs = j.powi(-t);
                for c in chars {
                    lhs *= theta_defsum_eval(c, &tau, &m).unwrap();
                }
                let r = slash_theta_product(chars, &m).unwrap();
                let mut rhs = r.factor.to_complex();
                for c in &r.chars_out {
                    rhs *= theta_defsum_eval(c, &tau, &id).unwrap();
                }
                assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()), "{m} {chars:?}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn lattice_inversion_matches_direct_summation() {
    let j = SymplecticMat::j();
    let id = SymplecticMat::identity();
    for l in Lattice::ALL {
        let (c, lp, scale) = l.slash_j();
        let k = (l.rank() / 2) as i32;
        for tau in points() {
            let lhs = lattice_defsum_eval(l, &tau, &j).unwrap() * automorphy_det(&j, &tau).powi(-k);
            let s = 1.0 / scale as f64;
            let scaled = tau.map(|r| r.map(|z| z * s));
            let rhs = c.to_complex() * lattice_defsum_eval(lp, &scaled, &id).unwrap();
            assert!((lhs - rhs).norm() < 1e-8 * (1.0 + lhs.norm()), "{}: {lhs} vs {rhs}", l.name());
        }
    }
}
