use jacobi2_core::operators::{bracket2, bracket3, bracket4, WeightedForm};
use jacobi2_core::{CycRat, ExpKey, FourierSeries, Rat, Sym2Series};
use proptest::prelude::*;

const N: u32 = 2;

fn series(v: &[(i32, i32, i32, i64)]) -> FourierSeries {
    FourierSeries::from_terms(1, N, v.iter().map(|&(a, b, c, x)| (ExpKey::new(a, b, c), CycRat::int(x)))).unwrap()
}

fn arb_form() -> impl Strategy<Value = WeightedForm> {
    let m = N as i32;
    (proptest::collection::vec((0..=m, -3..=3i32, 0..=m, -4i64..=4), 1..6), 1i64..7)
        .prop_map(|(v, k)| WeightedForm::new(series(&v), Rat::int(k), ""))
}

fn zero2(s: &Sym2Series) -> bool {
    s.is_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bracket2_is_antisymmetric(f in arb_form(), g in arb_form()) {
        let a = bracket2(&f, &g).unwrap();
        let b = bracket2(&g, &f).unwrap();
        prop_assert!(zero2(&a.add(&b).unwrap()));
        prop_assert!(zero2(&bracket2(&f, &f).unwrap()));
    }

    #[test]
    fn bracket3_alternates(f in arb_form(), g in arb_form(), h in arb_form()) {
        let a = bracket3(&f, &g, &h).unwrap();
        let b = bracket3(&g, &f, &h).unwrap();
        let c = bracket3(&f, &h, &g).unwrap();
        prop_assert!(zero2(&a.add(&b).unwrap()));
        prop_assert!(zero2(&a.add(&c).unwrap()));
        prop_assert!(zero2(&bracket3(&f, &g, &f).unwrap()));
    }

    #[test]
    fn bracket4_alternates(f in arb_form(), g in arb_form(), h in arb_form(), u in arb_form()) {
        let a = bracket4(&f, &g, &h, &u).unwrap().series;
        let b = bracket4(&g, &f, &h, &u).unwrap().series;
        prop_assert!(a.add(&b).unwrap().is_zero());
        prop_assert!(bracket4(&f, &g, &f, &u).unwrap().series.is_zero());
    }

    // Σ k_i f_i {f_(i+1), f_(i+2)} = 0
    #[test]
    fn cyclic_two_bracket_identity(f in arb_form(), g in arb_form(), h in arb_form()) {
        let fs = [&f, &g, &h];
        let mut acc = Sym2Series::zero(1, N).unwrap();
        for i in 0..3 {
            let t = bracket2(fs[(i + 1) % 3], fs[(i + 2) % 3]).unwrap().mul_scalar(&fs[i].series.scale_rat(&fs[i].weight)).unwrap();
            acc = acc.add(&t).unwrap();
        }
        prop_assert!(zero2(&acc));
    }

    // Σ (-1)^i k_i f_i {f_(i+1), f_(i+2), f_(i+3)} = 0
    #[test]
    fn alternating_three_bracket_identity(f in arb_form(), g in arb_form(), h in arb_form(), u in arb_form()) {
        let fs = [&f, &g, &h, &u];
        let mut acc = Sym2Series::zero(1, N).unwrap();
        for i in 0..4 {
            let k = if i % 2 == 0 { fs[i].weight.clone() } else { -fs[i].weight.clone() };
            let t = bracket3(fs[(i + 1) % 4], fs[(i + 2) % 4], fs[(i + 3) % 4]).unwrap().mul_scalar(&fs[i].series.scale_rat(&k)).unwrap();
            acc = acc.add(&t).unwrap();
        }
        prop_assert!(zero2(&acc));
    }

    #[test]
    fn json_round_trip(f in arb_form()) {
        let s = f.series.clone().with_weight(Some(f.weight.clone()));
        let back = FourierSeries::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn involution_and_translation_invert(f in arb_form(), s12 in -2i64..=2, s11 in -2i64..=2) {
        let s = &f.series;
        prop_assert_eq!(&s.involution().involution(), s);
        let m = [[s11, s12], [s12, 1]];
        let minus = [[-s11, -s12], [-s12, -1]];
        prop_assert_eq!(&s.translate(m).unwrap().translate(minus).unwrap(), s);
        prop_assert_eq!(s.involution().witt(), s.witt());
    }
}
