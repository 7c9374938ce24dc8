use flowbp_core::oracles::grid::{compare_on_grid, to_pwl, RawPwl};
use flowbp_core::{PwlConvex, Sign};
use proptest::prelude::*;

fn raw_pwl() -> impl Strategy<Value = RawPwl> {
    (0usize..=3)
        .prop_flat_map(|pieces| {
            (
                proptest::sample::subsequence((-5i64..=5).collect::<Vec<_>>(), pieces + 1),
                proptest::collection::vec(-5i64..=5, pieces),
                -5i64..=5,
            )
        })
        .prop_map(|(breakpoints, mut slopes, start_value)| {
            slopes.sort_unstable();
            RawPwl { breakpoints, slopes, start_value }
        })
}

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn evaluation_matches_raw_data(f in raw_pwl()) {
        let p = to_pwl(&f);
        compare_on_grid(&p, &[f], &[Sign::Plus], 8).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn pair_convolution_matches_grid(f in raw_pwl(), g in raw_pwl()) {
        let h = to_pwl(&f).inf_convolve(&to_pwl(&g)).unwrap();
        compare_on_grid(&h, &[f, g], &[Sign::Plus, Sign::Plus], 8).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn signed_triples_match_grid(fs in proptest::collection::vec(raw_pwl(), 1..=3), signs in proptest::collection::vec(sign(), 3)) {
        let signs = &signs[..fs.len()];
        let pwls: Vec<PwlConvex> = fs.iter().map(to_pwl).collect();
        let h = PwlConvex::scaled_interpolation(&pwls, signs).unwrap();
        compare_on_grid(&h, &fs, signs, 2).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn sum_and_difference_match_pointwise(f in raw_pwl(), g in raw_pwl()) {
        let (pf, pg) = (to_pwl(&f), to_pwl(&g));
        match pf.add(&pg) {
            Ok(sum) => {
                for k in -40i64..=40 {
                    let z = flowbp_core::pwl::rational(k, 8);
                    let want = pf.evaluate_rational(&z).zip(pg.evaluate_rational(&z)).map(|(a, b)| a + b);
                    prop_assert_eq!(sum.evaluate_rational(&z), want);
                }
                // subtracting back recovers f on the common domain
                let back = sum.subtract(&pg).unwrap();
                for k in -40i64..=40 {
                    let z = flowbp_core::pwl::rational(k, 8);
                    if back.evaluate_rational(&z).is_some() {
                        prop_assert_eq!(back.evaluate_rational(&z), pf.evaluate_rational(&z));
                    }
                }
            }
            Err(_) => prop_assert!(pf.upper() < pg.lower() || pg.upper() < pf.lower()),
        }
    }

    #[test]
    fn argmin_is_smallest_minimizer(f in raw_pwl()) {
        let p = to_pwl(&f);
        let z = p.argmin().unwrap();
        let best = (f.lower() * 8..=f.upper() * 8).filter_map(|k| f.eval_scaled(k, 8).map(|v| (v, k))).min().unwrap();
        prop_assert_eq!(flowbp_core::pwl::rational(best.1, 8), num_rational::BigRational::from_integer(z.to_bigint()));
    }

    #[test]
    fn compose_reflects_and_shifts(f in raw_pwl(), b in -3i64..=3, s in sign()) {
        let p = to_pwl(&f);
        let q = p.compose_affine(s, &flowbp_core::Int::from(b));
        for k in -12i64..=12 {
            let arg = s.as_i8() as i64 * k + b;
            prop_assert_eq!(q.evaluate(&k.into()), p.evaluate(&arg.into()));
        }
    }
}
