use nalgebra::DMatrix;
use proptest::prelude::*;
use wm_core::errors::{lattice_l2_distance, CovarianceLattice, EvalGrid, NormTag};
use wm_core::fem1d::{assemble_mass, assemble_stiffness, build_mesh, make_fespace};
use wm_core::fracop::SincRule;
use wm_core::spectral::{align_signs, continuous_spectrum, kl_covariance, solve_discrete_eigs};
use wm_core::study::{aggregate, draw_xi, expected_rate, fit_rate};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembled_matrices_are_spd(n0 in 3usize..12, level in 0u32..3, p in 1usize..=2, kappa in 0.0f64..3.0) {
        let fe = make_fespace(build_mesh(n0, level).unwrap(), p).unwrap();
        let m = assemble_mass(&fe);
        let l = assemble_stiffness(&fe, kappa);
        prop_assert!(m.cholesky().is_ok());
        prop_assert!(l.cholesky().is_ok());
        let md = m.as_dense();
        prop_assert!((md - md.transpose()).amax() <= 1e-12 * md.amax());
        // total mass of the interior basis functions never exceeds |D| = 1
        let ones = DMatrix::from_element(fe.n_dofs(), 1, 1.0);
        let total = (ones.transpose() * md * &ones)[(0, 0)];
        prop_assert!(total > 0.0 && total <= 1.0 + 1e-12);
    }

    #[test]
    fn fit_recovers_power_laws(c in 0.01f64..100.0, rate in 0.1f64..4.0, start in 2i32..6) {
        let pts: Vec<(f64, f64)> = (start..start + 3)
            .map(|e| {
                let h = 2f64.powi(-e);
                (h, c * h.powf(rate))
            })
            .collect();
        let f = fit_rate(&pts).unwrap();
        prop_assert!((f.slope - rate).abs() <= 1e-10);
        prop_assert!((f.intercept - c.ln()).abs() <= 1e-9);
    }

    #[test]
    fn aggregates_are_exact(values in prop::collection::vec(0.0f64..10.0, 1..50)) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mean_sq = values.iter().map(|v| v * v).sum::<f64>() / n;
        prop_assert_eq!(aggregate(NormTag::Linf, values.iter().copied()), mean);
        prop_assert_eq!(aggregate(NormTag::L2, values.iter().copied()), mean_sq.sqrt());
    }

    #[test]
    fn kl_covariance_is_symmetric(x in 0.0f64..=1.0, y in 0.0f64..=1.0, beta in 0.3f64..2.0) {
        let s = continuous_spectrum(0.5, 200).unwrap();
        prop_assert_eq!(kl_covariance(&s, beta, x, y), kl_covariance(&s, beta, y, x));
        prop_assert!(kl_covariance(&s, beta, x, x) >= 0.0);
    }

    #[test]
    fn lattice_distance_swap_symmetric(seed in 0u64..1000, n in 2usize..12) {
        let a = CovarianceLattice::from_values(DMatrix::from_fn(n, n, |i, j| ((seed as usize + 3 * i + 7 * j) as f64).sin()));
        let b = CovarianceLattice::from_values(DMatrix::from_fn(n, n, |i, j| ((seed as usize * 5 + i * j) as f64).cos()));
        let grid = EvalGrid::new(n).unwrap();
        let d = lattice_l2_distance(&a, &b, &grid);
        prop_assert_eq!(d, lattice_l2_distance(&a.transposed(), &b.transposed(), &grid));
        prop_assert_eq!(d, lattice_l2_distance(&b, &a, &grid));
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn sign_alignment_restores_flips(mask in prop::collection::vec(any::<bool>(), 15), p in 1usize..=2) {
        let fe = make_fespace(build_mesh(9, 1).unwrap(), p).unwrap();
        let m = assemble_mass(&fe);
        let l = assemble_stiffness(&fe, 0.5);
        let aligned = align_signs(solve_discrete_eigs(&l, &m).unwrap(), &fe).unwrap();
        let mut flipped = aligned.clone();
        for (j, &f) in mask.iter().enumerate() {
            if f {
                flipped.flip_sign(j + 1);
            }
        }
        let again = align_signs(flipped, &fe).unwrap();
        prop_assert_eq!(again.vectors(), aligned.vectors());
    }

    #[test]
    fn scalar_sinc_error_is_small(beta_star in 0.05f64..0.95, lambda in 1.0f64..1e4) {
        let rule = SincRule::new(beta_star, 0.3).unwrap();
        prop_assert!((rule.scalar(lambda) - lambda.powf(-beta_star)).abs() <= 1e-6);
    }

    #[test]
    fn expected_rates_positive_or_flagged(beta in 0.3f64..2.0, p in 1usize..=2) {
        for norm in NormTag::ALL {
            match expected_rate(beta, p, norm) {
                Ok(r) => prop_assert!(r > 0.0 && r <= p as f64 + 1.0),
                Err(wm_core::Error::RateNotApplicable(r)) => prop_assert!(r <= 0.0),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }

    #[test]
    fn noise_prefix_is_stable(seed in any::<u64>(), m in 0u64..1000, n in 1usize..200) {
        let long = draw_xi(seed, m, 300);
        prop_assert_eq!(&draw_xi(seed, m, n)[..], &long[..n]);
    }
}
