use hotelling_rao::matrix::{
    b_mp, b_plus, b_plus_block_form, gen_inv_quadratic, numerical_rank, penrose_residuals, schur_complement,
    simultaneous_diagonalize, sym_spectral_norm, symmetrize, PartitionedSpdMatrix,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `L·L' + 0.1·I` from free entries, with a split in `1..p`.
fn spd() -> impl Strategy<Value = PartitionedSpdMatrix> {
    (2usize..=8)
        .prop_flat_map(|p| (Just(p), 1..p, prop::collection::vec(-2.0f64..2.0, p * p)))
        .prop_map(|(p, split, entries)| {
            let l = DMatrix::from_vec(p, p, entries);
            let s = symmetrize(&(&l * l.transpose())) + DMatrix::identity(p, p) * 0.1;
            PartitionedSpdMatrix::new(s, split).unwrap()
        })
}

/// Two p.s.d. matrices of rank `r` on the same random column space, plus two
/// vectors in that space.
fn shared_range_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    (2usize..=6)
        .prop_flat_map(|p| (Just(p), 1..=p))
        .prop_flat_map(|(p, r)| {
            let v = move |len| prop::collection::vec(-2.0f64..2.0, len);
            (Just(p), Just(r), v(p * r), v(r * r), v(r * r), v(r), v(r))
        })
        .prop_map(|(p, r, basis, c1, c2, x, y)| {
            let basis = DMatrix::from_vec(p, r, basis);
            let core = |c: Vec<f64>| {
                let c = DMatrix::from_vec(r, r, c);
                &c * c.transpose() + DMatrix::identity(r, r) * 0.1
            };
            let a1 = symmetrize(&(&basis * core(c1) * basis.transpose()));
            let a2 = symmetrize(&(&basis * core(c2) * basis.transpose()));
            (a1, a2, &basis * DVector::from_vec(x), &basis * DVector::from_vec(y))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn b_plus_forms_agree(s in spd()) {
        let gap = (b_plus(&s).unwrap() - b_plus_block_form(&s).unwrap()).abs().max();
        let s_inv_norm = sym_spectral_norm(&s.inverse().unwrap());
        prop_assert!(gap <= 1e-10 * s_inv_norm, "gap {gap:e}, |S^-1| {s_inv_norm}");
    }

    #[test]
    fn b_plus_has_rank_p1(s in spd()) {
        prop_assert_eq!(numerical_rank(&b_plus(&s).unwrap()), s.split());
    }

    #[test]
    fn penrose_conditions_hold(s in spd()) {
        let bp = b_plus(&s).unwrap();
        let b = b_mp(&s).unwrap();
        let scale = sym_spectral_norm(&bp) + sym_spectral_norm(&b);
        let r = penrose_residuals(&bp, &b);
        prop_assert!(r.max() <= 1e-9 * scale.max(1.0), "{r:?}");
    }

    #[test]
    fn leading_block_of_inverse_is_inverse_schur(s in spd()) {
        let p1 = s.split();
        let s_inv = s.inverse().unwrap();
        let block = s_inv.view((0, 0), (p1, p1)).into_owned();
        let schur_inv = schur_complement(&s).unwrap().try_inverse().unwrap();
        let gap = (block - schur_inv).abs().max();
        prop_assert!(gap <= 1e-9 * sym_spectral_norm(&s_inv));
    }

    #[test]
    fn simultaneous_diagonalization_round_trips((a1, a2, _, _) in shared_range_pair()) {
        let sd = simultaneous_diagonalize(&a1, &a2).unwrap();
        let scale = sym_spectral_norm(&a1) + sym_spectral_norm(&a2);
        let ones = vec![1.0; sd.rank];
        let r1 = (sd.reconstruct(&ones) - &a1).abs().max();
        let r2 = (sd.reconstruct(&sd.d) - &a2).abs().max();
        prop_assert!(r1 <= 1e-9 * scale && r2 <= 1e-9 * scale, "{r1:e} {r2:e} at scale {scale}");
        prop_assert!(sd.d.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn generalized_inverse_quadratic_is_subadditive((a1, a2, x, y) in shared_range_pair()) {
        let lhs = gen_inv_quadratic(&(&x + &y), &(&a1 + &a2)).unwrap();
        let f1 = gen_inv_quadratic(&x, &a1).unwrap();
        let f2 = gen_inv_quadratic(&y, &a2).unwrap();
        let scale = lhs.abs().max(f1 + f2).max(1.0);
        prop_assert!(lhs <= f1 + f2 + 1e-9 * scale, "{lhs} > {f1} + {f2}");
    }
}
