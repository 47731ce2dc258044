use ofvi_core::matops::{
    care_residual, duplication_map, half_len, kron, lstsq, numerical_rank, solve_care_kleinman,
    solve_lyapunov, solve_sylvester, stabilizing_gain, svd, unvec, vec, Mat, SymMat,
};
use proptest::prelude::*;

fn mat(r: usize, c: usize) -> impl Strategy<Value = Mat<f64>> {
    prop::collection::vec(-2.0..2.0f64, r * c)
        .prop_map(move |v| Mat::from_col_major(r, c, v).unwrap())
}

fn close(a: &Mat<f64>, b: &Mat<f64>, tol: f64) -> bool {
    (a - b).norm_fro() <= tol * (1.0 + b.norm_fro())
}

/// Shifted so that all eigenvalues have real part below -0.5.
fn stable(a: &Mat<f64>) -> Mat<f64> {
    let shift = a.norm_fro() + 0.5;
    a - &Mat::identity(a.rows()).scale(shift)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_mixed_product(a in mat(2, 3), b in mat(3, 2), c in mat(3, 2), d in mat(2, 2)) {
        let lhs = kron(&a, &b).matmul(&kron(&c, &d));
        let rhs = kron(&a.matmul(&c), &b.matmul(&d));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn vec_of_product(a in mat(2, 3), x in mat(3, 4), b in mat(4, 2)) {
        let lhs = vec(&a.matmul(&x).matmul(&b));
        let rhs = kron(&b.transpose(), &a).matvec(&vec(&x));
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() < 1e-10);
        }
        prop_assert_eq!(unvec(&vec(&x), 3, 4).unwrap(), x);
    }

    #[test]
    fn half_vector_round_trip(a in mat(4, 4)) {
        let s = SymMat::from_mat(&a);
        let back = SymMat::from_half(4, s.half_vec().to_vec()).unwrap();
        prop_assert_eq!(&back, &s);
        let full = s.to_mat();
        prop_assert_eq!(&full, &full.transpose());
        let d = duplication_map::<f64>(4);
        prop_assert_eq!(d.matvec(s.half_vec()), vec(&full));
    }

    #[test]
    fn sylvester_residual(a in mat(3, 3), m in mat(2, 2), w in mat(2, 3)) {
        // T a - m T = w is uniquely solvable when spectra of a and m are disjoint.
        let (a, m) = (&stable(&a).scale(-1.0), &stable(&m));
        let t = solve_sylvester(a, m, &w).unwrap();
        prop_assert!(close(&(&t.matmul(a) - &m.matmul(&t)), &w, 1e-9));
    }

    #[test]
    fn lyapunov_residual(a in mat(3, 3), q in mat(3, 3)) {
        let a = stable(&a);
        let q = SymMat::from_mat(&q.tr_matmul(&q));
        let p = solve_lyapunov(&a, &q).unwrap().to_mat();
        let res = &(&a.tr_matmul(&p) + &p.matmul(&a)) + &q.to_mat();
        prop_assert!(res.norm_fro() <= 1e-9 * (1.0 + p.norm_fro()));
    }

    #[test]
    fn riccati_residual_and_gain(a in mat(3, 3), b in mat(3, 1)) {
        let ctrb = Mat::hstack(&[&b, &a.matmul(&b), &a.matmul(&a).matmul(&b)]);
        prop_assume!(numerical_rank(&ctrb, 1e-6).unwrap() == 3);
        let k0 = stabilizing_gain(&a, &b).unwrap();
        let (q, r) = (SymMat::identity(3), SymMat::identity(1));
        let (p, k) = solve_care_kleinman(&a, &b, &q, &r, &k0).unwrap();
        let res = care_residual(&a, &b, &q, &r, &p).unwrap();
        prop_assert!(res.norm_fro() <= 1e-8 * (1.0 + p.norm_fro()));
        prop_assert!(close(&k, &b.tr_matmul(&p.to_mat()), 1e-12));
    }

    #[test]
    fn svd_reconstructs(a in mat(5, 3)) {
        let s = svd(&a).unwrap();
        let rebuilt = s.u.matmul(&Mat::diag(&s.s)).matmul(&s.v.transpose());
        prop_assert!(close(&rebuilt, &a, 1e-12));
        prop_assert!(s.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn lstsq_satisfies_normal_equations(a in mat(6, 3), b in prop::collection::vec(-1.0..1.0f64, 6)) {
        prop_assume!(numerical_rank(&a, 1e-8).unwrap() == 3);
        let x = lstsq(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        for g in a.tr_matvec(&r) {
            prop_assert!(g.abs() < 1e-9 * (1.0 + a.norm_fro()));
        }
    }
}

#[test]
fn duplication_map_has_full_column_rank() {
    for n in 1..6 {
        let d = duplication_map::<f64>(n);
        assert_eq!(d.shape(), (n * n, half_len(n)));
        assert_eq!(numerical_rank(&d, 1e-12).unwrap(), half_len(n));
    }
}
