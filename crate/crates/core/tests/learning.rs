use ofvi_core::matops::{half_len, kron, solve_care_kleinman, unvec, Mat, SymMat};
use ofvi_core::plant::{make_probing, simulate, LtiPlant, ProbingSpec};
use ofvi_core::realization::{
    step_coupled, verify_gain_transfer, FilterBank, GammaChoice, NoAccumulator, OracleRealization,
    ThetaSource,
};
use ofvi_core::vi::{
    collect, data_vi, model_vi, rank_check, DataViOptions, EscapeSets, Membership, ModelViOptions,
    OSolver, RankPolicy, StopReason,
};
use ofvi_core::Real;
use proptest::prelude::*;

fn scalar_setup() -> (LtiPlant<f64>, FilterBank<f64>) {
    let plant = LtiPlant::new(
        Mat::diag(&[-0.5]),
        Mat::diag(&[1.0]),
        Mat::diag(&[2.0]),
        vec![1.0],
    )
    .unwrap();
    let filter = FilterBank::build(1, 1, 1, Mat::diag(&[-1.0])).unwrap();
    (plant, filter)
}

fn probing_data(
    plant: &LtiPlant<f64>,
    filter: &FilterBank<f64>,
    horizon: f64,
) -> ofvi_core::vi::RegressionData<f64> {
    let spec = ProbingSpec {
        count: 20,
        freq_range: [-50.0, 50.0],
        ..ProbingSpec::default()
    };
    let probe = make_probing::<f64>(5, &spec, plant.m());
    let law = move |t: f64, _: &[f64], u: &mut [f64]| probe.eval_into(t, u);
    collect(plant, filter, law, 1e-4, 0.01, horizon)
        .unwrap()
        .data
}

#[test]
fn identifiable_system_recovers_model_operator() {
    // One state, one filter mode: three zeta coordinates and no eigenvalue resonance,
    // so the data determine O(P) uniquely.
    let (plant, filter) = scalar_setup();
    let data = probing_data(&plant, &filter, 0.5);
    let report = rank_check(&data, 1e-8).unwrap();
    assert!(report.ok, "rank {} of {}", report.rank, report.needed);
    let o = OracleRealization::construct(
        &plant,
        &filter,
        ThetaSource::Seeded(1),
        GammaChoice::MatchX0,
    )
    .unwrap();
    let q = SymMat::identity(1);
    let solver = OSolver::new(&data, &q, &filter.b_zeta(), 1e-8, RankPolicy::Strict).unwrap();
    let p = SymMat::from_mat(&Mat::from_f64_rows(&[
        &[2.0, 0.3, -0.1],
        &[0.3, 1.0, 0.2],
        &[-0.1, 0.2, 0.5],
    ]));
    let pm = p.to_mat();
    let ap = o.a_zeta.tr_matmul(&pm);
    let model = &(&ap + &ap.transpose()) + &o.c_zeta.tr_matmul(&o.c_zeta);
    let learned = solver.solve_o(&p).unwrap().to_mat();
    assert!((&learned - &model).norm_fro() <= 1e-6 * model.norm_fro());
}

#[test]
fn one_data_step_equals_one_model_step() {
    let (plant, filter) = scalar_setup();
    let data = probing_data(&plant, &filter, 0.5);
    let o = OracleRealization::construct(
        &plant,
        &filter,
        ThetaSource::Seeded(1),
        GammaChoice::MatchX0,
    )
    .unwrap();
    let (q, r) = (SymMat::identity(1), SymMat::identity(1));
    let solver = OSolver::new(&data, &q, &filter.b_zeta(), 1e-8, RankPolicy::Strict).unwrap();
    let p0 = SymMat::scaled_identity(3, 0.5);
    let escape = EscapeSets {
        scale: 1e6,
        ..EscapeSets::default()
    };
    let d = data_vi(
        &solver,
        &r,
        &filter.b_zeta(),
        &p0,
        &DataViOptions {
            escape,
            delta: 0.0,
            max_iter: 1,
            ..DataViOptions::default()
        },
        None,
    )
    .unwrap();
    let m = model_vi(
        &o.a_zeta,
        &o.b_zeta,
        &o.c_zeta,
        &r,
        &p0,
        &ModelViOptions {
            escape,
            delta: 0.0,
            max_iter: 1,
            ..ModelViOptions::default()
        },
        None,
    )
    .unwrap();
    assert_eq!(
        (d.stop, m.stop),
        (StopReason::IterationCap, StopReason::IterationCap)
    );
    assert!(d.p.sub(&m.p).norm_fro() <= 1e-6 * m.p.norm_fro());
}

#[test]
fn model_vi_gain_is_r_inverse_b_transpose_p() {
    let plant = LtiPlant::f16(vec![0.0; 3]).unwrap();
    let r = SymMat::from_mat(&Mat::diag(&[2.0]));
    let out = model_vi(
        plant.a(),
        plant.b(),
        plant.c(),
        &r,
        &SymMat::identity(3),
        &ModelViOptions {
            delta: 1e-2,
            ..ModelViOptions::default()
        },
        None,
    )
    .unwrap();
    let k = plant.b().tr_matmul(&out.p.to_mat()).scale(0.5);
    assert!((&out.k - &k).norm_fro() <= 1e-12 * k.norm_fro());
}

#[test]
fn trajectory_identity_on_random_systems() {
    for seed in 0..3u64 {
        let a = Mat::from_fn(2, 2, |i, j| {
            ((seed as f64 + 1.0) * (i as f64 + 2.0 * j as f64 + 1.0)).sin()
                - if i == j { 1.0 } else { 0.0 }
        });
        let plant = LtiPlant::new(
            a,
            Mat::column_vector(&[0.0, 1.0]),
            Mat::row_vector(&[1.0, 0.5]),
            vec![0.3, -0.7],
        )
        .unwrap();
        let m = Mat::from_f64_rows(&[&[-1.0, 0.0], &[1.0, -2.0]]);
        let filter = FilterBank::build(2, 1, 1, m).unwrap();
        let o = OracleRealization::construct(
            &plant,
            &filter,
            ThetaSource::Seeded(seed),
            GammaChoice::MatchX0,
        )
        .unwrap();
        let spec = ProbingSpec {
            count: 10,
            freq_range: [-30.0, 30.0],
            ..ProbingSpec::default()
        };
        let probe = make_probing::<f64>(seed, &spec, 1);
        let law = move |t: f64, _: &[f64], u: &mut [f64]| probe.eval_into(t, u);
        let mut ode = step_coupled(&plant, &filter, law, NoAccumulator, 1e-4).unwrap();
        let n_z = filter.n_z();
        let mut worst = 0.0f64;
        simulate(&mut ode, 0.01, 1.0, |sim| {
            let t = sim.t();
            let (sys, state) = sim.parts_mut();
            let l = sys.layout().clone();
            let z = unvec(&state[l.z()], 2, 4).unwrap();
            let eps = &state[l.eps()];
            // Gamma eps(t) is the decaying term; it must equal e^{Mt} T x0 with M = [[-1,0],[1,-2]].
            let w = o.t_mat.matvec(plant.x0());
            let (e1, e2) = ((-t).exp(), (-2.0 * t).exp());
            let decay = [w[0] * e1, w[0] * (e1 - e2) + w[1] * e2];
            let ge = o.gamma.matvec(eps);
            let tx = o.t_mat.matvec(&state[l.x()]);
            let zt = z.matvec(&o.theta);
            for i in 0..2 {
                worst = worst.max((tx[i] - zt[i] - decay[i]).abs());
                worst = worst.max((ge[i] - decay[i]).abs());
            }
            assert_eq!(state[l.z()].len(), n_z);
        })
        .unwrap();
        assert!(worst < 1e-8, "seed {seed}: {worst}");
    }
}

#[test]
fn gain_transfer_on_second_order_system() {
    // Unstable, with spectrum (about 1.19 and -1.69) disjoint from that of the filter.
    let a = Mat::from_f64_rows(&[&[0.0, 1.0], &[2.0, -0.5]]);
    let plant = LtiPlant::new(
        a,
        Mat::column_vector(&[0.0, 1.0]),
        Mat::row_vector(&[1.0, 0.0]),
        vec![1.0, 0.0],
    )
    .unwrap();
    let filter =
        FilterBank::build(2, 1, 1, Mat::from_f64_rows(&[&[-1.0, 0.0], &[1.0, -2.0]])).unwrap();
    let o = OracleRealization::construct(
        &plant,
        &filter,
        ThetaSource::Seeded(3),
        GammaChoice::MatchX0,
    )
    .unwrap();
    let w = ofvi_core::plant::WeightSpec::new(SymMat::identity(1), SymMat::identity(1)).unwrap();
    let r = verify_gain_transfer(&o, &plant, &w, Mat::identity(2)).unwrap();
    assert!(r.k_z_rel_err < 1e-8);
    assert!(r.gamma_invariance < 1e-8);
    assert_eq!(
        r.k_star_pi,
        r.k_star.matmul(&kron(&Mat::row_vector(&o.theta), &o.t_inv))
    );
}

#[test]
fn single_precision_smoke() {
    let plant = LtiPlant::<f32>::f16(vec![0.6, -0.48, 0.64]).unwrap();
    let q = SymMat::from_mat(&plant.c().tr_matmul(plant.c()));
    let (_, k) = solve_care_kleinman(
        plant.a(),
        plant.b(),
        &q,
        &SymMat::identity(1),
        &Mat::zeros(1, 3),
    )
    .unwrap();
    let want = [-5.4636f32, -49.779, 0.36616];
    for j in 0..3 {
        assert!(
            (k[(0, j)] - want[j]).abs() <= 1e-3 * want[j].abs(),
            "{:?}",
            k.row(0)
        );
    }
    let m = Mat::<f32>::from_f64_rows(&[&[-1.0, 0.0, 0.0], &[1.0, -2.0, 0.0], &[0.0, 2.0, -3.0]]);
    let filter = FilterBank::build(3, 1, 1, m).unwrap();
    let ty = Mat::<f32>::column_vector(&[6.6833, 8.9277, -36.593]);
    let o = OracleRealization::construct(
        &plant,
        &filter,
        ThetaSource::Given(ty),
        GammaChoice::MatchX0,
    )
    .unwrap();
    let res = o.definition_residuals(&plant);
    assert!(res.iter().all(|r| r.as_f64() < 1e-2), "{res:?}");
    assert_eq!(half_len(filter.n_zeta()), 231);
}

fn sym(n: usize) -> impl Strategy<Value = SymMat<f64>> {
    prop::collection::vec(-4.0..4.0f64, n * n)
        .prop_map(move |v| SymMat::from_mat(&Mat::from_col_major(n, n, v).unwrap()))
}

proptest! {
    #[test]
    fn escape_sets_are_nested(p in sym(4), j in 0usize..6, norm in any::<bool>()) {
        let e = EscapeSets {
            membership: if norm { Membership::NormBall } else { Membership::PsdBall },
            ..EscapeSets::default()
        };
        if e.contains(&p, j) {
            prop_assert!(e.contains(&p, j + 1));
        }
        prop_assert!(e.bound(j + 1) > e.bound(j));
    }

    #[test]
    fn psd_ball_rejects_indefinite(d in prop::collection::vec(0.1..1.0f64, 3)) {
        let e = EscapeSets::<f64>::default();
        let p = SymMat::from_mat(&Mat::diag(&[d[0], -d[1], d[2]]));
        prop_assert!(!e.contains(&p, 10));
        let n = EscapeSets { membership: Membership::NormBall, ..e };
        prop_assert!(n.contains(&p, 0));
    }
}
