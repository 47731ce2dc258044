use ofvi_core::matops::SymMat;
use ofvi_core::matops::{norm2, Mat};
use ofvi_core::plant::{
    eval_cost, make_probing, simulate, CoupledOde, LtiPlant, ProbingSpec, Sample, TrajectoryLog,
    WeightSpec,
};
use ofvi_core::realization::{step_coupled, FilterBank, NoAccumulator};
use ofvi_core::vi::collect;

fn rotation_error(dt: f64) -> f64 {
    // x'' = -x from (1, 0); exact solution (cos t, -sin t).
    let rhs = |_t: f64, x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0];
    };
    let mut ode = CoupledOde::new(rhs, vec![1.0, 0.0], 0.0, dt).unwrap();
    simulate(&mut ode, 0.5, 2.0, |_| {}).unwrap();
    let x = ode.state();
    ((x[0] - 2f64.cos()).powi(2) + (x[1] + 2f64.sin()).powi(2)).sqrt()
}

#[test]
fn rk4_is_fourth_order() {
    let (e1, e2) = (rotation_error(0.1), rotation_error(0.05));
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.2, "observed order {order}");
}

fn reference_filter() -> FilterBank<f64> {
    let m = Mat::from_f64_rows(&[&[-1.0, 0.0, 0.0], &[1.0, -2.0, 0.0], &[0.0, 2.0, -3.0]]);
    FilterBank::build(3, 1, 1, m).unwrap()
}

/// Composite Simpson rule on equally spaced samples (even number of panels).
fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    assert!(n.is_multiple_of(2));
    let inner: f64 = (1..n)
        .map(|k| if k % 2 == 1 { 4.0 * f[k] } else { 2.0 * f[k] })
        .sum();
    h / 3.0 * (f[0] + inner + f[n])
}

#[test]
fn co_integrated_regressors_match_simpson_on_fine_samples() {
    let plant = LtiPlant::f16(vec![0.6, -0.48, 0.64]).unwrap();
    let filter = reference_filter();
    let spec = ProbingSpec {
        count: 5,
        freq_range: [-20.0, 20.0],
        ..ProbingSpec::default()
    };
    let (dt, interval, horizon) = (1e-4, 0.01, 0.05);
    let probe = make_probing::<f64>(3, &spec, 1);
    let p2 = probe.clone();
    let law = move |t: f64, _: &[f64], u: &mut [f64]| probe.eval_into(t, u);
    let data = collect(&plant, &filter, law, dt, interval, horizon)
        .unwrap()
        .data;

    // Independent pass: sample every RK4 step and integrate the same products.
    let law2 = move |t: f64, _: &[f64], u: &mut [f64]| p2.eval_into(t, u);
    let mut ode = step_coupled(&plant, &filter, law2, NoAccumulator, dt).unwrap();
    let mut zeta_t: Vec<Vec<f64>> = Vec::new();
    let mut u_t: Vec<f64> = Vec::new();
    let mut y_t: Vec<f64> = Vec::new();
    simulate(&mut ode, dt, horizon, |o| {
        let t = o.t();
        let (sys, state) = o.parts_mut();
        let s = sys.observe(t, state);
        zeta_t.push(s.zeta);
        u_t.push(s.u[0]);
        y_t.push(s.y[0]);
    })
    .unwrap();
    let per = (interval / dt).round() as usize;
    let n_zeta = filter.n_zeta();
    for row in 0..data.rows() {
        let span = row * per..=(row + 1) * per;
        let i_zz = data.i_zz_full();
        for (i, j) in [(0, 0), (3, 7), (20, 19), (18, 2)] {
            let f: Vec<f64> = span.clone().map(|k| zeta_t[k][i] * zeta_t[k][j]).collect();
            let want = simpson(&f, dt);
            let got = i_zz[(row, i * n_zeta + j)];
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "zz {row} {i} {j}: {got} vs {want}"
            );
        }
        for i in [0, 9, 20] {
            let f: Vec<f64> = span.clone().map(|k| zeta_t[k][i] * u_t[k]).collect();
            let want = simpson(&f, dt);
            assert!((data.i_zu[(row, i)] - want).abs() <= 1e-8 * (1.0 + want.abs()));
        }
        let f: Vec<f64> = span.clone().map(|k| y_t[k] * y_t[k]).collect();
        let want = simpson(&f, dt);
        assert!((data.i_yy[(row, 0)] - want).abs() <= 1e-8 * (1.0 + want.abs()));
    }
}

#[test]
fn cost_of_decaying_scalar_loop() {
    // y = e^{-t}, u = 0, Q = 1: cost over [0, 5] is (1 - e^{-10}) / 2.
    let mut log = TrajectoryLog::new();
    for k in 0..=5000 {
        let t = k as f64 * 1e-3;
        log.push(Sample {
            t,
            u: vec![0.0],
            y: vec![(-t).exp()],
            zeta: vec![],
        });
    }
    let w = WeightSpec::new(SymMat::identity(1), SymMat::identity(1)).unwrap();
    let j = eval_cost(&log, &w, 5.0);
    assert!((j - (1.0 - (-10f64).exp()) / 2.0).abs() < 1e-6);
}

#[test]
fn unforced_stable_plant_decays() {
    let plant = LtiPlant::f16(vec![1.0, 0.0, 0.0]).unwrap();
    let filter = reference_filter();
    let zero = |_: f64, _: &[f64], u: &mut [f64]| u.fill(0.0);
    let mut ode = step_coupled(&plant, &filter, zero, NoAccumulator, 1e-3).unwrap();
    // Slowest open-loop mode is about -0.19.
    simulate(&mut ode, 0.1, 60.0, |_| {}).unwrap();
    assert!(norm2(&ode.state()[..3]) < 1e-3);
}
