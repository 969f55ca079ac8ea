use super::*;
use crate::linsolve::{assemble_operator, solve_dense_oracle};
use crate::mesh::Grid;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALL: [SchemeKind; 5] = [
    SchemeKind::Gspm1,
    SchemeKind::Si2,
    SchemeKind::SchemeA,
    SchemeKind::SchemeB,
    SchemeKind::Bdf2Ref,
];

fn random_unit_field(grid: Grid, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = VectorField::zeros(grid);
    for idx in 0..grid.len() {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        m.set(idx, v.map(|x| x / n));
    }
    m
}

fn smooth_field(grid: Grid) -> VectorField {
    VectorField::sample_function(grid, |x| {
        let th = 0.3 + x[0] * 0.8 + 0.2 * x[1];
        let ph = 0.5 * x[0] - 0.4 * x[1] + 0.3 * x[2];
        [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    })
    .unwrap()
}

#[test]
fn scheme_names_round_trip() {
    for k in ALL {
        assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, format!("\"{}\"", k.name()));
    }
    assert!("scheme-c".parse::<SchemeKind>().is_err());
}

#[test]
fn projection_normalizes_and_rejects_zero() {
    let grid = Grid::new([2, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    let m = VectorField::new(grid, [vec![3.0, 0.0], vec![4.0, 1e-3], vec![0.0, 0.0]]).unwrap();
    let p = project(&m).unwrap();
    assert_eq!(p.at(0), [0.6, 0.8, 0.0]);
    assert_eq!(p.at(1), [0.0, 1.0, 0.0]);

    let z = VectorField::new(grid, [vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
    match project(&z) {
        Err(Error::DegenerateProjection { cell, .. }) => assert_eq!(cell, [1, 0, 0]),
        other => panic!("expected degenerate projection, got {other:?}"),
    }
}

#[test]
fn extrapolation_is_two_current_minus_previous() {
    let grid = Grid::line(3, 1.0).unwrap();
    let a = VectorField::uniform(grid, [1.0, 0.0, 0.0]);
    let b = VectorField::uniform(grid, [0.0, 1.0, 0.0]);
    let e = extrapolate(&a, &b).unwrap();
    assert_eq!(e.at(1), [-1.0, 2.0, 0.0]);
}

#[test]
fn uniform_state_is_stationary_without_local_field() {
    let grid = Grid::new([4, 3, 2], [1.0, 0.75, 0.5]).unwrap();
    let params = MaterialParams::exchange_only(0.7, 0.2);
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let m0 = VectorField::uniform(grid, [0.6, 0.0, 0.8]);
    for kind in ALL {
        let out = integrate(kind, m0.clone(), &ctx, 0.05, 4, |_| Ok(())).unwrap();
        let d = out
            .m_curr
            .difference(&m0)
            .unwrap()
            .norm(crate::NormKind::Inf);
        assert!(d < 1e-13, "{kind}: drift {d}");
    }
}

#[test]
fn solve_counts_per_step() {
    let grid = Grid::new([6, 5, 1], [1.0, 1.0, 1.0]).unwrap();
    let params = MaterialParams::exchange_only(0.1, 0.1);
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let m0 = smooth_field(grid);
    let dt = 0.01;

    let mut state = step(
        SchemeKind::SchemeB,
        SchemeState::initial(m0.clone()),
        &ctx,
        dt,
    )
    .unwrap();
    // bootstrap: five heat solves plus three for g^0
    assert_eq!(ctx.solve_count(), 8);
    for expect in [(SchemeKind::SchemeB, 3)] {
        for _ in 0..3 {
            ctx.reset_counters();
            state = step(expect.0, state, &ctx, dt).unwrap();
            assert_eq!(ctx.solve_count(), expect.1);
        }
    }

    let boot = gspm1_step(SchemeState::initial(m0), &ctx, dt).unwrap();
    for (kind, n) in [
        (SchemeKind::SchemeA, 5),
        (SchemeKind::Si2, 3),
        (SchemeKind::Gspm1, 5),
        (SchemeKind::Bdf2Ref, 0),
    ] {
        ctx.reset_counters();
        step(kind, boot.clone(), &ctx, dt).unwrap();
        assert_eq!(ctx.solve_count(), n, "{kind}");
    }
}

#[test]
fn per_stage_refresh_matches_once_per_step_without_local_field() {
    let grid = Grid::new([5, 4, 1], [1.0, 0.8, 1.0]).unwrap();
    let params = MaterialParams::exchange_only(0.05, 0.3);
    let plan = SpectralPlan::new(grid);
    let m0 = smooth_field(grid);
    let a = StepContext::new(&params, &plan);
    let b = StepContext::new(&params, &plan).with_options(StepOptions {
        refresh_field_per_stage: true,
        ..Default::default()
    });
    let x = integrate(SchemeKind::SchemeA, m0.clone(), &a, 0.01, 3, |_| Ok(())).unwrap();
    let y = integrate(SchemeKind::SchemeA, m0, &b, 0.01, 3, |_| Ok(())).unwrap();
    assert_eq!(x.m_curr, y.m_curr);
}

#[test]
fn scheme_b_lagged_g_matches_dense_solve() {
    let grid = Grid::new([4, 3, 2], [1.0, 0.75, 0.5]).unwrap();
    let params = MaterialParams::exchange_only(0.3, 0.1);
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let dt = 0.02;
    let s = gspm1_step(SchemeState::initial(smooth_field(grid)), &ctx, dt).unwrap();
    let s = scheme_b_init(s, &ctx, dt).unwrap();
    let mhat = extrapolate(s.m_prev.as_ref().unwrap(), &s.m_curr).unwrap();
    let coeffs = OperatorCoefficients::biharmonic(params.eps, dt).unwrap();
    for a in 0..3 {
        let dense = solve_dense_oracle(grid, coeffs, &mhat.scalar(a)).unwrap();
        let g = &s.g_prev.as_ref().unwrap()[a];
        for (x, y) in g.data().iter().zip(dense.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn two_step_scheme_requires_history() {
    let grid = Grid::line(4, 1.0).unwrap();
    let params = MaterialParams::exchange_only(0.1, 0.1);
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let s = SchemeState::initial(smooth_field(grid));
    assert!(matches!(
        scheme_a_step(s.clone(), &ctx, 0.1),
        Err(Error::InvalidParameter(_))
    ));
    let boot = gspm1_step(s, &ctx, 0.1).unwrap();
    assert!(matches!(
        scheme_b_step(boot, &ctx, 0.1),
        Err(Error::InvalidParameter(_))
    ));
}

/// Assembles the coupled BDF2 matrix entry by entry from a dense Laplacian.
fn dense_bdf2_matrix(
    grid: &Grid,
    mhat: &VectorField,
    eps: f64,
    alpha: f64,
    dt: f64,
) -> DMatrix<f64> {
    let n = grid.len();
    let lap = DMatrix::identity(n, n)
        - assemble_operator(*grid, OperatorCoefficients::new(1.0, 0.0).unwrap()).unwrap();
    let mut a = DMatrix::zeros(3 * n, 3 * n);
    for row in 0..n {
        let mh = mhat.at(row);
        let n2 = mh.iter().map(|v| v * v).sum::<f64>();
        // torque_a(v) = sum_c T[a][c] v_c
        let t = [
            [
                alpha * (mh[0] * mh[0] - n2),
                -mh[2] + alpha * mh[1] * mh[0],
                mh[1] + alpha * mh[2] * mh[0],
            ],
            [
                mh[2] + alpha * mh[0] * mh[1],
                alpha * (mh[1] * mh[1] - n2),
                -mh[0] + alpha * mh[2] * mh[1],
            ],
            [
                -mh[1] + alpha * mh[0] * mh[2],
                mh[0] + alpha * mh[1] * mh[2],
                alpha * (mh[2] * mh[2] - n2),
            ],
        ];
        for ca in 0..3 {
            a[(ca * n + row, ca * n + row)] += 1.5;
            for cc in 0..3 {
                for col in 0..n {
                    a[(ca * n + row, cc * n + col)] += dt * eps * t[ca][cc] * lap[(row, col)];
                }
            }
        }
    }
    a
}

#[test]
fn bdf2_reference_matches_dense_coupled_solve() {
    let grid = Grid::new([4, 3, 2], [1.0, 0.75, 0.5]).unwrap();
    let params = MaterialParams {
        h_ext: [0.1, -0.2, 0.3],
        q: 0.05,
        ..MaterialParams::exchange_only(0.2, 0.3)
    };
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let dt = 0.05;
    let prev = random_unit_field(grid, 11);
    let curr = random_unit_field(grid, 12);
    let state = SchemeState {
        m_prev: Some(prev.clone()),
        m_curr: curr.clone(),
        g_prev: None,
        t: 0.0,
        step_index: 1,
    };
    let out = bdf2_reference_step(state, &ctx, dt).unwrap();

    let n = grid.len();
    let mhat = extrapolate(&prev, &curr).unwrap();
    let f = local_field(&params, None, &mhat).unwrap();
    let a = dense_bdf2_matrix(&grid, &mhat, params.eps, params.alpha, dt);
    let mut b = DVector::zeros(3 * n);
    for idx in 0..n {
        let mh = mhat.at(idx);
        let fv = f.at(idx);
        let cross = [
            mh[1] * fv[2] - mh[2] * fv[1],
            mh[2] * fv[0] - mh[0] * fv[2],
            mh[0] * fv[1] - mh[1] * fv[0],
        ];
        let dot: f64 = (0..3).map(|c| mh[c] * fv[c]).sum();
        let n2: f64 = mh.iter().map(|v| v * v).sum();
        for c in 0..3 {
            let torque = cross[c] + params.alpha * (dot * mh[c] - n2 * fv[c]);
            b[c * n + idx] =
                2.0 * curr.component(c)[idx] - 0.5 * prev.component(c)[idx] - dt * torque;
        }
    }
    let x = a.lu().solve(&b).unwrap();
    let comps = std::array::from_fn(|c| x.as_slice()[c * n..(c + 1) * n].to_vec());
    let expect = project(&VectorField::new(grid, comps).unwrap()).unwrap();
    let d = out
        .m_curr
        .difference(&expect)
        .unwrap()
        .norm(crate::NormKind::Inf);
    assert!(d < 1e-10, "difference {d}");
}

#[test]
fn unit_length_holds_after_every_step() {
    let grid = Grid::new([6, 5, 2], [1.0, 1.0, 0.4]).unwrap();
    let params = MaterialParams {
        h_ext: [0.0, 0.5, 0.0],
        q: 0.2,
        ..MaterialParams::exchange_only(0.05, 0.1)
    };
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    for kind in ALL {
        integrate(kind, random_unit_field(grid, 5), &ctx, 0.01, 5, |s| {
            let dev = s.m_curr.max_unit_deviation();
            assert!(dev <= 4.0 * f64::EPSILON, "{kind}: {dev}");
            Ok(())
        })
        .unwrap();
    }
}

/// Single spin in a field along e3 precesses as `(cos t, sin t, 0)` when α = 0.
fn spin_error(kind: SchemeKind, steps: usize) -> f64 {
    let grid = Grid::new([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    let params = MaterialParams {
        h_ext: [0.0, 0.0, 1.0],
        ..MaterialParams::exchange_only(1.0, 0.0)
    };
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let t_end = 1.0;
    let dt = t_end / steps as f64;
    let out = integrate(
        kind,
        VectorField::uniform(grid, [1.0, 0.0, 0.0]),
        &ctx,
        dt,
        steps,
        |_| Ok(()),
    )
    .unwrap();
    let m = out.m_curr.at(0);
    ((m[0] - t_end.cos()).powi(2) + (m[1] - t_end.sin()).powi(2) + m[2].powi(2)).sqrt()
}

fn spin_order(kind: SchemeKind) -> f64 {
    (spin_error(kind, 40) / spin_error(kind, 80)).log2()
}

#[test]
fn single_spin_precession_orders() {
    for kind in [SchemeKind::Si2, SchemeKind::Bdf2Ref] {
        let p = spin_order(kind);
        assert!((1.8..2.3).contains(&p), "{kind}: order {p}");
    }
    // The Gauss-Seidel refresh pairs m̂ᵢ* = 2mᵢ* - mᵢⁿ with f evaluated at
    // m̂ⁿ⁺¹, which leaves a first-order term for field-driven precession.
    for kind in [SchemeKind::Gspm1, SchemeKind::SchemeA, SchemeKind::SchemeB] {
        let p = spin_order(kind);
        assert!((0.8..1.3).contains(&p), "{kind}: order {p}");
    }
}

#[test]
fn damped_single_spin_relaxes_to_field() {
    let grid = Grid::new([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    let params = MaterialParams {
        h_ext: [0.0, 0.0, 1.0],
        ..MaterialParams::exchange_only(1.0, 0.5)
    };
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let m0 = VectorField::uniform(grid, [1.0, 0.0, 0.0]);
    let out = integrate(SchemeKind::SchemeA, m0, &ctx, 0.05, 800, |_| Ok(())).unwrap();
    assert!(out.m_curr.at(0)[2] > 0.999);
}

#[test]
fn blow_up_is_reported_with_step() {
    let grid = Grid::line(8, 1.0).unwrap();
    let params = MaterialParams {
        h_ext: [0.0, 0.0, 1e6],
        ..MaterialParams::exchange_only(0.1, 0.5)
    };
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan);
    let err = integrate(
        SchemeKind::SchemeA,
        smooth_field(grid),
        &ctx,
        0.1,
        3,
        |_| Ok(()),
    )
    .unwrap_err();
    assert!(err.is_blow_up(), "{err}");
    assert!(matches!(err, Error::AtStep { .. }));
}
