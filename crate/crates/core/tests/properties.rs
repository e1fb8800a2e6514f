use proptest::prelude::*;

use homog::cell::{interp_q, tabulate_q};
use homog::flux::{make_phi_laplacian, ScalarMap};
use homog::grid::{gradient, integrate_fn, luxemburg_norm, zero_mean_project, ScalarField, TensorGrid};
use homog::harness::{rows_to_csv, twoscale_pairing, PairingKind, StudyRow, TestFunction};
use homog::linalg::CsrMatrix;
use homog::nfunction::NFunction;
use homog::numeric::linspace;
use homog::solver::{solve_monotone_system, SolveOptions};

fn field(dim: usize, n: usize, vals: &[f64]) -> ScalarField {
    let g = TensorGrid::cell(dim, n).unwrap();
    ScalarField::new(&g, vals[..g.n_dofs()].to_vec()).unwrap()
}

fn nf(k: usize) -> NFunction {
    match k % 3 {
        0 => NFunction::power(2.0).unwrap(),
        1 => NFunction::scaled_power(3.0).unwrap(),
        _ => NFunction::power_log(1.5).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn luxemburg_is_homogeneous(vals in prop::collection::vec(-10.0f64..10.0, 64), c in 0.1f64..20.0, k in 0usize..3) {
        let u = field(2, 8, &vals);
        let phi = nf(k);
        let n = luxemburg_norm(&u, &phi).unwrap();
        let nc = luxemburg_norm(&u.scaled(-c), &phi).unwrap();
        prop_assert!((nc - c * n).abs() <= 1e-10 * (1.0 + c * n));
    }

    #[test]
    fn luxemburg_triangle(a in prop::collection::vec(-10.0f64..10.0, 16), b in prop::collection::vec(-10.0f64..10.0, 16), k in 0usize..3) {
        let (u, v) = (field(1, 16, &a), field(1, 16, &b));
        let phi = nf(k);
        let s = luxemburg_norm(&u.add(&v).unwrap(), &phi).unwrap();
        prop_assert!(s <= luxemburg_norm(&u, &phi).unwrap() + luxemburg_norm(&v, &phi).unwrap() + 1e-9);
    }

    #[test]
    fn l2_luxemburg_matches_discrete_l2(vals in prop::collection::vec(-5.0f64..5.0, 64)) {
        let u = field(2, 8, &vals);
        let l2 = integrate_fn(&u.grid, |x| u.value_at(x).powi(2)).sqrt();
        let lux = luxemburg_norm(&u, &NFunction::power(2.0).unwrap()).unwrap();
        prop_assert!((lux - l2).abs() <= 1e-9 * (1.0 + l2));
    }

    #[test]
    fn projection_keeps_the_gradient(vals in prop::collection::vec(-3.0f64..3.0, 32)) {
        let u = field(1, 32, &vals);
        let p = zero_mean_project(&u).unwrap();
        prop_assert!(integrate_fn(&p.grid, |x| p.value_at(x)).abs() < 1e-12);
        let (gu, gp) = (gradient(&u), gradient(&p));
        for (a, b) in gu.values.iter().zip(&gp.values) {
            prop_assert!((a[0] - b[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn young_inequality(s in 0.0f64..20.0, t in 0.0f64..20.0, k in 0usize..3) {
        let pair = nf(k).conjugate();
        let gap = pair.primal.value(t).unwrap() + pair.dual.value(s).unwrap() - s * t;
        prop_assert!(gap >= -1e-9 * (1.0 + s * t));
    }

    #[test]
    fn slow_pairing_is_an_integral(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, e in 1usize..4) {
        let g = TensorGrid::unit_dirichlet(1, 16).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0] * (1.0 - x[0]) * (c0 + c1 * x[0]));
        let f = TestFunction::new("1 + 2*x1", "1", "1", PairingKind::Value).unwrap();
        let eps = 0.5f64.powi(e as i32);
        let direct = integrate_fn(&g, |x| u.value_at(x) * (1.0 + 2.0 * x[0]));
        prop_assert!((twoscale_pairing(&u, &f, eps).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn newton_solves_monotone_diagonal_systems(c in prop::collection::vec(0.1f64..5.0, 6), b in prop::collection::vec(-4.0f64..4.0, 6)) {
        // R_i(u) = c_i (u_i + u_i³) − b_i plus a weak symmetric coupling
        let n = c.len();
        let res = |u: &[f64]| -> homog::Result<Vec<f64>> {
            Ok((0..n).map(|i| {
                let left = if i > 0 { u[i] - u[i - 1] } else { u[i] };
                c[i] * (u[i] + u[i].powi(3)) + 0.1 * left - b[i]
                    - if i + 1 < n { 0.1 * (u[i + 1] - u[i]) } else { 0.0 }
            }).collect())
        };
        let sol = solve_monotone_system(res, None::<fn(&[f64]) -> homog::Result<CsrMatrix>>, &vec![0.0; n], &SolveOptions::default()).unwrap();
        let r = res(&sol.solution).unwrap();
        prop_assert!(r.iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn csv_export_is_deterministic(eps in 0.01f64..1.0, e in prop::collection::vec(0.0f64..1.0, 4), it in 0usize..50) {
        let row = StudyRow {
            eps, err_lux: e[0], err_l2: e[1], err_corrector: e[2], pairing_gap: vec![e[3]],
            energy: e[0] * e[1], iterations: it, wall_ms: 0, energy_gap: 0.0, residual_norm: 0.0,
            solution_norm: 1.0, failed: None,
        };
        let a = rows_to_csv(std::slice::from_ref(&row), 1).unwrap();
        prop_assert_eq!(&a, &rows_to_csv(&[row.clone()], 1).unwrap());
        // the 17 significant digits reproduce every float exactly
        let fields: Vec<f64> = a.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        prop_assert_eq!(fields[0], eps);
        prop_assert_eq!(fields[2], e[1]);
        let back: StudyRow = serde_json::from_str(&serde_json::to_string(&row).unwrap()).unwrap();
        prop_assert_eq!(back, row);
    }
}

#[test]
fn table_interpolation_reproduces_nodes() {
    let a = make_phi_laplacian(1, NFunction::scaled_power(3.0).unwrap(), ScalarMap::constant(1.0), ScalarMap::parse_z("piecewise:[1,4]").unwrap()).unwrap();
    let g = TensorGrid::cell(1, 32).unwrap();
    let t = tabulate_q(&a, &linspace(-1.0, 1.0, 3), (-1.0, 1.0), 5, &g, &g, &SolveOptions::default()).unwrap();
    for k in 0..t.len() {
        let (r, xi) = t.node(k);
        let q = interp_q(&t, r, &xi).unwrap();
        assert_eq!(q[0], t.values[k][0]);
    }
}
