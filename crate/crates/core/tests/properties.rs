use std::sync::OnceLock;

use nsreg_core::density::{besov_distance, default_shifts, finite_difference, hoelder_fit, l1_distance, mollify, Shift};
use nsreg_core::girsanov::GirsanovWeight;
use nsreg_core::integrator::Stepper;
use nsreg_core::seed::seed_split;
use nsreg_core::{Basis, CovarianceSpec, ExperimentConfig, Grid, GridFunction, Model, SubspaceF, SystemVariant, VelocityState};
use proptest::prelude::*;

fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| {
        let basis = Basis::new(1).unwrap();
        let cov = CovarianceSpec::from_basis(&basis, 1.0, 1.0).unwrap();
        let f = SubspaceF::new(vec![0, 1], &cov).unwrap();
        Model::new(basis, cov, f, 1.0, true).unwrap()
    })
}

fn state() -> impl Strategy<Value = VelocityState> {
    prop::collection::vec(-2.0f64..2.0, 52).prop_map(VelocityState::from_vec)
}

fn grid_fn(values: Vec<f64>) -> GridFunction {
    let grid = Grid::new(vec![0.0, 0.0], 2.0, 16).unwrap();
    GridFunction { grid, values }
}

fn field() -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-1.0f64..1.0, 256).prop_map(grid_fn)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trilinear_is_antisymmetric(u in state(), v in state(), w in state()) {
        let b = &model().basis;
        let a = b.trilinear(&w, &u, &v).unwrap();
        let c = b.trilinear(&v, &u, &w).unwrap();
        let scale = 1.0 + a.abs() + c.abs();
        prop_assert!((a + c).abs() <= 1e-10 * scale);
        let e = b.trilinear(&u, &u, &u).unwrap();
        prop_assert!(e.abs() <= 1e-10 * (1.0 + u.norm().powi(3)));
    }

    #[test]
    fn bilinear_is_bilinear(u in state(), v in state(), w in state(), a in -3.0f64..3.0) {
        let b = &model().basis;
        let lhs = b.bilinear(&u, &v.scaled(a).add(&w)).unwrap();
        let rhs = b.bilinear(&u, &v).unwrap().scaled(a).add(&b.bilinear(&u, &w).unwrap());
        let err = lhs.add(&rhs.scaled(-1.0)).norm();
        prop_assert!(err <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn reduced_system_moves_f_by_the_increment(u in state(), inc in state()) {
        let m = model();
        let mut stepper = Stepper::new(m, 1e-3).unwrap();
        let mut next = u.clone();
        stepper.step(&mut next, &SystemVariant::ReducedV, 0.0, inc.coeffs(), None).unwrap();
        for &i in m.subspace.indices() {
            prop_assert_eq!(next.coeffs()[i], u.coeffs()[i] + inc.coeffs()[i]);
        }
    }

    #[test]
    fn stopping_integral_is_monotone_and_capped(
        hs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..50),
        n in 0.01f64..5.0,
    ) {
        let mut w = GirsanovWeight::new(n);
        let mut prev = 0.0;
        for (k, h) in hs.iter().enumerate() {
            let before_stop = w.stopped;
            w.accumulate(h, &[0.01, -0.02], 0.01, (k + 1) as f64 * 0.01);
            prop_assert!(w.stopping_integral >= prev);
            if before_stop {
                prop_assert_eq!(w.stopping_integral, prev);
            }
            prev = w.stopping_integral;
        }
        prop_assert_eq!(w.stopped, w.stopping_integral >= n);
    }

    #[test]
    fn seed_split_is_injective_on_small_ranges(master in any::<u64>(), a in 0u64..1_000_000, b in 0u64..1_000_000) {
        prop_assert_eq!(seed_split(master, a) == seed_split(master, b), a == b);
    }

    #[test]
    fn l1_is_a_metric(f in field(), g in field(), h in field()) {
        let fg = l1_distance(&f, &g).unwrap();
        prop_assert!((fg - l1_distance(&g, &f).unwrap()).abs() <= 1e-12);
        prop_assert!(fg <= l1_distance(&f, &h).unwrap() + l1_distance(&h, &g).unwrap() + 1e-12);
        prop_assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn besov_dominates_l1(f in field(), g in field(), alpha in 0.05f64..0.95) {
        let shifts = default_shifts(&f.grid);
        let b = besov_distance(&f, &g, alpha, 2, &shifts).unwrap();
        prop_assert!(b >= l1_distance(&f, &g).unwrap());
    }

    #[test]
    fn differences_are_linear(f in field(), g in field(), a in -2.0f64..2.0, dx in -3i64..3, dy in -3i64..3, n in 1u32..4) {
        let shift = Shift(vec![dx, dy]);
        let combo = GridFunction { grid: f.grid.clone(), values: f.values.iter().zip(&g.values).map(|(x, y)| a * x + y).collect() };
        let lhs = finite_difference(&combo, &shift, n).unwrap();
        let df = finite_difference(&f, &shift, n).unwrap();
        let dg = finite_difference(&g, &shift, n).unwrap();
        for i in 0..lhs.values.len() {
            prop_assert!((lhs.values[i] - (a * df.values[i] + dg.values[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn mollification_keeps_mass(values in prop::collection::vec(0.0f64..1.0, 256), cells in 1.0f64..4.0) {
        let f = grid_fn(values);
        let m = mollify(&f, cells * f.grid.cell_width()).unwrap();
        prop_assert!((m.integral() - f.integral()).abs() <= 1e-12 * (1.0 + f.integral()));
        prop_assert!(m.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn exact_power_laws_are_recovered(slope in 0.1f64..2.0, c in 0.01f64..10.0) {
        let pairs: Vec<(f64, f64)> = (0..8).map(|i| {
            let g = 0.004 * 2f64.powi(i);
            (g, c * g.powf(slope))
        }).collect();
        let fit = hoelder_fit(&pairs, 0.0).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn config_text_round_trips(cutoff in 1i32..4, alpha in 0.01f64..0.99, seed in any::<u64>(), size in 1usize..1_000_000) {
        let mut cfg = ExperimentConfig::default();
        cfg.set("cutoff", &cutoff.to_string()).unwrap();
        cfg.set("alpha", &alpha.to_string()).unwrap();
        cfg.set("master_seed", &seed.to_string()).unwrap();
        cfg.set("ensemble_size", &size.to_string()).unwrap();
        let back = ExperimentConfig::parse_str(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
