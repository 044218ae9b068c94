//! Tree ensembles: extremely randomized trees, histogram gradient boosting
//! and natural-gradient boosting with a Poisson output.

mod hist;
mod importance;
mod model;
mod tree;
mod tune;

pub use hist::{Binner, MAX_BINS};
pub use importance::{permutation_importance, ranked, Importance, Metric};
pub use model::{
    balanced_class_weights, fit, fit_extra_trees, fit_hist_gb, fit_ngboost, poisson_natural_gradient, EnsembleModel,
    Family, HyperParams, ModelKind, Task, MODEL_FORMAT_VERSION, POISSON_EPS,
};
pub use tree::Tree;
pub use tune::{dev_score, tune, Grid, TuneResult};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{regression_scores, spearman_rho};
    use crate::features::FeatureMatrix;
    use crate::seed::rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson};

    fn small(family: Family) -> HyperParams {
        HyperParams {
            n_estimators: 20,
            ..HyperParams::defaults(family)
        }
    }

    fn uniform_matrix(n: usize, f: usize, seed: u64) -> FeatureMatrix {
        let mut r = rng(seed);
        FeatureMatrix::from_columns((0..f).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect()).unwrap()
    }

    #[test]
    fn constant_target_gives_constant_prediction() {
        let x = uniform_matrix(60, 3, 1);
        let y = vec![3.0; 60];
        for family in [Family::ExtraTrees, Family::HistGb] {
            let m = fit(family, Task::Regression, &x, &y, &small(family), 7).unwrap();
            for p in m.predict(&x).unwrap() {
                assert!((p - 3.0).abs() < 1e-12, "{family}: {p}");
            }
        }
        let m = fit(Family::NgBoost, Task::Regression, &x, &y, &small(Family::NgBoost), 7).unwrap();
        for p in m.predict(&x).unwrap() {
            assert!((p - 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn extra_trees_fit_identity_on_training_rows() {
        let x = uniform_matrix(1000, 1, 2);
        let y = x.column(0).to_vec();
        let m = fit(Family::ExtraTrees, Task::Regression, &x, &y, &HyperParams::defaults(Family::ExtraTrees), 3).unwrap();
        let r2 = regression_scores(&y, &m.predict(&x).unwrap()).unwrap().r2.unwrap();
        assert!(r2 >= 0.99, "r2 {r2}");
    }

    #[test]
    fn weighted_stump_matches_hand_gini() {
        // nine negatives at x = 0..8, one positive at x = 9
        let x = FeatureMatrix::from_columns(vec![(0..10).map(f64::from).collect()]).unwrap();
        let y: Vec<f64> = (0..10).map(|i| if i == 9 { 1.0 } else { 0.0 }).collect();
        let cw = balanced_class_weights(&y);
        assert!((cw[0] - 10.0 / 18.0).abs() < 1e-15);
        assert!((cw[1] - 5.0).abs() < 1e-15);

        // depth 0: the root leaf holds the weighted class-1 share, 5 / (5 + 5)
        let p0 = HyperParams {
            n_estimators: 1,
            min_samples_leaf: 1,
            max_depth: Some(0),
            ..HyperParams::defaults(Family::ExtraTrees)
        };
        let m = fit(Family::ExtraTrees, Task::Classification, &x, &y, &p0, 1).unwrap();
        assert!((m.predict(&x).unwrap()[0] - 0.5).abs() < 1e-12);

        let p1 = HyperParams {
            max_depth: Some(1),
            ..p0
        };
        let m = fit(Family::ExtraTrees, Task::Classification, &x, &y, &p1, 1).unwrap();
        let t = &m.trees[0];
        let (_, thr) = t.split(0).unwrap();
        let (l, r) = t.children(0);
        let left: Vec<usize> = (0..10).filter(|&i| f64::from(i as u8) <= thr).collect();
        let share = |rows: &[usize]| {
            let w1: f64 = rows.iter().map(|&i| cw[y[i] as usize] * y[i]).sum();
            let w: f64 = rows.iter().map(|&i| cw[y[i] as usize]).sum();
            w1 / w
        };
        let right: Vec<usize> = (0..10).filter(|i| !left.contains(i)).collect();
        assert!((t.leaf_value(l) - share(&left)).abs() < 1e-12);
        assert!((t.leaf_value(r) - share(&right)).abs() < 1e-12);
        // hand weighted Gini of the root: W = 10, both classes 5
        let gini = 1.0 - 0.5f64.powi(2) - 0.5f64.powi(2);
        assert!((gini - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let x = uniform_matrix(80, 2, 4);
        let y: Vec<f64> = x.column(0).iter().map(|v| 3.0 * v).collect();
        let p = HyperParams {
            learning_rate: 0.0,
            ..small(Family::HistGb)
        };
        let m = fit(Family::HistGb, Task::Regression, &x, &y, &p, 1).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for v in m.predict(&x).unwrap() {
            assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn hist_stump_threshold_separates_classes() {
        let x = FeatureMatrix::from_columns(vec![(0..100).map(|i| f64::from(i as u8)).collect()]).unwrap();
        let y: Vec<f64> = (0..100).map(|i| if i >= 40 { 1.0 } else { 0.0 }).collect();
        let p = HyperParams {
            n_estimators: 1,
            max_depth: Some(1),
            min_samples_leaf: 5,
            ..HyperParams::defaults(Family::HistGb)
        };
        let m = fit(Family::HistGb, Task::Classification, &x, &y, &p, 1).unwrap();
        let (f, thr) = m.trees[0].split(0).unwrap();
        assert_eq!(f, 0);
        assert!((39.0..40.0).contains(&thr), "threshold {thr}");
        assert_eq!(m.predict_label(&x).unwrap(), y.iter().map(|&v| v as u8).collect::<Vec<_>>());
    }

    #[test]
    fn hist_gb_learns_piecewise_constant() {
        let x = uniform_matrix(1000, 2, 5);
        let y: Vec<f64> = x.column(0).iter().map(|&v| if v < 0.3 { 1.0 } else if v < 0.7 { 4.0 } else { 2.0 }).collect();
        let m = fit(Family::HistGb, Task::Regression, &x, &y, &HyperParams::defaults(Family::HistGb), 1).unwrap();
        let r2 = regression_scores(&y, &m.predict(&x).unwrap()).unwrap().r2.unwrap();
        assert!(r2 >= 0.95, "r2 {r2}");
    }

    #[test]
    fn natural_gradient_examples() {
        assert_eq!(poisson_natural_gradient(2.0, 1.0), -1.0);
        assert_eq!(poisson_natural_gradient(0.0, 0.5), 1.0);
        assert_eq!(poisson_natural_gradient(3.0, 3.0), 0.0);
    }

    proptest! {
        #[test]
        fn natural_gradient_is_fisher_scaled_gradient(y in 0u32..50, mu in 1e-3f64..100.0) {
            let y = f64::from(y);
            // d/dtheta of exp(theta) - y theta at theta = ln mu, over Fisher mu
            let grad = mu - y;
            let ng = poisson_natural_gradient(y, mu);
            prop_assert!((ng * mu - grad).abs() <= 1e-9 * (1.0 + grad.abs()));
        }
    }

    fn poisson_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>, Vec<f64>) {
        let mut r = rng(seed);
        let x1: Vec<f64> = (0..n).map(|_| r.random_range(0.0..2.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let lambda: Vec<f64> = x1.iter().map(|v| v.exp()).collect();
        let y = lambda.iter().map(|&l| Poisson::new(l).unwrap().sample(&mut r)).collect();
        (FeatureMatrix::from_columns(vec![x1, x2]).unwrap(), y, lambda)
    }

    #[test]
    fn ngboost_recovers_rate_ordering() {
        let (x, y, _) = poisson_data(2000, 11);
        let (xt, _, lambda) = poisson_data(1000, 12);
        let m = fit(Family::NgBoost, Task::Regression, &x, &y, &HyperParams::defaults(Family::NgBoost), 1).unwrap();
        let rho = spearman_rho(&lambda, &m.predict(&xt).unwrap()).unwrap().unwrap();
        assert!(rho >= 0.95, "rho {rho}");
    }

    #[test]
    fn boosting_training_loss_is_monotone() {
        let (x, y, _) = poisson_data(500, 13);
        let m = fit(Family::NgBoost, Task::Regression, &x, &y, &HyperParams::defaults(Family::NgBoost), 1).unwrap();
        assert_eq!(m.train_loss.len(), 501);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        let yc: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v > 2.0))).collect();
        let m = fit(Family::HistGb, Task::Classification, &x, &yc, &small(Family::HistGb), 1).unwrap();
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn all_zero_counts_give_floored_constant() {
        let x = uniform_matrix(30, 2, 6);
        let m = fit(Family::NgBoost, Task::Regression, &x, &[0.0; 30], &small(Family::NgBoost), 1).unwrap();
        assert!(m.trees.is_empty());
        for v in m.predict(&x).unwrap() {
            assert!((v - POISSON_EPS).abs() < 1e-18);
        }
    }

    #[test]
    fn fitting_is_deterministic_and_round_trips() {
        let (x, y, _) = poisson_data(300, 14);
        let yc: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v > 2.0))).collect();
        for (family, task, target) in [
            (Family::ExtraTrees, Task::Regression, &y),
            (Family::ExtraTrees, Task::Classification, &yc),
            (Family::HistGb, Task::Regression, &y),
            (Family::HistGb, Task::Classification, &yc),
            (Family::NgBoost, Task::Regression, &y),
        ] {
            let a = fit(family, task, &x, target, &small(family), 99).unwrap();
            let b = fit(family, task, &x, target, &small(family), 99).unwrap();
            assert_eq!(a.to_json(), b.to_json());
            if family == Family::ExtraTrees {
                assert!(a.trees.iter().all(|t| t.is_well_formed(a.params.min_samples_leaf)));
            }
            let mut buf = Vec::new();
            a.write(&mut buf).unwrap();
            let back = EnsembleModel::read(buf.as_slice()).unwrap();
            assert_eq!(back.predict(&x).unwrap(), a.predict(&x).unwrap());
        }
    }

    #[test]
    fn registry_mismatch_is_a_schema_error() {
        let x = uniform_matrix(40, 2, 7);
        let y = x.column(0).to_vec();
        let m = fit(Family::ExtraTrees, Task::Regression, &x, &y, &small(Family::ExtraTrees), 1).unwrap();
        let other = uniform_matrix(40, 3, 7);
        assert!(matches!(m.predict(&other), Err(crate::Error::Schema(_))));
        let empty = x.select_rows(&[]);
        assert!(m.predict(&empty).unwrap().is_empty());
    }

    #[test]
    fn probabilities_sum_to_one_and_labels_are_argmax() {
        let x = uniform_matrix(200, 3, 8);
        let y: Vec<f64> = x.column(1).iter().map(|&v| f64::from(u8::from(v > 0.8))).collect();
        for family in [Family::ExtraTrees, Family::HistGb] {
            let m = fit(family, Task::Classification, &x, &y, &small(family), 3).unwrap();
            let proba = m.predict_proba(&x).unwrap();
            let labels = m.predict_label(&x).unwrap();
            for (p, l) in proba.iter().zip(&labels) {
                assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
                assert_eq!(*l, u8::from(p[1] >= p[0]));
            }
        }
    }

    #[test]
    fn class_weights_match_duplicated_minority() {
        // 12 negatives, 3 positives; weights n/(2 n_c) give a 4:1 ratio, the
        // same as repeating every positive row four times
        let xs: Vec<f64> = (0..15).map(|i| f64::from(i as u8)).collect();
        let y: Vec<f64> = (0..15).map(|i| f64::from(u8::from(i % 5 == 4))).collect();
        let mut xd = xs.clone();
        let mut yd = y.clone();
        for i in 0..15 {
            if y[i] == 1.0 {
                for _ in 0..3 {
                    xd.push(xs[i]);
                    yd.push(1.0);
                }
            }
        }
        let p = HyperParams {
            n_estimators: 1,
            min_samples_leaf: 1,
            max_depth: Some(1),
            ..HyperParams::defaults(Family::ExtraTrees)
        };
        let weighted = fit(Family::ExtraTrees, Task::Classification, &FeatureMatrix::from_columns(vec![xs]).unwrap(), &y, &p, 5)
            .unwrap();
        let plain = HyperParams {
            class_weight: false,
            ..p
        };
        let xd = FeatureMatrix::from_columns(vec![xd]).unwrap();
        let dup = fit(Family::ExtraTrees, Task::Classification, &xd, &yd, &plain, 5).unwrap();
        assert_eq!(weighted.trees[0].split(0), dup.trees[0].split(0));
        let probe = FeatureMatrix::from_columns(vec![(0..15).map(|i| f64::from(i as u8)).collect()]).unwrap();
        for (a, b) in weighted.predict(&probe).unwrap().iter().zip(dup.predict(&probe).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn change_probability_is_one_minus_exp() {
        let (x, y, _) = poisson_data(200, 15);
        let m = fit(Family::NgBoost, Task::Regression, &x, &y, &small(Family::NgBoost), 1).unwrap();
        let mu = m.predict(&x).unwrap();
        for (p, mu) in m.change_probability(&x).unwrap().iter().zip(mu) {
            assert!((p - (1.0 - (-mu).exp())).abs() < 1e-15);
        }
        assert!(m.predict_proba(&x).is_err());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let x = uniform_matrix(3, 1, 9);
        let p = HyperParams::defaults(Family::ExtraTrees);
        assert!(fit(Family::ExtraTrees, Task::Regression, &x, &[1.0, 2.0, 3.0], &p, 1).is_err());
        assert!(fit(Family::ExtraTrees, Task::Classification, &x, &[0.0, 2.0, 1.0], &p, 1).is_err());
        assert!(fit(Family::NgBoost, Task::Regression, &x, &[0.5, 1.0, 1.0], &small(Family::NgBoost), 1).is_err());
        assert!(fit(Family::NgBoost, Task::Classification, &x, &[0.0, 1.0, 1.0], &small(Family::NgBoost), 1).is_err());
    }

    #[test]
    fn single_point_grid_skips_scoring() {
        let x = uniform_matrix(50, 2, 10);
        let y = x.column(0).to_vec();
        let base = small(Family::HistGb);
        let r = tune(Family::HistGb, Task::Regression, &Grid::single(&base), &base, &x, &y, &x, &y, 1).unwrap();
        assert_eq!(r.best, base);
        assert_eq!(r.scores.len(), 1);
    }

    #[test]
    fn standard_grid_contains_reported_points() {
        let hgb = Grid::standard(Family::HistGb).points(&HyperParams::defaults(Family::HistGb));
        assert!(hgb.iter().any(|p| p.learning_rate == 0.04 && p.n_estimators == 500 && p.min_samples_leaf == 25));
        let et = Grid::standard(Family::ExtraTrees).points(&HyperParams::defaults(Family::ExtraTrees));
        assert!(et.iter().any(|p| p.n_estimators == 200 && p.min_samples_leaf == 10));
    }

    #[test]
    fn tuning_prefers_larger_leaves_on_noisy_imbalanced_data() {
        // a noisy rare class: tiny leaves memorize noise that larger leaves average out
        let mut r = rng(21);
        let make = |r: &mut rand_chacha::ChaCha8Rng, n: usize| {
            let x: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect();
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let p = if x[0][i] > 0.85 { 0.6 } else { 0.04 };
                    f64::from(u8::from(r.random::<f64>() < p))
                })
                .collect();
            (FeatureMatrix::from_columns(x).unwrap(), y)
        };
        let (xt, yt) = make(&mut r, 600);
        let (xd, yd) = make(&mut r, 600);
        let grid = Grid {
            n_estimators: vec![50],
            learning_rate: vec![1.0],
            min_samples_leaf: vec![2, 10],
        };
        let base = HyperParams::defaults(Family::ExtraTrees);
        let res = tune(Family::ExtraTrees, Task::Classification, &grid, &base, &xt, &yt, &xd, &yd, 3).unwrap();
        assert_eq!(res.scores.len(), 2);
        assert_eq!(res.best.min_samples_leaf, 10, "{:?}", res.scores.iter().map(|s| s.1).collect::<Vec<_>>());
    }

    #[test]
    fn permutation_importance_examples() {
        let x = uniform_matrix(300, 3, 16);
        // y copies column 0; column 2 duplicates column 0
        let y = x.column(0).to_vec();
        let x = x.with_column_replaced(2, y.clone());
        let p = HyperParams {
            max_features: Some(1),
            ..small(Family::ExtraTrees)
        };
        let m = fit(Family::ExtraTrees, Task::Regression, &x, &y, &p, 2).unwrap();
        let imp = permutation_importance(&m, &x, &y, Metric::R2, 3, 4).unwrap();
        // column 1 is never chosen as a split that matters; check the unused case directly below
        assert!(imp[0].importance > 0.05 && imp[2].importance > 0.05, "{imp:?}");
        assert!(imp[1].importance.abs() < imp[0].importance);

        // a column no tree splits on scores exactly zero
        let only0 = HyperParams {
            max_features: Some(1),
            ..small(Family::HistGb)
        };
        let xs = uniform_matrix(300, 2, 17);
        let xs = xs.with_column_replaced(1, vec![1.0; 300]);
        let ys = xs.column(0).to_vec();
        let m = fit(Family::HistGb, Task::Regression, &xs, &ys, &only0, 2).unwrap();
        assert!(m.trees.iter().all(|t| !t.uses_feature(1)));
        let imp = permutation_importance(&m, &xs, &ys, Metric::R2, 2, 4).unwrap();
        assert_eq!(imp[1].importance, 0.0);
        assert!(imp[0].importance > 0.5);
        assert_eq!(ranked(imp)[0].feature, "x0");
    }
}
