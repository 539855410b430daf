mod common;

use common::{jacobi_eigen, random_instance, residual_oracle, singular_values};
use mscca_core::biplot::{category_labels, residual_comparison, solution_biplot, BiplotModel};
use mscca_core::metrics::class_ari;
use mscca_core::simulation::{
    generate_clustered, generate_illustration, generate_illustration_with, generate_supplementary,
    median, run_study, summarize, Balance, GenSpec, IllustrationSpec, StudyDesign, SupGenSpec,
    ILLUSTRATION_PATTERNS,
};
use mscca_core::{
    adjusted_rand_index, fit_cluster_ca, fit_constrained_mca, fit_mscca, stacked_indicators,
    CategoricalDataset, ClusterSpec, ConstraintSpec, SolverOptions,
};
use nalgebra::DMatrix;

#[test]
fn jacobi_oracle_self_check() {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
    let (values, vectors) = jacobi_eigen(&a);
    for d in 0..3 {
        let v = vectors.column(d);
        assert!((&a * v - v * values[d]).amax() < 1e-12);
    }
    assert!((values.iter().sum::<f64>() - 8.0).abs() < 1e-12);
    let sv = singular_values(&DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0]));
    assert!((sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 2.0).abs() < 1e-12);
}

#[test]
fn identity_constraint_is_mca_of_the_indicator_table() {
    let inst = random_instance(17, 50, 4, 3, &[2], (1, 1));
    let fit = fit_constrained_mca(&inst.data, ConstraintSpec::Identity, 3).unwrap();
    // CA of Z read as a contingency table: principal inertias are the
    // squared singular values of its standardized residuals.
    let view = stacked_indicators(&inst.data, 1).unwrap();
    let sv = singular_values(&residual_oracle(&view.z()));
    for d in 0..3 {
        assert!((fit.eigenvalues[d] - sv[d] * sv[d]).abs() < 1e-10);
    }
    let inertia: f64 = fit.eigenvalues.iter().sum();
    assert!((fit.objective - (3.0 - inertia)).abs() < 1e-10);
}

#[test]
fn averaging_cannot_beat_unconstrained_mca() {
    let inst = random_instance(23, 60, 4, 3, &[3], (1, 1));
    let mca = fit_constrained_mca(&inst.data, ConstraintSpec::Identity, 2).unwrap();
    let ave = fit_constrained_mca(&inst.data, ConstraintSpec::Averaging(&inst.sup), 2).unwrap();
    let rem = fit_constrained_mca(&inst.data, ConstraintSpec::Removal(&inst.sup), 2).unwrap();
    assert!(ave.objective >= mca.objective - 1e-12);
    assert!(rem.objective >= mca.objective - 1e-12);
}

#[test]
fn noise_free_patterns_give_zero_cluster_ca_objective() {
    // Each variable separates all three patterns, so every Z_j B_j can
    // coincide with the cluster centers.
    let patterns = [[0, 0, 1], [1, 2, 0], [2, 1, 2]];
    let columns: Vec<Vec<usize>> = (0..3)
        .map(|j| (0..30).map(|i| patterns[i % 3][j]).collect())
        .collect();
    let labels = vec![
        vec!["a".into(), "b".into(), "c".into()],
        vec!["a".into(), "b".into(), "c".into()],
        vec!["a".into(), "b".into(), "c".into()],
    ];
    let ds =
        CategoricalDataset::from_codes(vec!["x".into(), "y".into(), "z".into()], columns, labels)
            .unwrap();
    let opts = SolverOptions {
        n_starts: 10,
        ..Default::default()
    };
    let sol = fit_cluster_ca(&ds, 3, &opts).unwrap();
    assert!(sol.objective.abs() < 1e-10, "{}", sol.objective);
}

#[test]
fn separable_data_is_recovered_exactly() {
    let gen = generate_clustered(&GenSpec {
        high_prob: 1.0,
        active_fraction: 1.0,
        q: 5,
        k: 3,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let sup = generate_supplementary(
        &SupGenSpec {
            classes: vec![3],
            balance: Balance::Balanced,
            seed: 5,
        },
        300,
    )
    .unwrap();
    let opts = SolverOptions {
        n_starts: 20,
        ..Default::default()
    };
    let sol = fit_mscca(&gen.data, &sup, &ClusterSpec::uniform(&sup, 3), &opts).unwrap();
    for row in class_ari(&sol.assignment, &sup, &gen.truth).unwrap() {
        for ari in row {
            assert_eq!(ari, 1.0);
        }
    }
}

#[test]
fn signal_category_frequencies_track_high_prob() {
    let spec = GenSpec {
        q: 5,
        k: 2,
        seed: 8,
        ..Default::default()
    };
    let gen = generate_clustered(&spec).unwrap();
    // Codes are compacted, so compare through labels ("c<category+1>").
    let mut hits = 0usize;
    let mut total = 0usize;
    for j in 0..spec.n_active() {
        for (i, &k) in gen.truth.iter().enumerate() {
            let label = &gen.data.labels(j)[gen.data.code(i, j)];
            total += 1;
            if *label == format!("c{}", gen.profiles.signal[j][k] + 1) {
                hits += 1;
            }
        }
    }
    let share = hits as f64 / total as f64;
    assert!((share - 0.8).abs() < 0.05, "{share}");
}

#[test]
fn balanced_classes_split_evenly() {
    let sup = generate_supplementary(
        &SupGenSpec {
            classes: vec![2],
            balance: Balance::Balanced,
            seed: 2,
        },
        300,
    )
    .unwrap();
    let sizes = sup.class_sizes(0);
    assert!((sizes[0] as f64 / 300.0 - 0.5).abs() < 0.05);
}

#[test]
fn classes_carry_no_cluster_information() {
    let values: Vec<f64> = (0..200)
        .map(|rep| {
            let gen = generate_clustered(&GenSpec {
                k: 3,
                seed: 1000 + rep,
                ..Default::default()
            })
            .unwrap();
            let sup = generate_supplementary(
                &SupGenSpec {
                    classes: vec![3],
                    balance: Balance::Balanced,
                    seed: 5000 + rep,
                },
                300,
            )
            .unwrap();
            adjusted_rand_index(sup.column(0), &gen.truth).unwrap()
        })
        .collect();
    assert!(median(&values).abs() < 0.05);
}

#[test]
fn illustration_structure() {
    let ill = generate_illustration().unwrap();
    assert_eq!(ill.data.n_obs(), 200);
    assert_eq!(ill.data.names(), ["Meal", "Drink"]);
    assert_eq!(ill.data.labels(0), ["Western", "Asian"]);
    assert_eq!(ill.data.labels(1), ["Fruit juice", "Tea", "Alcohol"]);
    assert_eq!(ill.sup.names(), ["Nationality", "Gender"]);
    assert_eq!(ill.sup.labels(0), ["American", "Japanese"]);
    assert_eq!(ill.sup.labels(1), ["Male", "Female"]);
    assert_eq!(ill.truth.spec().counts(), &[vec![2, 2], vec![3, 2]]);
    // Western meal and fruit juice dominate the first cluster.
    let members: Vec<usize> = (0..200).filter(|&i| ill.global[i] == 0).collect();
    let western = members
        .iter()
        .filter(|&&i| ill.data.code(i, 0) == 0)
        .count() as f64;
    let juice = members
        .iter()
        .filter(|&&i| ill.data.code(i, 1) == 0)
        .count() as f64;
    let n = members.len() as f64;
    assert!(western / n > 0.85 && juice / n > 0.85);
}

#[test]
fn illustration_rows_match_their_pattern_at_high_prob() {
    let (mut exact, mut total) = (0usize, 0usize);
    for seed in 0..20 {
        let ill = generate_illustration_with(&IllustrationSpec {
            seed,
            ..Default::default()
        })
        .unwrap();
        for i in 0..ill.data.n_obs() {
            let (m, d) = ILLUSTRATION_PATTERNS[ill.global[i]];
            exact += usize::from(ill.data.code(i, 0) == m && ill.data.code(i, 1) == d);
            total += 1;
        }
    }
    // 4000 rows: the binomial standard error is about 0.005.
    assert!((exact as f64 / total as f64 - 0.9).abs() < 0.02);
}

fn illustration_fit() -> (
    mscca_core::simulation::Illustration,
    mscca_core::MsccaSolution,
) {
    let ill = generate_illustration().unwrap();
    let spec = ClusterSpec::new(vec![vec![2, 2], vec![3, 2]]);
    let sol = fit_mscca(&ill.data, &ill.sup, &spec, &SolverOptions::default()).unwrap();
    (ill, sol)
}

#[test]
fn illustration_biplot_and_residuals() {
    let (ill, sol) = illustration_fit();
    let view = stacked_indicators(&ill.data, 2).unwrap();
    let model = solution_biplot(&sol, &view, &ill.sup).unwrap();
    let alcohol = category_labels(&ill.data)
        .iter()
        .position(|l| l == "Drink:Alcohol")
        .unwrap();
    // Male rows: variable 1, class 0.
    let male_rows: Vec<usize> = model
        .row_keys
        .iter()
        .enumerate()
        .filter(|(_, k)| k.h == 1 && k.s == 0)
        .map(|(r, _)| r)
        .collect();
    let res = model.residuals.as_ref().unwrap();
    let ip = model.inner_products().unwrap();
    let by_residual = *male_rows
        .iter()
        .max_by(|&&a, &&b| res[(a, alcohol)].total_cmp(&res[(b, alcohol)]))
        .unwrap();
    let by_product = *male_rows
        .iter()
        .max_by(|&&a, &&b| ip[(a, alcohol)].total_cmp(&ip[(b, alcohol)]))
        .unwrap();
    assert_eq!(by_residual, by_product);

    let cmp = residual_comparison(&ill.data, &ill.sup, &sol).unwrap();
    let ave = cmp.averaging.residuals.as_ref().unwrap();
    let clu = cmp.mscca.residuals.as_ref().unwrap();
    assert!(clu.amax() >= ave.amax());
    for (class_row, mass) in cmp.averaging.row_masses.iter().enumerate() {
        let sum: f64 = cmp
            .class_row_of
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class_row)
            .map(|(r, _)| cmp.mscca.row_masses[r])
            .sum();
        assert!((sum - mass).abs() < 1e-12);
    }
}

#[test]
fn one_cluster_per_class_gives_identical_residual_tables() {
    let inst = random_instance(31, 40, 3, 3, &[2, 3], (1, 1));
    let opts = SolverOptions {
        n_starts: 1,
        ..Default::default()
    };
    let sol = fit_mscca(&inst.data, &inst.sup, &inst.spec, &opts).unwrap();
    let cmp = residual_comparison(&inst.data, &inst.sup, &sol).unwrap();
    assert_eq!(cmp.averaging.residuals, cmp.mscca.residuals);
    let view = stacked_indicators(&inst.data, 2).unwrap();
    let counts = sol.assignment.stacked_indicator().transpose() * view.z_stacked();
    let oracle = residual_oracle(&counts);
    assert!((cmp.mscca.residuals.as_ref().unwrap() - oracle).amax() < 1e-12);
}

#[test]
fn swapping_table_rows_swaps_residual_rows() {
    let t = DMatrix::from_row_slice(3, 2, &[5.0, 1.0, 2.0, 2.0, 1.0, 4.0]);
    let mut swapped = t.clone();
    swapped.swap_rows(0, 2);
    let labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    let a = BiplotModel::from_table(t, labels(3), labels(2))
        .unwrap()
        .standardized_residuals()
        .unwrap();
    let b = BiplotModel::from_table(swapped, labels(3), labels(2))
        .unwrap()
        .standardized_residuals()
        .unwrap();
    let (ra, rb) = (a.residuals.unwrap(), b.residuals.unwrap());
    assert_eq!(ra.row(0), rb.row(2));
    assert_eq!(ra.row(1), rb.row(1));
    // Weighted residuals sum to zero along both margins.
    let w = DMatrix::from_fn(3, 2, |i, j| {
        ra[(i, j)] * (a.row_masses[i] * a.col_masses[j]).sqrt()
    });
    for i in 0..3 {
        assert!(w.row(i).sum().abs() < 1e-12);
    }
    for j in 0..2 {
        assert!(w.column(j).sum().abs() < 1e-12);
    }
}

#[test]
fn study_smoke_run() {
    let design = StudyDesign {
        q: vec![5],
        k: vec![2],
        h: vec![3],
        r: vec![3],
        balance: vec![Balance::Balanced],
        replicates: 2,
        starts: 3,
        seed: 77,
        ..StudyDesign::full_grid()
    };
    let records = run_study(&design).unwrap();
    assert_eq!(records.len(), 2 * 9);
    assert!(records.iter().all(|r| r.error.is_none()));
    let again = run_study(&design).unwrap();
    assert_eq!(summarize(&records), summarize(&again));
    assert_eq!(summarize(&records)[0].cell.label(), "q5_K2_H3_b3");
}
