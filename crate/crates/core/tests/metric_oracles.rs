mod common;

use common::{brute_force_ari, set_partitions};
use mscca_core::metrics::{gf_against_truth, truth_assignment};
use mscca_core::solver::fit_fixed_assignment;
use mscca_core::{
    adjusted_rand_index, goodness_of_fit, kl_select, stacked_indicators, CategoricalDataset, Error,
    KlCurve, MsccaSolution, SupplementaryData,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ari_matches_pair_counting_on_all_small_partitions() {
    for n in 2..=6 {
        let parts = set_partitions(n, 3);
        for a in &parts {
            for b in &parts {
                let fast = adjusted_rand_index(a, b).unwrap();
                let slow = brute_force_ari(a, b);
                assert!((fast - slow).abs() < 1e-12, "{a:?} {b:?}: {fast} vs {slow}");
                assert!(fast <= 1.0 + 1e-12);
                assert!((fast - adjusted_rand_index(b, a).unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ari_ignores_label_values() {
    let a = [0, 0, 1, 1, 2, 2, 2];
    let b = ["x", "y", "y", "y", "z", "z", "x"];
    let relabeled_a = [7, 7, 3, 3, 9, 9, 9];
    let relabeled_b = ['q', 'r', 'r', 'r', 's', 's', 'q'];
    let v = adjusted_rand_index(&a, &b).unwrap();
    assert_eq!(v, adjusted_rand_index(&relabeled_a, &relabeled_b).unwrap());
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

fn rotation(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

#[test]
fn gf_properties_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let rows = rng.random_range(2..8);
        let y = random_matrix(&mut rng, rows, 2);
        let h = random_matrix(&mut rng, rows, 2);
        let gf = goodness_of_fit(&y, &h).unwrap();
        assert!((0.0..=1.0).contains(&gf));
        assert!((gf - goodness_of_fit(&h, &y).unwrap()).abs() < 1e-14);
        let scale = rng.random_range(0.1..10.0);
        assert!((gf - goodness_of_fit(&y, &(&h * scale)).unwrap()).abs() < 1e-12);
        let rot = rotation(rng.random_range(0.0..std::f64::consts::TAU));
        assert!((gf - goodness_of_fit(&(&y * &rot), &(&h * &rot)).unwrap()).abs() < 1e-12);
        // Squared cosine of the flattened matrices.
        let (mut yh, mut yy, mut hh) = (0.0, 0.0, 0.0);
        for (a, b) in y.iter().zip(h.iter()) {
            yh += a * b;
            yy += a * a;
            hh += b * b;
        }
        assert!((gf - yh * yh / (yy * hh)).abs() < 1e-12);
    }
    let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let h = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    assert_eq!(goodness_of_fit(&y, &h).unwrap(), 0.0);
}

#[test]
fn kl_hand_example_and_scale_invariance() {
    let curve = KlCurve {
        k_values: vec![1, 2, 3, 4, 5],
        w_values: vec![100.0, 40.0, 10.0, 9.0, 8.0],
        nu: 2.0,
    };
    // DIFF = 20, 50, −6, −4 for K = 2..5, so KL = 0.4, 8.33, 1.5.
    let sel = kl_select(&curve).unwrap();
    assert_eq!(sel.k, 3);
    let values: Vec<f64> = sel.index.iter().map(|(_, v)| *v).collect();
    for (got, want) in values.iter().zip([0.4, 50.0 / 6.0, 1.5]) {
        assert!((got - want).abs() < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let c: f64 = rng.random_range(0.01..100.0);
        let scaled = KlCurve {
            w_values: curve.w_values.iter().map(|w| w * c).collect(),
            ..curve.clone()
        };
        assert_eq!(kl_select(&scaled).unwrap().k, 3);
    }
}

fn three_pattern_data() -> (CategoricalDataset, SupplementaryData, Vec<usize>) {
    // Three noisy response patterns over two variables.
    let truth: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let v1: Vec<usize> = truth
        .iter()
        .enumerate()
        .map(|(i, &t)| if i % 7 == 0 { (t + 1) % 3 } else { t })
        .collect();
    let v2: Vec<usize> = truth
        .iter()
        .enumerate()
        .map(|(i, &t)| if i % 11 == 0 { (t + 2) % 3 } else { t })
        .collect();
    let labels = vec!["a".to_string(), "b".into(), "c".into()];
    let ds = CategoricalDataset::from_codes(
        vec!["x".into(), "y".into()],
        vec![v1, v2],
        vec![labels.clone(), labels],
    )
    .unwrap();
    let sup = SupplementaryData::from_codes(
        vec!["g".into()],
        vec![(0..60).map(|i| i % 2).collect()],
        vec![vec!["m".into(), "f".into()]],
    )
    .unwrap();
    (ds, sup, truth)
}

fn solution_for(
    u: mscca_core::HierarchicalAssignment,
    it: mscca_core::solver::Iterate,
) -> MsccaSolution {
    MsccaSolution {
        assignment: u,
        centers: it.centers,
        quantifications: it.quantifications,
        eigenvalues: it.eigenvalues,
        objective: it.phi,
        psi: 0.0,
        objective_trace: vec![it.phi],
        start_index: 0,
        converged: true,
    }
}

#[test]
fn gf_is_one_for_truth_at_full_rank() {
    let (ds, sup, truth) = three_pattern_data();
    let u = truth_assignment(&sup, &truth).unwrap();
    let view = stacked_indicators(&ds, 1).unwrap();
    // Six clusters in two classes leave rank ≤ 4 = Q − m.
    let it = fit_fixed_assignment(&ds, &u, 4).unwrap();
    let sol = solution_for(u.clone(), it);
    let gf = gf_against_truth(&sol, &u, &view).unwrap();
    assert!((gf - 1.0).abs() < 1e-6, "{gf}");
}

#[test]
fn gf_degenerate_inputs_are_flagged() {
    let (ds, sup, truth) = three_pattern_data();
    let u = truth_assignment(&sup, &truth).unwrap();
    let view = stacked_indicators(&ds, 1).unwrap();
    let it = fit_fixed_assignment(&ds, &u, 2).unwrap();
    let mut sol = solution_for(u.clone(), it);
    sol.quantifications = DMatrix::zeros(6, 2);
    sol.centers = DMatrix::zeros(u.n_clusters(), 2);
    assert!(matches!(
        gf_against_truth(&sol, &u, &view),
        Err(Error::DegenerateGeometry(_))
    ));

    // Each cluster repeats the overall category profile: P̃ = 0.
    let codes: Vec<usize> = (0..12).map(|i| i % 2).collect();
    let flat = CategoricalDataset::from_codes(
        vec!["x".into()],
        vec![codes.clone()],
        vec![vec!["a".into(), "b".into()]],
    )
    .unwrap();
    let one = SupplementaryData::single_class(12);
    let independent_truth: Vec<usize> = (0..12).map(|i| (i / 2) % 2).collect();
    let u = truth_assignment(&one, &independent_truth).unwrap();
    let view = stacked_indicators(&flat, 1).unwrap();
    let sol = MsccaSolution {
        assignment: u.clone(),
        centers: DMatrix::from_element(2, 1, 0.5),
        quantifications: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        eigenvalues: DVector::zeros(1),
        objective: 0.0,
        psi: 0.0,
        objective_trace: vec![],
        start_index: 0,
        converged: true,
    };
    assert!(matches!(
        gf_against_truth(&sol, &u, &view),
        Err(Error::DegenerateGeometry(_))
    ));
}
