use mallows_core::oracle::{lex_unrank, ORACLE_MAX_N};
use mallows_core::{
    exact_expectation, exact_probability, exact_tail_distribution_d, partition_function,
    ExactModel, MallowsError, ModelParams, Permutation,
};

/// Partition function by naive recursion over the image of each position.
fn naive_z(n: usize, beta: f64) -> f64 {
    fn go(pos: usize, n: usize, used: &mut Vec<bool>, h: usize, beta: f64) -> f64 {
        if pos > n {
            return (-beta * h as f64).exp();
        }
        let mut total = 0.0;
        for v in 1..=n {
            if !used[v] {
                used[v] = true;
                total += go(pos + 1, n, used, h + pos.abs_diff(v), beta);
                used[v] = false;
            }
        }
        total
    }
    go(1, n, &mut vec![false; n + 1], 0, beta)
}

fn params(n: usize, beta: f64) -> ModelParams {
    ModelParams::new(n, beta).unwrap()
}

#[test]
fn partition_function_matches_naive_recursion() {
    for n in 1..=7 {
        for beta in [0.05, 0.7, 2.0] {
            let z = partition_function(&params(n, beta)).unwrap();
            let naive = naive_z(n, beta);
            assert!((z - naive).abs() <= 1e-12 * naive, "n={n} beta={beta}");
        }
    }
}

#[test]
fn mean_distance_is_minus_log_z_derivative() {
    // E[H] = −d/dβ log Z
    let (n, beta, eps) = (6, 0.8, 1e-5);
    let mean = exact_expectation(&params(n, beta), |s| s.l1_to_identity() as f64).unwrap();
    let up = partition_function(&params(n, beta + eps)).unwrap().ln();
    let down = partition_function(&params(n, beta - eps)).unwrap().ln();
    assert!((mean + (up - down) / (2.0 * eps)).abs() < 1e-6);
}

#[test]
fn table_and_probability_agree() {
    let p = params(5, 0.6);
    let model = ExactModel::new(p).unwrap();
    let table = model.table().unwrap();
    assert_eq!(table.len(), 120);
    for (r, &mass) in table.iter().enumerate() {
        let sigma = lex_unrank(5, r);
        assert!((mass - exact_probability(&sigma, &p).unwrap()).abs() < 1e-15);
        assert!((mass - model.probability(&sigma).unwrap()).abs() < 1e-15);
    }
    assert!((exact_expectation(&p, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn large_beta_concentrates_on_identity() {
    let p = params(7, 20.0);
    let id = exact_probability(&Permutation::identity(7), &p).unwrap();
    assert!(id > 1.0 - 1e-12);
}

#[test]
fn tails_are_monotone_and_bounded() {
    for beta in [0.1, 1.0, 3.0] {
        let p = params(7, beta);
        for j in 1..=7 {
            let tail = exact_tail_distribution_d(&p, j).unwrap();
            assert_eq!(tail.len(), 9);
            assert_eq!(tail[0], 1.0);
            assert_eq!(tail[8], 0.0);
            assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-15));
            // |D_j| ≤ min(j, n − j)
            assert!(tail[j.min(7 - j) + 1].abs() < 1e-15);
        }
    }
}

#[test]
fn tail_matches_direct_expectation() {
    let p = params(6, 0.4);
    let tail = exact_tail_distribution_d(&p, 3).unwrap();
    for (r, &t) in tail.iter().enumerate().take(4) {
        let direct = exact_expectation(&p, |s| {
            f64::from(u8::from(s.displacement_count(3).unwrap().0 >= r))
        })
        .unwrap();
        assert!((t - direct).abs() < 1e-12, "r={r}");
    }
}

#[test]
fn enumeration_limit_is_enforced() {
    let p = params(ORACLE_MAX_N + 1, 1.0);
    assert!(matches!(
        partition_function(&p),
        Err(MallowsError::OracleLimit { .. })
    ));
    assert!(exact_tail_distribution_d(&params(4, 1.0), 0).is_err());
    assert!(exact_probability(&Permutation::identity(3), &params(4, 1.0)).is_err());
}
