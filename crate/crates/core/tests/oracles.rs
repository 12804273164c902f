use drmtest_core::math::{chi2_cdf, chi2_quantile, normal_cdf};
use drmtest_core::measure::PartitionRule;
use drmtest_core::partition::{cell_probabilities, mc_oracle_cell_probs};
use drmtest_core::{decompose, nass, pearson, Mode, RiskMeasure};

#[test]
fn avar_cells_closed_form() {
    // G is uniform on [0, α] and s = P(M > L) is uniform, so the k-th
    // highest stratum is breached with probability equal to its midpoint
    for m in [1usize, 2, 4, 8] {
        let alpha = 0.025;
        let measure = RiskMeasure::Avar { alpha };
        let g = measure.distortion().unwrap();
        let part = measure.partition(m, PartitionRule::Equidistant).unwrap();
        let cells = cell_probabilities(&g, &part, Mode::Left).unwrap();
        let h = alpha / (m + 1) as f64;
        let mean = |j: usize| (j as f64 - 0.5) * h;
        let mut exceed = vec![0.0; m + 3];
        exceed[0] = 1.0;
        for k in 1..=m + 1 {
            exceed[k] = mean(m + 2 - k);
        }
        for k in 0..=m + 1 {
            let expected = exceed[k] - exceed[k + 1];
            assert!((cells.p[k] - expected).abs() < 1e-15, "m = {m}, cell {k}");
        }
    }
}

#[test]
fn gluevar_cells_against_simulation() {
    let measure = RiskMeasure::STUDY_GLUEVAR;
    let g = measure.distortion().unwrap();
    for m in [1usize, 4] {
        let part = measure.partition(m, PartitionRule::Equidistant).unwrap();
        let exact = cell_probabilities(&g, &part, Mode::Left).unwrap();
        let mc = mc_oracle_cell_probs(&g, &part, Mode::Left, 200_000, 5).unwrap();
        for (k, (p, q)) in exact.p.iter().zip(&mc.p).enumerate() {
            let se = (p * (1.0 - p) / 200_000.0).sqrt();
            assert!((p - q).abs() < 4.5 * se, "m = {m}, cell {k}: {p} vs {q}");
        }
    }
}

#[test]
fn mixed_measure_weights() {
    let d = decompose(&RiskMeasure::STUDY_MIXED.distortion().unwrap());
    assert!((d.c_r - 1.0 / 3.0).abs() < 1e-12);
    assert!((d.c_l - 1.0 / 5.0).abs() < 1e-12);
    assert!((d.c_c - 7.0 / 15.0).abs() < 1e-12);
}

#[test]
fn chi_square_low_dof_identities() {
    for x in [0.1, 1.0, 3.841458820694124, 10.0] {
        assert!((chi2_cdf(x, 2.0) - (1.0 - (-x / 2.0).exp())).abs() < 1e-12);
        assert!((chi2_cdf(x, 1.0) - (2.0 * normal_cdf(x.sqrt()) - 1.0)).abs() < 1e-12);
    }
    assert!((chi2_quantile(0.95, 1.0) - 3.841458820694124).abs() < 1e-9);
    assert!((chi2_quantile(0.95, 2.0) - 2.0 * 20f64.ln()).abs() < 1e-9);
}

#[test]
fn textbook_statistics() {
    // two equiprobable cells, 60/40 split of 100: S = 4, p = 0.0455
    let r = pearson(&[60, 40], &[0.5, 0.5], 100, 0.05).unwrap();
    assert!((r.statistic - 4.0).abs() < 1e-12);
    assert!((r.p_value - 0.04550026389635842).abs() < 1e-9);
    assert!(r.reject);
    let n = nass(&[60, 40], &[0.5, 0.5], 100, 0.05).unwrap();
    // Var S = 2 - 6/100 + 4/100, so c = ν = 2/1.98
    assert!((n.dof - 2.0 / 1.98).abs() < 1e-12);
    assert!((n.statistic - 4.0 * 2.0 / 1.98).abs() < 1e-12);
}
