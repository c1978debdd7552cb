//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion (run with `--nocapture` to see them).
//!
//! The heavy criteria (the covariance tables and the deviation-curve grid) execute the
//! shipped configuration files end to end through the harness; the identity
//! and property criteria drive the library directly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use specnoise::csv::CsvTable;
use specnoise::{execute, ExperimentConfig, Overrides};
use specnoise_core::*;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        name,
        passed,
        detail,
    }
}

fn two_block(n: usize) -> SbmSpec {
    SbmSpec::new(
        DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.3]),
        DVector::from_vec(vec![0.4, 0.6]),
        n,
        1.0,
    )
    .unwrap()
}

fn three_block(n: usize) -> SbmSpec {
    let b = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.5 } else { 0.3 });
    SbmSpec::new(b, DVector::from_element(3, 1.0 / 3.0), n, 1.0).unwrap()
}

fn shipped_config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("missing config {name}: {e}"));
    ExperimentConfig::from_json(&bytes).unwrap()
}

fn run_config(name: &str, threads: usize, dir: &Path) -> specnoise::RunSummary {
    execute(
        shipped_config(name),
        &Overrides {
            out_dir: Some(dir.to_path_buf()),
            seed: None,
            threads: Some(threads),
        },
    )
    .unwrap_or_else(|e| panic!("{name} failed: {e}"))
}

fn gaussian_frame(rng: &mut rand_chacha::ChaCha8Rng, n: usize, r: usize) -> DMatrix<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q()
}

/// Criterion 1: both reconstruction identities hold with max-entry defect
/// at most 1e-9 on 50 generated instances across models and sizes.
fn criterion_1() -> Outcome {
    struct Case {
        instance: ModelInstance,
        rank: usize,
    }
    let mut cases = Vec::new();
    for (i, &n) in [50usize, 200, 500].iter().enumerate() {
        for seed in 0..4u64 {
            let s = 1000 * (i as u64 + 1) + seed;
            let pop = sbm_population(&two_block(n)).unwrap();
            cases.push(Case {
                instance: sbm_sample(&pop.matrix, 1.0, false, s).unwrap(),
                rank: 2,
            });
            let pop = sbm_population(&three_block(n / 3 * 3 + 3)).unwrap();
            cases.push(Case {
                instance: sbm_sample(&pop.matrix, 1.0, false, s).unwrap(),
                rank: 3,
            });
            let spike = spike_1d(
                n,
                n as f64,
                NoiseKind::Laplace {
                    scale: std::f64::consts::FRAC_1_SQRT_2,
                },
            );
            cases.push(Case {
                instance: spike_model(&spike, s).unwrap(),
                rank: 1,
            });
            let spike = spike_2d_signs(n, n as f64, NoiseKind::Uniform { half_width: 1.0 });
            cases.push(Case {
                instance: spike_model(&spike, s).unwrap(),
                rank: 2,
            });
        }
    }
    // two gaussian-noise spikes round the count out to 50
    for seed in [77u64, 78] {
        let spike = spike_2d_signs(200, 400.0, NoiseKind::Gaussian { variance: 1.0 });
        cases.push(Case {
            instance: spike_model(&spike, seed).unwrap(),
            rank: 2,
        });
    }
    assert_eq!(cases.len(), 50);

    let worst = cases
        .par_iter()
        .map(|case| {
            let pair = top_r(&case.instance.signal, case.rank).unwrap();
            let pair_hat = top_r(&case.instance.observed, case.rank).unwrap();
            let w = procrustes_align(pair_hat.frame(), pair.frame())
                .unwrap()
                .rotation;
            let report = decompose(&case.instance, &pair, &pair_hat, &w).unwrap();
            report.first_defect.max(report.second_defect)
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        "1 exact identity suite",
        worst <= 1e-9,
        format!("worst max-entry defect {worst:.3e} over 50 instances (tolerance 1e-9)"),
    )
}

/// Criterion 2: Procrustes minimality against the 2x2 grid oracle and the
/// quadratic closeness bound on every instance.
fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(271828);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_quad = f64::NEG_INFINITY;
    for _ in 0..100 {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let u = gaussian_frame(&mut rng, 14, 2);
        let noise = DMatrix::from_fn(14, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u_hat = (&u + noise * 0.4).qr().q();

        let w = procrustes_align(&u_hat, &u).unwrap().rotation;
        let ours = (&u_hat - &u * &w).norm();
        let mut grid_best = f64::INFINITY;
        for s in 0..6284 {
            let theta = s as f64 * 1e-3;
            let (c, sn) = (theta.cos(), theta.sin());
            let rot = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]);
            let refl = DMatrix::from_row_slice(2, 2, &[c, sn, sn, -c]);
            grid_best = grid_best
                .min((&u_hat - &u * rot).norm())
                .min((&u_hat - &u * refl).norm());
        }
        worst_excess = worst_excess.max(ours - grid_best);

        let angles = canonical_angles(&u_hat, &u).unwrap();
        let gap = matrix_norms(&(u.transpose() * &u_hat - &w)).spectral;
        worst_quad = worst_quad.max(gap - angles.sin_theta_spectral().powi(2));
    }
    let passed = worst_excess <= 1e-9 && worst_quad <= 1e-9;
    outcome(
        "2 procrustes optimality",
        passed,
        format!(
            "worst excess over grid oracle {worst_excess:.3e}, worst quadratic-bound slack {worst_quad:.3e}"
        ),
    )
}

type Square2 = [[f64; 2]; 2];

struct CovarianceTable {
    /// Per block: pooled count, empirical covariance, theoretical covariance.
    blocks: Vec<(usize, Square2, Square2)>,
}

fn read_covariance(dir: &Path, file: &str) -> CovarianceTable {
    let text = std::fs::read_to_string(dir.join(file)).unwrap();
    let table = CsvTable::parse(&text).unwrap();
    let col = |name: &str| table.column_index(name).unwrap();
    let mut blocks = Vec::new();
    for row in 0..table.rows.len() {
        let count: usize = table.rows[row][col("count")].parse().unwrap();
        let get = |name: &str| table.float_at(row, col(name)).unwrap();
        blocks.push((
            count,
            [
                [get("emp_11"), get("emp_12")],
                [get("emp_21"), get("emp_22")],
            ],
            [
                [get("theo_11"), get("theo_12")],
                [get("theo_21"), get("theo_22")],
            ],
        ));
    }
    CovarianceTable { blocks }
}

fn relative_gap(measured: Square2, target: Square2) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((measured[i][j] - target[i][j]).abs() / target[i][j].abs());
        }
    }
    worst
}

/// Criterion 3: empirical block covariances at n = 1000 and n = 2000 within
/// 15% of the tabulated values; theoretical covariances within 0.5% of the
/// tabulated limits.
fn criterion_3() -> Outcome {
    const LIMIT_1: Square2 = [[15.14, -38.05], [-38.05, 112.34]];
    const LIMIT_2: Square2 = [[13.12, -33.93], [-33.93, 103.94]];
    const EMP_1000: [Square2; 2] = [
        [[14.11, -36.08], [-36.08, 110.13]],
        [[11.76, -30.09], [-30.09, 93.07]],
    ];
    const EMP_2000: [Square2; 2] = [
        [[14.94, -36.85], [-36.85, 108.55]],
        [[12.91, -33.04], [-33.04, 101.64]],
    ];

    let mut worst_emp = 0.0f64;
    let mut worst_theo = 0.0f64;
    let mut min_count = usize::MAX;
    for (config, file, targets) in [
        (
            "covariance_table_n1000.json",
            "second_order_covariance_n1000.csv",
            EMP_1000,
        ),
        (
            "covariance_table_n2000.json",
            "second_order_covariance_n2000.csv",
            EMP_2000,
        ),
    ] {
        let dir = tempfile::tempdir().unwrap();
        run_config(config, 2, dir.path());
        let table = read_covariance(dir.path(), file);
        assert_eq!(table.blocks.len(), 2);
        for (block, (count, emp, theo)) in table.blocks.iter().enumerate() {
            min_count = min_count.min(*count);
            worst_emp = worst_emp.max(relative_gap(*emp, targets[block]));
            let limit = if block == 0 { LIMIT_1 } else { LIMIT_2 };
            worst_theo = worst_theo.max(relative_gap(*theo, limit));
        }
    }
    let passed = worst_emp <= 0.15 && worst_theo <= 0.005 && min_count >= 100_000;
    outcome(
        "3 covariance table reproduction",
        passed,
        format!(
            "worst empirical gap {:.1}% (tolerance 15%), worst theoretical gap {:.2}% (tolerance 0.5%), min pooled count {}",
            100.0 * worst_emp,
            100.0 * worst_theo,
            min_count
        ),
    )
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let num: f64 = points
        .iter()
        .map(|p| (p.0.ln() - mx) * (p.1.ln() - my))
        .sum();
    let den: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    num / den
}

/// Criterion 4: deviation-curve trend over the grid (300, ..., 2400) with
/// 100 replicates per point. Asserts the strict decrease, the factor-3
/// phi-tracking band, the two-to-infinity log-log slope against the
/// pilot-derived regression band, and the spectral-norm slope against the
/// square-root-rate band.
fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run_config("deviation_curve.json", 2, dir.path());

    let aggregate =
        std::fs::read_to_string(dir.path().join("first_order_aggregate.csv")).unwrap();
    let table = CsvTable::parse(&aggregate).unwrap();
    let n_col = table.column_index("n").unwrap();
    let mean_col = table.column_index("mean").unwrap();
    let phi_col = table.column_index("phi").unwrap();
    let mut curve = Vec::new();
    for row in 0..table.rows.len() {
        let n: f64 = table.rows[row][n_col].parse().unwrap();
        curve.push((
            n,
            table.float_at(row, mean_col).unwrap(),
            table.float_at(row, phi_col).unwrap(),
        ));
    }
    assert_eq!(curve.len(), 4);

    let decreasing = curve.windows(2).all(|w| w[1].1 < w[0].1);
    let ratios: Vec<f64> = curve.iter().map(|(_, mean, phi)| mean / phi).collect();
    let band = ratios.iter().cloned().fold(0.0f64, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let slope_t2i = least_squares_slope(
        &curve.iter().map(|(n, mean, _)| (*n, *mean)).collect::<Vec<_>>(),
    );

    // spectral-norm means from the replicate file
    let replicates =
        std::fs::read_to_string(dir.path().join("first_order_replicates.csv")).unwrap();
    let table = CsvTable::parse(&replicates).unwrap();
    let n_col = table.column_index("n").unwrap();
    let spec_col = table.column_index("spectral").unwrap();
    let mut by_n: Vec<(f64, f64, usize)> = Vec::new();
    for row in 0..table.rows.len() {
        let n: f64 = table.rows[row][n_col].parse().unwrap();
        let v = table.float_at(row, spec_col).unwrap();
        match by_n.iter_mut().find(|(existing, _, _)| *existing == n) {
            Some((_, sum, count)) => {
                *sum += v;
                *count += 1;
            }
            None => by_n.push((n, v, 1)),
        }
    }
    let spectral_means: Vec<(f64, f64)> = by_n
        .iter()
        .map(|(n, sum, count)| (*n, sum / *count as f64))
        .collect();
    let slope_spectral = least_squares_slope(&spectral_means);

    // two-to-infinity slope band pinned from pilot runs (the rate is
    // (n rho)^(-1/2) times the n^(-1/2)-order row norm of U, near 1/n);
    // the square-root band matches the spectral-norm column
    let t2i_ok = (-1.05..=-0.80).contains(&slope_t2i);
    let spectral_ok = (-0.62..=-0.38).contains(&slope_spectral);
    let passed = decreasing && band <= 3.0 && t2i_ok && spectral_ok;
    outcome(
        "4 deviation curve trend",
        passed,
        format!(
            "decreasing {decreasing}, mean/phi band {band:.3} (limit 3), two-to-inf slope {slope_t2i:.3} in [-1.05, -0.80] {t2i_ok}, spectral slope {slope_spectral:.3} in [-0.62, -0.38] {spectral_ok}"
        ),
    )
}

/// Criterion 5: spike central limit behavior. One-dimensional Laplace model:
/// pooled variance within 10% of 1 and KS statistic under the 1% critical
/// value. Two-dimensional Uniform model: pooled covariance within 10% of
/// (1/3) I entrywise (off-diagonal gaps measured relative to the 1/3 scale).
fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    run_config("spike_density_1d.json", 2, dir.path());
    let text = std::fs::read_to_string(dir.path().join("spike_diagnostics_n500.csv")).unwrap();
    let table = CsvTable::parse(&text).unwrap();
    let get = |name: &str| {
        table
            .float_at(0, table.column_index(name).unwrap())
            .unwrap()
    };
    let variance = get("variance");
    let ks = get("ks_statistic");
    let ks_critical = get("ks_critical_1pct");
    let var_ok = (variance - 1.0).abs() <= 0.10;
    let ks_ok = ks < ks_critical;

    let dir2 = tempfile::tempdir().unwrap();
    run_config("spike_scatter_2d.json", 2, dir2.path());
    let cov = read_covariance(dir2.path(), "spike_covariance_n500.csv");
    let (_, emp, theo) = cov.blocks[0];
    let scale = 1.0 / 3.0;
    let mut worst_2d = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst_2d = worst_2d.max((emp[i][j] - theo[i][j]).abs() / scale);
        }
    }
    let cov_ok = worst_2d <= 0.10;

    outcome(
        "5 spike CLT suite",
        var_ok && ks_ok && cov_ok,
        format!(
            "1d variance {variance:.4} (within 10% of 1: {var_ok}), KS {ks:.4} < {ks_critical:.4}: {ks_ok}; 2d worst covariance gap {:.1}% of 1/3 (tolerance 10%)",
            100.0 * worst_2d
        ),
    )
}

/// Criterion 6: property suites at 100+ randomized instances each.
fn criterion_6() -> Outcome {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = rng_from_seed(314159);
    let mut failures: Vec<String> = Vec::new();

    // norm ordering chain
    for case in 0..100 {
        let n = 4 + case % 30;
        let m = 1 + case % 6;
        let t = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norms = matrix_norms(&t);
        let t2i = two_to_inf_norm(&t);
        if !(norms.max_abs <= t2i + 1e-12
            && t2i <= norms.spectral + 1e-9 * norms.spectral.max(1.0)
            && norms.spectral <= norms.frobenius + 1e-9 * norms.frobenius.max(1.0))
        {
            failures.push(format!("norm chain at case {case}"));
        }
    }

    // orthogonal invariance of the two-to-infinity norm
    for case in 0..100 {
        let t = DMatrix::from_fn(12 + case % 20, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gaussian_frame(&mut rng, 3, 3);
        let (a, b) = (two_to_inf_norm(&t), two_to_inf_norm(&(&t * q)));
        if (a - b).abs() > 1e-12 * a.max(1.0) {
            failures.push(format!("orthogonal invariance at case {case}"));
        }
    }

    // min-distance sandwich in both norms
    for case in 0..100 {
        let r = 1 + case % 3;
        let u = gaussian_frame(&mut rng, 22, r);
        let noise = DMatrix::from_fn(22, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u_hat = (&u + noise * [0.5, 0.15, 0.04][case % 3]).qr().q();
        let w = procrustes_align(&u_hat, &u).unwrap().rotation;
        let diff = &u_hat - &u * &w;
        let angles = canonical_angles(&u_hat, &u).unwrap();
        let norms = matrix_norms(&diff);
        let s = 2f64.sqrt();
        if !(angles.sin_theta_spectral() <= norms.spectral + 1e-7
            && norms.spectral <= s * angles.sin_theta_spectral() + 1e-7
            && angles.sin_theta_frobenius() <= norms.frobenius + 1e-7
            && norms.frobenius <= s * angles.sin_theta_frobenius() + 1e-7)
        {
            failures.push(format!("sandwich at case {case}"));
        }
    }

    // scale covariance of the decomposition
    let scale_cases: Vec<u64> = (0..100).collect();
    let scale_failures: Vec<String> = scale_cases
        .par_iter()
        .filter_map(|&seed| {
            let pop = sbm_population(&two_block(100)).unwrap();
            let instance = sbm_sample(&pop.matrix, 1.0, false, 5000 + seed).unwrap();
            let pair = top_r(&instance.signal, 2).unwrap();
            let pair_hat = top_r(&instance.observed, 2).unwrap();
            let w = procrustes_align(pair_hat.frame(), pair.frame()).unwrap().rotation;
            let report = decompose(&instance, &pair, &pair_hat, &w).unwrap();
            let c = [1e-3, 0.5, 7.0, 1e3][seed as usize % 4];
            let scaled = ModelInstance::new(
                SymmetricMatrix::new(instance.signal.matrix() * c).unwrap(),
                SymmetricMatrix::new(instance.noise.matrix() * c).unwrap(),
                instance.seed,
                instance.provenance.clone(),
            );
            let s_pair = top_r(&scaled.signal, 2).unwrap();
            let s_pair_hat = top_r(&scaled.observed, 2).unwrap();
            let s_w = procrustes_align(s_pair_hat.frame(), s_pair.frame()).unwrap().rotation;
            let s_report = decompose(&scaled, &s_pair, &s_pair_hat, &s_w).unwrap();
            let drift = (&s_report.difference - &report.difference)
                .amax()
                .max((&s_report.leading - &report.leading).amax())
                .max((&s_report.residual - &report.residual).amax());
            (drift > 1e-10).then(|| format!("scale covariance seed {seed} drift {drift:.2e}"))
        })
        .collect();
    failures.extend(scale_failures);

    // Neumann geometric tail bound
    let neumann_failures: Vec<String> = scale_cases
        .par_iter()
        .filter_map(|&seed| {
            let spec = spike_2d_signs(100, 100.0, NoiseKind::Uniform { half_width: 1.0 });
            let instance = spike_model(&spec, 6000 + seed).unwrap();
            let pair = top_r(&instance.signal, 2).unwrap();
            let pair_hat = top_r(&instance.observed, 2).unwrap();
            let order = (seed % 5) as usize;
            let report = neumann_partial(&instance, &pair, &pair_hat, order).unwrap();
            let err = matrix_norms(&(&report.partial - pair_hat.frame())).spectral;
            let bound = report.ratio.powi(order as i32 + 1) * report.lambda_norm
                * report.lambda_hat_inv_norm
                / (1.0 - report.ratio);
            (err > bound + 1e-9).then(|| format!("neumann tail seed {seed}: {err:.2e} > {bound:.2e}"))
        })
        .collect();
    failures.extend(neumann_failures);

    outcome(
        "6 property suites",
        failures.is_empty(),
        if failures.is_empty() {
            "norm chain, orthogonal invariance, sandwich, scale covariance, Neumann tail: 500 randomized checks, zero violations".into()
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
    )
}

/// Criterion 7: byte-identical CSVs at parallelism 1 and 8 for every
/// experiment kind that writes one.
fn criterion_7() -> Outcome {
    let mut configs: Vec<(ExperimentConfig, Vec<&str>)> = Vec::new();
    let mut first = shipped_config("deviation_curve.json");
    first.n_grid = vec![90, 150];
    first.replicates = 12;
    configs.push((
        first,
        vec!["first_order_replicates.csv", "first_order_aggregate.csv"],
    ));
    let mut second = shipped_config("fluctuation_scatter_n200.json");
    second.n_grid = vec![150];
    second.replicates = 6;
    configs.push((
        second,
        vec![
            "second_order_scatter_n150.csv",
            "second_order_covariance_n150.csv",
            "second_order_figure_n150.svg",
        ],
    ));
    let mut spike = shipped_config("spike_scatter_2d.json");
    spike.n_grid = vec![100];
    spike.replicates = 6;
    configs.push((
        spike,
        vec![
            "spike_scatter_n100.csv",
            "spike_covariance_n100.csv",
            "spike_figure_n100.svg",
        ],
    ));
    let mut assumption = shipped_config("assumption_check.json");
    assumption.n_grid = vec![120];
    assumption.replicates = 8;
    configs.push((assumption, vec!["assumption_check.csv"]));

    let mut mismatches = Vec::new();
    for (config, files) in &configs {
        let d1 = tempfile::tempdir().unwrap();
        let d8 = tempfile::tempdir().unwrap();
        for (threads, dir) in [(1usize, d1.path()), (8, d8.path())] {
            execute(
                config.clone(),
                &Overrides {
                    out_dir: Some(dir.to_path_buf()),
                    seed: None,
                    threads: Some(threads),
                },
            )
            .unwrap();
        }
        for file in files {
            let a = std::fs::read(d1.path().join(file)).unwrap();
            let b = std::fs::read(d8.path().join(file)).unwrap();
            if a != b {
                mismatches.push(file.to_string());
            }
        }
    }
    outcome(
        "7 reproducibility",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "9 output files byte-identical at parallelism 1 vs 8".into()
        } else {
            format!("differing files: {mismatches:?}")
        },
    )
}

#[test]
fn acceptance_criteria() {
    let results = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
    ];
    let mut all_passed = true;
    for r in &results {
        println!(
            "ACCEPTANCE {}: {} — {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        all_passed &= r.passed;
    }
    assert!(all_passed, "acceptance criteria failed");
}
