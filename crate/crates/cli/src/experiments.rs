//! The Monte Carlo harness: replicate execution, aggregation, and file
//! output for every experiment kind.
//!
//! Replicate `i` always draws from the stream seeded `base_seed XOR i`, and
//! results are merged in replicate order after the parallel section, so the
//! produced CSV bytes are identical at any parallelism degree.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use specnoise_core as core;
use specnoise_core::{
    collect_samples, empirical_covariance, fluctuation_rows, latent_rotation, procrustes_align,
    replicate_seed, sbm_population, sbm_sample, spike_model, top_r, AlignmentPair,
    FluctuationSample, GroupCovariance, LatentRotation, ModelInstance, SpectralPair, SpikeSignal,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::csv::{float, CsvWriter};
use crate::manifest::{sha256_hex, GridSeeds, ReplicateFailure, RunManifest};
use crate::svg::{CurvePoint, CurveStyle, EllipseSpec, ScatterPoint};
use crate::CliError;

/// Result of a completed run.
pub struct RunSummary {
    pub manifest: RunManifest,
    pub files: Vec<PathBuf>,
}

/// Command-line overrides applied on top of the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

struct RunContext {
    config: ExperimentConfig,
    base_seed: u64,
    out_dir: PathBuf,
    pool: rayon::ThreadPool,
    manifest: RunManifest,
    files: Vec<PathBuf>,
}

impl RunContext {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)?;
        self.manifest.record_output(&path, contents.as_bytes());
        self.files.push(path);
        Ok(())
    }

    fn record_failures(&mut self, n: usize, failures: Vec<(u64, String)>) {
        for (replicate, message) in failures {
            self.manifest.failures.push(ReplicateFailure {
                n,
                replicate,
                message,
            });
        }
    }

    fn enforce_failure_budget(&self, total: usize) -> Result<(), CliError> {
        let failed = self.manifest.failures.len();
        if failure_budget_exceeded(failed, total, self.config.max_failure_rate()) {
            return Err(CliError::FailureRate { failed, total });
        }
        Ok(())
    }
}

/// True when the failed fraction exceeds the configured budget.
pub fn failure_budget_exceeded(failed: usize, total: usize, max_rate: f64) -> bool {
    total > 0 && failed as f64 > max_rate * total as f64
}

/// Runs the experiment described by `config`, writing outputs and the
/// manifest into the output directory.
pub fn execute(mut config: ExperimentConfig, overrides: &Overrides) -> Result<RunSummary, CliError> {
    config.validate()?;
    if let Some(seed) = overrides.seed {
        config.base_seed = seed;
    }
    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;

    let threads = crate::effective_threads(overrides.threads.or(config.threads));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let config_hash = sha256_hex(config.to_canonical_json().as_bytes());
    let manifest = RunManifest::new(config_hash, config.kind.as_str(), config.base_seed, threads);
    let mut ctx = RunContext {
        base_seed: config.base_seed,
        out_dir,
        pool,
        manifest,
        files: Vec::new(),
        config,
    };

    let start = Instant::now();
    match ctx.config.kind {
        ExperimentKind::FirstOrder => run_first_order(&mut ctx)?,
        ExperimentKind::SecondOrder => run_second_order(&mut ctx)?,
        ExperimentKind::Spike1d | ExperimentKind::Spike2d => run_spike(&mut ctx)?,
        ExperimentKind::AssumptionCheck => run_assumption_check(&mut ctx)?,
    }
    ctx.manifest.wall_clock_seconds = start.elapsed().as_secs_f64();

    let manifest_json = ctx.manifest.to_json();
    let manifest_path = ctx.out_dir.join("manifest.json");
    std::fs::write(&manifest_path, &manifest_json)?;
    ctx.files.push(manifest_path);

    Ok(RunSummary {
        manifest: ctx.manifest,
        files: ctx.files,
    })
}

/// Signal-side data shared by every replicate at one grid point.
struct Population {
    signal: core::SymmetricMatrix,
    pair: SpectralPair,
    rank: usize,
    memberships: Option<Vec<usize>>,
    latent: Option<DMatrix<f64>>,
    rho: f64,
    hollow: bool,
    spike: Option<core::SpikeSpec>,
}

fn build_population(config: &ExperimentConfig, n: usize) -> Result<Population, CliError> {
    let map_err = |e: core::Error| CliError::Config(format!("model invalid at n = {n}: {e}"));
    if config.is_sbm() {
        let spec = config.sbm_spec(n).map_err(map_err)?;
        let population = sbm_population(&spec).map_err(map_err)?;
        let rank = config.signal_rank(n).map_err(map_err)?;
        let pair = top_r(&population.matrix, rank).map_err(map_err)?;
        Ok(Population {
            signal: population.matrix,
            pair,
            rank,
            memberships: Some(population.memberships),
            latent: population.latent.map(|l| l.x),
            rho: spec.rho,
            hollow: spec.hollow_diagonal,
            spike: None,
        })
    } else {
        let spec = config.spike_spec(n);
        spec.validate().map_err(map_err)?;
        let instance = spike_model(
            &core::SpikeSpec {
                noise: core::NoiseKind::Gaussian { variance: 0.0 },
                ..spec.clone()
            },
            0,
        )
        .map_err(map_err)?;
        let rank = spec.rank;
        let pair = top_r(&instance.signal, rank).map_err(map_err)?;
        let latent = match &spec.signal {
            SpikeSignal::Latent { x } => Some(x.clone()),
            SpikeSignal::Frame { .. } => None,
        };
        Ok(Population {
            signal: instance.signal,
            pair,
            rank,
            memberships: None,
            latent,
            rho: spec.rho,
            hollow: false,
            spike: Some(spec),
        })
    }
}

impl Population {
    fn sample(&self, seed: u64) -> core::Result<ModelInstance> {
        match &self.spike {
            Some(spec) => spike_model(spec, seed),
            None => sbm_sample(&self.signal, self.rho, self.hollow, seed),
        }
    }

    fn latent_rotation(&self) -> Result<LatentRotation, CliError> {
        let x = self.latent.as_ref().ok_or_else(|| {
            CliError::Config("model has no latent positions (B not PSD)".into())
        })?;
        latent_rotation(x, &self.pair, self.rho)
            .map_err(|e| CliError::Config(format!("latent rotation unavailable: {e}")))
    }
}

fn seeds_for(ctx: &RunContext, n: usize) -> GridSeeds {
    GridSeeds {
        n,
        seeds: (0..ctx.config.replicates as u64)
            .map(|rep| replicate_seed(ctx.base_seed, rep))
            .collect(),
    }
}

type Successes<T> = Vec<(u64, T)>;
type Failures = Vec<(u64, String)>;

/// Splits indexed results into ordered successes and failures.
fn partition<T>(results: Vec<(u64, core::Result<T>)>) -> (Successes<T>, Failures) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (rep, result) in results {
        match result {
            Ok(value) => ok.push((rep, value)),
            Err(e) => failed.push((rep, e.to_string())),
        }
    }
    (ok, failed)
}

/// Linear-interpolation percentile of pre-sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

struct FirstOrderRow {
    two_to_inf: f64,
    spectral: f64,
    leading: f64,
    residual: f64,
}

fn run_first_order(ctx: &mut RunContext) -> Result<(), CliError> {
    let reps = ctx.config.replicates as u64;
    let mut replicate_csv = CsvWriter::new(&[
        "n",
        "replicate",
        "two_to_inf",
        "spectral",
        "leading_two_to_inf",
        "residual_two_to_inf",
    ]);
    let mut aggregate_csv = CsvWriter::new(&["n", "mean", "lo95", "hi95", "phi"]);
    let mut total = 0usize;

    for &n in &ctx.config.n_grid.clone() {
        let population = build_population(&ctx.config, n)?;
        let phi = core::phi_benchmark(n, population.pair.min_abs_eigenvalue())
            .map_err(|e| CliError::Config(format!("phi benchmark at n = {n}: {e}")))?;
        ctx.manifest.replicate_seeds.push(seeds_for(ctx, n));

        let base_seed = ctx.base_seed;
        let results: Vec<(u64, core::Result<FirstOrderRow>)> = ctx.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let outcome = (|| {
                        let instance = population.sample(replicate_seed(base_seed, rep))?;
                        let pair_hat = top_r(&instance.observed, population.rank)?;
                        let w = procrustes_align(pair_hat.frame(), population.pair.frame())?
                            .rotation;
                        let report =
                            core::decompose(&instance, &population.pair, &pair_hat, &w)?;
                        Ok(FirstOrderRow {
                            two_to_inf: report.norms.difference,
                            spectral: core::matrix_norms(&report.difference).spectral,
                            leading: report.norms.leading,
                            residual: report.norms.residual,
                        })
                    })();
                    (rep, outcome)
                })
                .collect()
        });
        let (ok, failed) = partition(results);
        total += reps as usize;
        ctx.record_failures(n, failed);
        ctx.enforce_failure_budget(total)?;

        for (rep, row) in &ok {
            replicate_csv.row(&[
                n.to_string(),
                rep.to_string(),
                float(row.two_to_inf),
                float(row.spectral),
                float(row.leading),
                float(row.residual),
            ]);
        }
        let mut values: Vec<f64> = ok.iter().map(|(_, r)| r.two_to_inf).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        aggregate_csv.row(&[
            n.to_string(),
            float(mean),
            float(percentile(&values, 0.025)),
            float(percentile(&values, 0.975)),
            float(phi),
        ]);
    }

    ctx.write("first_order_replicates.csv", &replicate_csv.finish())?;
    ctx.write("first_order_aggregate.csv", &aggregate_csv.finish())?;
    Ok(())
}

struct SecondOrderReplicate {
    /// Uncentered rows, for the scatter record.
    uncentered: DMatrix<f64>,
    samples: Vec<FluctuationSample>,
}

fn run_second_order(ctx: &mut RunContext) -> Result<(), CliError> {
    let reps = ctx.config.replicates as u64;
    let mut total = 0usize;
    for &n in &ctx.config.n_grid.clone() {
        let population = build_population(&ctx.config, n)?;
        for &lambda in population.pair.eigenvalues().iter() {
            if lambda <= 0.0 {
                return Err(CliError::Config(format!(
                    "second-order run needs strictly positive leading eigenvalues, found {lambda} at n = {n}"
                )));
            }
        }
        let latent = population.latent_rotation()?;
        ctx.manifest.replicate_seeds.push(seeds_for(ctx, n));

        let base_seed = ctx.base_seed;
        let rho = population.rho;
        let results: Vec<(u64, core::Result<SecondOrderReplicate>)> = ctx.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = replicate_seed(base_seed, rep);
                    let outcome = (|| {
                        let instance = population.sample(seed)?;
                        let pair_hat = top_r(&instance.observed, population.rank)?;
                        let procrustes =
                            procrustes_align(pair_hat.frame(), population.pair.frame())?;
                        let alignment = AlignmentPair {
                            w: procrustes.rotation,
                            w_x: latent.rotation.clone(),
                            w_defect: procrustes.orthogonality_defect,
                            w_x_defect: latent.orthogonality_defect,
                            degenerate: procrustes.degenerate,
                            latent_residual: latent.residual,
                        };
                        let set =
                            fluctuation_rows(&population.pair, &pair_hat, &alignment, rho)?;
                        let samples = collect_samples(
                            &set,
                            population.memberships.as_deref(),
                            rep,
                            seed,
                        );
                        Ok(SecondOrderReplicate {
                            uncentered: set.uncentered,
                            samples,
                        })
                    })();
                    (rep, outcome)
                })
                .collect()
        });
        let (ok, failed) = partition(results);
        total += reps as usize;
        ctx.record_failures(n, failed);
        ctx.enforce_failure_budget(total)?;
        if ok.is_empty() {
            continue;
        }

        // scatter CSV over all replicates, uncentered coordinates
        let blocks = population
            .memberships
            .clone()
            .unwrap_or_else(|| vec![0; n]);
        let mut scatter_csv = CsvWriter::new(&["vertex", "block", "v1", "v2", "replicate"]);
        for (rep, data) in &ok {
            for (vertex, block) in blocks.iter().enumerate() {
                scatter_csv.row(&[
                    vertex.to_string(),
                    block.to_string(),
                    float(data.uncentered[(vertex, 0)]),
                    float(data.uncentered[(vertex, 1.min(population.rank - 1))]),
                    rep.to_string(),
                ]);
            }
        }
        ctx.write(&format!("second_order_scatter_n{n}.csv"), &scatter_csv.finish())?;

        // pooled covariances
        let pooled: Vec<FluctuationSample> = ok
            .iter()
            .flat_map(|(_, d)| d.samples.iter().cloned())
            .collect();
        let groups = empirical_covariance(&pooled)
            .map_err(|e| CliError::Internal(format!("covariance pooling: {e}")))?;
        let theo = theoretical_covariances(ctx, &population, n)?;
        let mut cov_csv = CsvWriter::new(&[
            "block", "count", "emp_11", "emp_12", "emp_21", "emp_22", "theo_11", "theo_12",
            "theo_21", "theo_22",
        ]);
        for group in &groups {
            let t = &theo[group.block];
            cov_csv.row(&[
                group.block.to_string(),
                group.count.to_string(),
                float(group.covariance[(0, 0)]),
                float(group.covariance[(0, 1)]),
                float(group.covariance[(1, 0)]),
                float(group.covariance[(1, 1)]),
                float(t[(0, 0)]),
                float(t[(0, 1)]),
                float(t[(1, 0)]),
                float(t[(1, 1)]),
            ]);
        }
        ctx.write(&format!("second_order_covariance_n{n}.csv"), &cov_csv.finish())?;

        // figure: first replicate's point cloud, level curves from the pool
        let svg = second_order_figure(&ok[0].1, &blocks, &groups, &theo, &population, &latent, rho)?;
        ctx.write(&format!("second_order_figure_n{n}.svg"), &svg)?;
    }
    Ok(())
}

/// Theoretical `Sigma` per block (or the single spike group).
fn theoretical_covariances(
    ctx: &RunContext,
    population: &Population,
    n: usize,
) -> Result<Vec<DMatrix<f64>>, CliError> {
    let fail = |e: core::Error| CliError::Config(format!("limit covariance at n = {n}: {e}"));
    if ctx.config.is_sbm() {
        let spec = ctx.config.sbm_spec(n).map_err(fail)?;
        let latent =
            core::latent_from_b(&spec.probabilities, &spec.memberships()).map_err(fail)?;
        let xi = core::xi_analytic_sbm(&spec.proportions, &latent.class_positions)
            .map_err(fail)?;
        (0..spec.blocks)
            .map(|block| {
                let gamma = core::gamma_sbm(&spec, &latent, block).map_err(fail)?;
                core::sigma_i(&xi.matrix, &gamma).map_err(fail)
            })
            .collect()
    } else {
        let spike = population.spike.as_ref().expect("spike population");
        let x = population.latent.as_ref().expect("latent spike positions");
        let xi = core::xi_plugin(x).map_err(fail)?;
        let gamma = core::gamma_for_noise(&spike.noise, &xi.matrix).map_err(fail)?;
        Ok(vec![core::sigma_i(&xi.matrix, &gamma).map_err(fail)?])
    }
}

fn second_order_figure(
    first: &SecondOrderReplicate,
    blocks: &[usize],
    groups: &[GroupCovariance],
    theo: &[DMatrix<f64>],
    population: &Population,
    latent: &LatentRotation,
    rho: f64,
) -> Result<String, CliError> {
    let points: Vec<ScatterPoint> = (0..first.uncentered.nrows())
        .map(|vertex| ScatterPoint {
            x: first.uncentered[(vertex, 0)],
            y: first.uncentered[(vertex, 1.min(first.uncentered.ncols() - 1))],
            series: blocks[vertex],
        })
        .collect();

    // block centers n rho^(1/2) U W_X, one per block
    let n = population.pair.order();
    let centers = population.pair.frame() * &latent.rotation * (n as f64 * rho.sqrt());
    let mut ellipses = Vec::new();
    for group in groups {
        let first_vertex = blocks
            .iter()
            .position(|&b| b == group.block)
            .expect("block has vertices");
        let center = [centers[(first_vertex, 0)], centers[(first_vertex, 1)]];
        let empirical_center = [
            center[0] + group.mean[0],
            center[1] + group.mean[1],
        ];
        if let Ok(e) = core::ellipse_level_95(&group.covariance) {
            ellipses.push(EllipseSpec {
                ellipse: e.with_center(empirical_center),
                style: CurveStyle::Dashed,
                series: group.block,
            });
        }
        if let Ok(e) = core::ellipse_level_95(&theo[group.block]) {
            ellipses.push(EllipseSpec {
                ellipse: e.with_center(center),
                style: CurveStyle::Solid,
                series: group.block,
            });
        }
    }
    crate::svg::render_scatter(&points, &ellipses, "first coordinate", "second coordinate")
}

fn run_spike(ctx: &mut RunContext) -> Result<(), CliError> {
    if ctx.config.is_sbm() {
        return Err(CliError::Config(
            "spike experiments need a spike model".into(),
        ));
    }
    let one_dimensional = ctx.config.kind == ExperimentKind::Spike1d;
    let reps = ctx.config.replicates as u64;
    let mut total = 0usize;

    for &n in &ctx.config.n_grid.clone() {
        let population = build_population(&ctx.config, n)?;
        if one_dimensional && population.rank != 1 {
            return Err(CliError::Config("spike-1d needs a rank-1 model".into()));
        }
        if !one_dimensional && population.rank != 2 {
            return Err(CliError::Config("spike-2d needs a rank-2 model".into()));
        }
        let latent = population.latent_rotation()?;
        ctx.manifest.replicate_seeds.push(seeds_for(ctx, n));

        let base_seed = ctx.base_seed;
        let rho = population.rho;
        let results: Vec<(u64, core::Result<DMatrix<f64>>)> = ctx.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = replicate_seed(base_seed, rep);
                    let outcome = (|| {
                        let instance = population.sample(seed)?;
                        let pair_hat = top_r(&instance.observed, population.rank)?;
                        let procrustes =
                            procrustes_align(pair_hat.frame(), population.pair.frame())?;
                        let alignment = AlignmentPair {
                            w: procrustes.rotation,
                            w_x: latent.rotation.clone(),
                            w_defect: procrustes.orthogonality_defect,
                            w_x_defect: latent.orthogonality_defect,
                            degenerate: procrustes.degenerate,
                            latent_residual: latent.residual,
                        };
                        let set =
                            fluctuation_rows(&population.pair, &pair_hat, &alignment, rho)?;
                        Ok(set.centered)
                    })();
                    (rep, outcome)
                })
                .collect()
        });
        let (ok, failed) = partition(results);
        total += reps as usize;
        ctx.record_failures(n, failed);
        ctx.enforce_failure_budget(total)?;
        if ok.is_empty() {
            continue;
        }

        let sigma = theoretical_covariances(ctx, &population, n)?.remove(0);
        if one_dimensional {
            spike_1d_outputs(ctx, n, &ok, sigma[(0, 0)])?;
        } else {
            spike_2d_outputs(ctx, n, &ok, &sigma)?;
        }
    }
    Ok(())
}

fn spike_1d_outputs(
    ctx: &mut RunContext,
    n: usize,
    ok: &[(u64, DMatrix<f64>)],
    target_variance: f64,
) -> Result<(), CliError> {
    let mut csv = CsvWriter::new(&["replicate", "vertex", "value"]);
    let mut pooled = Vec::new();
    for (rep, centered) in ok {
        for vertex in 0..centered.nrows() {
            let v = centered[(vertex, 0)];
            csv.row(&[rep.to_string(), vertex.to_string(), float(v)]);
            pooled.push(v);
        }
    }
    ctx.write(&format!("spike_fluctuations_n{n}.csv"), &csv.finish())?;

    let report = core::normality_diagnostics(&pooled, target_variance)
        .map_err(|e| CliError::Internal(format!("normality diagnostics: {e}")))?;
    let critical = 1.6276 / (report.count as f64).sqrt();
    let mut diag = CsvWriter::new(&[
        "count",
        "ks_statistic",
        "ks_critical_1pct",
        "mean",
        "variance",
        "skewness",
        "kurtosis",
        "target_variance",
    ]);
    diag.row(&[
        report.count.to_string(),
        float(report.ks_statistic),
        float(critical),
        float(report.mean),
        float(report.variance),
        float(report.skewness),
        float(report.kurtosis),
        float(target_variance),
    ]);
    ctx.write(&format!("spike_diagnostics_n{n}.csv"), &diag.finish())?;

    let sigma = target_variance.sqrt();
    let svg = crate::svg::render_density(
        &pooled,
        |x| (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
        "scaled eigenvector fluctuation",
    )?;
    ctx.write(&format!("spike_figure_n{n}.svg"), &svg)?;
    Ok(())
}

fn spike_2d_outputs(
    ctx: &mut RunContext,
    n: usize,
    ok: &[(u64, DMatrix<f64>)],
    sigma: &DMatrix<f64>,
) -> Result<(), CliError> {
    let mut csv = CsvWriter::new(&["replicate", "vertex", "v1", "v2"]);
    let mut pooled = Vec::new();
    for (rep, centered) in ok {
        for vertex in 0..centered.nrows() {
            csv.row(&[
                rep.to_string(),
                vertex.to_string(),
                float(centered[(vertex, 0)]),
                float(centered[(vertex, 1)]),
            ]);
            pooled.push(FluctuationSample {
                row: vertex,
                block: Some(0),
                replicate: *rep,
                seed: 0,
                vector: centered.row(vertex).transpose(),
            });
        }
    }
    ctx.write(&format!("spike_scatter_n{n}.csv"), &csv.finish())?;

    let groups = empirical_covariance(&pooled)
        .map_err(|e| CliError::Internal(format!("covariance pooling: {e}")))?;
    let group = &groups[0];
    let mut cov = CsvWriter::new(&[
        "block", "count", "emp_11", "emp_12", "emp_21", "emp_22", "theo_11", "theo_12", "theo_21",
        "theo_22",
    ]);
    cov.row(&[
        "0".into(),
        group.count.to_string(),
        float(group.covariance[(0, 0)]),
        float(group.covariance[(0, 1)]),
        float(group.covariance[(1, 0)]),
        float(group.covariance[(1, 1)]),
        float(sigma[(0, 0)]),
        float(sigma[(0, 1)]),
        float(sigma[(1, 0)]),
        float(sigma[(1, 1)]),
    ]);
    ctx.write(&format!("spike_covariance_n{n}.csv"), &cov.finish())?;

    // figure: first replicate's centered cloud with both level curves
    let first = &ok[0].1;
    let points: Vec<ScatterPoint> = (0..first.nrows())
        .map(|vertex| ScatterPoint {
            x: first[(vertex, 0)],
            y: first[(vertex, 1)],
            series: 0,
        })
        .collect();
    let mut ellipses = Vec::new();
    if let Ok(e) = core::ellipse_level_95(&group.covariance) {
        ellipses.push(EllipseSpec {
            ellipse: e.with_center([group.mean[0], group.mean[1]]),
            style: CurveStyle::Dashed,
            series: 0,
        });
    }
    if let Ok(e) = core::ellipse_level_95(sigma) {
        ellipses.push(EllipseSpec {
            ellipse: e,
            style: CurveStyle::Solid,
            series: 0,
        });
    }
    let svg = crate::svg::render_scatter(
        &points,
        &ellipses,
        "first coordinate",
        "second coordinate",
    )?;
    ctx.write(&format!("spike_figure_n{n}.svg"), &svg)?;
    Ok(())
}

struct AssumptionRow {
    k: u32,
    max_component: f64,
    max_ratio: f64,
    certified_c: f64,
}

fn run_assumption_check(ctx: &mut RunContext) -> Result<(), CliError> {
    let reps = ctx.config.replicates as u64;
    let xi = ctx.config.xi();
    let mut csv = CsvWriter::new(&[
        "n",
        "replicate",
        "k",
        "max_component",
        "max_ratio",
        "certified_c_e",
    ]);
    let mut total = 0usize;

    for &n in &ctx.config.n_grid.clone() {
        let population = build_population(&ctx.config, n)?;
        let rho = population.rho;
        let k_max = core::k_of_n(n, rho)
            .map_err(|e| CliError::Config(format!("assumption check at n = {n}: {e}")))?
            + 1;
        ctx.manifest.replicate_seeds.push(seeds_for(ctx, n));

        let base_seed = ctx.base_seed;
        let results: Vec<(u64, core::Result<Vec<AssumptionRow>>)> = ctx.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = replicate_seed(base_seed, rep);
                    let outcome = (|| {
                        let instance = population.sample(seed)?;
                        let report = core::check_noise_concentration(
                            &instance.noise,
                            population.pair.frame(),
                            rho,
                            xi,
                            k_max,
                        );
                        let rows = (1..=k_max)
                            .map(|k| {
                                let per_k: Vec<&core::ConcentrationRow> =
                                    report.rows.iter().filter(|r| r.k == k).collect();
                                AssumptionRow {
                                    k,
                                    max_component: per_k
                                        .iter()
                                        .map(|r| r.max_component)
                                        .fold(0.0, f64::max),
                                    max_ratio: per_k
                                        .iter()
                                        .map(|r| r.ratio)
                                        .fold(0.0, f64::max),
                                    certified_c: report.certified_c,
                                }
                            })
                            .collect();
                        Ok(rows)
                    })();
                    (rep, outcome)
                })
                .collect()
        });
        let (ok, failed) = partition(results);
        total += reps as usize;
        ctx.record_failures(n, failed);
        ctx.enforce_failure_budget(total)?;

        for (rep, rows) in &ok {
            for row in rows {
                csv.row(&[
                    n.to_string(),
                    rep.to_string(),
                    row.k.to_string(),
                    float(row.max_component),
                    float(row.max_ratio),
                    float(row.certified_c),
                ]);
            }
        }
    }

    ctx.write("assumption_check.csv", &csv.finish())?;
    Ok(())
}

/// Rebuilds the aggregate rows from a replicate CSV (used to verify that
/// aggregates are a pure function of the per-replicate file).
pub fn recompute_first_order_aggregate(replicates_csv: &str) -> Result<Vec<(usize, f64, f64, f64)>, CliError> {
    let table = crate::csv::CsvTable::parse(replicates_csv)?;
    let n_col = table.column_index("n")?;
    let value_col = table.column_index("two_to_inf")?;
    let mut by_n: Vec<(usize, Vec<f64>)> = Vec::new();
    for row in 0..table.rows.len() {
        let n: usize = table.rows[row][n_col]
            .parse()
            .map_err(|_| CliError::Config("bad n".into()))?;
        let v = table.float_at(row, value_col)?;
        match by_n.iter_mut().find(|(existing, _)| *existing == n) {
            Some((_, values)) => values.push(v),
            None => by_n.push((n, vec![v])),
        }
    }
    Ok(by_n
        .into_iter()
        .map(|(n, mut values)| {
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            (
                n,
                mean,
                percentile(&values, 0.025),
                percentile(&values, 0.975),
            )
        })
        .collect())
}

/// Renders a figure from a previously written CSV.
pub fn render_csv(path: &Path, kind: &str, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(path)?;
    let table = crate::csv::CsvTable::parse(&text)?;
    let svg = match kind {
        "scatter" => {
            let v1 = table.column_index("v1")?;
            let v2 = table.column_index("v2")?;
            let block = table.column_index("block").ok();
            let points: Result<Vec<ScatterPoint>, CliError> = (0..table.rows.len())
                .map(|row| {
                    Ok(ScatterPoint {
                        x: table.float_at(row, v1)?,
                        y: table.float_at(row, v2)?,
                        series: match block {
                            Some(col) => table.rows[row][col]
                                .parse()
                                .map_err(|_| CliError::Config("bad block".into()))?,
                            None => 0,
                        },
                    })
                })
                .collect();
            crate::svg::render_scatter(&points?, &[], "first coordinate", "second coordinate")?
        }
        "curve" => {
            let n = table.column_index("n")?;
            let mean = table.column_index("mean")?;
            let lo = table.column_index("lo95")?;
            let hi = table.column_index("hi95")?;
            let phi = table.column_index("phi")?;
            let points: Result<Vec<CurvePoint>, CliError> = (0..table.rows.len())
                .map(|row| {
                    Ok(CurvePoint {
                        n: table.rows[row][n]
                            .parse()
                            .map_err(|_| CliError::Config("bad n".into()))?,
                        mean: table.float_at(row, mean)?,
                        lo: table.float_at(row, lo)?,
                        hi: table.float_at(row, hi)?,
                        benchmark: table.float_at(row, phi)?,
                    })
                })
                .collect();
            crate::svg::render_curve(&points?, "number of vertices n", "two-to-infinity deviation")?
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown render kind {other}, expected scatter or curve"
            )))
        }
    };
    let out_path = match out {
        Some(p) => p.to_path_buf(),
        None => path.with_extension("svg"),
    };
    std::fs::write(&out_path, &svg)?;
    Ok(out_path)
}
