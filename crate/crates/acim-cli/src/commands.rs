//! Subcommand implementations. Each takes the resolved config, the output
//! directory and the config hash, writes its artifacts, and prints a one-line
//! summary to stdout.

use crate::config::ExperimentConfig;
use crate::output::{format_float, read_density_csv, write_csv, write_json};
use acim_core::{
    check_assumption, default_r_grid, ly_estimate, monte_carlo_density, noise_matrix,
    oscillation_profile, perturbed_operator, solve, spectral_gap, stability_sweep, ulam_matrix,
    Domain, Error, GridDensity, NoiseKernel, PiecewiseMap, Result, TransferMatrix,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Transfer operator selected by the config: the plain Ulam matrix, or its
/// noisy composition when `noise.delta` is set.
fn operator(cfg: &ExperimentConfig) -> Result<(PiecewiseMap, TransferMatrix)> {
    let map = cfg.map.build()?;
    let p = ulam_matrix(&map, cfg.n)?;
    let m = match cfg.noise.delta {
        Some(delta) => {
            let kernel = NoiseKernel::new(cfg.noise.profile()?, delta)?;
            let q = noise_matrix(&kernel, cfg.n)?;
            perturbed_operator(&p, &q)?
        }
        None => p,
    };
    Ok((map, m))
}

fn domain(cfg: &ExperimentConfig) -> Domain {
    match cfg.domain.as_str() {
        "torus" => Domain::Torus,
        _ => Domain::Interval,
    }
}

fn density_rows(values: &[f64]) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(i, h)| vec![i.to_string(), format_float(*h)])
        .collect()
}

pub fn density(cfg: &ExperimentConfig, dir: &Path, hash: &str) -> Result<()> {
    let (map, m) = operator(cfg)?;
    let outcome = solve(&m, &cfg.solver.build()?)?;
    let path = write_csv(dir, "density.csv", hash, "i,h", &density_rows(outcome.density.values()))?;
    println!(
        "density: map {} n {} iterations {} residual {} -> {}",
        map.id,
        cfg.n,
        outcome.iterations,
        format_float(outcome.residual),
        path.display()
    );
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig, dir: &Path, hash: &str) -> Result<()> {
    let map = cfg.map.build()?;
    let report = stability_sweep(
        &map,
        cfg.noise.profile()?,
        &cfg.delta_list,
        cfg.n,
        cfg.p,
        &cfg.solver.build()?,
    )?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                format_float(row.delta),
                format_float(row.l1_error),
                format_float(row.var_h_delta),
                format_float(row.spectral_gap),
                row.iterations.to_string(),
            ]
        })
        .collect();
    let csv = write_csv(
        dir,
        "sweep.csv",
        hash,
        "delta,l1_error,var_h_delta,spectral_gap,iterations",
        &rows,
    )?;
    let json = write_json(dir, "sweep.json", hash, &report)?;
    let rate = report
        .rate_exponent
        .map_or_else(|| "n/a".to_string(), format_float);
    println!(
        "sweep: map {} n {} levels {} rate_exponent {} -> {}, {}",
        map.id,
        cfg.n,
        report.rows.len(),
        rate,
        csv.display(),
        json.display()
    );
    Ok(())
}

pub fn osc(cfg: &ExperimentConfig, dir: &Path, hash: &str) -> Result<()> {
    let file = cfg.density_file.as_ref().ok_or_else(|| {
        Error::Parameter("the osc command needs 'density_file' in the config".into())
    })?;
    let f = GridDensity::new(read_density_csv(Path::new(file))?)?;
    let r_grid = cfg.r_grid.clone().unwrap_or_else(|| default_r_grid(f.n()));
    let profile = oscillation_profile(&f, &r_grid, domain(cfg))?;
    let rows: Vec<Vec<String>> = profile
        .r_grid
        .iter()
        .zip(&profile.osc1_values)
        .map(|(r, o)| vec![format_float(*r), format_float(*o)])
        .collect();
    let path = write_csv(dir, "osc.csv", hash, "r,osc1", &rows)?;
    println!(
        "osc: {} cells, {} radii, domain {} -> {}",
        f.n(),
        r_grid.len(),
        cfg.domain,
        path.display()
    );
    Ok(())
}

pub fn ly(cfg: &ExperimentConfig, dir: &Path, hash: &str) -> Result<()> {
    let (map, m) = operator(cfg)?;
    let r_grid = cfg.r_grid.clone().unwrap_or_else(|| default_r_grid(cfg.n));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let est = ly_estimate(&m, cfg.p, &r_grid, cfg.num_test_functions, &mut rng)?;
    let path = write_json(dir, "ly.json", hash, &est)?;
    println!(
        "ly: map {} alpha_hat {} c_hat {} samples {} violated {} -> {}",
        map.id,
        format_float(est.alpha_hat),
        format_float(est.c_hat),
        est.sample_count,
        est.violated,
        path.display()
    );
    Ok(())
}

pub fn spectrum(cfg: &ExperimentConfig, dir: &Path, hash: &str) -> Result<()> {
    let (map, m) = operator(cfg)?;
    let report = spectral_gap(&m)?;
    let path = write_json(dir, "spectrum.json", hash, &report)?;
    println!(
        "spectrum: map {} lambda2_modulus {} eigenvalue_one_simple {} -> {}",
        map.id,
        format_float(report.lambda2_modulus),
        report.eigenvalue_one_simple,
        path.display()
    );
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig, dir: &Path, hash: &str) -> Result<()> {
    let map = cfg.map.build()?;
    let delta = cfg.noise.delta()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hist = monte_carlo_density(
        &map,
        cfg.noise.profile()?,
        delta,
        cfg.num_samples,
        cfg.n,
        &mut rng,
    )?;
    let path = write_csv(dir, "histogram.csv", hash, "i,h", &density_rows(hist.values()))?;
    println!(
        "simulate: map {} delta {} samples {} bins {} -> {}",
        map.id,
        delta,
        cfg.num_samples,
        cfg.n,
        path.display()
    );
    Ok(())
}

/// Validates the map and prints the expansion/regularity report alongside the
/// kernel-dependent contraction constants. A failed map validation is an
/// error (exit 4); an unsatisfied expansion threshold is an honest finding,
/// not a failure, so it still exits 0.
pub fn check(cfg: &ExperimentConfig) -> Result<()> {
    let map = cfg.map.build()?;
    let report = map.validate(256)?;
    println!(
        "check: map {} min_abs_derivative {} sampled_holder_constant {} passed {}",
        map.id,
        format_float(report.min_abs_derivative),
        format_float(report.sampled_holder_constant),
        report.passed
    );
    // The contraction constants depend only on the kernel shape, not on the
    // noise level, so any valid delta gives the same report.
    let delta = cfg.noise.delta.unwrap_or(0.1);
    let kernel = NoiseKernel::new(cfg.noise.profile()?, delta)?;
    let assumption = check_assumption(&map, &kernel, cfg.p)?;
    println!(
        "check: p {} c_tilde_1 {} alpha0_bound {} required_s {} satisfied {}",
        cfg.p,
        format_float(assumption.c_tilde_1),
        format_float(assumption.alpha0_bound),
        format_float(assumption.required_s),
        assumption.satisfied
    );
    if !report.passed {
        return Err(Error::Validation(format!(
            "map {}: min |T'| = {}",
            map.id, report.min_abs_derivative
        )));
    }
    Ok(())
}

pub fn run_subcommand(
    name: &str,
    cfg: &ExperimentConfig,
    dir: &Path,
    hash: &str,
) -> Result<()> {
    match name {
        "density" => density(cfg, dir, hash),
        "sweep" => sweep(cfg, dir, hash),
        "osc" => osc(cfg, dir, hash),
        "ly" => ly(cfg, dir, hash),
        "spectrum" => spectrum(cfg, dir, hash),
        "simulate" => simulate(cfg, dir, hash),
        "check" => check(cfg),
        other => Err(Error::Parameter(format!("unknown subcommand '{other}'"))),
    }
}
