//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use gravicont::{
    add_noise, assemble_matrix, depth_scan, format_trace_line, nnls_solve_traced,
    peel_sources, select_depth_from_curve, synth_field, ContinuationGrid, LayerDensity,
    ObservationSet, PeelOptions,
};
use serde_json::json;

use crate::config::{DepthSpec, ExperimentConfig, Overrides};
use crate::files;
use crate::CliError;

pub fn synth(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let t0 = Instant::now();
    let config = ExperimentConfig::load(config_path, overrides)?;
    if config.sources.is_empty() {
        return Err(CliError::Config("sources must not be empty for synth".into()));
    }
    let obs = ObservationSet::regular_grid(
        config.observation.extent,
        config.observation.n1,
        config.observation.n2,
        config.observation.elevation,
    )?;
    let clean = synth_field(&config.sources, obs.points(), config.gravitational_constant)?;
    let noisy = if config.noise.delta > 0.0 {
        Some(add_noise(&clean, &config.noise)?)
    } else {
        None
    };

    let path = config.output_directory.join("observations.csv");
    files::write_text(&path, &files::render_observations(obs.points(), &clean, noisy.as_deref()))?;
    let max_abs = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    files::write_metadata(
        &path,
        "synth",
        &config,
        json!({
            "points": obs.len(),
            "max_abs_clean": max_abs,
            "noise_applied": noisy.is_some(),
        }),
        t0.elapsed().as_secs_f64(),
    )?;
    println!("wrote {} ({} points)", path.display(), obs.len());
    Ok(())
}

pub fn scan(
    config_path: &Path,
    overrides: &Overrides,
    observations: &Path,
    densities: bool,
) -> Result<(), CliError> {
    let t0 = Instant::now();
    let config = ExperimentConfig::load(config_path, overrides)?;
    let parsed = files::read_observations(observations)?;
    let obs = parsed.observation_set()?;
    let depths = config.depths.expand()?;

    let scan = depth_scan(
        &obs,
        config.continuation.extent,
        config.continuation.m1,
        config.continuation.m2,
        &depths,
        config.gravitational_constant,
        &config.nnls_options(),
    )?;

    let path = config.output_directory.join("scan.csv");
    files::write_text(&path, &files::render_scan(&scan))?;
    if densities {
        for (i, solution) in scan.solutions.iter().enumerate() {
            let dpath = config
                .output_directory
                .join(format!("density_h{}.csv", scan.depths[i]));
            files::write_text(&dpath, &files::render_density(solution))?;
            files::write_metadata(
                &dpath,
                "scan",
                &config,
                json!({
                    "observations": observations.display().to_string(),
                    "depth": scan.depths[i],
                    "residual": scan.residuals[i],
                    "iterations": scan.iterations[i],
                    "converged": scan.converged[i],
                }),
                t0.elapsed().as_secs_f64(),
            )?;
        }
    }
    let failures: Vec<_> = scan
        .failures
        .iter()
        .map(|f| json!({"depth": f.depth, "error": f.error.to_string()}))
        .collect();
    files::write_metadata(
        &path,
        "scan",
        &config,
        json!({
            "observations": observations.display().to_string(),
            "depth_count": scan.len(),
            "failures": failures,
            "densities_written": densities,
        }),
        t0.elapsed().as_secs_f64(),
    )?;
    println!("wrote {} ({} depths, {} failures)", path.display(), scan.len(), scan.failures.len());
    Ok(())
}

pub fn continue_at(
    config_path: &Path,
    overrides: &Overrides,
    observations: &Path,
    depth: f64,
    trace: bool,
) -> Result<(), CliError> {
    let t0 = Instant::now();
    let config = ExperimentConfig::load(config_path, overrides)?;
    let parsed = files::read_observations(observations)?;
    let obs = parsed.observation_set()?;

    let grid = std::sync::Arc::new(ContinuationGrid::new(
        config.continuation.extent,
        config.continuation.m1,
        config.continuation.m2,
        depth,
    )?);
    let a = assemble_matrix(&obs, &grid, config.gravitational_constant)?;
    let mut sink: Box<dyn FnMut(&gravicont::TraceRecord)> = if trace {
        Box::new(|rec| eprintln!("{}", format_trace_line(rec)))
    } else {
        Box::new(|_| {})
    };
    let solved = nnls_solve_traced(&a.entries, obs.values(), &config.nnls_options(), &mut sink)?;
    let density = LayerDensity::new(grid, solved.phi.clone())?;

    let path = config.output_directory.join("density.csv");
    files::write_text(&path, &files::render_density(&density))?;
    let threshold = if config.noise.delta > 0.0 {
        let fmax = obs.max_abs_value();
        Some(config.noise.delta * (obs.len() as f64).sqrt() * fmax)
    } else {
        None
    };
    files::write_metadata(
        &path,
        "continue",
        &config,
        json!({
            "observations": observations.display().to_string(),
            "depth": depth,
            "residual": solved.residual_norm,
            "iterations": solved.iterations,
            "converged": solved.converged,
            "threshold": threshold,
            "total_mass": density.total_mass(),
        }),
        t0.elapsed().as_secs_f64(),
    )?;
    println!(
        "wrote {} (depth {}, residual {:e}, {} iterations)",
        path.display(),
        depth,
        solved.residual_norm,
        solved.iterations
    );
    if !solved.converged {
        return Err(CliError::NonConvergence(format!(
            "continuation at depth {depth} stopped after {} iterations with residual {:e}",
            solved.iterations, solved.residual_norm
        )));
    }
    Ok(())
}

pub fn select(
    config_path: &Path,
    overrides: &Overrides,
    scan_file: &Path,
    observations: &Path,
) -> Result<(), CliError> {
    let t0 = Instant::now();
    let config = ExperimentConfig::load(config_path, overrides)?;
    let parsed = files::read_observations(observations)?;
    let (depths, residuals) = files::read_scan_curve(scan_file)?;

    let report = select_depth_from_curve(&depths, &residuals, config.noise.delta, parsed.working_values());
    match report.selected {
        Some(h) => println!("h_star={h} threshold={} admissible=true", report.threshold),
        None => println!("h_star=none threshold={} admissible=false", report.threshold),
    }

    let path = config.output_directory.join("select.json");
    let body = json!({
        "delta": config.noise.delta,
        "threshold": report.threshold,
        "admissible": report.selected.is_some(),
        "h_star": report.selected,
    });
    files::write_text(
        &path,
        &serde_json::to_string_pretty(&body)
            .map_err(|e| CliError::Config(format!("report serialization: {e}")))?,
    )?;
    files::write_metadata(
        &path,
        "select",
        &config,
        json!({
            "scan": scan_file.display().to_string(),
            "observations": observations.display().to_string(),
        }),
        t0.elapsed().as_secs_f64(),
    )?;
    Ok(())
}

pub fn peel(
    config_path: &Path,
    overrides: &Overrides,
    observations: &Path,
    max_rounds: usize,
    stop_fraction: f64,
) -> Result<(), CliError> {
    let t0 = Instant::now();
    let config = ExperimentConfig::load(config_path, overrides)?;
    let parsed = files::read_observations(observations)?;
    let obs = parsed.observation_set()?;

    let (depth_start, depth_stop, depth_step) = match config.depths {
        DepthSpec::Range { start, stop, step } => (start, stop, step),
        DepthSpec::List(ref list) => {
            let start = list.iter().cloned().fold(f64::INFINITY, f64::min);
            let stop = list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (start, stop, 0.005)
        }
    };
    let peel_opts = PeelOptions {
        depth_start,
        depth_stop,
        depth_step,
        max_rounds,
        stop_fraction,
        noise_delta: config.noise.delta,
        ..Default::default()
    };
    let outcome = peel_sources(
        &obs,
        config.continuation.extent,
        config.continuation.m1,
        config.continuation.m2,
        &peel_opts,
        config.gravitational_constant,
        &config.nnls_options(),
    )?;

    let path = config.output_directory.join("sources.csv");
    files::write_text(&path, &files::render_sources(&outcome.sources, &outcome.data_norms))?;
    files::write_metadata(
        &path,
        "peel",
        &config,
        json!({
            "observations": observations.display().to_string(),
            "rounds": outcome.sources.len(),
            "initial_norm": outcome.initial_norm,
            "max_rounds": max_rounds,
            "stop_fraction": stop_fraction,
        }),
        t0.elapsed().as_secs_f64(),
    )?;
    for s in &outcome.sources {
        println!(
            "round {}: mass={} x1={} x2={} depth={}",
            s.round, s.mass, s.position.x, s.position.y, -s.position.z
        );
    }
    println!("wrote {} ({} sources)", path.display(), outcome.sources.len());
    Ok(())
}
