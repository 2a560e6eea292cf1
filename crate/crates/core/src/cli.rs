//! Command-line front end: scene synthesis, unmixing, evaluation, sweeps
//! and segmentation-only runs.
//!
//! Exit codes are a stable contract: 0 success, 2 argument/config errors,
//! 3 i/o errors, 4 solver non-convergence under `--strict`.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, DType, Layout};
use crate::pipeline::{self, PipelineConfig, PipelineMode};
use crate::synth::{self, SceneSpec};
use crate::types::AbundanceMap;
use crate::{homogeneity, slic};

#[derive(Parser, Debug)]
#[command(name = "hmua", version, about = "Multiscale sparse unmixing of hyperspectral images")]
pub struct Cli {
    /// Worker threads for sweeps and solver column blocks (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Override the seed recorded in scene or sweep specs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exit with code 4 when a solver stops on its iteration cap.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scene: cube, ground-truth abundances, manifest.
    Synth {
        /// Scene spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Spectral library CSV.
        #[arg(long)]
        lib: PathBuf,
        /// Target SNR in dB ("inf" for a noiseless cube).
        #[arg(long)]
        snr: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Unmix a cube against a library.
    Unmix {
        /// Pipeline config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Override the mode in the config.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        cube_header: PathBuf,
        #[arg(long)]
        cube_data: PathBuf,
        #[arg(long)]
        lib: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report the reconstruction quality of an estimate in dB.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Append a row to this CSV (created with a header if absent).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Parameter sweeps: per-parameter sensitivity or random sampling.
    Sweep {
        /// Sweep spec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        cube_header: PathBuf,
        #[arg(long)]
        cube_data: PathBuf,
        #[arg(long)]
        lib: PathBuf,
        /// Ground-truth abundance file.
        #[arg(long)]
        truth: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment only: write the map and its rendering.
    Segment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cube_header: PathBuf,
        #[arg(long)]
        cube_data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let _ = env_logger::Builder::from_default_env().try_init();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::SizeMismatch { .. } => 3,
        _ => 2,
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Synth { spec, lib, snr, out } => cmd_synth(cli, spec, lib, *snr, out),
        Command::Unmix {
            config,
            mode,
            cube_header,
            cube_data,
            lib,
            out,
        } => cmd_unmix(cli, config, mode.as_deref(), cube_header, cube_data, lib, out),
        Command::Eval {
            truth,
            estimate,
            csv,
        } => cmd_eval(truth, estimate, csv.as_deref()),
        Command::Sweep {
            spec,
            cube_header,
            cube_data,
            lib,
            truth,
            out,
        } => cmd_sweep(cli, spec, cube_header, cube_data, lib, truth, out),
        Command::Segment {
            config,
            cube_header,
            cube_data,
            out,
        } => cmd_segment(config, cube_header, cube_data, out),
    }
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Scene manifest; its top-level fields double as a cube header, so the
/// data file can be loaded with `--cube-header manifest.json`.
#[derive(Debug, Serialize, Deserialize)]
struct SceneManifest {
    rows: usize,
    cols: usize,
    bands: usize,
    dtype: DType,
    layout: Layout,
    scene: SceneSpec,
    endmember_ids: Vec<usize>,
    /// `None` records a noiseless (infinite SNR) cube.
    snr_db: Option<f64>,
    seed: u64,
    library: String,
}

fn cmd_synth(cli: &Cli, spec_path: &Path, lib_path: &Path, snr: f64, out: &Path) -> Result<ExitCode> {
    let mut spec: SceneSpec = read_json_file(spec_path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let lib = io::read_library(lib_path)?;
    if spec.endmember_count > lib.count() {
        return Err(Error::InvalidParameter(format!(
            "scene wants {} endmembers, library has {}",
            spec.endmember_count,
            lib.count()
        )));
    }
    // evenly spread endmember selection over the library
    let ids: Vec<usize> = (0..spec.endmember_count)
        .map(|i| i * lib.count() / spec.endmember_count)
        .collect();

    let truth = synth::generate_abundances(&spec)?;
    let cube = synth::mix_and_corrupt_with_dims(
        &truth,
        &lib,
        &ids,
        snr,
        spec.seed.wrapping_add(1),
        spec.rows,
        spec.cols,
    )?;

    // lift truth into library coordinates so it compares against estimates
    let mut full = ndarray::Array2::zeros((lib.count(), truth.pixels()));
    for (row, &id) in ids.iter().enumerate() {
        for j in 0..truth.pixels() {
            full[[id, j]] = truth.data()[[row, j]];
        }
    }
    let truth_full = AbundanceMap::new(full)?;

    ensure_dir(out)?;
    let manifest = SceneManifest {
        rows: spec.rows,
        cols: spec.cols,
        bands: lib.bands(),
        dtype: DType::Float64,
        layout: Layout::BandSequential,
        scene: spec,
        endmember_ids: ids,
        snr_db: if snr.is_finite() { Some(snr) } else { None },
        seed: spec.seed,
        library: lib_path.display().to_string(),
    };
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    let data_path = out.join("cube.bsq");
    write_raw_cube(&cube, &data_path)?;
    io::write_abundance(&truth_full, &out.join("truth.abun"))?;
    println!(
        "scene: {}x{} pixels, {} bands, {} endmembers -> {}",
        cube.rows(),
        cube.cols(),
        cube.bands(),
        manifest.endmember_ids.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_raw_cube(cube: &crate::types::HyperCube, path: &Path) -> Result<()> {
    use byteorder::{LittleEndian, WriteBytesExt};
    let mut writer = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    for &v in cube.data().iter() {
        writer
            .write_f64::<LittleEndian>(v)
            .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn parse_mode(s: &str) -> Result<PipelineMode> {
    match s {
        "mua" => Ok(PipelineMode::Mua),
        "hmua" => Ok(PipelineMode::Hmua),
        other => Err(Error::InvalidParameter(format!(
            "unknown mode '{other}' (expected mua or hmua)"
        ))),
    }
}

fn cmd_unmix(
    cli: &Cli,
    config_path: &Path,
    mode: Option<&str>,
    cube_header: &Path,
    cube_data: &Path,
    lib_path: &Path,
    out: &Path,
) -> Result<ExitCode> {
    let mut cfg: PipelineConfig = read_json_file(config_path)?;
    if let Some(mode) = mode {
        cfg.mode = parse_mode(mode)?;
    }
    cfg.validate()?;
    let cube = io::read_cube(cube_header, cube_data)?;
    let lib = io::read_library(lib_path)?;
    let output = pipeline::hmua_unmix(&cube, &lib, &cfg)?;

    ensure_dir(out)?;
    io::write_abundance(&output.abundances, &out.join("xhat.abun"))?;
    io::write_segmentation(&output.segmentation, &out.join("segmentation.json"))?;
    write_json_pretty(&output.diagnostics, &out.join("diagnostics.json"))?;
    if let Some(trace) = &output.diagnostics.eta_trace {
        write_json_pretty(trace, &out.join("eta_trace.json"))?;
    }
    io::render_segmentation(&output.segmentation, &cube, &out.join("segmentation.png"))?;
    io::render_abundance_panels(
        &output.abundances,
        cube.rows(),
        cube.cols(),
        &out.join("abundances.png"),
        9,
    )?;

    println!(
        "unmixed {} pixels: K {} -> {}, coarse {} iters, fine {} iters, {:.2}s",
        cube.pixels(),
        output.diagnostics.k_initial,
        output.diagnostics.k_final,
        output.diagnostics.iters_coarse,
        output.diagnostics.iters_fine,
        output.diagnostics.runtime_s
    );
    if cli.strict
        && (!output.coarse.converged(&cfg.solver) || !output.fine.converged(&cfg.solver))
    {
        eprintln!("solver stopped on the iteration cap");
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_json_pretty<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn cmd_eval(truth_path: &Path, estimate_path: &Path, csv: Option<&Path>) -> Result<ExitCode> {
    let truth = io::read_abundance(truth_path)?;
    let estimate = io::read_abundance(estimate_path)?;
    let value = synth::sre(&truth, &estimate)?;
    println!("{value:.3}");
    if let Some(csv_path) = csv {
        let new_file = std::fs::metadata(csv_path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv_path)
            .map_err(|e| Error::io(csv_path, e))?;
        if new_file {
            writeln!(file, "truth,estimate,SRE (dB)").map_err(|e| Error::io(csv_path, e))?;
        }
        writeln!(
            file,
            "{},{},{:.3}",
            truth_path.display(),
            estimate_path.display(),
            value
        )
        .map_err(|e| Error::io(csv_path, e))?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SweepMode {
    Sensitivity,
    Statistical,
}

/// Sweep spec: either one parameter against a list of values, or uniform
/// random sampling of several parameters at once.
#[derive(Debug, Deserialize)]
struct SweepSpec {
    mode: SweepMode,
    base: PipelineConfig,
    #[serde(default)]
    parameter: Option<String>,
    #[serde(default)]
    values: Vec<f64>,
    #[serde(default)]
    trials: usize,
    #[serde(default)]
    seed: u64,
    /// Parameter name -> [lo, hi], sampled uniformly per trial.
    #[serde(default)]
    ranges: std::collections::BTreeMap<String, [f64; 2]>,
    /// Re-derive the refinement sizes from the sampled initial size, each
    /// drawn from [prev/2, prev-1] and rounded up.
    #[serde(default)]
    sigma_chain: bool,
}

fn apply_parameter(cfg: &mut PipelineConfig, name: &str, value: f64) -> Result<()> {
    match name {
        "lambda" => cfg.solver.lambda = value,
        "lambda_c" => cfg.solver.lambda_c = value,
        "beta" => cfg.solver.beta = value,
        "mu" => cfg.solver.mu = Some(value),
        "tol" => cfg.solver.tol = value,
        "gamma" => cfg.slic.gamma = value,
        "sigma0" => cfg.slic.sigma = value,
        "tau_outliers" => cfg.homogeneity.tau_outliers = value,
        "tau_homog" => cfg.homogeneity.tau_homog = value,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown sweep parameter '{other}'"
            )))
        }
    }
    Ok(())
}

fn sample_sigma_chain(sigma0: f64, rounds: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut chain = Vec::with_capacity(rounds);
    let mut prev = sigma0;
    for _ in 0..rounds {
        let hi = prev - 1.0;
        if hi < 2.0 {
            break;
        }
        let lo = (prev / 2.0).min(hi);
        let s = rng.random_range(lo..=hi).ceil().min(prev - 1.0).max(2.0);
        chain.push(s);
        prev = s;
    }
    chain
}

fn cmd_sweep(
    cli: &Cli,
    spec_path: &Path,
    cube_header: &Path,
    cube_data: &Path,
    lib_path: &Path,
    truth_path: &Path,
    out: &Path,
) -> Result<ExitCode> {
    let mut spec: SweepSpec = read_json_file(spec_path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let cube = io::read_cube(cube_header, cube_data)?;
    let lib = io::read_library(lib_path)?;
    let truth = io::read_abundance(truth_path)?;

    let configs: Vec<PipelineConfig> = match spec.mode {
        SweepMode::Sensitivity => {
            let name = spec.parameter.as_deref().ok_or_else(|| {
                Error::InvalidParameter("sensitivity sweep needs a parameter name".into())
            })?;
            if spec.values.is_empty() {
                return Err(Error::InvalidParameter(
                    "sensitivity sweep needs a values list".into(),
                ));
            }
            spec.values
                .iter()
                .map(|&v| {
                    let mut cfg = spec.base.clone();
                    apply_parameter(&mut cfg, name, v)?;
                    Ok(cfg)
                })
                .collect::<Result<_>>()?
        }
        SweepMode::Statistical => {
            if spec.trials == 0 {
                return Err(Error::InvalidParameter(
                    "statistical sweep needs a positive trial count".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let rounds = spec.base.refine_sigmas.len();
            (0..spec.trials)
                .map(|_| {
                    let mut cfg = spec.base.clone();
                    for (name, [lo, hi]) in &spec.ranges {
                        let v = rng.random_range(*lo..=*hi);
                        apply_parameter(&mut cfg, name, v)?;
                    }
                    if spec.sigma_chain {
                        cfg.refine_sigmas = sample_sigma_chain(cfg.slic.sigma, rounds, &mut rng);
                    }
                    Ok(cfg)
                })
                .collect::<Result<_>>()?
        }
    };

    let started = Instant::now();
    let rows = pipeline::grid_search(&cube, &lib, &truth, &configs)?;
    // grid_search ranks by SRE; the CSV keeps trial order
    let mut by_trial = rows;
    by_trial.sort_by_key(|r| r.index);

    let best = by_trial
        .iter()
        .filter_map(|r| r.sre_db)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut file = std::io::BufWriter::new(
        std::fs::File::create(out).map_err(|e| Error::io(out, e))?,
    );
    let statistical = spec.mode == SweepMode::Statistical;
    let mut header = String::from(
        "trial,gamma,sigma0,refine_sigmas,tau_outliers,tau_homog,lambda_c,lambda,beta,mu,sre_db,runtime_s",
    );
    if statistical {
        header.push_str(",deviation_pct");
    }
    header.push_str(",error");
    writeln!(file, "{header}").map_err(|e| Error::io(out, e))?;
    for row in &by_trial {
        let cfg = &row.config;
        let sigmas = cfg
            .refine_sigmas
            .iter()
            .map(|s| format!("{s}"))
            .collect::<Vec<_>>()
            .join(";");
        let mu = cfg.solver.mu.map(|m| format!("{m}")).unwrap_or_default();
        let sre = row.sre_db.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            row.index,
            cfg.slic.gamma,
            cfg.slic.sigma,
            sigmas,
            cfg.homogeneity.tau_outliers,
            cfg.homogeneity.tau_homog,
            cfg.solver.lambda_c,
            cfg.solver.lambda,
            cfg.solver.beta,
            mu,
            sre,
            row.runtime_s,
        );
        if statistical {
            let deviation = row
                .sre_db
                .map(|v| format!("{:.4}", (v - best) / best * 100.0))
                .unwrap_or_default();
            line.push(',');
            line.push_str(&deviation);
        }
        line.push(',');
        if let Some(err) = &row.error {
            line.push_str(&err.replace(',', ";"));
        }
        writeln!(file, "{line}").map_err(|e| Error::io(out, e))?;
    }
    file.flush().map_err(|e| Error::io(out, e))?;
    println!(
        "{} trials in {:.2}s, best SRE {:.3} dB -> {}",
        by_trial.len(),
        started.elapsed().as_secs_f64(),
        best,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_segment(
    config_path: &Path,
    cube_header: &Path,
    cube_data: &Path,
    out: &Path,
) -> Result<ExitCode> {
    let cfg: PipelineConfig = read_json_file(config_path)?;
    cfg.validate()?;
    let cube = io::read_cube(cube_header, cube_data)?;
    let seg0 = slic::slic_segment(&cube, &cfg.slic, None)?;
    let (seg, trace) = match cfg.mode {
        PipelineMode::Hmua => homogeneity::refine(
            &cube,
            &seg0,
            &cfg.refine_sigmas,
            &cfg.slic,
            &cfg.homogeneity,
        )
        .map(|(seg, trace)| (seg, Some(trace)))?,
        PipelineMode::Mua => {
            let report = homogeneity::assess(&cube, &seg0, &cfg.homogeneity)?;
            (seg0.with_flags(report.flags)?, None)
        }
    };
    ensure_dir(out)?;
    io::write_segmentation(&seg, &out.join("segmentation.json"))?;
    io::render_segmentation(&seg, &cube, &out.join("segmentation.png"))?;
    if let Some(trace) = trace {
        write_json_pretty(&trace, &out.join("eta_trace.json"))?;
    }
    println!("{} superpixels -> {}", seg.label_count(), out.display());
    Ok(ExitCode::SUCCESS)
}
