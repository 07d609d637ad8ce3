//! Command-line pipeline: ingest HURDAT2 tracks, lift curves, compute
//! distances and distance matrices, geodesics, Karcher means, tangent PCA
//! sweeps, and MDS embeddings. Every subcommand prints a machine-readable
//! JSON summary to stdout and writes its data products to `--out`.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

use homocurve::data_io::{
    self, read_sphere_curve, write_distance_matrix_csv, write_group_curve, write_mds_csv,
    write_sphere_curve,
};
use homocurve::homogeneous::{self, OptimizerConfig};
use homocurve::lie_group::SubalgebraBasis;
use homocurve::srv_core::{curve_distance_g, q_inverse, q_map};
use homocurve::statistics::{
    aligned_to, classical_mds, distance_matrix, karcher_mean, principal_geodesic, quotient_distance,
    tangent_pca, Ensemble, QuotientMode,
};
use homocurve::synthetic;

#[derive(Parser)]
#[command(name = "homocurve", version, about = "Elastic analysis of curves on the sphere")]
struct Cli {
    #[command(flatten)]
    opts: RunOpts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Quotient mode: param | shape | rot | shape-rot.
    #[arg(long, global = true, default_value = "shape")]
    mode: String,
    /// Number of grid intervals T for resampling.
    #[arg(long, global = true, default_value_t = 100)]
    samples: usize,
    /// Initial gradient-descent step size.
    #[arg(long, global = true, default_value_t = 0.1)]
    step: f64,
    /// Gradient-norm stopping tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap per descent start.
    #[arg(long, global = true, default_value_t = 1000)]
    iters: usize,
    /// Number of multistart initializations.
    #[arg(long, global = true, default_value_t = 8)]
    starts: usize,
    /// Predecessor window of the reparametrization DP.
    #[arg(long, global = true, default_value_t = 4)]
    dp_window: usize,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HOMOCURVE_JOBS")]
    jobs: Option<usize>,
    /// Random seed for multistart draws and synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory (subcommand-dependent).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

impl RunOpts {
    fn config(&self) -> OptimizerConfig<f64> {
        OptimizerConfig {
            step: self.step,
            grad_tol: self.tol,
            max_iters: self.iters,
            multistarts: self.starts,
            seed: self.seed,
            so2_fast_path: true,
            dp_window: self.dp_window,
        }
    }

    fn mode(&self) -> Result<QuotientMode> {
        Ok(self.mode.parse::<QuotientMode>()?)
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self.out.as_deref().context("this subcommand requires --out")?;
        std::fs::create_dir_all(dir)?;
        Ok(dir)
    }

    fn out_file(&self) -> Result<&Path> {
        self.out.as_deref().context("this subcommand requires --out")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a HURDAT2 file and emit one resampled S² curve JSON per track.
    ParseHurdat { input: PathBuf },
    /// Horizontally lift an S² curve to SO(3).
    Lift { input: PathBuf },
    /// Distance between two curves under the chosen quotient mode.
    Distance { a: PathBuf, b: PathBuf },
    /// Full pairwise distance matrix of a directory (or list) of curves.
    DistanceMatrix { inputs: Vec<PathBuf> },
    /// Geodesic between two curves, written as frame files.
    Geodesic {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 7)]
        frames: usize,
    },
    /// Karcher mean of a directory (or list) of curves.
    Mean { inputs: Vec<PathBuf> },
    /// Tangent PCA at the Karcher mean, with principal-direction sweeps.
    Pca {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value_t = 5)]
        frames: usize,
    },
    /// Classical MDS embedding of a distance-matrix CSV.
    Mds {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
    /// Self-test: SRV round trips and lift horizontality on random data.
    RoundtripCheck {
        #[arg(long, default_value_t = 20)]
        curves: usize,
    },
}

fn collect_curve_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for entry in std::fs::read_dir(p)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no input curve files found");
    }
    Ok(files)
}

fn load_ensemble(inputs: &[PathBuf], mode: QuotientMode) -> Result<(Vec<String>, Ensemble<f64>)> {
    let files = collect_curve_paths(inputs)?;
    let mut ids = Vec::with_capacity(files.len());
    let mut curves = Vec::with_capacity(files.len());
    for f in &files {
        curves.push(read_sphere_curve(f).with_context(|| format!("reading {}", f.display()))?);
        ids.push(f.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    }
    Ok((ids, Ensemble::new(curves, mode)?))
}

fn emit(summary: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
}

fn run(cli: Cli) -> Result<()> {
    let opts = &cli.opts;
    let cfg = opts.config();
    let started = Instant::now();
    match cli.cmd {
        Command::ParseHurdat { input } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let parsed = data_io::parse_hurdat2(&text)?;
            let dir = opts.out_dir()?;
            let mut written = 0usize;
            let mut skipped = Vec::new();
            for track in &parsed.tracks {
                match data_io::track_to_curve(track, opts.samples) {
                    Ok(r) => {
                        write_sphere_curve(&r.curve, &dir.join(format!("{}.json", track.id)))?;
                        written += 1;
                    }
                    Err(e) => skipped.push(format!("{}: {e}", track.id)),
                }
            }
            emit(json!({
                "tracks": parsed.tracks.len(),
                "written": written,
                "skipped": skipped,
                "warnings": parsed.warnings,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::Lift { input } => {
            let beta = read_sphere_curve(&input)?;
            let alpha = homogeneous::horizontal_lift(&beta)?;
            write_group_curve(&alpha, opts.out_file()?)?;
            let basis = SubalgebraBasis::standard(beta.ambient_dim());
            let pair = homogeneous::lift_to_srv(&beta, &basis)?;
            emit(json!({
                "samples": beta.num_intervals() + 1,
                "horizontal": pair.horizontal,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::Distance { a, b } => {
            let mode = opts.mode()?;
            let b1 = read_sphere_curve(&a)?;
            let b2 = read_sphere_curve(&b)?;
            let d = quotient_distance(&b1, &b2, mode, &cfg)?;
            emit(json!({
                "mode": mode.to_string(),
                "distance": d,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::DistanceMatrix { inputs } => {
            let mode = opts.mode()?;
            let (ids, ens) = load_ensemble(&inputs, mode)?;
            let d = distance_matrix(&ens, &cfg)?;
            write_distance_matrix_csv(&ids, &d.data, opts.out_file()?)?;
            emit(json!({
                "mode": mode.to_string(),
                "curves": ids.len(),
                "pairs": ids.len() * (ids.len().saturating_sub(1)) / 2,
                "failures": d.failures.iter()
                    .map(|f| format!("({}, {}): {}", f.i, f.j, f.message))
                    .collect::<Vec<_>>(),
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::Geodesic { a, b, frames } => {
            let mode = opts.mode()?;
            let b1 = read_sphere_curve(&a)?;
            let b2 = read_sphere_curve(&b)?;
            let basis = SubalgebraBasis::standard(b1.ambient_dim());
            let p1 = homogeneous::lift_to_srv(&b1, &basis)?;
            let p2 = homogeneous::lift_to_srv(&b2, &basis)?;
            let (aligned, cost) = aligned_to(&p1, &p2, mode, &cfg)?;
            let curves = homogeneous::geodesic_between_pairs(&p1, &aligned, frames)?;
            let dir = opts.out_dir()?;
            for (i, c) in curves.iter().enumerate() {
                write_sphere_curve(c, &dir.join(format!("frame_{i:03}.json")))?;
            }
            emit(json!({
                "mode": mode.to_string(),
                "frames": frames,
                "distance": cost,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::Mean { inputs } => {
            let mode = opts.mode()?;
            let (_, ens) = load_ensemble(&inputs, mode)?;
            let m = karcher_mean(&ens, &cfg)?;
            write_sphere_curve(&m.curve, opts.out_file()?)?;
            emit(json!({
                "mode": mode.to_string(),
                "curves": ens.len(),
                "objectives": m.objectives,
                "converged": m.converged,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::Pca { inputs, components, spread, frames } => {
            let mode = opts.mode()?;
            let (_, ens) = load_ensemble(&inputs, mode)?;
            let m = karcher_mean(&ens, &cfg)?;
            let pca = tangent_pca(&ens, &m.curve, &cfg)?;
            let dir = opts.out_dir()?;
            write_sphere_curve(&pca.mean, &dir.join("mean.json"))?;
            let k = components.min(pca.directions.len());
            for comp in 0..k {
                let sweep = principal_geodesic(&pca, comp, spread, frames)?;
                for (i, c) in sweep.iter().enumerate() {
                    write_sphere_curve(c, &dir.join(format!("pc{}_frame_{i:03}.json", comp + 1)))?;
                }
            }
            emit(json!({
                "mode": mode.to_string(),
                "curves": ens.len(),
                "eigenvalues": pca.eigenvalues,
                "components_written": k,
                "converged": m.converged,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::Mds { input, dims } => {
            let (ids, d) = data_io::read_distance_matrix_csv(&input)?;
            let r = classical_mds(&d, dims);
            write_mds_csv(&ids, &r.coordinates, opts.out_file()?)?;
            emit(json!({
                "points": ids.len(),
                "dims": dims,
                "eigenvalues": r.eigenvalues,
                "padded": r.padded,
                "seconds": started.elapsed().as_secs_f64(),
            }));
        }
        Command::RoundtripCheck { curves } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
            let basis = SubalgebraBasis::standard(3);
            let mut worst_roundtrip = 0.0f64;
            let mut worst_projection = 0.0f64;
            for _ in 0..curves {
                let beta = synthetic::random_sphere_curve(&mut rng, opts.samples, 1.0);
                let alpha = homogeneous::horizontal_lift(&beta)?;
                let pair = q_map(&alpha)?;
                let back = q_inverse(&pair);
                worst_roundtrip = worst_roundtrip.max(curve_distance_g(&alpha, &back)?);
                let reproj = homogeneous::project_pi(&alpha)?;
                let err = beta
                    .samples()
                    .iter()
                    .zip(reproj.samples())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                worst_projection = worst_projection.max(err);
                let _ = homogeneous::lift_to_srv(&beta, &basis)?;
            }
            let pass = worst_roundtrip < 1e-10 && worst_projection < 1e-12;
            emit(json!({
                "curves": curves,
                "max_roundtrip_error": worst_roundtrip,
                "max_projection_error": worst_projection,
                "pass": pass,
                "seconds": started.elapsed().as_secs_f64(),
            }));
            if !pass {
                bail!("round-trip self-test failed");
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.opts.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("worker pool initializes once");
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
