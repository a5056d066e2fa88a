//! Command-line front end: single trials, experiment batches, and saliency
//! pipeline snapshots, all byte-deterministic for fixed seeds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use avsearch::attention::{
    backproject, backproject_masked, bottom_up_info, fuse_bu_td, template_histogram,
    threshold_percentile, to_c1c2c3, to_rgb_planes, ColorHistogram, FilterBank, Mode, SaliencyMap,
};
use avsearch::config::parse_config;
use avsearch::pnm::{quantize16, read_ppm, write_pgm16, write_ppm};
use avsearch::raster::{GrayMap, RgbImage};
use avsearch::scene::{load_scenario, render_view, wrap_angle, RobotState, SceneModel};
use avsearch::search::{
    run_batch, run_trial_observed, DetectionMode, SummaryRow, TrialConfig, TrialResult,
    BACKPROJECT_BINS,
};

#[derive(Parser)]
#[command(name = "avsearch", about = "Attention-guided active visual search simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single search trial and write its trajectory trace.
    Run(RunArgs),
    /// Run scenarios x methods x seeded trials and write metrics tables.
    Batch(BatchArgs),
    /// Compute saliency maps for one image or rendered scenario view.
    Saliency(SaliencyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Optional experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Search method.
    #[arg(long, default_value = "nosal")]
    method: String,
    /// Trial seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Detection event semantics.
    #[arg(long, default_value = "bernoulli")]
    detection: String,
    /// Output directory for trajectory.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Directory for per-step heatmap snapshots.
    #[arg(long)]
    dump_heatmaps: Option<PathBuf>,
    /// Filter bank file for the bottom-up modes (built-in bank otherwise).
    #[arg(long)]
    filters: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// Scenario file(s); repeat the flag for several.
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    /// Method(s) to compare; repeat the flag for several.
    #[arg(long, required = true)]
    method: Vec<String>,
    /// Optional experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; per-trial seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per (scenario, method) pair.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Detection event semantics.
    #[arg(long, default_value = "bernoulli")]
    detection: String,
    /// Output directory for metrics.csv and summary.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Filter bank file for the bottom-up modes (built-in bank otherwise).
    #[arg(long)]
    filters: Option<PathBuf>,
}

#[derive(Args)]
struct SaliencyArgs {
    /// PPM image to analyze (alternative to --scenario).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Scenario to render and analyze (alternative to --image).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Camera pose `x,y,phi_deg` when rendering; scenario start otherwise.
    #[arg(long)]
    pose: Option<String>,
    /// Attention method (bu, td, bu+td, bu+butd).
    #[arg(long, default_value = "bu")]
    method: String,
    /// Target template color `r,g,b` (required for top-down on --image).
    #[arg(long)]
    target_color: Option<String>,
    /// Optional experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the PGM maps.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Filter bank file for the bottom-up modes (built-in bank otherwise).
    #[arg(long)]
    filters: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Batch(args) => cmd_batch(&args),
        Cmd::Saliency(args) => cmd_saliency(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

// --- shared plumbing -------------------------------------------------------

/// Formats a float with 6 significant digits, `.` decimal point.
fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).clamp(0, 17) as usize;
    format!("{:.*}", decimals, x)
}

fn load_scene(path: &Path) -> Result<SceneModel> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    load_scenario(&text).with_context(|| format!("parsing scenario {}", path.display()))
}

fn load_bank(path: &Option<PathBuf>) -> Result<Option<FilterBank>> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading filter bank {}", path.display()))?;
    let bank =
        FilterBank::parse(&text).with_context(|| format!("parsing filter bank {}", path.display()))?;
    Ok(Some(bank))
}

fn build_config(
    config: &Option<PathBuf>,
    method: &str,
    seed: u64,
    detection: &str,
    filters: &Option<PathBuf>,
) -> Result<TrialConfig> {
    let mut cfg = TrialConfig::default();
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg = parse_config(&text, cfg)
            .with_context(|| format!("parsing config {}", path.display()))?;
    }
    cfg.method = Mode::parse(method)?;
    cfg.seed = seed;
    cfg.detection = DetectionMode::parse(detection)?;
    cfg.filter_bank = load_bank(filters)?;
    Ok(cfg)
}

fn write_gray_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let map = GrayMap {
        width,
        height,
        data: values.to_vec(),
    };
    write_pgm16(path, width, height, &quantize16(&map))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn scenario_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

// --- run -------------------------------------------------------------------

fn trajectory_csv(result: &TrialResult) -> String {
    let mut csv = String::from("step,x,y,phi_deg,sim_time_s,detected\n");
    let mut cum = 0.0f64;
    let last = result.trajectory.len() - 1;
    for (i, s) in result.trajectory.iter().enumerate() {
        if i > 0 {
            cum += result.step_times[i - 1];
        }
        let detected = result.found && i == last;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            i,
            fmt_sig(s.x),
            fmt_sig(s.y),
            fmt_sig(s.phi.to_degrees()),
            fmt_sig(cum),
            detected
        );
    }
    csv
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let scene = load_scene(&args.scenario)?;
    let cfg = build_config(&args.config, &args.method, args.seed, &args.detection, &args.filters)?;

    let dump_dir = match &args.dump_heatmaps {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Some(dir.clone())
        }
        None => None,
    };

    let mut dump_err: Option<anyhow::Error> = None;
    let result = run_trial_observed(&scene, &cfg, &mut |obs| {
        let Some(dir) = &dump_dir else { return };
        if dump_err.is_some() {
            return;
        }
        let dump = || -> Result<()> {
            let tag = format!("step_{:04}", obs.step);
            write_ppm(&dir.join(format!("{tag}_view.ppm")), &obs.view.color)
                .context("writing view snapshot")?;
            write_gray_pgm(
                &dir.join(format!("{tag}_belief.pgm")),
                obs.belief.width,
                obs.belief.height,
                &obs.belief.values,
            )?;
            write_gray_pgm(
                &dir.join(format!("{tag}_inhibition.pgm")),
                obs.inhibition.width,
                obs.inhibition.height,
                &obs.inhibition.values,
            )?;
            if let Some(sal) = obs.saliency {
                write_gray_pgm(
                    &dir.join(format!("{tag}_saliency.pgm")),
                    sal.width,
                    sal.height,
                    &sal.values,
                )?;
            }
            Ok(())
        };
        if let Err(e) = dump() {
            dump_err = Some(e);
        }
    })?;
    if let Some(e) = dump_err {
        return Err(e);
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let traj_path = args.out.join("trajectory.csv");
    fs::write(&traj_path, trajectory_csv(&result))
        .with_context(|| format!("writing {}", traj_path.display()))?;

    println!(
        "found={} actions={} sim_time_s={} saliency_calls={}",
        result.found,
        result.actions,
        fmt_sig(result.sim_time),
        result.saliency_calls
    );
    Ok(if result.found { 0 } else { 2 })
}

// --- batch -----------------------------------------------------------------

fn improvement_field(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_sig(x),
        None => "-".into(),
    }
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut csv = String::from(
        "scenario,method,trials,found,mean_actions,median_actions,std_actions,\
         mean_time_s,median_time_s,std_time_s,improvement_actions_pct,improvement_time_pct\n",
    );
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.method,
            r.trials,
            r.found_count,
            fmt_sig(r.mean_actions),
            fmt_sig(r.median_actions),
            fmt_sig(r.std_actions),
            fmt_sig(r.mean_time),
            fmt_sig(r.median_time),
            fmt_sig(r.std_time),
            improvement_field(r.improvement_actions),
            improvement_field(r.improvement_time),
        );
    }
    csv
}

fn cmd_batch(args: &BatchArgs) -> Result<u8> {
    if args.trials == 0 {
        bail!("--trials must be >= 1");
    }
    let mut scenes = Vec::new();
    for path in &args.scenario {
        scenes.push((scenario_stem(path), load_scene(path)?));
    }
    let methods: Vec<Mode> = args
        .method
        .iter()
        .map(|m| Mode::parse(m).map_err(Into::into))
        .collect::<Result<_>>()?;
    let base = build_config(&args.config, "nosal", 0, &args.detection, &args.filters)?;

    let batch = run_batch(&scenes, &methods, args.trials, args.seed, &base)?;

    let mut metrics = String::from("scenario,method,seed,found,actions,sim_time_s\n");
    for r in &batch.records {
        let _ = writeln!(
            metrics,
            "{},{},{},{},{},{}",
            r.scenario,
            r.method,
            r.seed,
            r.found,
            r.actions,
            fmt_sig(r.sim_time)
        );
    }
    let summary = summary_csv(&batch.summary);

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let metrics_path = args.out.join("metrics.csv");
    fs::write(&metrics_path, &metrics)
        .with_context(|| format!("writing {}", metrics_path.display()))?;
    let summary_path = args.out.join("summary.csv");
    fs::write(&summary_path, &summary)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    print!("{summary}");
    Ok(0)
}

// --- saliency --------------------------------------------------------------

fn parse_pose(text: &str) -> Result<RobotState> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        bail!("pose must be x,y,phi_deg");
    }
    let x: f64 = parts[0].trim().parse().context("pose x")?;
    let y: f64 = parts[1].trim().parse().context("pose y")?;
    let deg: f64 = parts[2].trim().parse().context("pose phi_deg")?;
    Ok(RobotState::new(x, y, wrap_angle(deg.to_radians())))
}

fn parse_color(text: &str) -> Result<[u8; 3]> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        bail!("color must be r,g,b");
    }
    let mut rgb = [0u8; 3];
    for (slot, part) in rgb.iter_mut().zip(&parts) {
        *slot = part.trim().parse().context("color channel")?;
    }
    Ok(rgb)
}

fn cmd_saliency(args: &SaliencyArgs) -> Result<u8> {
    let cfg = build_config(&args.config, &args.method, 0, "threshold", &args.filters)?;
    let mode = cfg.method;
    if !mode.uses_attention() {
        bail!("method {mode} has no saliency pipeline");
    }

    let (image, scene): (RgbImage, Option<SceneModel>) = match (&args.image, &args.scenario) {
        (Some(img), None) => (
            read_ppm(img).with_context(|| format!("reading {}", img.display()))?,
            None,
        ),
        (None, Some(sc)) => {
            let scene = load_scene(sc)?;
            let pose = match &args.pose {
                Some(p) => parse_pose(p)?,
                None => scene
                    .robot_start
                    .ok_or_else(|| anyhow!("scenario has no robot pose; pass --pose"))?,
            };
            let view = render_view(&scene, &pose, &cfg.camera);
            (view.color, Some(scene))
        }
        _ => bail!("pass exactly one of --image or --scenario"),
    };

    let template: Option<ColorHistogram> = if mode.needs_template() {
        let color = match (&args.target_color, &scene) {
            (Some(c), _) => parse_color(c)?,
            (None, Some(sc)) => sc.target_color,
            (None, None) => bail!("TD requires target color: pass --target-color r,g,b"),
        };
        Some(template_histogram(
            color,
            BACKPROJECT_BINS,
            cfg.attention.backproject_rgb,
        ))
    } else {
        None
    };

    let mut attn = cfg.attention.clone();
    attn.mode = mode;
    let owned_bank;
    let bank = if mode.needs_bank() {
        match &cfg.filter_bank {
            Some(b) => b,
            None => {
                owned_bank = FilterBank::default_bank();
                &owned_bank
            }
        }
    } else {
        owned_bank = FilterBank::default_bank();
        &owned_bank
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let save = |name: &str, map: &SaliencyMap| -> Result<()> {
        write_gray_pgm(&args.out.join(name), map.width, map.height, &map.values)
    };

    let planes = (mode.needs_template()).then(|| {
        if attn.backproject_rgb {
            to_rgb_planes(&image)
        } else {
            to_c1c2c3(&image)
        }
    });
    let bu = mode
        .needs_bank()
        .then(|| -> Result<SaliencyMap> {
            let raw = bottom_up_info(&image, bank, &attn)?;
            Ok(threshold_percentile(&raw, attn.th_aim))
        })
        .transpose()?;

    match mode {
        Mode::Bu => {
            save("bu.pgm", bu.as_ref().unwrap())?;
        }
        Mode::Td => {
            let td = backproject(planes.as_ref().unwrap(), template.as_ref().unwrap());
            save("td.pgm", &td)?;
        }
        Mode::BuTd => {
            let bu = bu.unwrap();
            let td = backproject(planes.as_ref().unwrap(), template.as_ref().unwrap());
            let fused = fuse_bu_td(&bu, &td, &attn)?;
            save("bu.pgm", &bu)?;
            save("td.pgm", &td)?;
            save("fused.pgm", &fused)?;
        }
        Mode::BuMaskTd => {
            let bu = bu.unwrap();
            let td = backproject_masked(
                planes.as_ref().unwrap(),
                template.as_ref().unwrap(),
                Some(&bu),
            );
            let fused = fuse_bu_td(&bu, &td, &attn)?;
            save("bu.pgm", &bu)?;
            save("td.pgm", &td)?;
            save("fused.pgm", &fused)?;
        }
        Mode::Nosal | Mode::Prior => unreachable!("filtered above"),
    }
    println!("saliency maps written to {}", args.out.display());
    Ok(0)
}
