//! The closed search loop — observe, try to detect, update the belief,
//! replan, move — plus seeded batch execution with summary statistics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::VecDeque;

use crate::attention::{
    compute_saliency, template_histogram, AttentionConfig, ColorHistogram, FilterBank, Mode,
    SaliencyMap,
};
use crate::belief::{
    bayes_nondetection_update, fuse_stimuli, init_belief, project_saliency, update_inhibition,
    BeliefGrid, InhibitionGrid, PriorKind,
};
use crate::error::AvsError;
use crate::planner::{apply_motion, plan, PlannerParams};
use crate::scene::{
    is_traversable, line_of_sight, render_view, CameraIntrinsics, RenderedView, RobotState,
    SceneModel,
};
use crate::sensor::{detectability, SensorParams};

/// Joint color histogram resolution used for top-down templates.
pub const BACKPROJECT_BINS: usize = 64;
/// Spread (in cells) of the informed-prior Gaussian.
pub const PRIOR_SIGMA_CELLS: f64 = 3.5;

/// How a rendered observation is turned into a detection event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionMode {
    /// Draw u ~ U[0,1) and detect iff u < detection probability.
    Bernoulli,
    /// Detect iff detection probability >= p_min. Deterministic.
    Threshold { p_min: f64 },
}

impl Default for DetectionMode {
    fn default() -> Self {
        DetectionMode::Bernoulli
    }
}

impl DetectionMode {
    pub fn parse(text: &str) -> Result<Self, AvsError> {
        match text {
            "bernoulli" => Ok(DetectionMode::Bernoulli),
            "threshold" => Ok(DetectionMode::Threshold { p_min: 0.5 }),
            other => Err(AvsError::Validation(format!(
                "unknown detection mode '{other}' (expected bernoulli or threshold)"
            ))),
        }
    }
}

/// Everything one trial needs besides the scene itself.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    /// Search method under test.
    pub method: Mode,
    /// Per-trial RNG seed; fixes detection draws and planner restarts.
    pub seed: u64,
    /// Action budget before the trial is declared a failure.
    pub max_actions: usize,
    /// Detection event semantics.
    pub detection: DetectionMode,
    pub sensor: SensorParams,
    pub planner: PlannerParams,
    pub attention: AttentionConfig,
    pub camera: CameraIntrinsics,
    /// Simulated processing charge per attention step, in seconds.
    pub process_time_s: f64,
    /// Belief inertia when folding in new stimuli, in [0, 1].
    pub epsilon: f64,
    /// Filter bank for the bottom-up modes; `None` uses the built-in bank.
    pub filter_bank: Option<FilterBank>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            method: Mode::Nosal,
            seed: 0,
            max_actions: 500,
            detection: DetectionMode::Bernoulli,
            sensor: SensorParams::default(),
            planner: PlannerParams::default(),
            attention: AttentionConfig::default(),
            camera: CameraIntrinsics::default(),
            process_time_s: 0.0,
            epsilon: 0.5,
            filter_bank: None,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), AvsError> {
        if self.max_actions == 0 {
            return Err(AvsError::Validation("max_actions must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(AvsError::Validation("epsilon must be in [0, 1]".into()));
        }
        if !(self.process_time_s >= 0.0) {
            return Err(AvsError::Validation("process_time_s must be >= 0".into()));
        }
        if let DetectionMode::Threshold { p_min } = self.detection {
            if !(0.0..=1.0).contains(&p_min) {
                return Err(AvsError::Validation("p_min must be in [0, 1]".into()));
            }
        }
        self.sensor.validate()?;
        self.planner.validate()?;
        let mut attn = self.attention.clone();
        attn.mode = self.method;
        attn.validate()
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Whether the target was detected within the budget.
    pub found: bool,
    /// Motions executed; equals the budget exactly when not found.
    pub actions: usize,
    /// Simulated elapsed time: motion plus processing charges.
    pub sim_time: f64,
    /// Visited states, starting at the initial pose (len = actions + 1).
    pub trajectory: Vec<RobotState>,
    /// Belief entropy after each update, preceded by the prior's entropy.
    pub entropy_trace: Vec<f64>,
    /// Per-executed-step elapsed time (processing + motion); sums to
    /// `sim_time` term by term.
    pub step_times: Vec<f64>,
    /// Number of attention-pipeline invocations (0 in NOSAL/PRIOR modes).
    pub saliency_calls: usize,
}

/// Per-step internals handed to a trial observer right after the belief
/// update, before the motion executes.
pub struct StepObservation<'a> {
    pub step: usize,
    pub state: RobotState,
    pub view: &'a RenderedView,
    pub saliency: Option<&'a SaliencyMap>,
    pub belief: &'a BeliefGrid,
    pub inhibition: &'a InhibitionGrid,
}

// --- seeding ---------------------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed from (master seed, scenario index, trial
/// index). Independent of the method so all methods face identical seed
/// sets.
pub fn trial_seed(master: u64, scenario_idx: usize, trial_idx: usize) -> u64 {
    splitmix64(
        splitmix64(master ^ splitmix64(scenario_idx as u64)).wrapping_add(trial_idx as u64),
    )
}

// --- detection -------------------------------------------------------------

/// Samples a detection event for the current pose. The Bernoulli arm always
/// consumes exactly one draw so the stream stays aligned across poses.
pub fn sample_detection(
    rng: &mut ChaCha8Rng,
    scene: &SceneModel,
    s: &RobotState,
    sp: &SensorParams,
    mode: DetectionMode,
) -> bool {
    let visible = line_of_sight(scene, s, scene.target_cell);
    let p = if visible {
        detectability(s, scene.target_cell.center(), sp)
    } else {
        0.0
    };
    match mode {
        DetectionMode::Bernoulli => rng.gen::<f64>() < p,
        // Visibility is required explicitly so a degenerate p_min of 0 still
        // never "detects" an occluded target.
        DetectionMode::Threshold { p_min } => visible && p >= p_min,
    }
}

// --- single trial ----------------------------------------------------------

/// Runs one search trial to detection or budget exhaustion.
pub fn run_trial(scene: &SceneModel, cfg: &TrialConfig) -> Result<TrialResult, AvsError> {
    run_trial_observed(scene, cfg, &mut |_| {})
}

/// `run_trial` with a per-step observer (heatmap dumps, debugging). The
/// observer never influences the trial.
pub fn run_trial_observed(
    scene: &SceneModel,
    cfg: &TrialConfig,
    observer: &mut dyn FnMut(&StepObservation),
) -> Result<TrialResult, AvsError> {
    cfg.validate()?;
    scene.validate()?;
    let start = scene.robot_start.ok_or_else(|| {
        AvsError::Validation("scenario defines no robot start pose".into())
    })?;

    let mut attn = cfg.attention.clone();
    attn.mode = cfg.method;

    let owned_bank;
    let bank: Option<&FilterBank> = if cfg.method.needs_bank() {
        match &cfg.filter_bank {
            Some(b) => Some(b),
            None => {
                owned_bank = FilterBank::default_bank();
                Some(&owned_bank)
            }
        }
    } else {
        None
    };
    let template: Option<ColorHistogram> = cfg.method.needs_template().then(|| {
        template_histogram(scene.target_color, BACKPROJECT_BINS, attn.backproject_rgb)
    });

    let prior = if cfg.method == Mode::Prior {
        PriorKind::Gaussian {
            mu: scene.target_cell,
            sigma_cells: PRIOR_SIGMA_CELLS,
        }
    } else {
        PriorKind::Uniform
    };
    let mut b = init_belief(scene, prior);
    b.epsilon = cfg.epsilon;
    let mut inhib = InhibitionGrid::new(scene.width, scene.height);

    let mut s = start;
    let mut trajectory = vec![s];
    let mut entropy_trace = vec![b.entropy()];
    let mut step_times = Vec::new();
    let mut sim_time = 0.0f64;
    let mut found = false;
    let mut actions = cfg.max_actions;
    let mut saliency_calls = 0usize;
    let mut queue: VecDeque<RobotState> = VecDeque::new();

    let mut det_rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x00D7_EC71));
    let plan_seed_base = splitmix64(cfg.seed ^ 0x0070_A12A);
    let mut replans = 0u64;

    for step in 0..cfg.max_actions {
        let view = render_view(scene, &s, &cfg.camera);
        if sample_detection(&mut det_rng, scene, &s, &cfg.sensor, cfg.detection) {
            found = true;
            actions = step;
            break;
        }

        let mut step_time = 0.0f64;
        let mut saliency = None;
        if cfg.method.uses_attention() {
            let sal = compute_saliency(&view, &attn, bank, template.as_ref())?
                .expect("attention modes produce a map");
            saliency_calls += 1;
            let stim = project_saliency(&view, &sal, scene)?;
            inhib = update_inhibition(inhib, &s, &stim, &cfg.sensor);
            b = fuse_stimuli(b, &stim, &inhib);
            step_time += cfg.process_time_s;
            saliency = Some(sal);
        }
        b = bayes_nondetection_update(b, &s, &cfg.sensor, scene);
        entropy_trace.push(b.entropy());
        observer(&StepObservation {
            step,
            state: s,
            view: &view,
            saliency: saliency.as_ref(),
            belief: &b,
            inhibition: &inhib,
        });

        // Pull the next waypoint, replanning on schedule or when the queued
        // waypoint is no longer executable from here.
        let mut waypoint = None;
        for _attempt in 0..2 {
            if queue.is_empty() {
                let seed = splitmix64(plan_seed_base.wrapping_add(replans));
                replans += 1;
                let res = plan(&b, &s, &cfg.sensor, &cfg.planner, scene, seed);
                queue.extend(
                    res.trajectory
                        .waypoints
                        .iter()
                        .take(cfg.planner.execute_m)
                        .copied(),
                );
            }
            let wp = queue.pop_front().expect("plan yields execute_m waypoints");
            let step_len = (wp.x - s.x).hypot(wp.y - s.y);
            if is_traversable(scene, wp.x, wp.y) && step_len <= cfg.planner.step_len_max + 1e-9 {
                waypoint = Some(wp);
                break;
            }
            queue.clear();
        }
        let wp = waypoint.unwrap_or(RobotState::new(s.x, s.y, s.phi));

        let (next, dt) = apply_motion(&s, &wp, &cfg.planner);
        s = next;
        step_time += dt;
        sim_time += step_time;
        step_times.push(step_time);
        trajectory.push(s);
    }

    Ok(TrialResult {
        found,
        actions,
        sim_time,
        trajectory,
        entropy_trace,
        step_times,
        saliency_calls,
    })
}

// --- batch execution -------------------------------------------------------

/// One row of the per-trial metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scenario: String,
    pub method: Mode,
    pub seed: u64,
    pub found: bool,
    pub actions: usize,
    pub sim_time: f64,
}

/// Aggregate statistics for one (scenario, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: Mode,
    pub trials: usize,
    pub found_count: usize,
    pub mean_actions: f64,
    pub median_actions: f64,
    pub std_actions: f64,
    pub mean_time: f64,
    pub median_time: f64,
    pub std_time: f64,
    /// Percent reduction in mean actions vs the NOSAL baseline; `None` on
    /// the baseline row itself or when no baseline ran.
    pub improvement_actions: Option<f64>,
    /// Percent reduction in mean search time vs the NOSAL baseline.
    pub improvement_time: Option<f64>,
}

/// Full batch output: raw per-trial rows plus per-pair summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs `trials_per_pair` seeded trials for every (scenario, method) pair
/// and aggregates. Per-trial seeds depend only on (master seed, scenario,
/// trial), so every method sees identical seed sets. Trials run in parallel
/// when `AVS_THREADS` allows; aggregation order is fixed regardless.
pub fn run_batch(
    scenes: &[(String, SceneModel)],
    methods: &[Mode],
    trials_per_pair: usize,
    master_seed: u64,
    base: &TrialConfig,
) -> Result<BatchResult, AvsError> {
    if scenes.is_empty() || methods.is_empty() || trials_per_pair == 0 {
        return Err(AvsError::Validation(
            "batch needs at least one scenario, one method, one trial".into(),
        ));
    }

    struct Job {
        scene_idx: usize,
        method: Mode,
        seed: u64,
    }
    let mut jobs = Vec::with_capacity(scenes.len() * methods.len() * trials_per_pair);
    for (scene_idx, _) in scenes.iter().enumerate() {
        for &method in methods {
            for trial_idx in 0..trials_per_pair {
                jobs.push(Job {
                    scene_idx,
                    method,
                    seed: trial_seed(master_seed, scene_idx, trial_idx),
                });
            }
        }
    }

    let n_threads = std::env::var("AVS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_threads)
        .build()
        .map_err(|e| AvsError::Validation(format!("thread pool: {e}")))?;

    let records: Result<Vec<TrialRecord>, AvsError> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (name, scene) = &scenes[job.scene_idx];
                let cfg = TrialConfig {
                    method: job.method,
                    seed: job.seed,
                    ..base.clone()
                };
                let r = run_trial(scene, &cfg)?;
                Ok(TrialRecord {
                    scenario: name.clone(),
                    method: job.method,
                    seed: job.seed,
                    found: r.found,
                    actions: r.actions,
                    sim_time: r.sim_time,
                })
            })
            .collect()
    });
    let records = records?;

    // Summaries in (scenario, method) listing order; baseline = first NOSAL
    // summary of the same scenario.
    let mut summary = Vec::with_capacity(scenes.len() * methods.len());
    for (name, _) in scenes {
        let mut base_mean_actions = None;
        let mut base_mean_time = None;
        for &method in methods {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| &r.scenario == name && r.method == method)
                .collect();
            let actions: Vec<f64> = rows.iter().map(|r| r.actions as f64).collect();
            let times: Vec<f64> = rows.iter().map(|r| r.sim_time).collect();
            let mean_actions = mean(&actions);
            let mean_time = mean(&times);
            let is_baseline = method == Mode::Nosal && base_mean_actions.is_none();
            let improvement = |base: Option<f64>, val: f64| -> Option<f64> {
                match base {
                    Some(b) if b > 0.0 => Some((1.0 - val / b) * 100.0),
                    _ => None,
                }
            };
            summary.push(SummaryRow {
                scenario: name.clone(),
                method,
                trials: rows.len(),
                found_count: rows.iter().filter(|r| r.found).count(),
                mean_actions,
                median_actions: median(&actions),
                std_actions: sample_std(&actions),
                mean_time,
                median_time: median(&times),
                std_time: sample_std(&times),
                improvement_actions: if is_baseline {
                    None
                } else {
                    improvement(base_mean_actions, mean_actions)
                },
                improvement_time: if is_baseline {
                    None
                } else {
                    improvement(base_mean_time, mean_time)
                },
            });
            if is_baseline {
                base_mean_actions = Some(mean_actions);
                base_mean_time = Some(mean_time);
            }
        }
    }

    Ok(BatchResult { records, summary })
}
