//! Non-myopic trajectory planning: maximizes the probability of detecting
//! the target over an N-step horizon by projected gradient ascent with
//! finite-difference gradients and multi-start, plus an exhaustive oracle
//! for small instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::BeliefGrid;
use crate::error::AvsError;
use crate::scene::{is_traversable, line_of_sight, wrap_angle, Cell, RobotState, SceneModel};
use crate::sensor::{detectability, SensorParams};

/// Maximum rotational velocity in radians per second (45 deg/s).
pub const ROT_RATE: f64 = std::f64::consts::FRAC_PI_4;
/// Detectability below this is treated as out of range: the line-of-sight
/// test is skipped because the factor is 1 to within f64 noise either way.
const NEGLIGIBLE_DETECT: f64 = 1e-15;
/// Positions closer than this are the same point for heading purposes.
const POS_EPS: f64 = 1e-9;

/// Receding-horizon planner parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerParams {
    /// Planned steps per horizon.
    pub horizon_n: usize,
    /// Steps executed before replanning.
    pub execute_m: usize,
    /// Future-value discount per second of travel, in [0, 1].
    pub lambda: f64,
    /// Translational speed in m/s.
    pub v: f64,
    /// Maximum distance between consecutive waypoints in meters.
    pub step_len_max: f64,
    /// Number of random multi-start seeds (one greedy seed is always added).
    pub restarts: usize,
    /// Central finite-difference step in meters.
    pub fd_step: f64,
    /// Gradient-ascent iteration cap per start.
    pub max_iters: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            horizon_n: 3,
            execute_m: 2,
            lambda: 0.95,
            v: 0.7,
            // v * dt with dt = 2 s per action step
            step_len_max: 1.4,
            restarts: 8,
            fd_step: 0.05,
            max_iters: 60,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), AvsError> {
        if self.execute_m == 0 || self.execute_m > self.horizon_n {
            return Err(AvsError::Validation(
                "need 1 <= execute_m <= horizon_n".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(AvsError::Validation("lambda must be in [0, 1]".into()));
        }
        if !(0.1..=0.7).contains(&self.v) {
            return Err(AvsError::Validation("v must be in [0.1, 0.7]".into()));
        }
        if !(self.step_len_max > 0.0) {
            return Err(AvsError::Validation("step_len_max must be > 0".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(AvsError::Validation("fd_step must be > 0".into()));
        }
        Ok(())
    }
}

/// A planned waypoint sequence; each waypoint's heading is its direction of
/// arrival (inherited when the step has no length).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: RobotState,
    pub waypoints: Vec<RobotState>,
}

impl Trajectory {
    /// Stand-still plan: hold the current pose for `n` observation steps.
    pub fn stand_still(start: RobotState, n: usize) -> Self {
        Trajectory {
            start,
            waypoints: vec![start; n],
        }
    }

    /// Derives waypoint states (position + arrival heading) from a position
    /// chain.
    pub fn from_positions(start: RobotState, positions: &[(f64, f64)]) -> Self {
        let mut waypoints = Vec::with_capacity(positions.len());
        let mut prev = start;
        for &(x, y) in positions {
            let dx = x - prev.x;
            let dy = y - prev.y;
            let phi = if dx.hypot(dy) > POS_EPS {
                dy.atan2(dx)
            } else {
                prev.phi
            };
            let s = RobotState::new(x, y, phi);
            waypoints.push(s);
            prev = s;
        }
        Trajectory { start, waypoints }
    }

    /// Final state of the plan (the start when the plan is empty).
    pub fn end_state(&self) -> RobotState {
        *self.waypoints.last().unwrap_or(&self.start)
    }
}

/// Planner output: best trajectory found, its utility, and optimizer
/// bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    /// Probability of detecting the target over the horizon, in [0, 1].
    pub utility: f64,
    /// Total accepted gradient iterations across all starts.
    pub iterations: usize,
    /// Multi-start seeds optimized (greedy seed included).
    pub restarts_used: usize,
}

/// Future-detection heuristic `1 - lambda^(dist / v)`: 0 when already at the
/// cell or when lambda is 1, approaching 1 for distant cells.
pub fn heuristic(s_end: &RobotState, tau: (f64, f64), pp: &PlannerParams) -> f64 {
    let dist = (tau.0 - s_end.x).hypot(tau.1 - s_end.y);
    1.0 - pp.lambda.powf(dist / pp.v)
}

/// Expected detection utility of a trajectory under the current belief:
/// `1 - sum_c [prod_i nondetect(s_i, c)] * H(s_N, c) * b(c)`, clamped to
/// [0, 1].
pub fn expected_detection_utility(
    b: &BeliefGrid,
    traj: &Trajectory,
    sp: &SensorParams,
    pp: &PlannerParams,
    scene: &SceneModel,
) -> f64 {
    let eval = UtilityEval::new(b, sp, pp, scene);
    eval.utility(&traj.start, &traj.waypoints)
}

/// Central finite-difference gradient of the utility with respect to the
/// flattened waypoint positions `(x_1, y_1, ..., x_N, y_N)`, exactly as the
/// optimizer uses it internally.
pub fn fd_gradient(
    b: &BeliefGrid,
    traj: &Trajectory,
    sp: &SensorParams,
    pp: &PlannerParams,
    scene: &SceneModel,
    step: f64,
) -> Vec<f64> {
    let eval = UtilityEval::new(b, sp, pp, scene);
    let positions: Vec<(f64, f64)> = traj.waypoints.iter().map(|w| (w.x, w.y)).collect();
    let mut ws = WorkingSet::new(&eval, traj.start, positions);
    ws.gradient(&eval, step)
}

// --- utility evaluation ----------------------------------------------------

/// Belief support flattened for fast per-state sweeps.
struct UtilityEval<'a> {
    scene: &'a SceneModel,
    sp: &'a SensorParams,
    pp: &'a PlannerParams,
    /// (center x, center y, belief mass, cell) for every positive-mass cell.
    cells: Vec<(f64, f64, f64, Cell)>,
}

impl<'a> UtilityEval<'a> {
    fn new(b: &BeliefGrid, sp: &'a SensorParams, pp: &'a PlannerParams, scene: &'a SceneModel) -> Self {
        debug_assert_eq!((b.width, b.height), (scene.width, scene.height));
        let mut cells = Vec::new();
        for cy in 0..b.height {
            for cx in 0..b.width {
                let mass = b.values[cy * b.width + cx];
                if mass > 0.0 {
                    let cell = Cell::new(cx, cy);
                    let (x, y) = cell.center();
                    cells.push((x, y, mass, cell));
                }
            }
        }
        UtilityEval { scene, sp, pp, cells }
    }

    /// Non-detection factor for one state and support cell, line-of-sight
    /// aware. Skips the visibility test when detection is impossible anyway.
    #[inline]
    fn factor(&self, s: &RobotState, idx: usize) -> f64 {
        let (x, y, _, cell) = self.cells[idx];
        let det = detectability(s, (x, y), self.sp);
        if det <= NEGLIGIBLE_DETECT {
            1.0 - det
        } else if line_of_sight(self.scene, s, cell) {
            1.0 - det
        } else {
            1.0
        }
    }

    /// Fills `out` with the per-cell non-detection factors of one state.
    fn nondetect_vec(&self, s: &RobotState, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.cells.len()).map(|i| self.factor(s, i)));
    }

    /// Fills `out` with the per-cell horizon heuristic of the end state.
    fn horizon_vec(&self, end: &RobotState, out: &mut Vec<f64>) {
        out.clear();
        let pp = self.pp;
        if pp.lambda <= 0.0 {
            // 0^x: 1 at distance 0, else 0 — heuristic 0 or 1 respectively.
            out.extend(self.cells.iter().map(|&(x, y, _, _)| {
                let d = (x - end.x).hypot(y - end.y);
                if d > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }));
            return;
        }
        let k = pp.lambda.ln() / pp.v; // <= 0
        out.extend(self.cells.iter().map(|&(x, y, _, _)| {
            let d = (x - end.x).hypot(y - end.y);
            1.0 - (k * d).exp()
        }));
    }

    /// Full utility of a waypoint chain.
    fn utility(&self, start: &RobotState, waypoints: &[RobotState]) -> f64 {
        let n = self.cells.len();
        let mut prod = vec![1.0f64; n];
        for s in waypoints {
            for i in 0..n {
                prod[i] *= self.factor(s, i);
            }
        }
        let end = waypoints.last().unwrap_or(start);
        let mut h = Vec::with_capacity(n);
        self.horizon_vec(end, &mut h);
        let mut miss = 0.0;
        for i in 0..n {
            miss += prod[i] * h[i] * self.cells[i].2;
        }
        (1.0 - miss).clamp(0.0, 1.0)
    }
}

/// Mutable optimizer state for one start: positions, derived states, cached
/// per-state factor vectors, and the end-state horizon vector.
struct WorkingSet {
    start: RobotState,
    positions: Vec<(f64, f64)>,
    states: Vec<RobotState>,
    vecs: Vec<Vec<f64>>,
    hvec: Vec<f64>,
}

impl WorkingSet {
    fn new(eval: &UtilityEval, start: RobotState, positions: Vec<(f64, f64)>) -> Self {
        let n = positions.len();
        let mut ws = WorkingSet {
            start,
            positions,
            states: Vec::with_capacity(n),
            vecs: vec![Vec::new(); n],
            hvec: Vec::new(),
        };
        ws.refresh(eval);
        ws
    }

    /// Recomputes all derived state after `positions` changed.
    fn refresh(&mut self, eval: &UtilityEval) {
        self.states = Trajectory::from_positions(self.start, &self.positions).waypoints;
        for (i, s) in self.states.iter().enumerate() {
            eval.nondetect_vec(s, &mut self.vecs[i]);
        }
        let end = self.states.last().unwrap_or(&self.start);
        eval.horizon_vec(end, &mut self.hvec);
    }

    fn utility(&self, eval: &UtilityEval) -> f64 {
        let n = eval.cells.len();
        let mut miss = 0.0;
        for c in 0..n {
            let mut p = 1.0;
            for v in &self.vecs {
                p *= v[c];
            }
            miss += p * self.hvec[c] * eval.cells[c].2;
        }
        (1.0 - miss).clamp(0.0, 1.0)
    }

    /// Central-difference gradient over the flattened positions. Perturbing
    /// waypoint i refreshes only the factor vectors of states i and i+1
    /// (arrival headings) and, for the last waypoint, the horizon vector.
    fn gradient(&mut self, eval: &UtilityEval, step: f64) -> Vec<f64> {
        let n_wp = self.positions.len();
        let n_cells = eval.cells.len();
        let mut grad = vec![0.0; 2 * n_wp];

        let mut scratch_i: Vec<f64> = Vec::new();
        let mut scratch_next: Vec<f64> = Vec::new();
        let mut scratch_h: Vec<f64> = Vec::new();
        let mut other_prod: Vec<f64> = vec![1.0; n_cells];

        for i in 0..n_wp {
            // Product over states other than i and i+1 is shared by all four
            // perturbed evaluations of this waypoint.
            for p in other_prod.iter_mut() {
                *p = 1.0;
            }
            for (j, v) in self.vecs.iter().enumerate() {
                if j != i && j != i + 1 {
                    for (p, &f) in other_prod.iter_mut().zip(v) {
                        *p *= f;
                    }
                }
            }

            for axis in 0..2 {
                let mut signed = [0.0f64; 2];
                for (si, sign) in [1.0f64, -1.0].iter().enumerate() {
                    let mut pos_i = self.positions[i];
                    if axis == 0 {
                        pos_i.0 += sign * step;
                    } else {
                        pos_i.1 += sign * step;
                    }
                    // Rebuild states i and i+1 with the perturbed position.
                    let prev = if i == 0 { self.start } else { self.states[i - 1] };
                    let dxi = pos_i.0 - prev.x;
                    let dyi = pos_i.1 - prev.y;
                    let phi_i = if dxi.hypot(dyi) > POS_EPS {
                        dyi.atan2(dxi)
                    } else {
                        prev.phi
                    };
                    let state_i = RobotState::new(pos_i.0, pos_i.1, phi_i);
                    eval.nondetect_vec(&state_i, &mut scratch_i);

                    let has_next = i + 1 < n_wp;
                    if has_next {
                        let (nx, ny) = self.positions[i + 1];
                        let dxn = nx - pos_i.0;
                        let dyn_ = ny - pos_i.1;
                        let phi_n = if dxn.hypot(dyn_) > POS_EPS {
                            dyn_.atan2(dxn)
                        } else {
                            state_i.phi
                        };
                        let state_n = RobotState::new(nx, ny, phi_n);
                        eval.nondetect_vec(&state_n, &mut scratch_next);
                    }

                    let h = if i + 1 == n_wp {
                        // Last waypoint moved: horizon vector changes.
                        eval.horizon_vec(&state_i, &mut scratch_h);
                        &scratch_h
                    } else {
                        &self.hvec
                    };

                    let mut miss = 0.0;
                    for c in 0..n_cells {
                        let mut p = other_prod[c] * scratch_i[c];
                        if has_next {
                            p *= scratch_next[c];
                        }
                        miss += p * h[c] * eval.cells[c].2;
                    }
                    signed[si] = (1.0 - miss).clamp(0.0, 1.0);
                }
                grad[2 * i + axis] = (signed[0] - signed[1]) / (2.0 * step);
            }
        }
        grad
    }
}

// --- feasibility and projection --------------------------------------------

/// Sampling interval for segment-obstacle checks, in meters.
const SEGMENT_SAMPLE: f64 = 0.1;

fn segment_clear(scene: &SceneModel, a: (f64, f64), b: (f64, f64)) -> bool {
    let dist = (b.0 - a.0).hypot(b.1 - a.1);
    let steps = (dist / SEGMENT_SAMPLE).ceil() as usize;
    for k in 0..=steps {
        let t = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
        let x = a.0 + t * (b.0 - a.0);
        let y = a.1 + t * (b.1 - a.1);
        if !is_traversable(scene, x, y) {
            return false;
        }
    }
    true
}

/// Full feasibility: every waypoint in a free cell, every step within
/// length, every connecting segment clear of obstacles.
fn chain_feasible(scene: &SceneModel, pp: &PlannerParams, start: RobotState, positions: &[(f64, f64)]) -> bool {
    let mut prev = (start.x, start.y);
    for &p in positions {
        let d = (p.0 - prev.0).hypot(p.1 - prev.1);
        if d > pp.step_len_max + 1e-9 {
            return false;
        }
        if !is_traversable(scene, p.0, p.1) {
            return false;
        }
        if !segment_clear(scene, prev, p) {
            return false;
        }
        prev = p;
    }
    true
}

/// Nearest free cell center to a point (row-major tie order).
fn nearest_free_center(scene: &SceneModel, x: f64, y: f64) -> (f64, f64) {
    let mut best = (0.5, 0.5);
    let mut best_d2 = f64::INFINITY;
    for cy in 0..scene.height {
        for cx in 0..scene.width {
            let cell = Cell::new(cx, cy);
            if scene.is_obstacle(cell) {
                continue;
            }
            let (cxc, cyc) = cell.center();
            let d2 = (cxc - x).powi(2) + (cyc - y).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best = (cxc, cyc);
            }
        }
    }
    best
}

/// Projects a position chain into the constraint set: map bounds, per-step
/// length, and free cells. Segment clearance is handled by the feasibility
/// filter, not the projection.
fn project_chain(scene: &SceneModel, pp: &PlannerParams, start: RobotState, positions: &mut [(f64, f64)]) {
    let margin = 0.05;
    let (wmax, hmax) = (scene.width as f64 - margin, scene.height as f64 - margin);
    let mut prev = (start.x, start.y);
    for p in positions.iter_mut() {
        let mut cand = *p;
        for _attempt in 0..4 {
            cand.0 = cand.0.clamp(margin, wmax);
            cand.1 = cand.1.clamp(margin, hmax);
            let d = (cand.0 - prev.0).hypot(cand.1 - prev.1);
            if d > pp.step_len_max {
                let scale = pp.step_len_max / d;
                cand.0 = prev.0 + (cand.0 - prev.0) * scale;
                cand.1 = prev.1 + (cand.1 - prev.1) * scale;
            }
            if is_traversable(scene, cand.0, cand.1) {
                break;
            }
            cand = nearest_free_center(scene, cand.0, cand.1);
        }
        if !is_traversable(scene, cand.0, cand.1)
            || (cand.0 - prev.0).hypot(cand.1 - prev.1) > pp.step_len_max + 1e-9
        {
            cand = prev; // give up on this step: collapse onto the previous point
        }
        *p = cand;
        prev = cand;
    }
}

// --- planning --------------------------------------------------------------

/// Optimizes an N-step waypoint plan by multi-start projected gradient
/// ascent on the expected detection utility. Deterministic for a fixed seed.
pub fn plan(
    b: &BeliefGrid,
    s: &RobotState,
    sp: &SensorParams,
    pp: &PlannerParams,
    scene: &SceneModel,
    rng_seed: u64,
) -> PlanResult {
    pp.validate().expect("planner params must validate");
    let eval = UtilityEval::new(b, sp, pp, scene);
    let n = pp.horizon_n;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // Seed trajectories: greedy toward the belief argmax, then random.
    let mut seeds: Vec<Vec<(f64, f64)>> = Vec::with_capacity(pp.restarts + 1);
    let target = b.argmax().center();
    let mut greedy = Vec::with_capacity(n);
    let mut prev = (s.x, s.y);
    for _ in 0..n {
        let dx = target.0 - prev.0;
        let dy = target.1 - prev.1;
        let d = dx.hypot(dy);
        let step = (pp.step_len_max * 0.98).min(d);
        let next = if d > POS_EPS {
            (prev.0 + dx / d * step, prev.1 + dy / d * step)
        } else {
            prev
        };
        greedy.push(next);
        prev = next;
    }
    seeds.push(greedy);
    for _ in 0..pp.restarts {
        let mut chain = Vec::with_capacity(n);
        let mut prev = (s.x, s.y);
        for _ in 0..n {
            let mut accepted = prev;
            for _try in 0..8 {
                let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                let len = rng.gen_range(0.2..0.98) * pp.step_len_max;
                let cand = (prev.0 + ang.cos() * len, prev.1 + ang.sin() * len);
                if is_traversable(scene, cand.0, cand.1) && segment_clear(scene, prev, cand) {
                    accepted = cand;
                    break;
                }
            }
            chain.push(accepted);
            prev = accepted;
        }
        seeds.push(chain);
    }

    // Stand-still is always feasible and anchors the candidate list.
    let mut candidates: Vec<Vec<(f64, f64)>> = vec![vec![(s.x, s.y); n]];
    let mut iterations = 0usize;

    for seed in seeds {
        let mut positions = seed;
        project_chain(scene, pp, *s, &mut positions);
        let mut ws = WorkingSet::new(&eval, *s, positions.clone());
        let mut current = ws.utility(&eval);
        let mut best_feasible = chain_feasible(scene, pp, *s, &positions).then(|| positions.clone());
        let mut best_feasible_u = best_feasible.is_some().then_some(current).unwrap_or(-1.0);

        for _iter in 0..pp.max_iters {
            let grad = ws.gradient(&eval, pp.fd_step);
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-10 {
                break;
            }
            // Backtracking line search along the normalized ascent direction.
            let mut improved = false;
            let mut move_len = 0.7 * pp.step_len_max;
            for _ in 0..5 {
                let mut trial: Vec<(f64, f64)> = ws
                    .positions
                    .iter()
                    .enumerate()
                    .map(|(k, &(x, y))| {
                        (
                            x + grad[2 * k] / gnorm * move_len,
                            y + grad[2 * k + 1] / gnorm * move_len,
                        )
                    })
                    .collect();
                project_chain(scene, pp, *s, &mut trial);
                let trial_ws = WorkingSet::new(&eval, *s, trial);
                let u = trial_ws.utility(&eval);
                if u > current + 1e-12 {
                    ws = trial_ws;
                    current = u;
                    improved = true;
                    iterations += 1;
                    if current > best_feasible_u && chain_feasible(scene, pp, *s, &ws.positions) {
                        best_feasible_u = current;
                        best_feasible = Some(ws.positions.clone());
                    }
                    break;
                }
                move_len *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if let Some(p) = best_feasible {
            candidates.push(p);
        }
    }

    // Final selection with the exact public utility, first-wins on ties.
    let mut best_traj = Trajectory::stand_still(*s, n);
    let mut best_u = -1.0;
    for positions in &candidates {
        let traj = Trajectory::from_positions(*s, positions);
        let u = expected_detection_utility(b, &traj, sp, pp, scene);
        if u > best_u {
            best_u = u;
            best_traj = traj;
        }
    }

    PlanResult {
        trajectory: best_traj,
        utility: best_u,
        iterations,
        restarts_used: pp.restarts + 1,
    }
}

/// Compass action set for the exhaustive oracle: 8 directions at a fixed
/// step plus stand-still.
pub fn compass_action_set(step: f64) -> Vec<(f64, f64)> {
    let mut actions = vec![(0.0, 0.0)];
    for k in 0..8 {
        let ang = k as f64 * std::f64::consts::FRAC_PI_4;
        actions.push((step * ang.cos(), step * ang.sin()));
    }
    actions
}

/// Exhaustively enumerates every feasible action sequence over the horizon
/// and returns the exact utility argmax. Limited to small instances.
pub fn brute_force_plan(
    b: &BeliefGrid,
    s: &RobotState,
    sp: &SensorParams,
    pp: &PlannerParams,
    scene: &SceneModel,
    action_set: &[(f64, f64)],
) -> Result<PlanResult, AvsError> {
    if scene.width > 8 || scene.height > 8 {
        return Err(AvsError::Validation(format!(
            "brute force limited to 8x8 grids, got {}x{}",
            scene.width, scene.height
        )));
    }
    if pp.horizon_n > 3 {
        return Err(AvsError::Validation("brute force limited to horizon 3".into()));
    }
    if action_set.len() > 9 {
        return Err(AvsError::Validation("brute force limited to 9 actions".into()));
    }

    let n = pp.horizon_n;
    let mut best_traj = Trajectory::stand_still(*s, n);
    let mut best_u = expected_detection_utility(b, &best_traj, sp, pp, scene);
    let mut evaluated = 0usize;

    let mut chain: Vec<(f64, f64)> = Vec::with_capacity(n);
    enumerate(
        scene,
        pp,
        action_set,
        (s.x, s.y),
        &mut chain,
        n,
        &mut |positions| {
            let traj = Trajectory::from_positions(*s, positions);
            let u = expected_detection_utility(b, &traj, sp, pp, scene);
            evaluated += 1;
            if u > best_u {
                best_u = u;
                best_traj = traj;
            }
        },
    );

    Ok(PlanResult {
        trajectory: best_traj,
        utility: best_u,
        iterations: evaluated,
        restarts_used: 0,
    })
}

fn enumerate(
    scene: &SceneModel,
    pp: &PlannerParams,
    actions: &[(f64, f64)],
    prev: (f64, f64),
    chain: &mut Vec<(f64, f64)>,
    remaining: usize,
    visit: &mut impl FnMut(&[(f64, f64)]),
) {
    if remaining == 0 {
        visit(chain);
        return;
    }
    for &(dx, dy) in actions {
        let next = (prev.0 + dx, prev.1 + dy);
        if dx.hypot(dy) > pp.step_len_max + 1e-9 {
            continue;
        }
        if !is_traversable(scene, next.0, next.1) || !segment_clear(scene, prev, next) {
            continue;
        }
        chain.push(next);
        enumerate(scene, pp, actions, next, chain, remaining - 1, visit);
        chain.pop();
    }
}

/// Moves the robot to a waypoint: heading becomes the bearing of travel (or
/// the waypoint's own heading for a pure rotation), elapsed time is turn
/// time at 45 deg/s plus travel time at `pp.v`.
pub fn apply_motion(s: &RobotState, waypoint: &RobotState, pp: &PlannerParams) -> (RobotState, f64) {
    let dx = waypoint.x - s.x;
    let dy = waypoint.y - s.y;
    let dist = dx.hypot(dy);
    let heading = if dist > POS_EPS { dy.atan2(dx) } else { waypoint.phi };
    let turn = wrap_angle(heading - s.phi).abs();
    let elapsed = turn / ROT_RATE + dist / pp.v;
    (RobotState::new(waypoint.x, waypoint.y, heading), elapsed)
}
