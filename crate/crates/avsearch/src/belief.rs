//! Bayesian target-location belief over the grid: priors, saliency
//! projection into cell stimuli, inhibition of return, stimulus fusion, and
//! recursive non-detection updates.

use crate::attention::SaliencyMap;
use crate::error::AvsError;
use crate::scene::{line_of_sight, Cell, RenderedView, RobotState, SceneModel};
use crate::sensor::{nondetection_prob, SensorParams};

/// Prior shape for a fresh belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    /// Equal mass on every free cell.
    Uniform,
    /// Isotropic normal over cell indices, zeroed on obstacles and
    /// renormalized.
    Gaussian { mu: Cell, sigma_cells: f64 },
}

/// Per-cell probability that the target occupies the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major; obstacle cells stay exactly 0.
    pub values: Vec<f64>,
    /// Smoothing weight on past belief when fusing new stimuli, in [0, 1].
    pub epsilon: f64,
    pub prior: PriorKind,
}

/// Per-cell inhibition-of-return factor in [0, 1], starting at 1 and only
/// ever decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct InhibitionGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Saliency mass projected onto world cells; zero where nothing projected.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl BeliefGrid {
    #[inline]
    pub fn at(&self, c: Cell) -> f64 {
        self.values[c.cy * self.width + c.cx]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Cell with the highest belief (first such cell in row-major order).
    pub fn argmax(&self) -> Cell {
        let mut best = 0usize;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        Cell::new(best % self.width, best / self.width)
    }

    /// Shannon entropy in nats; zero-mass cells contribute 0.
    pub fn entropy(&self) -> f64 {
        -self
            .values
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }
}

impl InhibitionGrid {
    /// All-ones grid (nothing inhibited yet).
    pub fn new(width: usize, height: usize) -> Self {
        InhibitionGrid {
            width,
            height,
            values: vec![1.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, c: Cell) -> f64 {
        self.values[c.cy * self.width + c.cx]
    }
}

impl StimulusField {
    pub fn zeros(width: usize, height: usize) -> Self {
        StimulusField {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn has_mass(&self) -> bool {
        self.values.iter().any(|&v| v > 0.0)
    }
}

/// Builds the initial belief for a scene: uniform over free cells, or a
/// truncated Gaussian centered on `mu`.
pub fn init_belief(scene: &SceneModel, prior: PriorKind) -> BeliefGrid {
    let n = scene.width * scene.height;
    let mut values = vec![0.0; n];
    match prior {
        PriorKind::Uniform => {
            let free = scene.free_cell_count() as f64;
            for cy in 0..scene.height {
                for cx in 0..scene.width {
                    if !scene.is_obstacle(Cell::new(cx, cy)) {
                        values[cy * scene.width + cx] = 1.0 / free;
                    }
                }
            }
        }
        PriorKind::Gaussian { mu, sigma_cells } => {
            assert!(scene.in_bounds(mu), "gaussian prior mean out of bounds");
            let inv_two_s2 = 1.0 / (2.0 * sigma_cells * sigma_cells);
            for cy in 0..scene.height {
                for cx in 0..scene.width {
                    if scene.is_obstacle(Cell::new(cx, cy)) {
                        continue;
                    }
                    let dx = cx as f64 - mu.cx as f64;
                    let dy = cy as f64 - mu.cy as f64;
                    values[cy * scene.width + cx] = (-(dx * dx + dy * dy) * inv_two_s2).exp();
                }
            }
            let total: f64 = values.iter().sum();
            assert!(total > 0.0, "gaussian prior has no mass on free cells");
            for v in &mut values {
                *v /= total;
            }
        }
    }
    BeliefGrid {
        width: scene.width,
        height: scene.height,
        values,
        epsilon: 0.5,
        prior,
    }
}

/// Pools per-pixel saliency onto the world cells each pixel's ray hit: a
/// cell's stimulus is the mean saliency over all pixels that hit it.
pub fn project_saliency(
    view: &RenderedView,
    map: &SaliencyMap,
    scene: &SceneModel,
) -> Result<StimulusField, AvsError> {
    if map.width != view.color.width || map.height != view.color.height {
        return Err(AvsError::ShapeMismatch(format!(
            "saliency {}x{} vs view {}x{}",
            map.width, map.height, view.color.width, view.color.height
        )));
    }
    let mut sum = vec![0.0f64; scene.width * scene.height];
    let mut hits = vec![0u32; scene.width * scene.height];
    for (i, hit) in view.ray_hits.iter().enumerate() {
        let Some(cell) = hit else { continue };
        if scene.is_obstacle(*cell) {
            continue; // walls can look salient but never host the target
        }
        let idx = cell.cy * scene.width + cell.cx;
        hits[idx] += 1;
        let v = map.values[i];
        if v > 0.0 {
            sum[idx] += v;
        }
    }
    let values = sum
        .iter()
        .zip(&hits)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    Ok(StimulusField {
        width: scene.width,
        height: scene.height,
        values,
    })
}

/// Applies inhibition of return: every cell carrying stimulus is scaled by
/// `clamp(dist(s, cell) / (2 (d_max - d_min)), 0, 1)`, so nearby inspected
/// stimuli are suppressed hard and distant ones barely.
pub fn update_inhibition(
    mut inhib: InhibitionGrid,
    s: &RobotState,
    stim: &StimulusField,
    p: &SensorParams,
) -> InhibitionGrid {
    assert_eq!(
        (inhib.width, inhib.height),
        (stim.width, stim.height),
        "inhibition and stimulus grids must match"
    );
    let denom = p.d_max - p.d_min;
    for cy in 0..inhib.height {
        for cx in 0..inhib.width {
            let idx = cy * inhib.width + cx;
            if stim.values[idx] > 0.0 {
                let (tx, ty) = Cell::new(cx, cy).center();
                let dist = ((tx - s.x).powi(2) + (ty - s.y).powi(2)).sqrt();
                let factor = (0.5 * dist / denom).clamp(0.0, 1.0);
                inhib.values[idx] *= factor;
            }
        }
    }
    inhib
}

/// Folds new stimuli into the belief: the inhibited stimulus field is
/// normalized into a candidate distribution and blended as
/// `epsilon * old + (1 - epsilon) * candidate`. Without positive stimulus
/// mass the belief is returned unchanged.
pub fn fuse_stimuli(b: BeliefGrid, stim: &StimulusField, inhib: &InhibitionGrid) -> BeliefGrid {
    assert_eq!((b.width, b.height), (stim.width, stim.height));
    assert_eq!((b.width, b.height), (inhib.width, inhib.height));
    if !stim.has_mass() {
        return b;
    }
    let weighted: Vec<f64> = stim
        .values
        .iter()
        .zip(&inhib.values)
        .map(|(&s, &i)| s * i)
        .collect();
    let mass: f64 = weighted.iter().sum();
    if mass <= 0.0 {
        // Inhibition wiped all new evidence; nothing to fold in.
        return b;
    }
    let mut out = b;
    let eps = out.epsilon;
    let mut total = 0.0;
    for (v, w) in out.values.iter_mut().zip(&weighted) {
        *v = eps * *v + (1.0 - eps) * (w / mass);
        total += *v;
    }
    for v in &mut out.values {
        *v /= total;
    }
    out
}

/// Reweights the belief cell-by-cell (`weights` in [0, 1], row-major) and
/// renormalizes. Weights of exactly 1 everywhere return the belief
/// unchanged, bit for bit.
pub fn bayes_reweight(b: BeliefGrid, weights: &[f64]) -> BeliefGrid {
    assert_eq!(b.values.len(), weights.len(), "weight vector shape mismatch");
    if weights.iter().all(|&w| w == 1.0) {
        return b;
    }
    let mut out = b;
    let mut total = 0.0;
    for (v, &w) in out.values.iter_mut().zip(weights) {
        *v *= w;
        total += *v;
    }
    if total <= 0.0 {
        // Degenerate: the observation would annihilate the belief. Keep the
        // pre-update belief rather than emit NaNs.
        debug_assert!(false, "nondetection update produced zero belief mass");
        for (v, &w) in out.values.iter_mut().zip(weights) {
            *v /= if w > 0.0 { w } else { 1.0 };
        }
        return out;
    }
    for v in &mut out.values {
        *v /= total;
    }
    out
}

/// Bayes update after a fruitless observation from `s`: each cell's mass is
/// multiplied by its non-detection likelihood (occlusion-aware) and the grid
/// renormalized.
pub fn bayes_nondetection_update(
    b: BeliefGrid,
    s: &RobotState,
    p: &SensorParams,
    scene: &SceneModel,
) -> BeliefGrid {
    assert_eq!((b.width, b.height), (scene.width, scene.height));
    let weights: Vec<f64> = (0..b.values.len())
        .map(|idx| {
            if b.values[idx] <= 0.0 {
                return 1.0; // no mass to move, skip the geometry
            }
            let cell = Cell::new(idx % b.width, idx / b.width);
            let visible = line_of_sight(scene, s, cell);
            nondetection_prob(s, cell.center(), p, visible)
        })
        .collect();
    bayes_reweight(b, &weights)
}
