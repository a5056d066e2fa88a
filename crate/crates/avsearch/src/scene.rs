//! 2.5D grid world: scenario loading, raycast rendering, traversability,
//! and line-of-sight queries.
//!
//! Cells are 1 m squares indexed `(cx, cy)`; world coordinates are meters
//! with cell `(cx, cy)` spanning `[cx, cx+1) x [cy, cy+1)`. Obstacles are
//! full-height walls; objects are colored boxes with a per-object height.

use crate::error::AvsError;
use crate::raster::{GrayMap, Rgb, RgbImage};

/// Height of obstacle walls in meters.
pub const WALL_HEIGHT: f64 = 2.0;
/// Camera optical-center height above the floor in meters.
pub const CAMERA_HEIGHT: f64 = 0.5;
/// Wall color in rendered views.
pub const WALL_COLOR: Rgb = [80, 80, 80];
/// Ray-march step for rendering, one order of magnitude below cell size.
pub const RAY_STEP: f64 = 0.1;

/// Grid cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub cx: usize,
    pub cy: usize,
}

impl Cell {
    pub fn new(cx: usize, cy: usize) -> Self {
        Cell { cx, cy }
    }

    /// World coordinates of the cell center.
    pub fn center(&self) -> (f64, f64) {
        (self.cx as f64 + 0.5, self.cy as f64 + 0.5)
    }
}

/// A colored box occupying one cell up to `height` meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub cell: Cell,
    /// Box height in meters, in [0, 1].
    pub height: f64,
    pub color: Rgb,
}

/// Camera pose: position in meters, yaw in radians wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        RobotState { x, y, phi }
    }
}

/// Pinhole-style camera parameters for the synthetic renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub image_width: usize,
    pub image_height: usize,
    /// Horizontal field of view in degrees, in (0, 180).
    pub fov_h: f64,
    /// Maximum render distance in meters.
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            image_width: 160,
            image_height: 120,
            fov_h: 110.0,
            max_range: 20.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), AvsError> {
        if !(self.fov_h > 0.0 && self.fov_h < 180.0) {
            return Err(AvsError::Validation(format!(
                "fov_h {} out of (0, 180)",
                self.fov_h
            )));
        }
        if self.image_width < 16 || self.image_height < 16 {
            return Err(AvsError::Validation("image dims must be >= 16".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(AvsError::Validation("max_range must be > 0".into()));
        }
        Ok(())
    }

    /// Depth value marking a pixel with no surface hit.
    pub fn no_hit_depth(&self) -> f64 {
        self.max_range + 1.0
    }
}

/// Static world: occupancy, colored objects, and the true target.
#[derive(Debug, Clone)]
pub struct SceneModel {
    pub width: usize,
    pub height: usize,
    /// Row-major; `true` marks an obstacle cell.
    obstacle: Vec<bool>,
    /// All colored boxes, target included.
    pub objects: Vec<SceneObject>,
    pub target_cell: Cell,
    pub target_color: Rgb,
    pub background: Rgb,
    /// Initial robot pose when the scenario declares one.
    pub robot_start: Option<RobotState>,
    pub cell_size: f64,
}

impl SceneModel {
    /// Builds an all-free scene with a target; panics on invalid bounds.
    pub fn open(width: usize, height: usize, target_cell: Cell, target_color: Rgb) -> Self {
        assert!(width >= 2 && height >= 2, "scene must be at least 2x2");
        let scene = SceneModel {
            width,
            height,
            obstacle: vec![false; width * height],
            objects: vec![SceneObject {
                cell: target_cell,
                height: 0.5,
                color: target_color,
            }],
            target_cell,
            target_color,
            background: [128, 128, 128],
            robot_start: None,
            cell_size: 1.0,
        };
        scene.validate().expect("open scene must validate");
        scene
    }

    #[inline]
    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.cx < self.width && cell.cy < self.height
    }

    #[inline]
    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacle[cell.cy * self.width + cell.cx]
    }

    pub fn set_obstacle(&mut self, cell: Cell) {
        self.obstacle[cell.cy * self.width + cell.cx] = true;
    }

    /// Cell containing the world point, or none when outside the map.
    #[inline]
    pub fn cell_at(&self, x: f64, y: f64) -> Option<Cell> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (cx, cy) = (x.floor() as usize, y.floor() as usize);
        if cx >= self.width || cy >= self.height {
            return None;
        }
        Some(Cell::new(cx, cy))
    }

    pub fn free_cell_count(&self) -> usize {
        self.obstacle.iter().filter(|&&o| !o).count()
    }

    /// First object occupying `cell`, if any.
    pub fn object_at(&self, cell: Cell) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.cell == cell)
    }

    pub fn validate(&self) -> Result<(), AvsError> {
        if self.width < 2 || self.height < 2 {
            return Err(AvsError::Validation(format!(
                "map {}x{} too small, need at least 2x2",
                self.width, self.height
            )));
        }
        if !self.in_bounds(self.target_cell) {
            return Err(AvsError::Validation("target cell out of bounds".into()));
        }
        if self.is_obstacle(self.target_cell) {
            return Err(AvsError::Validation(
                "target cell must be free, not an obstacle".into(),
            ));
        }
        for obj in &self.objects {
            if !self.in_bounds(obj.cell) {
                return Err(AvsError::Validation(format!(
                    "object cell ({}, {}) out of bounds",
                    obj.cell.cx, obj.cell.cy
                )));
            }
            if !(0.0..=1.0).contains(&obj.height) {
                return Err(AvsError::Validation(format!(
                    "object height {} out of [0, 1]",
                    obj.height
                )));
            }
        }
        if let Some(s) = self.robot_start {
            if !is_traversable(self, s.x, s.y) {
                return Err(AvsError::Validation(
                    "robot start must lie in a free cell".into(),
                ));
            }
        }
        Ok(())
    }
}

// --- scenario file ---------------------------------------------------------

/// Parses scenario text (`map`, `cellsize`, `background`, `obstacle`,
/// `object`, `target`, `robot`; `#` comments) into a validated scene.
pub fn load_scenario(text: &str) -> Result<SceneModel, AvsError> {
    let mut size: Option<(usize, usize)> = None;
    let mut cell_size = 1.0f64;
    let mut background: Rgb = [128, 128, 128];
    let mut obstacles: Vec<Cell> = Vec::new();
    let mut objects: Vec<SceneObject> = Vec::new();
    let mut target: Option<SceneObject> = None;
    let mut robot: Option<RobotState> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut tok = line.split_whitespace();
        let Some(directive) = tok.next() else { continue };
        let rest: Vec<&str> = tok.collect();
        match directive {
            "map" => {
                let [w, h] = parse_args::<usize, 2>(&rest, lineno, "map <width> <height>")?;
                size = Some((w, h));
            }
            "cellsize" => {
                let [cs] = parse_args::<f64, 1>(&rest, lineno, "cellsize <meters>")?;
                if cs != 1.0 {
                    return Err(AvsError::parse(lineno, "only cellsize 1.0 is supported"));
                }
                cell_size = cs;
            }
            "background" => {
                let [r, g, b] = parse_args::<u8, 3>(&rest, lineno, "background <r> <g> <b>")?;
                background = [r, g, b];
            }
            "obstacle" => {
                let [cx, cy] = parse_args::<usize, 2>(&rest, lineno, "obstacle <cx> <cy>")?;
                obstacles.push(Cell::new(cx, cy));
            }
            "object" | "target" => {
                if rest.len() != 6 {
                    return Err(AvsError::parse(
                        lineno,
                        format!("usage: {directive} <cx> <cy> <height> <r> <g> <b>"),
                    ));
                }
                let [cx, cy] = parse_args::<usize, 2>(&rest[..2], lineno, "cell index")?;
                let [h] = parse_args::<f64, 1>(&rest[2..3], lineno, "height")?;
                let [r, g, b] = parse_args::<u8, 3>(&rest[3..], lineno, "color")?;
                let obj = SceneObject {
                    cell: Cell::new(cx, cy),
                    height: h,
                    color: [r, g, b],
                };
                if directive == "target" {
                    if target.is_some() {
                        return Err(AvsError::parse(lineno, "duplicate target directive"));
                    }
                    target = Some(obj);
                } else {
                    objects.push(obj);
                }
            }
            "robot" => {
                let [x, y, phi_deg] = parse_args::<f64, 3>(&rest, lineno, "robot <x> <y> <phi_deg>")?;
                robot = Some(RobotState::new(x, y, wrap_angle(phi_deg.to_radians())));
            }
            other => {
                return Err(AvsError::parse(lineno, format!("unknown directive `{other}`")));
            }
        }
    }

    let (width, height) = size.ok_or_else(|| AvsError::Validation("missing map directive".into()))?;
    let target = target.ok_or_else(|| AvsError::Validation("missing target directive".into()))?;
    if width < 2 || height < 2 {
        return Err(AvsError::Validation(format!(
            "map {width}x{height} too small, need at least 2x2"
        )));
    }

    let mut scene = SceneModel {
        width,
        height,
        obstacle: vec![false; width * height],
        objects: Vec::new(),
        target_cell: target.cell,
        target_color: target.color,
        background,
        robot_start: robot,
        cell_size,
    };
    for c in obstacles {
        if !scene.in_bounds(c) {
            return Err(AvsError::Validation(format!(
                "obstacle ({}, {}) out of bounds",
                c.cx, c.cy
            )));
        }
        scene.set_obstacle(c);
    }
    scene.objects = objects;
    scene.objects.push(target);
    scene.validate()?;
    Ok(scene)
}

fn parse_args<T: std::str::FromStr, const N: usize>(
    args: &[&str],
    lineno: usize,
    usage: &str,
) -> Result<[T; N], AvsError> {
    if args.len() != N {
        return Err(AvsError::parse(lineno, format!("usage: {usage}")));
    }
    let mut out: Vec<T> = Vec::with_capacity(N);
    for a in args {
        out.push(
            a.parse()
                .map_err(|_| AvsError::parse(lineno, format!("bad value `{a}` ({usage})")))?,
        );
    }
    out.try_into()
        .map_err(|_| AvsError::parse(lineno, usage.to_string()))
}

// --- geometry helpers ------------------------------------------------------

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// True iff `(x, y)` is inside the map and its cell is free.
pub fn is_traversable(scene: &SceneModel, x: f64, y: f64) -> bool {
    match scene.cell_at(x, y) {
        Some(c) => !scene.is_obstacle(c),
        None => false,
    }
}

/// True iff the segment from `(s.x, s.y)` to the center of `cell` crosses no
/// obstacle cell. The robot's own starting cell is exempt; the destination
/// cell is not.
pub fn line_of_sight(scene: &SceneModel, s: &RobotState, cell: Cell) -> bool {
    debug_assert!(scene.in_bounds(cell));
    let (tx, ty) = cell.center();
    let start = scene.cell_at(s.x, s.y);
    let mut blocked = false;
    walk_cells(s.x, s.y, tx, ty, |c| {
        if Some(c) != start && scene.in_bounds(c) && scene.is_obstacle(c) {
            blocked = true;
            false
        } else {
            true
        }
    });
    !blocked
}

/// Visits every grid cell crossed by the segment from `(x0, y0)` to
/// `(x1, y1)` in order, using exact grid traversal. The callback returns
/// `false` to stop early.
pub fn walk_cells(x0: f64, y0: f64, x1: f64, y1: f64, mut visit: impl FnMut(Cell) -> bool) {
    let (mut ix, mut iy) = (x0.floor() as i64, y0.floor() as i64);
    let (ex, ey) = (x1.floor() as i64, y1.floor() as i64);
    let dx = x1 - x0;
    let dy = y1 - y0;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // Parameter t in [0,1] along the segment at which the next vertical /
    // horizontal grid line is crossed.
    let mut t_max_x = if dx != 0.0 {
        let next = if dx > 0.0 { ix as f64 + 1.0 } else { ix as f64 };
        (next - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let next = if dy > 0.0 { iy as f64 + 1.0 } else { iy as f64 };
        (next - y0) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };

    loop {
        if ix >= 0 && iy >= 0 {
            if !visit(Cell::new(ix as usize, iy as usize)) {
                return;
            }
        }
        if ix == ex && iy == ey {
            return;
        }
        if t_max_x < t_max_y {
            if t_max_x > 1.0 {
                return;
            }
            ix += step_x;
            t_max_x += t_delta_x;
        } else {
            if t_max_y > 1.0 {
                return;
            }
            iy += step_y;
            t_max_y += t_delta_y;
        }
    }
}

// --- rendering -------------------------------------------------------------

/// Synthetic camera frame: color, per-pixel depth, and the world cell each
/// pixel's ray hit (none where the pixel shows background).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub color: RgbImage,
    /// Meters; `cam.no_hit_depth()` marks background pixels.
    pub depth: GrayMap,
    /// `ray_hits[y * width + x]` is the cell whose surface the pixel shows.
    pub ray_hits: Vec<Option<Cell>>,
}

/// One surface encountered along a column's ray.
#[derive(Debug, Clone, Copy)]
struct RayHit {
    dist: f64,
    cell: Cell,
    /// Top of the surface in meters (walls are full height).
    top: f64,
    color: Rgb,
}

/// Renders the scene from `s`: one ray per image column fan-swept uniformly
/// across `fov_h` centered on the yaw, marched in `RAY_STEP` increments.
pub fn render_view(scene: &SceneModel, s: &RobotState, cam: &CameraIntrinsics) -> RenderedView {
    cam.validate().expect("camera intrinsics must validate");
    let (w, h) = (cam.image_width, cam.image_height);
    let mut color = RgbImage::filled(w, h, scene.background);
    let mut depth = GrayMap::filled(w, h, cam.no_hit_depth());
    let mut ray_hits: Vec<Option<Cell>> = vec![None; w * h];

    let fov = cam.fov_h.to_radians();
    let half_fov = fov / 2.0;
    // Vertical focal length in pixels, square-pixel convention.
    let focal = (w as f64 / 2.0) / (half_fov).tan();
    let cy_mid = h as f64 / 2.0;

    for col in 0..w {
        // Leftmost column looks left of heading (positive relative bearing).
        let rel = half_fov - (col as f64 + 0.5) / w as f64 * fov;
        let theta = s.phi + rel;
        let (dir_x, dir_y) = (theta.cos(), theta.sin());
        let hits = march_ray(scene, s, dir_x, dir_y, cam.max_range);

        for row in 0..h {
            // Nearest surface whose vertical span covers this row wins.
            for hit in &hits {
                let y_top = cy_mid + focal * (CAMERA_HEIGHT - hit.top) / hit.dist;
                let y_base = cy_mid + focal * CAMERA_HEIGHT / hit.dist;
                let r = row as f64 + 0.5;
                if r >= y_top && r <= y_base {
                    color.set(col, row, hit.color);
                    depth.set(col, row, hit.dist);
                    ray_hits[row * w + col] = Some(hit.cell);
                    break;
                }
            }
        }
    }

    RenderedView { color, depth, ray_hits }
}

/// Marches one ray, collecting object surfaces in near-to-far order and
/// stopping at the first wall (which is appended) or at max range.
fn march_ray(scene: &SceneModel, s: &RobotState, dir_x: f64, dir_y: f64, max_range: f64) -> Vec<RayHit> {
    let mut hits: Vec<RayHit> = Vec::new();
    let mut last_cell: Option<Cell> = scene.cell_at(s.x, s.y);
    let steps = (max_range / RAY_STEP).ceil() as usize;
    for k in 1..=steps {
        let t = k as f64 * RAY_STEP;
        if t > max_range {
            break;
        }
        let (px, py) = (s.x + t * dir_x, s.y + t * dir_y);
        let Some(cell) = scene.cell_at(px, py) else {
            break; // left the map; nothing beyond the boundary
        };
        if Some(cell) == last_cell {
            continue;
        }
        last_cell = Some(cell);
        if scene.is_obstacle(cell) {
            hits.push(RayHit {
                dist: t,
                cell,
                top: WALL_HEIGHT,
                color: WALL_COLOR,
            });
            break;
        }
        if let Some(obj) = scene.object_at(cell) {
            hits.push(RayHit {
                dist: t,
                cell,
                top: obj.height,
                color: obj.color,
            });
        }
    }
    hits
}
