//! Visual attention front-end: bottom-up self-information saliency over a
//! filter bank, top-down color-histogram backprojection, and their fusion
//! modes (plain weighted and mask-gated).

use crate::error::AvsError;
use crate::raster::{PlaneImage, Rgb, RgbImage};
use crate::scene::RenderedView;

/// Search/attention strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// No attention: pure Bayesian coverage search.
    Nosal,
    /// Bottom-up self-information saliency only.
    Bu,
    /// Top-down color backprojection only.
    Td,
    /// Weighted fusion of bottom-up and top-down maps.
    BuTd,
    /// Bottom-up plus backprojection gated by the bottom-up mask.
    BuMaskTd,
    /// No attention, but a Gaussian prior centered on the target.
    Prior,
}

impl Mode {
    /// True for modes that compute a saliency map each step.
    pub fn uses_attention(self) -> bool {
        matches!(self, Mode::Bu | Mode::Td | Mode::BuTd | Mode::BuMaskTd)
    }

    /// True for modes that need the target color template.
    pub fn needs_template(self) -> bool {
        matches!(self, Mode::Td | Mode::BuTd | Mode::BuMaskTd)
    }

    /// True for modes that need the filter bank.
    pub fn needs_bank(self) -> bool {
        matches!(self, Mode::Bu | Mode::BuTd | Mode::BuMaskTd)
    }

    pub fn parse(s: &str) -> Result<Mode, AvsError> {
        match s {
            "nosal" => Ok(Mode::Nosal),
            "bu" => Ok(Mode::Bu),
            "td" => Ok(Mode::Td),
            "bu+td" => Ok(Mode::BuTd),
            "bu+butd" => Ok(Mode::BuMaskTd),
            "prior" => Ok(Mode::Prior),
            other => Err(AvsError::Validation(format!(
                "unknown method `{other}` (want nosal|bu|td|bu+td|bu+butd|prior)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nosal => "nosal",
            Mode::Bu => "bu",
            Mode::Td => "td",
            Mode::BuTd => "bu+td",
            Mode::BuMaskTd => "bu+butd",
            Mode::Prior => "prior",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attention-stage parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionConfig {
    pub mode: Mode,
    /// Weight on the thresholded bottom-up map in fusion.
    pub omega_a: f64,
    /// Weight on the backprojection map in fusion.
    pub omega_b: f64,
    /// Percentile kept by bottom-up thresholding, in (0, 1).
    pub th_aim: f64,
    /// Histogram bins for the filter-response density estimate.
    pub density_bins: usize,
    /// Gaussian smoothing sigma for the response density, in bins.
    pub density_smooth_sigma: f64,
    /// Backproject raw scaled RGB instead of C1C2C3 (ablation switch).
    pub backproject_rgb: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            mode: Mode::Nosal,
            omega_a: 0.2,
            omega_b: 0.8,
            th_aim: 0.95,
            density_bins: 256,
            density_smooth_sigma: 2.0,
            backproject_rgb: false,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<(), AvsError> {
        if (self.omega_a + self.omega_b - 1.0).abs() > 1e-9 {
            return Err(AvsError::Validation(format!(
                "fusion weights must sum to 1, got {} + {}",
                self.omega_a, self.omega_b
            )));
        }
        if !(self.th_aim > 0.0 && self.th_aim < 1.0) {
            return Err(AvsError::Validation("th_aim must be in (0, 1)".into()));
        }
        if self.density_bins < 2 {
            return Err(AvsError::Validation("density_bins must be >= 2".into()));
        }
        if !(self.density_smooth_sigma >= 0.0) {
            return Err(AvsError::Validation("density_smooth_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// What a saliency map represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    BottomUp,
    TopDown,
    Fused,
}

/// Per-pixel scalar relevance in [0, 1], image-shaped.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub kind: MapKind,
}

impl SaliencyMap {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn check_shape(&self, other: &SaliencyMap) -> Result<(), AvsError> {
        if self.width != other.width || self.height != other.height {
            return Err(AvsError::ShapeMismatch(format!(
                "saliency {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

// --- color spaces ----------------------------------------------------------

/// Converts 0-255 RGB into the arctangent-ratio opponent space, each channel
/// rescaled to [0, 1]. Denominators are guarded below by 1 on the 0-255
/// scale so black and pure primaries stay finite.
pub fn to_c1c2c3(rgb: &RgbImage) -> PlaneImage {
    let mut out = PlaneImage::zeros(rgb.width, rgb.height);
    let scale = std::f64::consts::FRAC_2_PI;
    for (i, px) in rgb.pixels.iter().enumerate() {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        out.planes[0][i] = (r / g.max(b).max(1.0)).atan() * scale;
        out.planes[1][i] = (g / r.max(b).max(1.0)).atan() * scale;
        out.planes[2][i] = (b / r.max(g).max(1.0)).atan() * scale;
    }
    out
}

/// Plain RGB scaled to [0, 1] per channel (ablation alternative to
/// [`to_c1c2c3`]).
pub fn to_rgb_planes(rgb: &RgbImage) -> PlaneImage {
    let mut out = PlaneImage::zeros(rgb.width, rgb.height);
    for (i, px) in rgb.pixels.iter().enumerate() {
        out.planes[0][i] = px[0] as f64 / 255.0;
        out.planes[1][i] = px[1] as f64 / 255.0;
        out.planes[2][i] = px[2] as f64 / 255.0;
    }
    out
}

// --- filter bank -----------------------------------------------------------

/// Input channel a kernel convolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    C1,
    C2,
    C3,
    /// Mean of R, G, B scaled to [0, 1].
    Luma,
    /// (R - G) / 255, in [-1, 1].
    Rg,
    /// (B - (R + G) / 2) / 255, in [-1, 1].
    By,
}

impl Channel {
    pub fn parse(s: &str) -> Result<Channel, AvsError> {
        match s {
            "c1" => Ok(Channel::C1),
            "c2" => Ok(Channel::C2),
            "c3" => Ok(Channel::C3),
            "luma" => Ok(Channel::Luma),
            "rg" => Ok(Channel::Rg),
            "by" => Ok(Channel::By),
            other => Err(AvsError::Validation(format!("unknown channel `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::C1 => "c1",
            Channel::C2 => "c2",
            Channel::C3 => "c3",
            Channel::Luma => "luma",
            Channel::Rg => "rg",
            Channel::By => "by",
        }
    }
}

/// One zero-mean convolution kernel bound to a color channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub size: usize,
    pub channel: Channel,
    /// Row-major `size x size` coefficients.
    pub coeffs: Vec<f64>,
}

/// The filter bank driving bottom-up saliency.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub kernels: Vec<Kernel>,
}

impl FilterBank {
    pub fn validate(&self) -> Result<(), AvsError> {
        if self.kernels.len() < 4 {
            return Err(AvsError::Validation(format!(
                "filter bank needs >= 4 kernels, got {}",
                self.kernels.len()
            )));
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if k.size % 2 == 0 || k.size == 0 {
                return Err(AvsError::Validation(format!(
                    "kernel {i} size {} must be odd",
                    k.size
                )));
            }
            if k.coeffs.len() != k.size * k.size {
                return Err(AvsError::Validation(format!(
                    "kernel {i} has {} coefficients, want {}",
                    k.coeffs.len(),
                    k.size * k.size
                )));
            }
            let sum: f64 = k.coeffs.iter().sum();
            if sum.abs() > 1e-9 {
                return Err(AvsError::Validation(format!(
                    "kernel {i} is not zero-mean (sum {sum:e})"
                )));
            }
        }
        Ok(())
    }

    /// Parses the bank file format: `filters <K> <k>` header, then per
    /// filter a `filter <channel>` line followed by k rows of k reals.
    pub fn parse(text: &str) -> Result<FilterBank, AvsError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            });

        let (lineno, header) = lines
            .next()
            .ok_or_else(|| AvsError::Validation("empty filter bank file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "filters" {
            return Err(AvsError::parse(lineno, "expected `filters <K> <k>`"));
        }
        let count: usize = parts[1]
            .parse()
            .map_err(|_| AvsError::parse(lineno, "bad filter count"))?;
        let size: usize = parts[2]
            .parse()
            .map_err(|_| AvsError::parse(lineno, "bad kernel size"))?;

        let mut kernels = Vec::with_capacity(count);
        for _ in 0..count {
            let (lineno, chan_line) = lines
                .next()
                .ok_or_else(|| AvsError::Validation("truncated filter bank".into()))?;
            let parts: Vec<&str> = chan_line.split_whitespace().collect();
            if parts.len() != 2 || parts[0] != "filter" {
                return Err(AvsError::parse(lineno, "expected `filter <channel>`"));
            }
            let channel = Channel::parse(parts[1])?;
            let mut coeffs = Vec::with_capacity(size * size);
            for _ in 0..size {
                let (lineno, row) = lines
                    .next()
                    .ok_or_else(|| AvsError::Validation("truncated kernel rows".into()))?;
                let vals: Result<Vec<f64>, _> =
                    row.split_whitespace().map(str::parse::<f64>).collect();
                let vals =
                    vals.map_err(|_| AvsError::parse(lineno, "bad kernel coefficient"))?;
                if vals.len() != size {
                    return Err(AvsError::parse(
                        lineno,
                        format!("kernel row has {} values, want {size}", vals.len()),
                    ));
                }
                coeffs.extend(vals);
            }
            kernels.push(Kernel { size, channel, coeffs });
        }
        let bank = FilterBank { kernels };
        bank.validate()?;
        Ok(bank)
    }

    /// Serializes losslessly back into the bank file format.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let size = self.kernels.first().map_or(0, |k| k.size);
        let mut out = String::new();
        let _ = writeln!(out, "filters {} {}", self.kernels.len(), size);
        for k in &self.kernels {
            let _ = writeln!(out, "filter {}", k.channel.as_str());
            for row in k.coeffs.chunks(k.size) {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }

    /// The built-in default bank: 4 oriented odd Gabor kernels and 4
    /// center-surround kernels on luma, plus 4 color-opponent
    /// center-surround kernels on the R-G and B-Y channels. All 9x9,
    /// zero-mean, unit L2 norm.
    pub fn default_bank() -> FilterBank {
        let mut kernels = Vec::with_capacity(12);
        for theta_deg in [0.0, 45.0, 90.0, 135.0] {
            kernels.push(finish_kernel(Channel::Luma, gabor_odd(9, theta_deg, 2.0, 4.5)));
        }
        for (s1, s2, sign) in [(1.0, 2.0, 1.0), (1.0, 2.0, -1.0), (1.5, 3.0, 1.0), (1.5, 3.0, -1.0)]
        {
            kernels.push(finish_kernel(Channel::Luma, dog(9, s1, s2, sign)));
        }
        for (chan, sign) in [(Channel::Rg, 1.0), (Channel::Rg, -1.0), (Channel::By, 1.0), (Channel::By, -1.0)]
        {
            kernels.push(finish_kernel(chan, dog(9, 1.0, 2.0, sign)));
        }
        let bank = FilterBank { kernels };
        debug_assert!(bank.validate().is_ok());
        bank
    }
}

/// Odd (sine-phase) Gabor, orientation in degrees.
fn gabor_odd(size: usize, theta_deg: f64, sigma: f64, wavelength: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let theta = theta_deg.to_radians();
    let (ct, st) = (theta.cos(), theta.sin());
    let mut coeffs = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            let x = col as f64 - half;
            let y = row as f64 - half;
            let xr = x * ct + y * st;
            let r2 = x * x + y * y;
            let env = (-r2 / (2.0 * sigma * sigma)).exp();
            coeffs.push(env * (std::f64::consts::TAU * xr / wavelength).sin());
        }
    }
    coeffs
}

/// Difference of Gaussians; positive sign = on-center.
fn dog(size: usize, sigma1: f64, sigma2: f64, sign: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut coeffs = Vec::with_capacity(size * size);
    let n1 = 1.0 / (std::f64::consts::TAU * sigma1 * sigma1);
    let n2 = 1.0 / (std::f64::consts::TAU * sigma2 * sigma2);
    for row in 0..size {
        for col in 0..size {
            let x = col as f64 - half;
            let y = row as f64 - half;
            let r2 = x * x + y * y;
            let v = n1 * (-r2 / (2.0 * sigma1 * sigma1)).exp()
                - n2 * (-r2 / (2.0 * sigma2 * sigma2)).exp();
            coeffs.push(sign * v);
        }
    }
    coeffs
}

/// Subtracts the mean and scales to unit L2 norm.
fn finish_kernel(channel: Channel, mut coeffs: Vec<f64>) -> Kernel {
    let n = coeffs.len();
    let mean: f64 = coeffs.iter().sum::<f64>() / n as f64;
    for c in &mut coeffs {
        *c -= mean;
    }
    let norm: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in &mut coeffs {
            *c /= norm;
        }
    }
    let size = (n as f64).sqrt() as usize;
    Kernel { size, channel, coeffs }
}

// --- color histogram -------------------------------------------------------

/// Joint 3D color histogram over `bins_per_channel^3` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    pub bins_per_channel: usize,
    /// Raw counts, indexed `(i1 * bins + i2) * bins + i3`.
    pub counts: Vec<f64>,
    /// Total mass; `counts / normalization` is the normalized form.
    pub normalization: f64,
}

impl ColorHistogram {
    /// Normalized mass of one bin triple.
    #[inline]
    pub fn mass(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        let b = self.bins_per_channel;
        self.counts[(i1 * b + i2) * b + i3] / self.normalization
    }
}

/// Maps a [0, 1] channel value to its histogram bin.
#[inline]
pub fn bin_index(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Builds a normalized joint histogram from a template image.
pub fn build_histogram(template: &PlaneImage, bins: usize) -> Result<ColorHistogram, AvsError> {
    if template.is_empty() {
        return Err(AvsError::Validation("empty template".into()));
    }
    if bins < 2 {
        return Err(AvsError::Validation("need >= 2 bins per channel".into()));
    }
    let mut counts = vec![0.0f64; bins * bins * bins];
    for i in 0..template.len() {
        let i1 = bin_index(template.planes[0][i], bins);
        let i2 = bin_index(template.planes[1][i], bins);
        let i3 = bin_index(template.planes[2][i], bins);
        counts[(i1 * bins + i2) * bins + i3] += 1.0;
    }
    Ok(ColorHistogram {
        bins_per_channel: bins,
        counts,
        normalization: template.len() as f64,
    })
}

/// Histogram of a solid color patch — the target template used by the
/// top-down modes.
pub fn template_histogram(color: Rgb, bins: usize, rgb_mode: bool) -> ColorHistogram {
    let patch = RgbImage::filled(8, 8, color);
    let planes = if rgb_mode { to_rgb_planes(&patch) } else { to_c1c2c3(&patch) };
    build_histogram(&planes, bins).expect("template patch is never empty")
}

// --- backprojection --------------------------------------------------------

/// Backprojects a histogram over an image: each pixel takes the normalized
/// mass of its color bin; the map is then scaled by its own maximum.
pub fn backproject(image: &PlaneImage, hist: &ColorHistogram) -> SaliencyMap {
    backproject_masked(image, hist, None)
}

pub fn backproject_masked(
    image: &PlaneImage,
    hist: &ColorHistogram,
    mask: Option<&SaliencyMap>,
) -> SaliencyMap {
    let bins = hist.bins_per_channel;
    let n = image.len();
    let mut values = vec![0.0f64; n];
    for i in 0..n {
        if let Some(m) = mask {
            if m.values[i] <= 0.0 {
                continue;
            }
        }
        let i1 = bin_index(image.planes[0][i], bins);
        let i2 = bin_index(image.planes[1][i], bins);
        let i3 = bin_index(image.planes[2][i], bins);
        values[i] = hist.mass(i1, i2, i3);
    }
    scale_by_max(&mut values);
    SaliencyMap {
        width: image.width,
        height: image.height,
        values,
        kind: MapKind::TopDown,
    }
}

/// Divides by the maximum when positive; leaves an all-nonpositive map at
/// zero.
fn scale_by_max(values: &mut [f64]) {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in values.iter_mut() {
            *v /= max;
        }
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Divides by the maximum, but a contrast-free map (max equals min) becomes
/// all-zero: constant response carries no information.
fn normalize_contrast(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max > min && max > 0.0 {
        for v in values.iter_mut() {
            *v /= max;
        }
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

// --- bottom-up self-information --------------------------------------------

/// Bottom-up saliency: per kernel, convolve its channel, estimate the
/// response density with a smoothed histogram over the whole image, and sum
/// per-pixel self-information across kernels. The result is max-scaled.
pub fn bottom_up_info(
    image: &RgbImage,
    bank: &FilterBank,
    cfg: &AttentionConfig,
) -> Result<SaliencyMap, AvsError> {
    bank.validate()?;
    cfg.validate()?;
    let (w, h) = (image.width, image.height);
    for k in &bank.kernels {
        if w < k.size || h < k.size {
            return Err(AvsError::Validation(format!(
                "image {w}x{h} smaller than kernel {}x{}",
                k.size, k.size
            )));
        }
    }

    let mut channel_cache: ChannelCache = Default::default();
    let n = w * h;
    let mut info = vec![0.0f64; n];
    let floor = 1.0 / (10.0 * n as f64);

    for kernel in &bank.kernels {
        let plane = channel_cache.plane(image, kernel.channel);
        let resp = convolve_replicate(plane, w, h, kernel);

        // Whole-image marginal density of this kernel's responses.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &resp {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let bins = cfg.density_bins;
        let mut hist = vec![0.0f64; bins];
        let span = hi - lo;
        let to_bin = |v: f64| -> usize {
            if span <= 0.0 {
                0
            } else {
                (((v - lo) / span * bins as f64) as usize).min(bins - 1)
            }
        };
        for &r in &resp {
            hist[to_bin(r)] += 1.0;
        }
        let smoothed = smooth_bins(&hist, cfg.density_smooth_sigma);
        let total: f64 = smoothed.iter().sum();
        // Per-bin negative log-probability with the density floor.
        let neg_log: Vec<f64> = smoothed
            .iter()
            .map(|&m| -((m / total).max(floor)).ln())
            .collect();

        for (i, &r) in resp.iter().enumerate() {
            info[i] += neg_log[to_bin(r)];
        }
    }

    normalize_contrast(&mut info);
    Ok(SaliencyMap {
        width: w,
        height: h,
        values: info,
        kind: MapKind::BottomUp,
    })
}

/// Lazily computed channel planes shared by the bank's kernels.
#[derive(Default)]
struct ChannelCache {
    c1c2c3: Option<PlaneImage>,
    luma: Option<Vec<f64>>,
    rg: Option<Vec<f64>>,
    by: Option<Vec<f64>>,
}

impl ChannelCache {
    fn plane<'a>(&'a mut self, image: &RgbImage, ch: Channel) -> &'a [f64] {
        match ch {
            Channel::C1 | Channel::C2 | Channel::C3 => {
                let planes = self.c1c2c3.get_or_insert_with(|| to_c1c2c3(image));
                match ch {
                    Channel::C1 => &planes.planes[0],
                    Channel::C2 => &planes.planes[1],
                    _ => &planes.planes[2],
                }
            }
            Channel::Luma => self.luma.get_or_insert_with(|| {
                image
                    .pixels
                    .iter()
                    .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0))
                    .collect()
            }),
            Channel::Rg => self.rg.get_or_insert_with(|| {
                image
                    .pixels
                    .iter()
                    .map(|p| (p[0] as f64 - p[1] as f64) / 255.0)
                    .collect()
            }),
            Channel::By => self.by.get_or_insert_with(|| {
                image
                    .pixels
                    .iter()
                    .map(|p| (p[2] as f64 - (p[0] as f64 + p[1] as f64) / 2.0) / 255.0)
                    .collect()
            }),
        }
    }
}

/// 2D convolution with replicate (clamp-to-edge) padding.
fn convolve_replicate(plane: &[f64], w: usize, h: usize, kernel: &Kernel) -> Vec<f64> {
    let k = kernel.size;
    let r = (k / 2) as isize;
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            let mut ki = 0;
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    acc += kernel.coeffs[ki] * plane[sy * w + sx];
                    ki += 1;
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Gaussian smoothing across histogram bins (zero padding, sigma in bins).
/// Sigma 0 returns the input unchanged.
fn smooth_bins(hist: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return hist.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut g = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        g.push((-(i * i) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let gsum: f64 = g.iter().sum();
    for v in &mut g {
        *v /= gsum;
    }
    let n = hist.len() as isize;
    let mut out = vec![0.0f64; hist.len()];
    for j in 0..n {
        let mut acc = 0.0;
        for (gi, &gv) in g.iter().enumerate() {
            let src = j + gi as isize - radius;
            if src >= 0 && src < n {
                acc += gv * hist[src as usize];
            }
        }
        out[j as usize] = acc;
    }
    out
}

// --- thresholding and fusion -----------------------------------------------

/// Keeps values at or above the nearest-rank `th` quantile, zeroes the rest.
pub fn threshold_percentile(map: &SaliencyMap, th: f64) -> SaliencyMap {
    assert!(th > 0.0 && th < 1.0, "threshold percentile must be in (0, 1)");
    let n = map.values.len();
    let mut sorted = map.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("saliency values are never NaN"));
    let idx = ((th * n as f64).floor() as usize).min(n - 1);
    let q = sorted[idx];
    let values = map
        .values
        .iter()
        .map(|&v| if v >= q { v } else { 0.0 })
        .collect();
    SaliencyMap {
        width: map.width,
        height: map.height,
        values,
        kind: map.kind,
    }
}

/// Weighted fusion `omega_a * info_t + omega_b * bp`, rescaled so the
/// maximum is 1 (all-zero inputs stay all-zero).
pub fn fuse_bu_td(
    info_t: &SaliencyMap,
    bp: &SaliencyMap,
    cfg: &AttentionConfig,
) -> Result<SaliencyMap, AvsError> {
    info_t.check_shape(bp)?;
    cfg.validate()?;
    let mut values: Vec<f64> = info_t
        .values
        .iter()
        .zip(&bp.values)
        .map(|(&a, &b)| cfg.omega_a * a + cfg.omega_b * b)
        .collect();
    scale_by_max(&mut values);
    Ok(SaliencyMap {
        width: info_t.width,
        height: info_t.height,
        values,
        kind: MapKind::Fused,
    })
}

/// Mask-gated fusion: backprojection is evaluated only where the
/// thresholded bottom-up map is positive, then fused as in [`fuse_bu_td`].
pub fn fuse_bu_masked_td(
    image: &PlaneImage,
    info_t: &SaliencyMap,
    hist: &ColorHistogram,
    cfg: &AttentionConfig,
) -> Result<SaliencyMap, AvsError> {
    if image.width != info_t.width || image.height != info_t.height {
        return Err(AvsError::ShapeMismatch(format!(
            "image {}x{} vs saliency {}x{}",
            image.width, image.height, info_t.width, info_t.height
        )));
    }
    let bp = backproject_masked(image, hist, Some(info_t));
    fuse_bu_td(info_t, &bp, cfg)
}

/// Mode dispatcher: renders the configured attention pipeline for one view.
/// Returns `None` for the no-attention modes.
pub fn compute_saliency(
    view: &RenderedView,
    cfg: &AttentionConfig,
    bank: Option<&FilterBank>,
    hist: Option<&ColorHistogram>,
) -> Result<Option<SaliencyMap>, AvsError> {
    if !cfg.mode.uses_attention() {
        return Ok(None);
    }
    let need_planes = cfg.mode.needs_template();
    let planes = if need_planes {
        Some(if cfg.backproject_rgb {
            to_rgb_planes(&view.color)
        } else {
            to_c1c2c3(&view.color)
        })
    } else {
        None
    };
    let get_hist = || {
        hist.ok_or_else(|| {
            AvsError::Validation("top-down mode requires a target color template".into())
        })
    };
    let get_bank = || {
        bank.ok_or_else(|| AvsError::Validation("bottom-up mode requires a filter bank".into()))
    };
    let bu_thresholded = |bank: &FilterBank| -> Result<SaliencyMap, AvsError> {
        let raw = bottom_up_info(&view.color, bank, cfg)?;
        Ok(threshold_percentile(&raw, cfg.th_aim))
    };
    let map = match cfg.mode {
        Mode::Bu => bu_thresholded(get_bank()?)?,
        Mode::Td => backproject(planes.as_ref().unwrap(), get_hist()?),
        Mode::BuTd => {
            let info_t = bu_thresholded(get_bank()?)?;
            let bp = backproject(planes.as_ref().unwrap(), get_hist()?);
            fuse_bu_td(&info_t, &bp, cfg)?
        }
        Mode::BuMaskTd => {
            let info_t = bu_thresholded(get_bank()?)?;
            fuse_bu_masked_td(planes.as_ref().unwrap(), &info_t, get_hist()?, cfg)?
        }
        Mode::Nosal | Mode::Prior => unreachable!("handled above"),
    };
    Ok(Some(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn test_map(values: Vec<f64>, w: usize, h: usize) -> SaliencyMap {
        SaliencyMap {
            width: w,
            height: h,
            values,
            kind: MapKind::BottomUp,
        }
    }

    // --- color space ---

    #[test]
    fn c1c2c3_gray_is_half() {
        let img = RgbImage::filled(2, 2, [128, 128, 128]);
        let p = to_c1c2c3(&img);
        for ch in &p.planes {
            for &v in ch {
                assert!((v - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn c1c2c3_pure_red() {
        let img = RgbImage::filled(1, 1, [255, 0, 0]);
        let p = to_c1c2c3(&img);
        let expect = 255.0f64.atan() * std::f64::consts::FRAC_2_PI;
        assert!((p.planes[0][0] - expect).abs() < 1e-12);
        assert!((expect - 0.9975).abs() < 1e-4);
        assert_eq!(p.planes[1][0], 0.0);
        assert_eq!(p.planes[2][0], 0.0);
    }

    #[test]
    fn c1c2c3_black_is_zero() {
        let img = RgbImage::filled(1, 1, [0, 0, 0]);
        let p = to_c1c2c3(&img);
        assert_eq!(p.planes[0][0], 0.0);
        assert_eq!(p.planes[1][0], 0.0);
        assert_eq!(p.planes[2][0], 0.0);
    }

    // --- histogram / backprojection ---

    #[test]
    fn uniform_template_fills_one_bin() {
        let img = RgbImage::filled(10, 10, [200, 40, 40]);
        let hist = build_histogram(&to_c1c2c3(&img), 64).unwrap();
        let nonzero: Vec<f64> = hist.counts.iter().copied().filter(|&c| c > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0] / hist.normalization - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_color_template_splits_mass() {
        let mut img = RgbImage::filled(4, 2, [200, 40, 40]);
        for x in 0..4 {
            img.set(x, 1, [40, 200, 40]);
        }
        let hist = build_histogram(&to_c1c2c3(&img), 64).unwrap();
        let masses: Vec<f64> = hist
            .counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| c / hist.normalization)
            .collect();
        assert_eq!(masses.len(), 2);
        assert!(masses.iter().all(|&m| (m - 0.5).abs() < 1e-12));
    }

    #[test]
    fn default_bins_yield_expected_capacity() {
        let img = RgbImage::filled(2, 2, [1, 2, 3]);
        let hist = build_histogram(&to_c1c2c3(&img), 64).unwrap();
        assert_eq!(hist.counts.len(), 64 * 64 * 64);
    }

    #[test]
    fn empty_template_is_an_error() {
        let empty = PlaneImage::zeros(0, 0);
        assert!(build_histogram(&empty, 64).is_err());
    }

    #[test]
    fn backprojection_of_matching_image_is_all_ones() {
        let img = RgbImage::filled(6, 4, [180, 60, 20]);
        let planes = to_c1c2c3(&img);
        let hist = build_histogram(&planes, 64).unwrap();
        let bp = backproject(&planes, &hist);
        assert!(bp.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn backprojection_of_disjoint_image_is_all_zero() {
        let template = RgbImage::filled(4, 4, [220, 30, 30]);
        let hist = build_histogram(&to_c1c2c3(&template), 64).unwrap();
        let other = RgbImage::filled(6, 6, [30, 30, 220]);
        let bp = backproject(&to_c1c2c3(&other), &hist);
        assert!(bp.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backprojection_half_match() {
        let template = RgbImage::filled(4, 4, [220, 30, 30]);
        let hist = build_histogram(&to_c1c2c3(&template), 64).unwrap();
        let mut img = RgbImage::filled(4, 2, [220, 30, 30]);
        for x in 0..4 {
            img.set(x, 1, [20, 200, 200]);
        }
        let bp = backproject(&to_c1c2c3(&img), &hist);
        for x in 0..4 {
            assert_eq!(bp.values[x], 1.0, "target-colored row");
            assert_eq!(bp.values[4 + x], 0.0, "distractor row");
        }
    }

    #[test]
    fn backprojection_commutes_with_pixel_permutation() {
        let template = RgbImage::filled(3, 3, [200, 50, 10]);
        let hist = build_histogram(&to_c1c2c3(&template), 64).unwrap();
        let mut img = RgbImage::filled(4, 4, [10, 10, 10]);
        img.set(0, 0, [200, 50, 10]);
        img.set(3, 2, [90, 90, 90]);
        let bp = backproject(&to_c1c2c3(&img), &hist);

        // Reverse the pixel order and backproject again.
        let mut rev = img.clone();
        rev.pixels.reverse();
        let bp_rev = backproject(&to_c1c2c3(&rev), &hist);
        let mut expect = bp.values.clone();
        expect.reverse();
        assert_eq!(bp_rev.values, expect);
    }

    // --- bottom-up ---

    #[test]
    fn uniform_image_has_zero_bottom_up_saliency() {
        let img = RgbImage::filled(32, 32, [77, 140, 200]);
        let cfg = AttentionConfig::default();
        let map = bottom_up_info(&img, &FilterBank::default_bank(), &cfg).unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_patch_attracts_bottom_up_saliency() {
        let mut img = RgbImage::filled(32, 32, [120, 120, 120]);
        for y in 14..17 {
            for x in 14..17 {
                img.set(x, y, [250, 40, 40]);
            }
        }
        let cfg = AttentionConfig::default();
        let map = bottom_up_info(&img, &FilterBank::default_bank(), &cfg).unwrap();
        let (mut best, mut best_v) = (0, -1.0);
        for (i, &v) in map.values.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        let (bx, by) = (best % 32, best / 32);
        // Argmax must fall inside the patch plus the kernel support radius.
        assert!(
            (10..=20).contains(&bx) && (10..=20).contains(&by),
            "argmax at ({bx}, {by}) is outside the odd patch support"
        );
        assert!((map.max() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bottom_up_is_invariant_to_brightness_shift() {
        // The default bank convolves luma/rg/by only, all linear in RGB with
        // zero-mean kernels, so a global +40 shift changes nothing.
        let mut rng_state = 12345u64;
        let mut img = RgbImage::filled(24, 24, [0, 0, 0]);
        for px in img.pixels.iter_mut() {
            // splitmix64 keeps the fixture dependency-free
            rng_state = rng_state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = rng_state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            *px = [
                60 + (z & 0x3f) as u8,
                60 + ((z >> 8) & 0x3f) as u8,
                60 + ((z >> 16) & 0x3f) as u8,
            ];
        }
        let shifted = RgbImage {
            width: img.width,
            height: img.height,
            pixels: img.pixels.iter().map(|p| [p[0] + 40, p[1] + 40, p[2] + 40]).collect(),
        };
        let cfg = AttentionConfig::default();
        let bank = FilterBank::default_bank();
        let a = bottom_up_info(&img, &bank, &cfg).unwrap();
        let b = bottom_up_info(&shifted, &bank, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn image_smaller_than_kernel_errors() {
        let img = RgbImage::filled(8, 8, [10, 10, 10]);
        let cfg = AttentionConfig::default();
        assert!(bottom_up_info(&img, &FilterBank::default_bank(), &cfg).is_err());
    }

    // --- thresholding ---

    #[test]
    fn percentile_on_distinct_values_keeps_exact_tail() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let map = test_map(values, 10, 10);
        let out = threshold_percentile(&map, 0.95);
        let survivors = out.values.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(survivors, 5);
        // The largest five values survive untouched.
        for i in 95..100 {
            assert_eq!(out.values[i], i as f64 / 100.0);
        }
    }

    #[test]
    fn percentile_keeps_constant_map() {
        let map = test_map(vec![0.7; 64], 8, 8);
        let out = threshold_percentile(&map, 0.95);
        assert!(out.values.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn percentile_of_zero_map_is_zero() {
        let map = test_map(vec![0.0; 64], 8, 8);
        let out = threshold_percentile(&map, 0.95);
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn percentile_is_idempotent_here() {
        let values: Vec<f64> = (0..100).map(|i| (i as f64).sin().abs()).collect();
        let map = test_map(values, 10, 10);
        let once = threshold_percentile(&map, 0.95);
        let twice = threshold_percentile(&once, 0.95);
        assert_eq!(once.values, twice.values);
    }

    // --- fusion ---

    #[test]
    fn fusion_with_zero_bottom_up_is_proportional_to_backprojection() {
        let cfg = AttentionConfig::default();
        let info = test_map(vec![0.0; 16], 4, 4);
        let bp_vals: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let bp = SaliencyMap {
            width: 4,
            height: 4,
            values: bp_vals.clone(),
            kind: MapKind::TopDown,
        };
        let fused = fuse_bu_td(&info, &bp, &cfg).unwrap();
        for (f, b) in fused.values.iter().zip(&bp_vals) {
            assert!((f - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_weights_combine_before_rescale() {
        let cfg = AttentionConfig::default();
        let info = test_map(vec![1.0, 0.0], 2, 1);
        let bp = SaliencyMap {
            width: 2,
            height: 1,
            values: vec![1.0, 0.0],
            kind: MapKind::TopDown,
        };
        // omega_a + omega_b with both maps at 1 gives exactly 1 before the
        // rescale, so the rescale is the identity here.
        let fused = fuse_bu_td(&info, &bp, &cfg).unwrap();
        assert_eq!(fused.values[0], 1.0);
        assert_eq!(fused.values[1], 0.0);
    }

    #[test]
    fn fusion_of_all_zero_maps_is_all_zero() {
        let cfg = AttentionConfig::default();
        let a = test_map(vec![0.0; 9], 3, 3);
        let b = test_map(vec![0.0; 9], 3, 3);
        let fused = fuse_bu_td(&a, &b, &cfg).unwrap();
        assert!(fused.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fusion_shape_mismatch_errors() {
        let cfg = AttentionConfig::default();
        let a = test_map(vec![0.0; 9], 3, 3);
        let b = test_map(vec![0.0; 16], 4, 4);
        assert!(matches!(
            fuse_bu_td(&a, &b, &cfg),
            Err(AvsError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn masked_fusion_with_full_mask_equals_plain_fusion_bitwise() {
        let cfg = AttentionConfig::default();
        let mut img = RgbImage::filled(6, 6, [90, 90, 90]);
        img.set(2, 3, [220, 30, 30]);
        img.set(4, 1, [220, 30, 30]);
        let planes = to_c1c2c3(&img);
        let hist = build_histogram(&to_c1c2c3(&RgbImage::filled(2, 2, [220, 30, 30])), 64).unwrap();
        // Full mask: info' positive at every pixel.
        let info_t = test_map(vec![0.5; 36], 6, 6);
        let masked = fuse_bu_masked_td(&planes, &info_t, &hist, &cfg).unwrap();
        let plain = fuse_bu_td(&info_t, &backproject(&planes, &hist), &cfg).unwrap();
        assert_eq!(masked.values, plain.values, "full mask must be a no-op");
    }

    #[test]
    fn masked_fusion_with_empty_mask_is_zero() {
        let cfg = AttentionConfig::default();
        let img = RgbImage::filled(5, 5, [220, 30, 30]);
        let planes = to_c1c2c3(&img);
        let hist = build_histogram(&planes, 64).unwrap();
        let info_t = test_map(vec![0.0; 25], 5, 5);
        let fused = fuse_bu_masked_td(&planes, &info_t, &hist, &cfg).unwrap();
        assert!(fused.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_fusion_ignores_target_color_outside_mask() {
        let cfg = AttentionConfig::default();
        let mut img = RgbImage::filled(4, 1, [90, 90, 90]);
        img.set(0, 0, [220, 30, 30]);
        img.set(3, 0, [220, 30, 30]);
        let planes = to_c1c2c3(&img);
        let hist = build_histogram(&to_c1c2c3(&RgbImage::filled(2, 2, [220, 30, 30])), 64).unwrap();
        // Mask admits only pixel 0; pixel 3 is target-colored but gated out.
        let info_t = test_map(vec![0.4, 0.0, 0.0, 0.0], 4, 1);
        let fused = fuse_bu_masked_td(&planes, &info_t, &hist, &cfg).unwrap();
        assert!(fused.values[0] > 0.0);
        assert_eq!(fused.values[3], 0.0);
    }

    // --- dispatcher ---

    #[test]
    fn dispatcher_returns_none_without_attention() {
        use crate::scene::{render_view, CameraIntrinsics, Cell, RobotState, SceneModel};
        let scene = SceneModel::open(5, 5, Cell::new(2, 2), [220, 30, 30]);
        let view = render_view(&scene, &RobotState::new(0.5, 0.5, 0.0), &CameraIntrinsics::default());
        for mode in [Mode::Nosal, Mode::Prior] {
            let cfg = AttentionConfig { mode, ..AttentionConfig::default() };
            assert!(compute_saliency(&view, &cfg, None, None).unwrap().is_none());
        }
    }

    #[test]
    fn dispatcher_td_without_template_errors() {
        use crate::scene::{render_view, CameraIntrinsics, Cell, RobotState, SceneModel};
        let scene = SceneModel::open(5, 5, Cell::new(2, 2), [220, 30, 30]);
        let view = render_view(&scene, &RobotState::new(0.5, 0.5, 0.0), &CameraIntrinsics::default());
        let cfg = AttentionConfig { mode: Mode::Td, ..AttentionConfig::default() };
        assert!(compute_saliency(&view, &cfg, None, None).is_err());
    }

    #[test]
    fn dispatcher_td_lights_up_visible_target() {
        use crate::scene::{render_view, CameraIntrinsics, Cell, RobotState, SceneModel};
        let mut scene = SceneModel::open(7, 7, Cell::new(4, 3), [220, 30, 30]);
        scene.objects[0].height = 0.9;
        let view = render_view(&scene, &RobotState::new(2.5, 3.5, 0.0), &CameraIntrinsics::default());
        let cfg = AttentionConfig { mode: Mode::Td, ..AttentionConfig::default() };
        let hist = template_histogram([220, 30, 30], 64, false);
        let map = compute_saliency(&view, &cfg, None, Some(&hist)).unwrap().unwrap();
        assert!(map.max() == 1.0, "visible target must backproject at full weight");
    }

    // --- filter bank ---

    #[test]
    fn default_bank_is_valid_and_sized() {
        let bank = FilterBank::default_bank();
        assert_eq!(bank.kernels.len(), 12);
        assert!(bank.validate().is_ok());
        assert!(bank.kernels.iter().all(|k| k.size == 9));
    }

    const SHIPPED_BANK: &str =
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/default_filters.txt");

    #[test]
    #[ignore = "regenerates the shipped filter bank file"]
    fn regenerate_shipped_bank() {
        std::fs::write(SHIPPED_BANK, FilterBank::default_bank().to_text()).unwrap();
    }

    #[test]
    fn shipped_bank_matches_builtin() {
        let text = std::fs::read_to_string(SHIPPED_BANK).expect("data/default_filters.txt ships with the repo");
        assert_eq!(FilterBank::parse(&text).unwrap(), FilterBank::default_bank());
    }

    #[test]
    fn bank_roundtrips_through_text() {
        let bank = FilterBank::default_bank();
        let text = bank.to_text();
        let back = FilterBank::parse(&text).unwrap();
        assert_eq!(back, bank, "text serialization must be lossless");
    }

    #[test]
    fn bank_rejects_non_zero_mean() {
        let text = "filters 4 3\nfilter luma\n1 0 0\n0 0 0\n0 0 0\nfilter luma\n0 1 -1\n0 0 0\n0 0 0\nfilter luma\n0 1 -1\n0 0 0\n0 0 0\nfilter luma\n0 1 -1\n0 0 0\n0 0 0\n";
        assert!(FilterBank::parse(text).is_err());
    }

    #[test]
    fn bank_rejects_too_few_kernels() {
        let text = "filters 2 3\nfilter luma\n0 1 -1\n0 0 0\n0 0 0\nfilter luma\n0 1 -1\n0 0 0\n0 0 0\n";
        assert!(FilterBank::parse(text).is_err());
    }

    #[test]
    fn config_weight_constraint_is_checked() {
        let mut cfg = AttentionConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.omega_a = 0.5;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fused_maps_stay_in_unit_range(
            a in proptest::collection::vec(0.0f64..=1.0, 25),
            b in proptest::collection::vec(0.0f64..=1.0, 25),
        ) {
            let cfg = AttentionConfig::default();
            let ma = test_map(a, 5, 5);
            let mb = SaliencyMap { width: 5, height: 5, values: b, kind: MapKind::TopDown };
            let fused = fuse_bu_td(&ma, &mb, &cfg).unwrap();
            prop_assert!(fused.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn fusion_rescale_preserves_argmax(
            a in proptest::collection::vec(0.0f64..=1.0, 16),
            b in proptest::collection::vec(0.0f64..=1.0, 16),
        ) {
            let cfg = AttentionConfig::default();
            let ma = test_map(a.clone(), 4, 4);
            let mb = SaliencyMap { width: 4, height: 4, values: b.clone(), kind: MapKind::TopDown };
            let fused = fuse_bu_td(&ma, &mb, &cfg).unwrap();
            let combined: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| 0.2 * x + 0.8 * y).collect();
            let argmax = |v: &[f64]| {
                v.iter().enumerate().fold((0usize, f64::NEG_INFINITY), |acc, (i, &x)| {
                    if x > acc.1 { (i, x) } else { acc }
                }).0
            };
            prop_assert_eq!(argmax(&fused.values), argmax(&combined));
        }
    }
}
