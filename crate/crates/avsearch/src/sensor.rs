//! Probabilistic camera detection model: distance falloff, angular falloff
//! with a hard field-of-view cutoff, and the combined non-detection
//! likelihood used both for belief updates and simulated detections.

use crate::error::AvsError;
use crate::scene::{wrap_angle, RobotState};

/// Detection-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// Distance falloff rate (dimensionless).
    pub sigma: f64,
    /// Nominal maximum detection distance in meters.
    pub d_max: f64,
    /// Minimum working distance in meters.
    pub d_min: f64,
    /// Angular falloff scale in radians.
    pub alpha: f64,
    /// Angular falloff shape; large values give a flat plateau with sharp
    /// edges.
    pub beta: f64,
    /// Detection probability at the on-axis optimum.
    pub p_dmax: f64,
    /// Horizontal field of view in degrees; detection is impossible beyond
    /// half this angle off-axis.
    pub fov: f64,
    /// When set (default), the angular term is rescaled so its on-axis value
    /// is 1; otherwise the raw density value is used.
    pub normalize_angle: bool,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            sigma: 0.4,
            d_max: 3.0,
            d_min: 0.4,
            alpha: 1.0,
            beta: 100.0,
            p_dmax: 0.9,
            fov: 110.0,
            normalize_angle: true,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<(), AvsError> {
        if !(self.p_dmax > 0.0 && self.p_dmax <= 1.0) {
            return Err(AvsError::Validation("p_dmax must be in (0, 1]".into()));
        }
        if !(self.d_max > self.d_min && self.d_min > 0.0) {
            return Err(AvsError::Validation("need d_max > d_min > 0".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(AvsError::Validation("alpha must be > 0".into()));
        }
        if !(self.beta >= 1.0) {
            return Err(AvsError::Validation("beta must be >= 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(AvsError::Validation("sigma must be > 0".into()));
        }
        if !(self.fov > 0.0 && self.fov <= 360.0) {
            return Err(AvsError::Validation("fov must be in (0, 360]".into()));
        }
        Ok(())
    }
}

/// Distance term: `exp(-sigma/d_max^2 * d^2)`, in (0, 1].
pub fn distance_factor(s: &RobotState, tau: (f64, f64), p: &SensorParams) -> f64 {
    let dx = tau.0 - s.x;
    let dy = tau.1 - s.y;
    let d2 = dx * dx + dy * dy;
    (-p.sigma / (p.d_max * p.d_max) * d2).exp()
}

/// Angular term: a generalized-Gaussian falloff `exp(-(|phi|/alpha)^beta)`,
/// zero beyond the field-of-view half angle. Normalized mode peaks at 1;
/// raw mode multiplies by the density peak `beta / (2 alpha Gamma(1/beta))`.
pub fn angle_factor(phi_rel: f64, p: &SensorParams) -> f64 {
    let half_fov = p.fov.to_radians() / 2.0;
    let abs_phi = phi_rel.abs();
    if abs_phi > half_fov {
        return 0.0;
    }
    let ratio = abs_phi / p.alpha;
    // (ratio)^beta via exp(beta ln ratio); exponents below -40 underflow the
    // final exp to exactly 1.0, so skip them (ratio = 0 gives t = -inf).
    let t = p.beta * ratio.ln();
    let x = if t < -40.0 { 0.0 } else { t.exp() };
    let falloff = (-x).exp();
    if p.normalize_angle {
        falloff
    } else {
        p.beta / (2.0 * p.alpha * gamma(1.0 / p.beta)) * falloff
    }
}

/// Bearing of `tau` relative to the camera axis, wrapped to (-pi, pi].
pub fn relative_bearing(s: &RobotState, tau: (f64, f64)) -> f64 {
    wrap_angle((tau.1 - s.y).atan2(tau.0 - s.x) - s.phi)
}

/// Detection probability of a visible object at `tau` from state `s`:
/// `p_dmax * D * A`, zero outside the field of view.
pub fn detectability(s: &RobotState, tau: (f64, f64), p: &SensorParams) -> f64 {
    let a = angle_factor(relative_bearing(s, tau), p);
    if a == 0.0 {
        return 0.0;
    }
    p.p_dmax * distance_factor(s, tau, p) * a
}

/// Probability of NOT detecting an object at `tau` from state `s`:
/// `1 - p_dmax * D * A` when visible, 1 when occluded. `visible` must be the
/// line-of-sight result for `(s, tau)`.
pub fn nondetection_prob(s: &RobotState, tau: (f64, f64), p: &SensorParams, visible: bool) -> f64 {
    if !visible {
        return 1.0;
    }
    (1.0 - detectability(s, tau, p)).clamp(0.0, 1.0)
}

// --- gamma -----------------------------------------------------------------

/// Lanczos coefficients, g = 7, 9 terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation with reflection for small
/// arguments; relative error below 1e-10 on [0.005, 1].
pub fn gamma(z: f64) -> f64 {
    if z < 0.5 {
        // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z).
        std::f64::consts::PI / ((std::f64::consts::PI * z).sin() * gamma(1.0 - z))
    } else {
        let z = z - 1.0;
        let mut x = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn origin_facing_x() -> RobotState {
        RobotState::new(0.0, 0.0, 0.0)
    }

    #[test]
    fn distance_factor_at_zero_is_one() {
        let p = SensorParams::default();
        assert_eq!(distance_factor(&origin_facing_x(), (0.0, 0.0), &p), 1.0);
    }

    #[test]
    fn distance_factor_spot_values() {
        let p = SensorParams::default();
        let s = origin_facing_x();
        assert!((distance_factor(&s, (3.0, 0.0), &p) - (-0.4f64).exp()).abs() < 1e-12);
        assert!((distance_factor(&s, (6.0, 0.0), &p) - (-1.6f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn angle_factor_normalized_peaks_at_one() {
        let p = SensorParams::default();
        assert_eq!(angle_factor(0.0, &p), 1.0);
    }

    #[test]
    fn angle_factor_raw_peak_matches_density_coefficient() {
        let p = SensorParams {
            normalize_angle: false,
            ..SensorParams::default()
        };
        let expected = 100.0 / (2.0 * gamma(0.01));
        assert_relative_eq!(angle_factor(0.0, &p), expected, max_relative = 1e-12);
        // Published reference value for these parameters.
        assert!((angle_factor(0.0, &p) - 0.5029).abs() < 1e-3);
    }

    #[test]
    fn angle_factor_plateau_is_flat_inside_alpha() {
        let p = SensorParams::default();
        for phi in [0.1, 0.3, 0.5, 0.7, 0.85, 0.89] {
            assert!(
                (angle_factor(phi, &p) - 1.0).abs() < 1e-4,
                "plateau violated at {phi}"
            );
        }
        // Just inside and outside the shoulder the falloff is sharp.
        assert!((angle_factor(0.9, &p) - (-(0.9f64.powf(100.0))).exp()).abs() < 1e-12);
    }

    #[test]
    fn angle_factor_cuts_off_at_half_fov() {
        let p = SensorParams::default();
        let half = p.fov.to_radians() / 2.0;
        assert!(angle_factor(half - 1e-6, &p) > 0.0);
        assert_eq!(angle_factor(half + 1e-6, &p), 0.0);
        assert_eq!(angle_factor(std::f64::consts::PI, &p), 0.0);
    }

    #[test]
    fn relative_bearing_cases() {
        let s = RobotState::new(1.0, 1.0, 0.0);
        assert_eq!(relative_bearing(&s, (3.0, 1.0)), 0.0);
        assert_relative_eq!(
            relative_bearing(&s, (-1.0, 1.0)),
            std::f64::consts::PI,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            relative_bearing(&s, (1.0, 3.0)),
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn nondetection_is_one_when_occluded_or_behind() {
        let p = SensorParams::default();
        let s = origin_facing_x();
        assert_eq!(nondetection_prob(&s, (1.0, 0.0), &p, false), 1.0);
        assert_eq!(nondetection_prob(&s, (-1.0, 0.0), &p, true), 1.0);
    }

    #[test]
    fn nondetection_spot_values() {
        let p = SensorParams::default();
        let s = origin_facing_x();
        // On-axis at distance zero: 1 - p_dmax.
        assert!((nondetection_prob(&s, (0.0, 0.0), &p, true) - 0.1).abs() < 1e-12);
        // On-axis at d_max.
        let want = 1.0 - 0.9 * (-0.4f64).exp();
        assert!((nondetection_prob(&s, (3.0, 0.0), &p, true) - want).abs() < 1e-12);
    }

    #[test]
    fn nondetection_bounds_monotonicity_symmetry() {
        let p = SensorParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let phi: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let d: f64 = rng.gen_range(0.0..12.0);
            let s = origin_facing_x();
            let tau = (d * phi.cos(), d * phi.sin());
            let nd = nondetection_prob(&s, tau, &p, true);
            assert!((0.0..=1.0).contains(&nd));

            // Further along the same bearing never detects better.
            let tau_far = ((d + 1.0) * phi.cos(), (d + 1.0) * phi.sin());
            assert!(nondetection_prob(&s, tau_far, &p, true) >= nd);

            // Mirror bearing is bitwise identical.
            let tau_mirror = (d * phi.cos(), -(d * phi.sin()));
            assert_eq!(nondetection_prob(&s, tau_mirror, &p, true), nd);
        }
    }

    #[test]
    fn gamma_matches_reference_on_unit_interval() {
        // statrs provides the independent oracle.
        for i in 0..=995 {
            let z = 0.005 + i as f64 * 0.001;
            let ours = gamma(z);
            let reference = statrs::function::gamma::gamma(z);
            assert!(
                ((ours - reference) / reference).abs() < 1e-10,
                "gamma({z}): {ours} vs {reference}"
            );
        }
    }

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(1.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(gamma(0.5), std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-12);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = SensorParams::default();
        p.p_dmax = 0.0;
        assert!(p.validate().is_err());
        let mut p = SensorParams::default();
        p.d_min = 3.5;
        assert!(p.validate().is_err());
        let mut p = SensorParams::default();
        p.beta = 0.5;
        assert!(p.validate().is_err());
        assert!(SensorParams::default().validate().is_ok());
    }
}
