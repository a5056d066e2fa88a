//! Line-directive experiment config files: `[section]` headers select a
//! parameter block, `key value` lines set fields, `#` starts a comment.

use crate::error::AvsError;
use crate::search::TrialConfig;

/// Parses a config file over a base configuration. Unknown sections or keys
/// are errors naming the offending line.
pub fn parse_config(text: &str, base: TrialConfig) -> Result<TrialConfig, AvsError> {
    let mut cfg = base;
    let mut section: Option<String> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| AvsError::parse(line, "unterminated section header"))?
                .trim();
            match name {
                "sensor" | "planner" | "attention" | "camera" | "search" => {
                    section = Some(name.to_string());
                }
                other => {
                    return Err(AvsError::parse(line, format!("unknown section [{other}]")));
                }
            }
            continue;
        }
        let mut parts = content.split_whitespace();
        let key = parts.next().unwrap();
        let value = parts.next().ok_or_else(|| {
            AvsError::parse(line, format!("key '{key}' is missing a value"))
        })?;
        if parts.next().is_some() {
            return Err(AvsError::parse(line, format!("trailing tokens after '{key}'")));
        }
        let sec = section
            .as_deref()
            .ok_or_else(|| AvsError::parse(line, "key before any [section] header"))?;
        apply_key(&mut cfg, sec, key, value, line)?;
    }
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, AvsError> {
    value
        .parse::<T>()
        .map_err(|_| AvsError::parse(line, format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(value: &str, key: &str, line: usize) -> Result<bool, AvsError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(AvsError::parse(
            line,
            format!("invalid boolean '{value}' for '{key}'"),
        )),
    }
}

fn apply_key(
    cfg: &mut TrialConfig,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), AvsError> {
    match (section, key) {
        ("sensor", "sigma") => cfg.sensor.sigma = parse_num(value, key, line)?,
        ("sensor", "d_max") => cfg.sensor.d_max = parse_num(value, key, line)?,
        ("sensor", "d_min") => cfg.sensor.d_min = parse_num(value, key, line)?,
        ("sensor", "alpha") => cfg.sensor.alpha = parse_num(value, key, line)?,
        ("sensor", "beta") => cfg.sensor.beta = parse_num(value, key, line)?,
        ("sensor", "p_dmax") => cfg.sensor.p_dmax = parse_num(value, key, line)?,
        ("sensor", "fov") => cfg.sensor.fov = parse_num(value, key, line)?,
        ("sensor", "normalize_angle") => cfg.sensor.normalize_angle = parse_bool(value, key, line)?,

        ("planner", "horizon_n") => cfg.planner.horizon_n = parse_num(value, key, line)?,
        ("planner", "execute_m") => cfg.planner.execute_m = parse_num(value, key, line)?,
        ("planner", "lambda") => cfg.planner.lambda = parse_num(value, key, line)?,
        ("planner", "v") => cfg.planner.v = parse_num(value, key, line)?,
        ("planner", "step_len_max") => cfg.planner.step_len_max = parse_num(value, key, line)?,
        ("planner", "restarts") => cfg.planner.restarts = parse_num(value, key, line)?,
        ("planner", "fd_step") => cfg.planner.fd_step = parse_num(value, key, line)?,
        ("planner", "max_iters") => cfg.planner.max_iters = parse_num(value, key, line)?,

        ("attention", "omega_a") => cfg.attention.omega_a = parse_num(value, key, line)?,
        ("attention", "omega_b") => cfg.attention.omega_b = parse_num(value, key, line)?,
        ("attention", "th_aim") => cfg.attention.th_aim = parse_num(value, key, line)?,
        ("attention", "density_bins") => cfg.attention.density_bins = parse_num(value, key, line)?,
        ("attention", "density_smooth_sigma") => {
            cfg.attention.density_smooth_sigma = parse_num(value, key, line)?
        }
        ("attention", "backproject_rgb") => {
            cfg.attention.backproject_rgb = parse_bool(value, key, line)?
        }

        ("camera", "image_width") => cfg.camera.image_width = parse_num(value, key, line)?,
        ("camera", "image_height") => cfg.camera.image_height = parse_num(value, key, line)?,
        ("camera", "fov_h") => cfg.camera.fov_h = parse_num(value, key, line)?,
        ("camera", "max_range") => cfg.camera.max_range = parse_num(value, key, line)?,

        ("search", "max_actions") => cfg.max_actions = parse_num(value, key, line)?,
        ("search", "process_time_s") => cfg.process_time_s = parse_num(value, key, line)?,
        ("search", "epsilon") => cfg.epsilon = parse_num(value, key, line)?,

        _ => {
            return Err(AvsError::parse(
                line,
                format!("unknown key '{key}' in section [{section}]"),
            ));
        }
    }
    Ok(())
}
