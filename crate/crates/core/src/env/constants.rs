//! Versioned physics constants, loaded from a plain `key=value` file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../constants/classic_control.txt");

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MountainCarConstants {
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub goal_position: f64,
    pub force: f64,
    pub gravity: f64,
    pub start_low: f64,
    pub start_high: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcrobotConstants {
    pub dt: f64,
    pub link_length_1: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_com_pos_1: f64,
    pub link_com_pos_2: f64,
    pub link_moi: f64,
    pub gravity: f64,
    pub max_vel_1: f64,
    pub max_vel_2: f64,
    pub start_range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleConstants {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    pub half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub theta_threshold: f64,
    pub x_threshold: f64,
    pub start_range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsConstants {
    pub version: u32,
    pub gamma: f64,
    pub episode_cutoff: usize,
    pub mountaincar: MountainCarConstants,
    pub acrobot: AcrobotConstants,
    pub cartpole: CartPoleConstants,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PhysicsConstants {
    /// Constants compiled in from `constants/classic_control.txt`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled constants file is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config { path: key, message } => Error::Format {
                path: path.to_path_buf(),
                message: format!("{key}: {message}"),
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), "expected key=value")
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::config(key.trim(), format!("not a number: `{}`", value.trim()))
            })?;
            map.insert(key.trim().to_string(), value);
        }
        let get = |key: &str| -> Result<f64> {
            map.get(key)
                .copied()
                .ok_or_else(|| Error::config(key, "missing constant"))
        };
        Ok(Self {
            version: get("version")? as u32,
            gamma: get("gamma")?,
            episode_cutoff: get("episode_cutoff")? as usize,
            mountaincar: MountainCarConstants {
                min_position: get("mountaincar.min_position")?,
                max_position: get("mountaincar.max_position")?,
                max_speed: get("mountaincar.max_speed")?,
                goal_position: get("mountaincar.goal_position")?,
                force: get("mountaincar.force")?,
                gravity: get("mountaincar.gravity")?,
                start_low: get("mountaincar.start_low")?,
                start_high: get("mountaincar.start_high")?,
            },
            acrobot: AcrobotConstants {
                dt: get("acrobot.dt")?,
                link_length_1: get("acrobot.link_length_1")?,
                link_mass_1: get("acrobot.link_mass_1")?,
                link_mass_2: get("acrobot.link_mass_2")?,
                link_com_pos_1: get("acrobot.link_com_pos_1")?,
                link_com_pos_2: get("acrobot.link_com_pos_2")?,
                link_moi: get("acrobot.link_moi")?,
                gravity: get("acrobot.gravity")?,
                max_vel_1: get("acrobot.max_vel_1")?,
                max_vel_2: get("acrobot.max_vel_2")?,
                start_range: get("acrobot.start_range")?,
            },
            cartpole: CartPoleConstants {
                gravity: get("cartpole.gravity")?,
                mass_cart: get("cartpole.mass_cart")?,
                mass_pole: get("cartpole.mass_pole")?,
                half_length: get("cartpole.half_length")?,
                force_mag: get("cartpole.force_mag")?,
                tau: get("cartpole.tau")?,
                theta_threshold: get("cartpole.theta_threshold")?,
                x_threshold: get("cartpole.x_threshold")?,
                start_range: get("cartpole.start_range")?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parses() {
        let c = PhysicsConstants::builtin();
        assert_eq!(c.version, 1);
        assert_eq!(c.gamma, crate::env::GAMMA);
        assert_eq!(c.episode_cutoff, 500);
        assert_eq!(c.acrobot.max_vel_1, 4.0 * std::f64::consts::PI);
        assert_eq!(c.acrobot.max_vel_2, 9.0 * std::f64::consts::PI);
        assert!((c.cartpole.theta_threshold - 12.0_f64.to_radians()).abs() < 1e-16);
    }

    #[test]
    fn missing_key_is_reported() {
        let err = PhysicsConstants::parse("version=1\n").unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn garbage_value_is_reported() {
        let err = PhysicsConstants::parse("version=one\n").unwrap_err();
        assert!(err.to_string().contains("version"));
    }
}
