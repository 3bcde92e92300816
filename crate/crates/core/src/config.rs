//! Augmentation configuration and the shipped presets.
//!
//! Strength ranges are the unscaled `(σ_min, σ_max)` of each primitive; the
//! global `alpha` multiplies both ends when sampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The transform families a chain step can draw from (besides identity).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Spectral,
    Spatial,
    Color,
    Additive,
}

impl Primitive {
    pub const ALL: [Primitive; 4] = [
        Primitive::Spectral,
        Primitive::Spatial,
        Primitive::Color,
        Primitive::Additive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Spectral => "spectral",
            Primitive::Spatial => "spatial",
            Primitive::Color => "color",
            Primitive::Additive => "additive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub kernel_size: usize,
    pub sigma_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    pub cut_frequency: u32,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorConfig {
    pub max_frequency: u32,
    pub band_width: u32,
    pub sigma_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveConfig {
    pub sigma_max: f64,
}

/// Everything needed to sample augmentation recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimeConfig {
    pub spectral: SpectralConfig,
    pub spatial: SpatialConfig,
    pub color: ColorConfig,
    pub additive: AdditiveConfig,
    /// Primitives a step may pick in addition to identity.
    pub enabled: Vec<Primitive>,
    /// Must be set to run with an empty `enabled` list.
    pub identity_only: bool,
    /// Number of transform chains mixed with the clean image.
    pub width: usize,
    /// Steps per chain.
    pub depth: usize,
    /// Global strength scale.
    pub alpha: f64,
}

/// Spatial strength bounds, chosen so that the 99th percentile of the
/// largest pixel displacement over 1000 sampled fields is about 3 px at
/// 32×32 with K=100 and about 6 px at 224×224 with K=500. Regenerate with
/// `cargo run --release --example calibrate_spatial`.
pub const CIFAR_SPATIAL_SIGMA: (f64, f64) = (0.0, 0.01775);
pub const IMAGENET_SPATIAL_SIGMA: (f64, f64) = (0.0, 0.003594);

impl PrimeConfig {
    /// Defaults for 32×32-class images.
    pub fn cifar() -> Self {
        Self {
            spectral: SpectralConfig {
                kernel_size: 3,
                sigma_max: 4.0,
            },
            spatial: SpatialConfig {
                cut_frequency: 100,
                sigma_min: CIFAR_SPATIAL_SIGMA.0,
                sigma_max: CIFAR_SPATIAL_SIGMA.1,
            },
            color: ColorConfig {
                max_frequency: 10,
                band_width: 11,
                sigma_max: 0.01,
            },
            additive: AdditiveConfig { sigma_max: 0.05 },
            enabled: vec![Primitive::Spectral, Primitive::Spatial, Primitive::Color],
            identity_only: false,
            width: 3,
            depth: 3,
            alpha: 1.0,
        }
    }

    /// Defaults for 224×224-class images.
    pub fn imagenet() -> Self {
        Self {
            spatial: SpatialConfig {
                cut_frequency: 500,
                sigma_min: IMAGENET_SPATIAL_SIGMA.0,
                sigma_max: IMAGENET_SPATIAL_SIGMA.1,
            },
            color: ColorConfig {
                max_frequency: 500,
                band_width: 20,
                sigma_max: 0.05,
            },
            ..Self::cifar()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "cifar" => Ok(Self::cifar()),
            "imagenet" => Ok(Self::imagenet()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected cifar or imagenet)"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Enabled primitives, deduplicated, in canonical order.
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut p = self.enabled.clone();
        p.sort();
        p.dedup();
        p
    }

    /// Every strength range collapsed to zero.
    pub fn with_zero_strength(mut self) -> Self {
        self.spectral.sigma_max = 0.0;
        self.spatial.sigma_min = 0.0;
        self.spatial.sigma_max = 0.0;
        self.color.sigma_max = 0.0;
        self.additive.sigma_max = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.width == 0 || self.depth == 0 {
            return bad(format!(
                "width and depth must be >= 1, got {} and {}",
                self.width, self.depth
            ));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if self.enabled.is_empty() && !self.identity_only {
            return bad("no primitive enabled; set identity_only to run pure identity".into());
        }
        let s = &self.spectral;
        if s.kernel_size == 0 || s.kernel_size.is_multiple_of(2) {
            return bad(format!(
                "spectral kernel size must be odd and positive, got {}",
                s.kernel_size
            ));
        }
        let t = &self.spatial;
        if t.cut_frequency == 0 {
            return bad("spatial cut frequency must be >= 1".into());
        }
        if !(0.0 <= t.sigma_min && t.sigma_min <= t.sigma_max) || !t.sigma_max.is_finite() {
            return bad(format!(
                "spatial sigma range ({}, {}) is invalid",
                t.sigma_min, t.sigma_max
            ));
        }
        let c = &self.color;
        if c.band_width == 0 || c.band_width > c.max_frequency + 1 {
            return bad(format!(
                "color band width {} must lie in 1..={}",
                c.band_width,
                c.max_frequency + 1
            ));
        }
        for (name, sigma) in [
            ("spectral", s.sigma_max),
            ("color", c.sigma_max),
            ("additive", self.additive.sigma_max),
        ] {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return bad(format!(
                    "{name} sigma_max must be finite and >= 0, got {sigma}"
                ));
            }
        }
        Ok(())
    }
}

impl Default for PrimeConfig {
    fn default() -> Self {
        Self::cifar()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        PrimeConfig::cifar().validate().unwrap();
        PrimeConfig::imagenet().validate().unwrap();
        assert!(PrimeConfig::preset("mnist").is_err());
    }

    #[test]
    fn defaults_follow_published_settings() {
        let c = PrimeConfig::cifar();
        assert_eq!((c.width, c.depth), (3, 3));
        assert_eq!(c.spectral.kernel_size, 3);
        assert_eq!(c.spectral.sigma_max, 4.0);
        assert_eq!(c.spatial.cut_frequency, 100);
        assert_eq!(
            (c.color.max_frequency, c.color.band_width, c.color.sigma_max),
            (10, 11, 0.01)
        );
        assert!(!c.enabled.contains(&Primitive::Additive));
        let i = PrimeConfig::imagenet();
        assert_eq!(i.spatial.cut_frequency, 500);
        assert_eq!(
            (i.color.max_frequency, i.color.band_width, i.color.sigma_max),
            (500, 20, 0.05)
        );
    }

    #[test]
    fn partial_json_fills_from_cifar() {
        let cfg = PrimeConfig::from_json(r#"{"alpha": 0.5, "width": 2}"#).unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.width, 2);
        assert_eq!(cfg.spectral, PrimeConfig::cifar().spectral);
        assert!(PrimeConfig::from_json(r#"{"alhpa": 0.5}"#).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = PrimeConfig::cifar();
        cfg.depth = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PrimeConfig::cifar();
        cfg.enabled.clear();
        assert!(cfg.validate().is_err());
        cfg.identity_only = true;
        assert!(cfg.validate().is_ok());
        let mut cfg = PrimeConfig::cifar();
        cfg.color.band_width = 12;
        assert!(cfg.validate().is_err());
        let mut cfg = PrimeConfig::cifar();
        cfg.alpha = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = PrimeConfig::imagenet();
        assert_eq!(PrimeConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
