use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One convolution + pooling stage, written `maps-patchW-patchH-poolW-poolH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub feature_maps: usize,
    pub patch_w: usize,
    pub patch_h: usize,
    pub pool_w: usize,
    pub pool_h: usize,
}

impl ConvLayerSpec {
    pub const fn new(feature_maps: usize, patch_w: usize, patch_h: usize, pool_w: usize, pool_h: usize) -> Self {
        ConvLayerSpec {
            feature_maps,
            patch_w,
            patch_h,
            pool_w,
            pool_h,
        }
    }

    /// Spatial size after convolution and pooling, or `None` if nothing is left.
    pub fn output_size(&self, height: usize, width: usize) -> Option<(usize, usize)> {
        if height < self.patch_h || width < self.patch_w {
            return None;
        }
        let h = (height - self.patch_h + 1) / self.pool_h;
        let w = (width - self.patch_w + 1) / self.pool_w;
        (h > 0 && w > 0).then_some((h, w))
    }
}

impl fmt::Display for ConvLayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}-{}",
            self.feature_maps, self.patch_w, self.patch_h, self.pool_w, self.pool_h
        )
    }
}

impl FromStr for ConvLayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split('-')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidConfig(format!("bad layer spec {s:?}")))?;
        match parts[..] {
            [m, pw, ph, qw, qh] if parts.iter().all(|&v| v > 0) => Ok(ConvLayerSpec::new(m, pw, ph, qw, qh)),
            _ => Err(Error::InvalidConfig(format!(
                "layer spec {s:?} must be five positive integers like 6-3-3-2-2"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Uniform in ±sqrt(1 / fan_in).
    #[default]
    FanInScaled,
    /// Uniform in ±1.
    UniformUnit,
}

impl FromStr for InitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fan-in-scaled" | "fan-in" => Ok(InitPolicy::FanInScaled),
            "uniform-unit" => Ok(InitPolicy::UniformUnit),
            _ => Err(Error::InvalidConfig(format!("unknown init policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub conv_layers: Vec<ConvLayerSpec>,
    pub dense_units: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub input_dropout: f64,
    pub hidden_dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init_scale: InitPolicy,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            conv_layers: vec![ConvLayerSpec::new(6, 3, 3, 2, 2), ConvLayerSpec::new(12, 3, 3, 2, 2)],
            dense_units: 64,
            batch_size: 100,
            learning_rate: 0.95,
            momentum: 0.9,
            input_dropout: 0.2,
            hidden_dropout: 0.5,
            epochs: 100,
            seed: 0,
            init_scale: InitPolicy::FanInScaled,
        }
    }
}

impl NetworkConfig {
    /// 6-3-3-2-2 followed by 12-3-3-2-2.
    pub fn small() -> Self {
        NetworkConfig::default()
    }

    /// 20-5-5-2-2 followed by 100-5-5-2-2.
    pub fn large() -> Self {
        NetworkConfig {
            conv_layers: vec![ConvLayerSpec::new(20, 5, 5, 2, 2), ConvLayerSpec::new(100, 5, 5, 2, 2)],
            ..NetworkConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "small" => Ok(Self::small()),
            "large" => Ok(Self::large()),
            _ => Err(Error::InvalidConfig(format!(
                "unknown network preset {name:?} (expected small or large)"
            ))),
        }
    }

    pub fn layers_label(&self) -> String {
        self.conv_layers
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Range checks on every field that do not depend on the input grid.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.conv_layers.is_empty() {
            return bad("at least one conv layer is required".into());
        }
        for (i, l) in self.conv_layers.iter().enumerate() {
            if [l.feature_maps, l.patch_w, l.patch_h, l.pool_w, l.pool_h].contains(&0) {
                return bad(format!("conv layer {i} ({l}) has a zero field"));
            }
        }
        if self.dense_units == 0 {
            return bad("dense_units must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} is outside (0, 1]", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} is outside [0, 1)", self.momentum));
        }
        for (name, r) in [("input_dropout", self.input_dropout), ("hidden_dropout", self.hidden_dropout)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} {r} is outside [0, 1)"));
            }
        }
        Ok(())
    }

    /// `(maps, height, width)` after every conv stage on a `height × width`
    /// single-channel input. Fails naming the first stage that leaves no
    /// spatial extent.
    pub fn shape_chain(&self, height: usize, width: usize) -> Result<Vec<(usize, usize, usize)>> {
        let (mut h, mut w) = (height, width);
        let mut out = Vec::with_capacity(self.conv_layers.len());
        for (i, l) in self.conv_layers.iter().enumerate() {
            let (nh, nw) = l.output_size(h, w).ok_or_else(|| Error::ShapeChain {
                layer: i,
                spec: l.to_string(),
                height: h,
                width: w,
            })?;
            out.push((l.feature_maps, nh, nw));
            (h, w) = (nh, nw);
        }
        Ok(out)
    }

    /// Length of the flattened output of the last conv stage.
    pub fn flat_size(&self, height: usize, width: usize) -> Result<usize> {
        let chain = self.shape_chain(height, width)?;
        let (m, h, w) = *chain.last().expect("validated non-empty");
        Ok(m * h * w)
    }

    /// Smallest square input side the conv chain accepts.
    pub fn min_input_side(&self) -> usize {
        (1..)
            .find(|&s| self.shape_chain(s, s).is_ok())
            .expect("every chain of positive sizes fits some input")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_presets() {
        let c = NetworkConfig::default();
        assert_eq!(c.batch_size, 100);
        assert_eq!(c.learning_rate, 0.95);
        assert_eq!(c.input_dropout, 0.2);
        assert_eq!(c.hidden_dropout, 0.5);
        assert_eq!(c.epochs, 100);
        assert_eq!(NetworkConfig::small().layers_label(), "6-3-3-2-2,12-3-3-2-2");
        assert_eq!(NetworkConfig::large().layers_label(), "20-5-5-2-2,100-5-5-2-2");
        assert!(NetworkConfig::preset("nope").is_err());
    }

    #[test]
    fn layer_spec_parsing() {
        let l: ConvLayerSpec = "20-5-5-2-2".parse().unwrap();
        assert_eq!(l, ConvLayerSpec::new(20, 5, 5, 2, 2));
        assert!("1-2-3".parse::<ConvLayerSpec>().is_err());
        assert!("0-3-3-2-2".parse::<ConvLayerSpec>().is_err());
    }

    #[test]
    fn shape_chain_follows_floor_rule() {
        let c = NetworkConfig::small();
        assert_eq!(c.shape_chain(10, 10).unwrap(), vec![(6, 4, 4), (12, 1, 1)]);
        assert_eq!(c.min_input_side(), 10);
        assert_eq!(NetworkConfig::large().min_input_side(), 16);
        assert!(matches!(c.shape_chain(8, 8), Err(Error::ShapeChain { layer: 1, .. })));
        assert!(matches!(
            NetworkConfig::large().shape_chain(3, 3),
            Err(Error::ShapeChain { layer: 0, .. })
        ));
    }

    #[test]
    fn validation_rejects_out_of_range_fields() {
        let ok = NetworkConfig::default();
        assert!(ok.validate().is_ok());
        for broken in [
            NetworkConfig { epochs: 0, ..ok.clone() },
            NetworkConfig { learning_rate: 0.0, ..ok.clone() },
            NetworkConfig { momentum: 1.0, ..ok.clone() },
            NetworkConfig { hidden_dropout: 1.0, ..ok.clone() },
            NetworkConfig { conv_layers: vec![], ..ok.clone() },
        ] {
            assert!(broken.validate().is_err());
        }
    }
}
