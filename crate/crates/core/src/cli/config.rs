use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CleaningOptions, SynthConfig};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Which injector `inject` runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectMode {
    /// Additive point anomalies of magnitude `alpha`.
    #[default]
    Point,
    /// Reversed correlation between two modalities of one node.
    Correlation,
}

/// Options of the `inject` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectOptions {
    pub mode: InjectMode,
    pub alpha: f64,
    pub rate: f64,
    pub seed: u64,
    /// Node index for correlation mode.
    pub node: usize,
    pub modality: usize,
    pub partner: usize,
    /// First timeline index of the correlation span.
    pub start: usize,
    pub length: usize,
}

impl Default for InjectOptions {
    fn default() -> Self {
        Self {
            mode: InjectMode::Point,
            alpha: 1.0,
            rate: 0.01,
            seed: 0,
            node: 0,
            modality: 0,
            partner: 1,
            start: 0,
            length: 0,
        }
    }
}

/// Everything a run needs, as one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every component seed when set.
    pub seed: Option<u64>,
    /// Data source: a raw lab log for `preprocess`, an archive directory otherwise.
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Report or output directory.
    pub out: Option<PathBuf>,
    /// Share of windows used for training; the rest, minus any window
    /// overlapping them, is the test set.
    pub train_fraction: f64,
    pub model: ModelConfig,
    pub synthetic: SynthConfig,
    pub cleaning: CleaningOptions,
    pub inject: InjectOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            data: None,
            checkpoint: None,
            out: None,
            train_fraction: 0.6,
            model: ModelConfig::default(),
            synthetic: SynthConfig::default(),
            cleaning: CleaningOptions::default(),
            inject: InjectOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    /// Applies `dotted.key=value` overrides. Values are read as TOML and
    /// fall back to plain strings.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut root = toml::Value::try_from(&self).map_err(|e| Error::Format(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let mut node = &mut root;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("override {key}: {part} is not a table")))?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                node = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            }
            log::info!("override {key} = {value}");
        }
        root.try_into().map_err(|e| Error::Config(format!("override: {e}")))
    }

    /// Pushes the master seed into every component.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(s) = self.seed {
            self.model.seed = s;
            self.synthetic.seed = s;
            self.inject.seed = s;
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        self.model.validate()?;
        Ok(self)
    }

    /// Training windows `0..train_end` and the first test window, which is
    /// the first one starting at or after the end of the training windows.
    pub fn split(&self, n_windows: usize) -> Result<(usize, usize)> {
        let train_end = ((n_windows as f64 * self.train_fraction).floor() as usize).max(1);
        let (w, l) = (self.model.window, self.model.step);
        let test_start = train_end - 1 + w.div_ceil(l);
        if test_start >= n_windows {
            return Err(Error::Config(format!(
                "{n_windows} windows leave no test window after {train_end} training windows"
            )));
        }
        Ok((train_end, test_start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_overrides() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let o = c
            .with_overrides(&[
                "model.window=64".into(),
                "model.step=32".into(),
                "model.detect_tail=32".into(),
                "model.graph=static_gcn".into(),
                "inject.alpha=-0.5".into(),
                "out=runs/a".into(),
                "seed=7".into(),
            ])
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(o.model.window, 64);
        assert_eq!(o.model.graph, crate::graph::GraphMode::StaticGcn);
        assert_eq!(o.inject.alpha, -0.5);
        assert_eq!(o.out, Some(PathBuf::from("runs/a")));
        assert_eq!((o.model.seed, o.synthetic.seed, o.inject.seed), (7, 7, 7));
    }

    #[test]
    fn rejects_bad_keys_and_values() {
        let c = RunConfig::default();
        assert!(matches!(c.clone().with_overrides(&["model.nope=1".into()]), Err(Error::Config(_))));
        assert!(matches!(c.clone().with_overrides(&["window".into()]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[model]\nwindow = \"x\""), Err(Error::Config(_))));
        let odd = c.with_overrides(&["model.window=63".into()]).unwrap();
        assert!(matches!(odd.resolve(), Err(Error::WindowLength(63))));
    }

    #[test]
    fn split_skips_overlapping_windows() {
        let mut c = RunConfig::default();
        c.model.window = 64;
        c.model.step = 32;
        assert_eq!(c.split(10).unwrap(), (6, 7));
        c.model.step = 64;
        assert_eq!(c.split(10).unwrap(), (6, 6));
        assert!(c.split(1).is_err());
    }
}
