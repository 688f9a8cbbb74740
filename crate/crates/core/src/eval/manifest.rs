use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cv::{PipelineKind, PipelineSpec, Protocol};
use crate::data::{load_dataset, ClassColumn, Dataset, GridPolicy};
use crate::dcnn::{ConvLayerSpec, NetworkConfig};
use crate::error::{Error, Result};
use crate::frf::ForestConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    /// Relative paths are resolved against the manifest's directory.
    pub path: PathBuf,
    /// Class attribute; the last one when absent.
    #[serde(default)]
    pub class: Option<String>,
    /// Attributes drawn per split by forest pipelines that defer to the dataset.
    #[serde(default)]
    pub mtry: Option<usize>,
}

fn default_preset() -> String {
    "small".into()
}

fn default_retries() -> usize {
    2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineEntry {
    pub name: String,
    pub kind: PipelineKind,
    /// Network preset the overrides apply to.
    #[serde(default = "default_preset")]
    pub network: String,
    /// Conv stages as `maps-pw-ph-qw-qh` labels, replacing the preset's.
    #[serde(default)]
    pub layers: Option<Vec<String>>,
    /// Any other `NetworkConfig` fields, e.g. `learning_rate`.
    #[serde(default)]
    pub overrides: toml::Table,
    #[serde(default = "default_grid")]
    pub grid: GridPolicy,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default = "default_retries")]
    pub lr_retries: usize,
    #[serde(default)]
    pub forest: ForestConfig,
    /// Use the dataset's `mtry` when the forest table sets none.
    #[serde(default = "yes")]
    pub dataset_mtry: bool,
}

fn default_grid() -> GridPolicy {
    GridPolicy::FitNetwork
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default = "default_name")]
    name: String,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default)]
    threads: Option<usize>,
    #[serde(default = "yes")]
    record_timing: bool,
    #[serde(default, rename = "dataset")]
    datasets: Vec<DatasetEntry>,
    #[serde(default, rename = "pipeline")]
    pipelines: Vec<PipelineEntry>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_k() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

/// An experiment: every pipeline cross-validated on every dataset, once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub k: usize,
    pub seeds: Vec<u64>,
    /// Worker cap; `None` leaves the choice to the thread pool.
    pub threads: Option<usize>,
    /// Off makes every report byte-identical across reruns.
    pub record_timing: bool,
    pub datasets: Vec<DatasetEntry>,
    pub pipelines: Vec<PipelineEntry>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::parse(&text, base).map_err(|e| match e {
            Error::Manifest { message, .. } => Error::Manifest {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest> {
        let base_dir = base_dir.into();
        let bad = |message: String| Error::Manifest {
            path: base_dir.clone(),
            message,
        };
        let file: ManifestFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if file.datasets.is_empty() {
            return Err(bad("no [[dataset]] entries".into()));
        }
        if file.pipelines.is_empty() {
            return Err(bad("no [[pipeline]] entries".into()));
        }
        if file.k < 2 {
            return Err(bad(format!("k must be at least 2, got {}", file.k)));
        }
        if file.seeds.is_empty() {
            return Err(bad("seeds is empty".into()));
        }
        if file.threads == Some(0) {
            return Err(bad("threads must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &file.datasets {
            if !seen.insert(("dataset", d.name.clone())) {
                return Err(bad(format!("dataset {:?} listed twice", d.name)));
            }
        }
        for p in &file.pipelines {
            if !seen.insert(("pipeline", p.name.clone())) {
                return Err(bad(format!("pipeline {:?} listed twice", p.name)));
            }
            network_config(p).map_err(|e| bad(format!("pipeline {:?}: {e}", p.name)))?;
            p.forest
                .validate()
                .map_err(|e| bad(format!("pipeline {:?}: {e}", p.name)))?;
        }
        Ok(Manifest {
            name: file.name,
            k: file.k,
            seeds: file.seeds,
            threads: file.threads,
            record_timing: file.record_timing,
            datasets: file.datasets,
            pipelines: file.pipelines,
            base_dir,
        })
    }

    pub fn dataset_path(&self, entry: &DatasetEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Loads the file and renames the dataset to its manifest name.
    pub fn load_dataset(&self, entry: &DatasetEntry) -> Result<Dataset> {
        let mut ds = load_dataset(self.dataset_path(entry), &ClassColumn::from_option(entry.class.as_deref()))?;
        ds.name = entry.name.clone();
        Ok(ds)
    }

    /// The pipeline as run on `dataset`.
    pub fn pipeline_spec(&self, entry: &PipelineEntry, dataset: &DatasetEntry) -> Result<PipelineSpec> {
        let mut forest = entry.forest.clone();
        if forest.mtry.is_none() && entry.dataset_mtry {
            forest.mtry = dataset.mtry;
        }
        Ok(PipelineSpec {
            name: entry.name.clone(),
            kind: entry.kind,
            network: network_config(entry)?,
            forest,
            grid: entry.grid,
            protocol: entry.protocol,
            lr_retries: entry.lr_retries,
        })
    }
}

fn network_config(entry: &PipelineEntry) -> Result<NetworkConfig> {
    let mut cfg = NetworkConfig::preset(&entry.network)?;
    if let Some(layers) = &entry.layers {
        cfg.conv_layers = layers
            .iter()
            .map(|l| l.parse::<ConvLayerSpec>())
            .collect::<Result<_>>()?;
    }
    if !entry.overrides.is_empty() {
        let mut table = toml::Table::try_from(&cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for (key, value) in &entry.overrides {
            if key == "conv_layers" || !table.contains_key(key) {
                return Err(Error::InvalidConfig(format!("unknown network override {key:?}")));
            }
            table.insert(key.clone(), value.clone());
        }
        cfg = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
name = "demo"
k = 3
seeds = [4]
record_timing = false

[[dataset]]
name = "Toy"
path = "toy.csv"
mtry = 3

[[pipeline]]
name = "net"
kind = "standalone-dcnn"
network = "large"
overrides = { learning_rate = 0.01, epochs = 5 }

[[pipeline]]
name = "combo"
kind = "dcnn+frf"
layers = ["4-3-3-2-2"]
protocol = "all-rows"
forest = { n_trees = 20 }
"#;

    #[test]
    fn parses_and_resolves() {
        let m = Manifest::parse(SMALL, "/data").unwrap();
        assert_eq!((m.name.as_str(), m.k, m.seeds.as_slice()), ("demo", 3, &[4u64][..]));
        assert!(!m.record_timing);
        assert_eq!(m.dataset_path(&m.datasets[0]), PathBuf::from("/data/toy.csv"));

        let net = m.pipeline_spec(&m.pipelines[0], &m.datasets[0]).unwrap();
        assert_eq!(net.kind, PipelineKind::StandaloneDcnn);
        assert_eq!(net.network.layers_label(), NetworkConfig::large().layers_label());
        assert_eq!((net.network.learning_rate, net.network.epochs), (0.01, 5));
        assert_eq!(net.grid, GridPolicy::FitNetwork);
        assert_eq!(net.lr_retries, 2);

        let combo = m.pipeline_spec(&m.pipelines[1], &m.datasets[0]).unwrap();
        assert_eq!(combo.network.layers_label(), "4-3-3-2-2");
        assert_eq!(combo.protocol, Protocol::AllRows);
        assert_eq!((combo.forest.n_trees, combo.forest.mtry), (20, Some(3)));
    }

    #[test]
    fn rejects_bad_manifests() {
        for (text, needle) in [
            ("k = 5\n", "no [[dataset]]"),
            ("[[dataset]]\nname='a'\npath='a.csv'\n", "no [[pipeline]]"),
            (
                "[[dataset]]\nname='a'\npath='a.csv'\n[[pipeline]]\nname='p'\nkind='dcnn'\n",
                "unknown variant",
            ),
            (
                "[[dataset]]\nname='a'\npath='a.csv'\n[[pipeline]]\nname='p'\nkind='frf-raw'\noverrides={lr=1}\n",
                "unknown network override",
            ),
            (
                "bogus = 1\n[[dataset]]\nname='a'\npath='a.csv'\n[[pipeline]]\nname='p'\nkind='frf-raw'\n",
                "unknown field",
            ),
        ] {
            let err = Manifest::parse(text, ".").unwrap_err().to_string();
            assert!(err.contains(needle), "{err}");
        }
    }
}
