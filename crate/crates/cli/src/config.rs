//! Run configuration: a TOML file with one section per stage, plus
//! `section.key=value` overrides from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crerank::cfgen::CfConfig;
use crerank::corpus::{PreprocessConfig, Recipe};
use crerank::reranker::RerankerConfig;
use crerank::stampgen::{EncoderKind, StampConfig};
use crerank::training::TrainConfig;
use crerank::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub preprocess: PreprocessSection,
    pub generator: GeneratorSection,
    pub reranker: RerankerConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub recipe: Recipe,
    pub raw: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub reranker: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            recipe: Recipe::Generic,
            raw: None,
            corpus: None,
            generator: None,
            reranker: None,
            cache: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Overrides on top of the recipe's preprocessing defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub dataset: Option<String>,
    pub min_item_support: Option<usize>,
    pub test_window_ms: Option<i64>,
    pub train_fraction: Option<f64>,
    pub max_len: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Cf,
    Stamp,
    Stmo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: GeneratorKind,
    pub alpha: f64,
    pub table_width: usize,
    pub d: usize,
    pub attention_normalized: bool,
    pub emb_init_std: f64,
    pub weight_init_std: f64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let cf = CfConfig::default();
        let st = StampConfig::default();
        Self {
            kind: GeneratorKind::Cf,
            alpha: cf.alpha,
            table_width: cf.table_width,
            d: st.d,
            attention_normalized: st.attention_normalized,
            emb_init_std: st.emb_init_std,
            weight_init_std: st.weight_init_std,
        }
    }
}

impl GeneratorSection {
    pub fn cf(&self) -> CfConfig {
        CfConfig {
            alpha: self.alpha,
            table_width: self.table_width,
        }
    }

    pub fn stamp(&self) -> StampConfig {
        StampConfig {
            kind: if self.kind == GeneratorKind::Stmo {
                EncoderKind::Stmo
            } else {
                EncoderKind::Stamp
            },
            d: self.d,
            attention_normalized: self.attention_normalized,
            emb_init_std: self.emb_init_std,
            weight_init_std: self.weight_init_std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Cut-off for `evaluate`.
    pub n: usize,
    /// Cut-off for the sweep and ablation reports.
    pub experiment_n: usize,
    pub sweep_ks: Vec<usize>,
    pub plateau_tolerance: f64,
    pub svg: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n: 20,
            experiment_n: 5,
            sweep_ks: vec![1, 5, 10, 20, 50, 100, 200],
            plateau_tolerance: 0.005,
            svg: true,
        }
    }
}

impl RunConfig {
    pub fn preprocess_config(&self) -> PreprocessConfig {
        let p = &self.preprocess;
        let mut cfg = PreprocessConfig::for_recipe(self.data.recipe);
        if let Some(d) = &p.dataset {
            cfg.dataset = d.clone();
        }
        if let Some(v) = p.min_item_support {
            cfg.min_item_support = v;
        }
        if let Some(v) = p.test_window_ms {
            cfg.test_window_ms = v;
        }
        if p.train_fraction.is_some() {
            cfg.train_fraction = p.train_fraction;
        }
        if p.max_len.is_some() {
            cfg.max_len = p.max_len;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.reranker.validate()?;
        self.generator.stamp().validate()?;
        if self.eval.n == 0 || self.eval.experiment_n == 0 {
            return Err(Error::Config("eval cut-offs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// Parses `text` (TOML), applies `overrides` and resolves defaults.
pub fn resolve(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e.message())))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|source| Error::IoAt {
            path: p.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    resolve(&text, overrides)
}

/// `a.b.c=value`; the value is read as a TOML literal, falling back to a
/// plain string.
fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for s in sections {
        table = table
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: `{s}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = resolve("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.reranker.k, 100);
        assert_eq!(cfg.train.batch_size, 512);
        assert_eq!(cfg.train.lr, 0.001);
    }

    #[test]
    fn overrides_win() {
        let text = "[reranker]\nk = 50\n[data]\nrecipe = \"diginetica\"\n";
        let cfg = resolve(
            text,
            &[
                "reranker.k=10".into(),
                "train.epochs=2".into(),
                "reranker.cre_enabled=false".into(),
                "data.corpus=some/file.corpus".into(),
                "generator.kind=stamp".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.reranker.k, 10);
        assert_eq!(cfg.train.epochs, 2);
        assert!(!cfg.reranker.cre_enabled);
        assert_eq!(cfg.data.recipe, Recipe::Diginetica);
        assert_eq!(cfg.data.corpus, Some(PathBuf::from("some/file.corpus")));
        assert_eq!(cfg.generator.kind, GeneratorKind::Stamp);
        assert_eq!(cfg.preprocess_config().min_item_support, 5);
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = resolve("", &["reranker.d_cre=7".into(), "preprocess.max_len=9".into()]).unwrap();
        assert_eq!(resolve(&cfg.to_toml(), &[]).unwrap(), cfg);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for (text, ov) in [
            ("[reranker]\nkk = 1\n", vec![]),
            ("", vec!["reranker.k=0".to_string()]),
            ("", vec!["nokey".to_string()]),
            ("", vec!["train.lr=-1".to_string()]),
            ("[train\n", vec![]),
        ] {
            let err = resolve(text, &ov).unwrap_err();
            assert!(matches!(err.class(), "config"), "{text:?} {ov:?}: {err}");
        }
    }
}
