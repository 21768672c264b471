use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crerank::cfgen::CfGenerator;
use crerank::checkpoint::{config_json, Checkpoint};
use crerank::corpus::{
    parse_diginetica, parse_generic, parse_yoochoose, preprocess, read_corpus, write_corpus, ParseReport,
    ProcessedCorpus, Recipe,
};
use crerank::evalkit::{ablate_cre, evaluate, line_chart_svg, reports_csv, sweep_k, Baseline, Series};
use crerank::generator::CandidateGenerator;
use crerank::reranker::{train_reranker, CandidateCache, Reranker, TwoStage};
use crerank::stampgen::{train_generator, StampModel};
use crerank::{Error, Result};

use crate::config::{self, GeneratorKind, RunConfig};
use crate::{Command, Common};

type Generator = Box<dyn CandidateGenerator>;

pub fn run(common: &Common, command: &Command) -> Result<()> {
    let cfg = resolve(common)?;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx {
        cfg,
        force: common.force,
    };
    fs::create_dir_all(&ctx.cfg.data.out).map_err(|source| Error::IoAt {
        path: ctx.cfg.data.out.clone(),
        source,
    })?;
    let name = match command {
        Command::Ingest => "ingest",
        Command::TrainGenerator => "train-generator",
        Command::CacheCandidates => "cache-candidates",
        Command::TrainReranker => "train-reranker",
        Command::Evaluate { .. } => "evaluate",
        Command::SweepK => "sweep-k",
        Command::AblateCre => "ablate-cre",
    };
    ctx.write(&format!("{name}.config.toml"), ctx.cfg.to_toml())?;
    match command {
        Command::Ingest => ctx.ingest(),
        Command::TrainGenerator => ctx.train_generator(),
        Command::CacheCandidates => ctx.cache_candidates(),
        Command::TrainReranker => ctx.train_reranker(),
        Command::Evaluate { baseline, n } => ctx.evaluate(*baseline, n.unwrap_or(ctx.cfg.eval.n)),
        Command::SweepK => ctx.sweep_k(),
        Command::AblateCre => ctx.ablate_cre(),
    }
}

/// Path flags become overrides so the snapshot records them.
fn resolve(common: &Common) -> Result<RunConfig> {
    let mut overrides = common.overrides.clone();
    let flags = [
        ("out", &common.out),
        ("raw", &common.raw),
        ("corpus", &common.corpus),
        ("generator", &common.generator),
        ("reranker", &common.reranker),
        ("cache", &common.cache),
    ];
    for (key, value) in flags {
        if let Some(p) = value {
            let s = p
                .to_str()
                .ok_or_else(|| Error::Config(format!("--{key}: path is not valid UTF-8")))?;
            overrides.push(format!("data.{key}={}", toml_string(s)));
        }
    }
    config::load(common.config.as_deref(), &overrides)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

struct Ctx {
    cfg: RunConfig,
    force: bool,
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    #[serde(flatten)]
    stats: crerank::corpus::CorpusStats,
    parse: &'a ParseReport,
}

impl Ctx {
    fn out(&self, file: &str) -> PathBuf {
        self.cfg.data.out.join(file)
    }

    fn write(&self, file: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out(file);
        fs::write(&path, contents).map_err(|source| Error::IoAt { path, source })
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
        s.push('\n');
        self.write(file, s)
    }

    /// The configured path, or the file of that name in the output directory.
    fn input(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.out(default))
    }

    fn corpus(&self) -> Result<ProcessedCorpus> {
        let path = self.input(&self.cfg.data.corpus, "corpus.corpus");
        let corpus = read_corpus(&path)?;
        let expected = self.cfg.preprocess_config().hash();
        if !self.force && corpus.config_hash != expected {
            return Err(Error::Config(format!(
                "{}: corpus was preprocessed with a different configuration (pass --force to use it anyway)",
                path.display()
            )));
        }
        Ok(corpus)
    }

    fn generator(&self, corpus: &ProcessedCorpus) -> Result<Generator> {
        let path = self.input(&self.cfg.data.generator, "generator.ckpt");
        let ck = Checkpoint::read(&path)?;
        let g: Generator = match self.cfg.generator.kind {
            GeneratorKind::Cf => {
                ck.check_config(&config_json(&self.cfg.generator.cf()).1, self.force)?;
                Box::new(CfGenerator::from_checkpoint(&ck)?)
            }
            GeneratorKind::Stamp | GeneratorKind::Stmo => {
                ck.check_config(&config_json(&self.cfg.generator.stamp()).1, self.force)?;
                Box::new(StampModel::from_checkpoint(&ck)?)
            }
        };
        if g.num_items() != corpus.num_items() {
            return Err(Error::Config(format!(
                "{}: generator covers {} items, corpus has {}",
                path.display(),
                g.num_items(),
                corpus.num_items()
            )));
        }
        Ok(g)
    }

    fn reranker(&self, corpus: &ProcessedCorpus) -> Result<Reranker> {
        let path = self.input(&self.cfg.data.reranker, "reranker.ckpt");
        let ck = Checkpoint::read(&path)?;
        ck.expect_kind(&["reranker"])?;
        ck.check_config(&config_json(&self.cfg.reranker).1, self.force)?;
        let r = Reranker::from_checkpoint(&ck)?;
        if r.params.num_items() != corpus.num_items() {
            return Err(Error::Config(format!(
                "{}: re-ranker covers {} items, corpus has {}",
                path.display(),
                r.params.num_items(),
                corpus.num_items()
            )));
        }
        Ok(r)
    }

    fn ingest(&self) -> Result<()> {
        let raw = self
            .cfg
            .data
            .raw
            .as_ref()
            .ok_or_else(|| Error::Config("ingest needs a raw dataset (--raw or data.raw)".into()))?;
        let (events, report) = match self.cfg.data.recipe {
            Recipe::Yoochoose => parse_yoochoose(raw)?,
            Recipe::Diginetica => parse_diginetica(raw)?,
            Recipe::Generic => parse_generic(raw)?,
        };
        if report.skipped > 0 {
            log::warn!("skipped {} of {} rows", report.skipped, report.rows);
        }
        let corpus = preprocess(&events, &self.cfg.preprocess_config())?;
        let path = self.input(&self.cfg.data.corpus, "corpus.corpus");
        write_corpus(&corpus, &path)?;
        let stats = corpus.stats();
        log::info!(
            "{}: {} items, {} train / {} test examples",
            path.display(),
            stats.items,
            stats.train_examples,
            stats.test_examples
        );
        self.write_json("corpus.stats.json", &IngestSummary { stats, parse: &report })
    }

    fn train_generator(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let gen = &self.cfg.generator;
        let ck = match gen.kind {
            GeneratorKind::Cf => {
                let g = CfGenerator::fit(&corpus, gen.alpha, gen.table_width)?;
                g.to_checkpoint()
            }
            GeneratorKind::Stamp | GeneratorKind::Stmo => {
                let (model, log) = train_generator(&corpus, &gen.stamp(), &self.cfg.train)?;
                self.write_json("generator.log.json", &log)?;
                self.write("generator.log.csv", log.to_csv())?;
                model.to_checkpoint()
            }
        };
        let path = self.input(&self.cfg.data.generator, "generator.ckpt");
        ck.write(&path)?;
        log::info!("wrote {} ({})", path.display(), ck.kind);
        Ok(())
    }

    fn cache_candidates(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let g = self.generator(&corpus)?;
        let depth = self.cfg.reranker.k.max(5);
        let cache = CandidateCache::build(g.as_ref(), &corpus, depth);
        let path = self.input(&self.cfg.data.cache, "candidates.cache");
        cache.write(&path)?;
        log::info!("wrote {} ({} lists, depth {depth})", path.display(), cache.lists.len());
        Ok(())
    }

    fn train_reranker(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let g = self.generator(&corpus)?;
        let cache = match &self.cfg.data.cache {
            Some(p) => Some(CandidateCache::read(p)?),
            None => None,
        };
        let (reranker, log) = train_reranker(
            g.as_ref(),
            &corpus,
            &self.cfg.reranker,
            &self.cfg.train,
            cache.as_ref(),
        )?;
        log::info!(
            "{} of {} training examples have the target in the top {}",
            log.surviving_examples,
            log.candidate_examples,
            log.k
        );
        self.write_json("reranker.log.json", &log)?;
        self.write("reranker.log.csv", log.training.to_csv())?;
        let path = self.input(&self.cfg.data.reranker, "reranker.ckpt");
        reranker.to_checkpoint().write(&path)
    }

    fn evaluate(&self, baseline: bool, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Config("cut-off N must be at least 1".into()));
        }
        let corpus = self.corpus()?;
        let g = self.generator(&corpus)?;
        let report = if baseline {
            evaluate(&Baseline(g), &corpus.dataset, &corpus.test, n)?
        } else {
            let r = self.reranker(&corpus)?;
            evaluate(&TwoStage::new(g, r), &corpus.dataset, &corpus.test, n)?
        };
        let csv = reports_csv(std::slice::from_ref(&report));
        print!("{csv}");
        self.write_json("report.json", &report)?;
        self.write("report.csv", csv)
    }

    fn sweep_k(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let g = self.generator(&corpus)?;
        let eval = &self.cfg.eval;
        let sweep = sweep_k(
            g.as_ref(),
            &corpus,
            &self.cfg.reranker,
            &self.cfg.train,
            &eval.sweep_ks,
            eval.experiment_n,
            eval.plateau_tolerance,
        )?;
        log::info!("best k = {}, plateau from k = {}", sweep.best_k, sweep.plateau_from);
        self.write_json("sweep.json", &sweep)?;
        self.write("sweep.csv", sweep.to_csv())?;
        if eval.svg {
            let n = eval.experiment_n;
            let pts = |f: fn(&crerank::evalkit::KPoint) -> f64| -> Vec<(f64, f64)> {
                sweep.points.iter().map(|p| (p.k as f64, f(p))).collect()
            };
            let flat = |y: f64| sweep.points.iter().map(|p| (p.k as f64, y)).collect();
            let svg = line_chart_svg(
                &format!("Recall@{n} by candidate count k"),
                "k",
                &format!("Recall@{n}"),
                &[
                    Series {
                        name: "re-ranked".into(),
                        points: pts(|p| p.report.recall),
                    },
                    Series {
                        name: format!("{} alone", g.name()),
                        points: flat(sweep.generator.recall),
                    },
                ],
            );
            self.write("sweep.svg", svg)?;
        }
        Ok(())
    }

    fn ablate_cre(&self) -> Result<()> {
        let corpus = self.corpus()?;
        let g = self.generator(&corpus)?;
        let n = self.cfg.eval.experiment_n;
        let ab = ablate_cre(g.as_ref(), &corpus, &self.cfg.reranker, &self.cfg.train, n)?;
        let csv = reports_csv(&[ab.generator.clone(), ab.rr.report.clone(), ab.rrcre.report.clone()]);
        print!("{csv}");
        self.write_json("ablation.json", &ab)?;
        self.write("ablation.csv", csv)?;
        self.write("ablation.curve.csv", ab.curve_csv())?;
        if self.cfg.eval.svg {
            let curve = |arm: &crerank::evalkit::AblationArm| -> Vec<(f64, f64)> {
                arm.log
                    .training
                    .validation
                    .iter()
                    .map(|p| (p.step as f64, p.recall_at_5))
                    .collect()
            };
            let svg = line_chart_svg(
                "Validation Recall@5 during training",
                "step",
                "Recall@5",
                &[
                    Series {
                        name: "RR".into(),
                        points: curve(&ab.rr),
                    },
                    Series {
                        name: "RRCRE".into(),
                        points: curve(&ab.rrcre),
                    },
                ],
            );
            self.write("ablation.svg", svg)?;
        }
        Ok(())
    }
}
