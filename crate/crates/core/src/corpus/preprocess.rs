use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{augment, hex_digest, ItemVocab, ProcessedCorpus, RawEvent};

const DAY_MS: i64 = 86_400_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Yoochoose,
    Diginetica,
    Generic,
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yoochoose" => Ok(Recipe::Yoochoose),
            "diginetica" => Ok(Recipe::Diginetica),
            "generic" => Ok(Recipe::Generic),
            other => Err(Error::Config(format!(
                "unknown recipe {other:?} (expected yoochoose, diginetica or generic)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub dataset: String,
    /// Items clicked fewer times than this are removed.
    pub min_item_support: usize,
    /// Sessions starting within this many milliseconds of the last event go to test.
    pub test_window_ms: i64,
    /// Keep only the most recent fraction of training sessions.
    pub train_fraction: Option<f64>,
    /// Keep at most this many most recent history items per example.
    pub max_len: Option<usize>,
}

impl PreprocessConfig {
    pub fn for_recipe(recipe: Recipe) -> Self {
        match recipe {
            Recipe::Yoochoose => Self {
                dataset: "yoochoose-1/4".into(),
                min_item_support: 5,
                test_window_ms: DAY_MS,
                train_fraction: Some(0.25),
                max_len: None,
            },
            Recipe::Diginetica => Self {
                dataset: "diginetica".into(),
                min_item_support: 5,
                test_window_ms: 7 * DAY_MS,
                train_fraction: None,
                max_len: None,
            },
            Recipe::Generic => Self {
                dataset: "generic".into(),
                min_item_support: 1,
                test_window_ms: DAY_MS,
                train_fraction: None,
                max_len: None,
            },
        }
    }

    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).unwrap().as_bytes())
    }

    fn validate(&self) -> Result<()> {
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("train_fraction {f} not in (0, 1]")));
            }
        }
        if self.max_len == Some(0) {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if self.test_window_ms < 0 {
            return Err(Error::Config("test_window_ms must be non-negative".into()));
        }
        Ok(())
    }
}

struct Session<'a> {
    id: &'a str,
    start: i64,
    items: Vec<(i64, &'a str)>,
}

/// Turns raw clicks into train/test examples.
///
/// Steps, in order: group clicks by session and sort by time; drop length-1
/// sessions; drop items with fewer than `min_item_support` clicks; drop
/// length-1 sessions again; send sessions starting in the final window to
/// test; optionally keep only the most recent fraction of training sessions;
/// build the vocabulary from training sessions; drop test clicks on unseen
/// items (and test sessions left with fewer than two clicks); prefix-augment;
/// truncate histories to `max_len`.
pub fn preprocess(events: &[RawEvent], cfg: &PreprocessConfig) -> Result<ProcessedCorpus> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(Error::EmptyCorpus("no events to preprocess".into()));
    }

    let mut by_session: HashMap<&str, Vec<(i64, usize, &str)>> = HashMap::new();
    for (seq, e) in events.iter().enumerate() {
        by_session
            .entry(e.session_id.as_str())
            .or_default()
            .push((e.timestamp, seq, e.item_id.as_str()));
    }
    let mut sessions: Vec<Session> = by_session
        .into_iter()
        .filter(|(_, clicks)| clicks.len() > 1)
        .map(|(id, mut clicks)| {
            clicks.sort_unstable_by_key(|&(ts, seq, _)| (ts, seq));
            Session {
                id,
                start: clicks[0].0,
                items: clicks.into_iter().map(|(ts, _, item)| (ts, item)).collect(),
            }
        })
        .collect();

    let mut support: HashMap<&str, usize> = HashMap::new();
    for s in &sessions {
        for &(_, item) in &s.items {
            *support.entry(item).or_default() += 1;
        }
    }
    for s in &mut sessions {
        s.items.retain(|(_, item)| support[item] >= cfg.min_item_support);
        if let Some(&(ts, _)) = s.items.first() {
            s.start = ts;
        }
    }
    sessions.retain(|s| s.items.len() > 1);
    sessions.sort_unstable_by(|a, b| (a.start, a.id).cmp(&(b.start, b.id)));

    let Some(max_ts) = sessions.iter().flat_map(|s| s.items.iter().map(|&(ts, _)| ts)).max() else {
        return Err(Error::EmptyCorpus(
            "every session was removed by the length and support filters".into(),
        ));
    };
    let split_at = max_ts - cfg.test_window_ms;
    let (mut train, test): (Vec<Session>, Vec<Session>) =
        sessions.into_iter().partition(|s| s.start <= split_at);

    if let Some(f) = cfg.train_fraction {
        let keep = ((train.len() as f64) * f).ceil() as usize;
        let drop = train.len() - keep.min(train.len());
        train.drain(..drop);
    }
    if train.is_empty() {
        return Err(Error::EmptyCorpus("no training sessions after the time split".into()));
    }

    let mut vocab = ItemVocab::new();
    let train_sessions: Vec<Vec<u32>> = train
        .iter()
        .map(|s| s.items.iter().map(|&(_, item)| vocab.intern(item)).collect())
        .collect();
    let test_sessions: Vec<Vec<u32>> = test
        .iter()
        .map(|s| s.items.iter().filter_map(|&(_, item)| vocab.get(item)).collect::<Vec<_>>())
        .filter(|s| s.len() > 1)
        .collect();

    let train_examples = augment(&train_sessions, cfg.max_len);
    let test_examples = augment(&test_sessions, cfg.max_len);
    log::info!(
        "{}: {} items, {} train sessions ({} examples), {} test sessions ({} examples)",
        cfg.dataset,
        vocab.len(),
        train_sessions.len(),
        train_examples.len(),
        test_sessions.len(),
        test_examples.len()
    );

    Ok(ProcessedCorpus {
        dataset: cfg.dataset.clone(),
        config_hash: cfg.hash(),
        vocab,
        train_sessions,
        train: train_examples,
        test: test_examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SessionExample;

    const H: i64 = 3_600_000;
    const M: i64 = 60_000;

    fn session(id: &str, start: i64, items: &[&str]) -> Vec<RawEvent> {
        items
            .iter()
            .enumerate()
            .map(|(i, it)| RawEvent::new(id, start + i as i64 * M, *it))
            .collect()
    }

    fn cfg(min_support: usize) -> PreprocessConfig {
        PreprocessConfig {
            dataset: "toy".into(),
            min_item_support: min_support,
            test_window_ms: DAY_MS,
            train_fraction: None,
            max_len: None,
        }
    }

    #[test]
    fn length_one_sessions_are_dropped() {
        let mut ev = session("1", 0, &["a", "b", "c"]);
        ev.extend(session("2", H, &["d"]));
        // a late session so that both of the above land in train
        ev.extend(session("9", 5 * DAY_MS, &["a", "b"]));
        let c = preprocess(&ev, &cfg(1)).unwrap();
        assert_eq!(c.train_sessions, vec![vec![0, 1, 2]]);
        assert_eq!(
            c.train,
            vec![SessionExample::new(vec![0], 1), SessionExample::new(vec![0, 1], 2)]
        );
        assert_eq!(c.vocab.get("d"), None);
    }

    // Hand-enumerated fixture, support threshold 2, one-day test window.
    //
    //   s1 @ 0h   a b c      train
    //   s2 @ 1h   b c d      train
    //   s3 @ 2h   e          dropped (length 1)
    //   s4 @ 3h   a f        f has support 1 -> [a] -> dropped
    //   s5 @ 48h  b c g      test; g unseen in train -> [b c]
    //   s6 @ 49h  g d a z    z has support 1; g unseen -> [d a]
    //
    // Last kept event is s6/a at 49h+2m, so the split point is 25h+2m.
    // Vocabulary in training order: a=0 b=1 c=2 d=3.
    #[test]
    fn hand_enumerated_fixture() {
        let mut ev = Vec::new();
        ev.extend(session("s1", 0, &["a", "b", "c"]));
        ev.extend(session("s2", H, &["b", "c", "d"]));
        ev.extend(session("s3", 2 * H, &["e"]));
        ev.extend(session("s4", 3 * H, &["a", "f"]));
        ev.extend(session("s5", 48 * H, &["b", "c", "g"]));
        ev.extend(session("s6", 49 * H, &["g", "d", "a", "z"]));
        // input order must not matter
        ev.reverse();

        let c = preprocess(&ev, &cfg(2)).unwrap();
        assert_eq!(c.vocab.ids(), ["a", "b", "c", "d"]);
        assert_eq!(c.train_sessions, vec![vec![0, 1, 2], vec![1, 2, 3]]);
        assert_eq!(
            c.train,
            vec![
                SessionExample::new(vec![0], 1),
                SessionExample::new(vec![0, 1], 2),
                SessionExample::new(vec![1], 2),
                SessionExample::new(vec![1, 2], 3),
            ]
        );
        assert_eq!(
            c.test,
            vec![SessionExample::new(vec![1], 2), SessionExample::new(vec![3], 0)]
        );
    }

    #[test]
    fn quarter_keeps_most_recent_training_sessions() {
        let mut ev = Vec::new();
        for i in 0..8 {
            ev.extend(session(&format!("t{i}"), i * H, &["a", "b"]));
        }
        ev.extend(session("late", 10 * DAY_MS, &["a", "b"]));
        let mut c = cfg(1);
        c.train_fraction = Some(0.25);
        let out = preprocess(&ev, &c).unwrap();
        assert_eq!(out.train_sessions.len(), 2);
    }

    #[test]
    fn empty_after_filtering() {
        let ev = session("1", 0, &["a"]);
        assert!(matches!(preprocess(&ev, &cfg(1)), Err(Error::EmptyCorpus(_))));
        assert!(matches!(preprocess(&[], &cfg(1)), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn max_len_truncates_histories() {
        let mut ev = session("1", 0, &["a", "b", "c", "d", "e"]);
        ev.extend(session("2", 5 * DAY_MS, &["a", "b"]));
        let mut c = cfg(1);
        c.max_len = Some(2);
        let out = preprocess(&ev, &c).unwrap();
        assert!(out.train.iter().all(|e| e.history.len() <= 2));
        assert_eq!(out.train[3], SessionExample::new(vec![2, 3], 4));
    }
}
