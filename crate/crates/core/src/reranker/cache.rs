//! Pre-computed generator lists for every training example.
//!
//! ```text
//! magic "CRECAND\0" | version u32
//! generator fingerprint str | corpus fingerprint str | depth
//! n, n × (example id, index list)
//! ```

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::{Decoder, Encoder};
use crate::corpus::ProcessedCorpus;
use crate::error::{Error, Result};
use crate::generator::CandidateGenerator;

const MAGIC: &[u8; 8] = b"CRECAND\0";
pub const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateCache {
    pub generator: String,
    pub corpus: String,
    pub depth: usize,
    /// One list per training example, in corpus order.
    pub lists: Vec<Vec<u32>>,
}

pub(crate) fn generate_lists<G: CandidateGenerator + ?Sized>(
    g: &G,
    corpus: &ProcessedCorpus,
    depth: usize,
) -> Vec<Vec<u32>> {
    corpus
        .train
        .par_iter()
        .map(|e| g.rank(&e.history, depth))
        .collect()
}

impl CandidateCache {
    pub fn build<G: CandidateGenerator + ?Sized>(g: &G, corpus: &ProcessedCorpus, depth: usize) -> Self {
        Self {
            generator: g.fingerprint(),
            corpus: corpus.fingerprint(),
            depth,
            lists: generate_lists(g, corpus, depth),
        }
    }

    /// Fails unless this cache was built from `generator` and `corpus`
    /// (fingerprints) at a depth of at least `depth`.
    pub fn check(&self, generator: &str, corpus: &str, depth: usize) -> Result<()> {
        if self.generator != generator {
            return Err(Error::Config("candidate cache was built for a different generator".into()));
        }
        if self.corpus != corpus {
            return Err(Error::Config("candidate cache was built for a different corpus".into()));
        }
        if self.depth < depth {
            return Err(Error::Config(format!(
                "candidate cache holds {} candidates per example, need {depth}",
                self.depth
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, CACHE_VERSION);
        enc.str(&self.generator);
        enc.str(&self.corpus);
        enc.varint(self.depth as u64);
        enc.varint(self.lists.len() as u64);
        for (id, list) in self.lists.iter().enumerate() {
            enc.varint(id as u64);
            enc.indices(list);
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, CACHE_VERSION, "candidate cache")?;
        let generator = dec.str()?;
        let corpus = dec.str()?;
        let depth = dec.len()?;
        let n = dec.len()?;
        let mut lists = Vec::with_capacity(n);
        for expected in 0..n {
            let id = dec.varint()?;
            if id != expected as u64 {
                return Err(Error::UnsupportedFormat(format!(
                    "candidate cache: record {expected} has example id {id}"
                )));
            }
            let list = dec.indices()?;
            if list.len() > depth {
                return Err(Error::UnsupportedFormat(format!(
                    "candidate cache: record {id} is longer than the depth {depth}"
                )));
            }
            lists.push(list);
        }
        dec.finish()?;
        Ok(Self {
            generator,
            corpus,
            depth,
            lists,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(Error::io_at(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(Error::io_at(path))?)
    }
}
