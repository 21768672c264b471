//! `.corpus` binary layout (all integers little-endian):
//!
//! ```text
//! magic "CRECORP\0" | version u32
//! dataset str | config_hash str
//! vocab: n, n × str
//! train_sessions: n, n × index list
//! train: n, n × (index list, target)
//! test:  n, n × (index list, target)
//! ```
//!
//! `str` is a varint length followed by UTF-8 bytes; an index list is a varint
//! count followed by varint indices.

use std::fs;
use std::path::Path;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};

use super::{ItemVocab, ProcessedCorpus, SessionExample};

const MAGIC: &[u8; 8] = b"CRECORP\0";
pub const CORPUS_VERSION: u32 = 1;

pub(super) fn encode(c: &ProcessedCorpus) -> Vec<u8> {
    let mut enc = Encoder::new(MAGIC, CORPUS_VERSION);
    enc.str(&c.dataset);
    enc.str(&c.config_hash);
    enc.varint(c.vocab.len() as u64);
    for id in c.vocab.ids() {
        enc.str(id);
    }
    enc.varint(c.train_sessions.len() as u64);
    for s in &c.train_sessions {
        enc.indices(s);
    }
    for examples in [&c.train, &c.test] {
        enc.varint(examples.len() as u64);
        for e in examples.iter() {
            enc.indices(&e.history);
            enc.varint(e.target as u64);
        }
    }
    enc.finish()
}

pub(super) fn decode(bytes: &[u8]) -> Result<ProcessedCorpus> {
    let mut dec = Decoder::new(bytes, MAGIC, CORPUS_VERSION, "corpus")?;
    let dataset = dec.str()?;
    let config_hash = dec.str()?;
    let n = dec.len()?;
    let ids = (0..n).map(|_| dec.str()).collect::<Result<Vec<_>>>()?;
    let vocab = ItemVocab::from_ids(ids)?;
    let n = dec.len()?;
    let train_sessions = (0..n).map(|_| dec.indices()).collect::<Result<Vec<_>>>()?;
    let read_examples = |dec: &mut Decoder| -> Result<Vec<SessionExample>> {
        let n = dec.len()?;
        (0..n)
            .map(|_| Ok(SessionExample::new(dec.indices()?, dec.u32()?)))
            .collect()
    };
    let train = read_examples(&mut dec)?;
    let test = read_examples(&mut dec)?;
    dec.finish()?;

    let items = vocab.len() as u32;
    let in_range = train_sessions.iter().flatten().all(|&i| i < items)
        && train
            .iter()
            .chain(&test)
            .all(|e| e.target < items && e.history.iter().all(|&i| i < items));
    if !in_range {
        return Err(Error::UnsupportedFormat(
            "corpus: item index outside the vocabulary".into(),
        ));
    }
    Ok(ProcessedCorpus {
        dataset,
        config_hash,
        vocab,
        train_sessions,
        train,
        test,
    })
}

pub fn write_corpus(corpus: &ProcessedCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(corpus)).map_err(Error::io_at(path))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<ProcessedCorpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io_at(path))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ProcessedCorpus {
        let mut c = ProcessedCorpus::from_sessions(
            "toy",
            300,
            vec![vec![0, 1, 2], vec![299, 128, 5, 5]],
            &[vec![1, 2]],
        );
        c.config_hash = "abc".into();
        c
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.corpus");
        let c = sample();
        write_corpus(&c, &path).unwrap();
        let back = read_corpus(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode(&back), fs::read(&path).unwrap());
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = encode(&sample());
        bytes[0] ^= 0xff;
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode(&sample());
        bytes[8] = 99;
        let err = decode(&bytes).unwrap_err();
        assert_eq!(err.class(), "format");
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = encode(&sample());
        for cut in [13, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err());
        }
    }

    proptest! {
        #[test]
        fn encoding_is_canonical(
            sessions in prop::collection::vec(prop::collection::vec(0u32..1000, 2..8), 1..20)
        ) {
            let c = ProcessedCorpus::from_sessions("p", 1000, sessions.clone(), &sessions[..1]);
            let bytes = encode(&c);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
