//! Little-endian primitives shared by the binary file formats.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use integer_encoding::{VarIntReader, VarIntWriter};

use crate::error::{Error, Result};

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut buf = Vec::with_capacity(1 << 16);
        buf.extend_from_slice(magic);
        buf.write_u32::<LittleEndian>(version).unwrap();
        Self { buf }
    }

    pub fn varint(&mut self, v: u64) {
        self.buf.write_varint(v).unwrap();
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.write_f32::<LittleEndian>(v).unwrap();
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LittleEndian>(v).unwrap();
    }

    pub fn str(&mut self, s: &str) {
        self.varint(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn indices(&mut self, xs: &[u32]) {
        self.varint(xs.len() as u64);
        for &x in xs {
            self.varint(x as u64);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Decoder<'a> {
    cur: Cursor<&'a [u8]>,
    what: &'static str,
}

impl<'a> Decoder<'a> {
    /// Checks magic and version, then positions after the header.
    pub fn new(bytes: &'a [u8], magic: &[u8; 8], version: u32, what: &'static str) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != magic {
            return Err(Error::UnsupportedFormat(format!("{what}: bad magic bytes")));
        }
        let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if found != version {
            return Err(Error::UnsupportedFormat(format!(
                "{what}: version {found}, expected {version}"
            )));
        }
        let mut cur = Cursor::new(bytes);
        cur.set_position(12);
        Ok(Self { cur, what })
    }

    fn truncated(&self) -> Error {
        Error::UnsupportedFormat(format!(
            "{}: truncated or corrupt at byte {}",
            self.what,
            self.cur.position()
        ))
    }

    pub fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    pub fn varint(&mut self) -> Result<u64> {
        self.cur.read_varint::<u64>().map_err(|_| self.truncated())
    }

    pub fn len(&mut self) -> Result<usize> {
        let n = self.varint()?;
        // every element takes at least one byte
        if n > self.remaining() as u64 {
            return Err(self.truncated());
        }
        Ok(n as usize)
    }

    pub fn u32(&mut self) -> Result<u32> {
        let v = self.varint()?;
        u32::try_from(v).map_err(|_| self.truncated())
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.truncated())
    }

    pub fn f32(&mut self) -> Result<f32> {
        self.cur.read_f32::<LittleEndian>().map_err(|_| self.truncated())
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LittleEndian>().map_err(|_| self.truncated())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let mut buf = vec![0u8; n];
        self.cur.read_exact(&mut buf).map_err(|_| self.truncated())?;
        String::from_utf8(buf).map_err(|_| self.truncated())
    }

    pub fn indices(&mut self) -> Result<Vec<u32>> {
        let n = self.len()?;
        (0..n).map(|_| self.u32()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.cur.position() as usize != self.cur.get_ref().len() {
            return Err(Error::UnsupportedFormat(format!(
                "{}: trailing bytes after payload",
                self.what
            )));
        }
        Ok(())
    }
}
