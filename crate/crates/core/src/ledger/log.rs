//! Append-only block log: each record is a big-endian `u32` length followed
//! by one canonical-serialized block.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::codec::DecodeError;

#[derive(Debug)]
pub enum BlockLog {
    Memory(Vec<u8>),
    File { path: PathBuf, out: BufWriter<File> },
}

impl BlockLog {
    pub fn memory() -> Self {
        BlockLog::Memory(Vec::new())
    }

    /// Open `path` for appending, creating it if needed.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(BlockLog::File {
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, block: &[u8]) -> io::Result<()> {
        let len = u32::try_from(block.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "block too large"))?;
        match self {
            BlockLog::Memory(buf) => {
                buf.extend_from_slice(&len.to_be_bytes());
                buf.extend_from_slice(block);
                Ok(())
            }
            BlockLog::File { out, .. } => {
                out.write_all(&len.to_be_bytes())?;
                out.write_all(block)?;
                out.flush()
            }
        }
    }

    /// Full log contents.
    pub fn read_all(&self) -> io::Result<Vec<u8>> {
        match self {
            BlockLog::Memory(buf) => Ok(buf.clone()),
            BlockLog::File { path, .. } => read_file(path),
        }
    }
}

pub fn read_file(path: impl AsRef<Path>) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Split raw log bytes into block records.
pub fn records(bytes: &[u8]) -> impl Iterator<Item = Result<&[u8], DecodeError>> {
    let mut rest = bytes;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        if rest.len() < 4 {
            rest = &[];
            return Some(Err(DecodeError::Truncated("record length")));
        }
        let len = u32::from_be_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        if rest.len() - 4 < len {
            rest = &[];
            return Some(Err(DecodeError::Truncated("record body")));
        }
        let rec = &rest[4..4 + len];
        rest = &rest[4 + len..];
        Some(Ok(rec))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_and_file_logs_agree() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.log");
        let mut mem = BlockLog::memory();
        let mut file = BlockLog::open(&path).unwrap();
        for rec in [&b"abc"[..], b"", b"defgh"] {
            mem.append(rec).unwrap();
            file.append(rec).unwrap();
        }
        let bytes = mem.read_all().unwrap();
        assert_eq!(bytes, file.read_all().unwrap());
        let recs: Vec<_> = records(&bytes).collect::<Result<_, _>>().unwrap();
        assert_eq!(recs, [&b"abc"[..], b"", b"defgh"]);
    }

    #[test]
    fn truncated_tail_is_reported() {
        let out: Vec<_> = records(&[0, 0, 0, 5, 1, 2]).collect();
        assert_eq!(out, vec![Err(DecodeError::Truncated("record body"))]);
    }
}
