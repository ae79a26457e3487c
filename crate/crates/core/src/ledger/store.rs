//! Append-only block file.
//!
//! The file is a sequence of records. Each record is a 4-byte big-endian
//! length `n` followed by `n` bytes of UTF-8 JSON encoding one [`Block`].
//! Genesis is implicit and never written. A trailing partial record (torn
//! write) is truncated on open.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::types::Block;
use super::LedgerError;

pub struct BlockLog {
    file: File,
}

impl BlockLog {
    pub fn open(path: &Path) -> Result<(Self, Vec<Block>), LedgerError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut blocks = Vec::new();
        let mut valid_len = 0u64;
        {
            let mut reader = BufReader::new(&file);
            loop {
                let mut len_buf = [0u8; 4];
                match reader.read_exact(&mut len_buf) {
                    Ok(()) => {}
                    Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
                    Err(e) => return Err(e.into()),
                }
                let len = u32::from_be_bytes(len_buf) as usize;
                let mut payload = vec![0u8; len];
                match reader.read_exact(&mut payload) {
                    Ok(()) => {}
                    Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
                    Err(e) => return Err(e.into()),
                }
                let block: Block = serde_json::from_slice(&payload)
                    .map_err(|e| LedgerError::Replay(format!("undecodable block record: {e}")))?;
                blocks.push(block);
                valid_len += 4 + len as u64;
            }
        }
        if file.metadata()?.len() != valid_len {
            file.set_len(valid_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok((BlockLog { file }, blocks))
    }

    pub fn append(&mut self, block: &Block) -> Result<(), LedgerError> {
        let payload = serde_json::to_vec(block)
            .map_err(|e| LedgerError::Replay(format!("cannot encode block: {e}")))?;
        let len = u32::try_from(payload.len())
            .map_err(|_| LedgerError::Replay("block record exceeds 4 GiB".into()))?;
        let mut record = Vec::with_capacity(4 + payload.len());
        record.extend_from_slice(&len.to_be_bytes());
        record.extend_from_slice(&payload);
        self.file.write_all(&record)?;
        self.file.flush()?;
        Ok(())
    }
}
