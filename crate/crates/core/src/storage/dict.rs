//! Bidirectional name dictionary (name string <-> dense id).

use std::collections::HashMap;

use super::{Result, StorageError};

const MAGIC: &[u8; 4] = b"RXND";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameDictionary {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl NameDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (i as u32, n.as_str()))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.names.len() as u32).to_le_bytes());
        for n in &self.names {
            out.extend_from_slice(&(n.len() as u32).to_le_bytes());
            out.extend_from_slice(n.as_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let corrupt = || StorageError::Corrupt("malformed name dictionary".into());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(corrupt());
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let mut pos = 8;
        let mut dict = NameDictionary::new();
        for _ in 0..count {
            let len = bytes
                .get(pos..pos + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(corrupt)?;
            pos += 4;
            let s = bytes.get(pos..pos + len).ok_or_else(corrupt)?;
            pos += len;
            let name = std::str::from_utf8(s).map_err(|_| corrupt())?;
            if dict.ids.contains_key(name) {
                return Err(corrupt());
            }
            dict.intern(name);
        }
        if pos != bytes.len() {
            return Err(corrupt());
        }
        Ok(dict)
    }
}
