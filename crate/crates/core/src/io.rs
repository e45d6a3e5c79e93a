//! JSONL readers and writers for the dataset, prediction and record files.

use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::linearization::TripletSet;

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>, DataError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| DataError::Json { line: i + 1, source })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<(), DataError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| DataError::Io(e.into()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// `{"id", "triplets"}` line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub triplets: TripletSet,
}
