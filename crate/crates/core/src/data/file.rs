use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Reads and validates a JSON dataset file.
///
/// ```json
/// {"classes": 6, "num_speakers": 2, "dims": {"t": 4, "a": 3, "v": 3},
///  "dialogues": [{"utterances": [{"t": [..], "a": [..], "v": [..], "speaker": 0, "label": 2}]}]}
/// ```
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

/// Parses dataset text; `origin` is only used in error messages.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<Dataset> {
    let dataset: Dataset = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    dataset.validate().map_err(|msg| Error::Validation { path: origin.to_path_buf(), msg })?;
    Ok(dataset)
}

/// Compact JSON encoding; floats are written in shortest round-trip form.
pub fn to_json(dataset: &Dataset) -> String {
    let mut s = serde_json::to_string(dataset).expect("dataset serializes");
    s.push('\n');
    s
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(dataset)).map_err(|e| Error::io(path, e))
}
