use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Language, MessageId, MESSAGE_ID_MAX};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCategory {
    pub category_id: u8,
    pub name: &'static str,
}

pub const CATEGORIES: [MessageCategory; 6] = [
    MessageCategory { category_id: 1, name: "drugs-and-alcohol-use" },
    MessageCategory { category_id: 2, name: "sex" },
    MessageCategory { category_id: 3, name: "religion-and-politics" },
    MessageCategory { category_id: 4, name: "strong-sentiment" },
    MessageCategory { category_id: 5, name: "location" },
    MessageCategory { category_id: 6, name: "personal-identifiers" },
];

/// Placeholder corpus shipped with the crate. Same layout as a corpus file.
pub const DEFAULT_CORPUS_CSV: &str = include_str!("../../data/corpus.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionMessage {
    pub message_id: MessageId,
    pub category_id: u8,
    /// Stored for future frequency adaptation; the uniform selection
    /// strategy ignores it.
    pub risk_value: f64,
    pub text_en: String,
    pub text_de: String,
}

impl InterventionMessage {
    pub fn text(&self, language: Language) -> &str {
        match language {
            Language::EN => &self.text_en,
            Language::DE => &self.text_de,
        }
    }
}

/// The validated set of 26 intervention messages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    messages: Vec<InterventionMessage>,
}

impl Corpus {
    pub const SIZE: usize = MESSAGE_ID_MAX as usize;

    pub fn new(mut messages: Vec<InterventionMessage>) -> Result<Self> {
        messages.sort_by_key(|m| m.message_id);
        if messages.len() != Self::SIZE {
            return Err(Error::Configuration(format!(
                "corpus must hold exactly {} messages, found {}",
                Self::SIZE,
                messages.len()
            )));
        }
        for (expected, m) in (1..=MESSAGE_ID_MAX).zip(&messages) {
            if m.message_id != expected {
                return Err(Error::Configuration(format!(
                    "corpus message ids must be 1..=26 without gaps; expected {expected}, found {}",
                    m.message_id
                )));
            }
            if !CATEGORIES.iter().any(|c| c.category_id == m.category_id) {
                return Err(Error::Configuration(format!(
                    "message {} references unknown category {}",
                    m.message_id, m.category_id
                )));
            }
            if !(m.risk_value >= 0.0 && m.risk_value.is_finite()) {
                return Err(Error::Configuration(format!(
                    "message {} has invalid risk value {}",
                    m.message_id, m.risk_value
                )));
            }
        }
        Ok(Self { messages })
    }

    pub fn default_corpus() -> Self {
        Self::from_csv_reader(DEFAULT_CORPUS_CSV.as_bytes(), "<builtin corpus>")
            .expect("bundled corpus is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    /// Parses `message_id,category_id,risk_value,text_en,text_de` records.
    pub fn from_csv_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Fields).from_reader(reader);
        let mut messages = Vec::new();
        for (idx, record) in rdr.deserialize::<InterventionMessage>().enumerate() {
            let message = record.map_err(|e| Error::Parse {
                file: source.to_owned(),
                line: e.position().map_or(idx as u64 + 2, |p| p.line()),
                field: csv_error_field(&e),
                message: e.to_string(),
            })?;
            messages.push(message);
        }
        Self::new(messages)
    }

    pub fn messages(&self) -> &[InterventionMessage] {
        &self.messages
    }

    pub fn get(&self, id: MessageId) -> Option<&InterventionMessage> {
        self.messages.get(usize::from(id).checked_sub(1)?)
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

pub(crate) fn csv_error_field(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err
            .field()
            .map_or_else(|| "record".to_owned(), |f| format!("column {}", f + 1)),
        _ => "record".to_owned(),
    }
}
