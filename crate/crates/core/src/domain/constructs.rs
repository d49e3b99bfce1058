use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LIKERT_MIN: u8 = 1;
pub const LIKERT_MAX: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScaleId {
    /// Perceived privacy risk.
    RSK,
    /// Perceived control.
    CTRL,
    /// Perceived benefits (convenience, relationship building,
    /// self-representation and enjoyment pooled together).
    BEN,
    /// External information privacy concerns.
    EIPC,
}

impl ScaleId {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleId::RSK => "RSK",
            ScaleId::CTRL => "CTRL",
            ScaleId::BEN => "BEN",
            ScaleId::EIPC => "EIPC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructScale {
    pub scale_id: ScaleId,
    pub item_ids: Vec<String>,
    pub reversed_items: Vec<String>,
}

impl ConstructScale {
    fn build(scale_id: ScaleId, items: &[&str], reversed: &[&str]) -> Self {
        Self {
            scale_id,
            item_ids: items.iter().map(|s| (*s).to_owned()).collect(),
            reversed_items: reversed.iter().map(|s| (*s).to_owned()).collect(),
        }
    }

    /// RSK3 is a "very safe – very risky" differential coded ascending with
    /// risk, so only RSK1 and RSK2 are reversed.
    pub fn rsk() -> Self {
        Self::build(ScaleId::RSK, &["RSK1", "RSK2", "RSK3"], &["RSK1", "RSK2"])
    }

    pub fn ctrl() -> Self {
        Self::build(ScaleId::CTRL, &["PC1", "PC2", "PC3"], &[])
    }

    pub fn ben() -> Self {
        Self::build(
            ScaleId::BEN,
            &[
                "CON1", "CON2", "CON3", "RB1", "RB2", "RB3", "SR1", "SR2", "EN1", "EN2", "EN3",
            ],
            &[],
        )
    }

    pub fn eipc() -> Self {
        Self::build(
            ScaleId::EIPC,
            &["EIPC1", "EIPC2", "EIPC3", "EIPC4", "EIPC5", "EIPC6"],
            &[],
        )
    }

    /// The four scales of the end-of-study questionnaire.
    pub fn standard_set() -> Vec<Self> {
        vec![Self::rsk(), Self::ctrl(), Self::ben(), Self::eipc()]
    }

    pub fn is_reversed(&self, item: &str) -> bool {
        self.reversed_items.iter().any(|r| r == item)
    }
}

/// Reverse-codes a 7-point Likert answer.
pub fn reverse_item(item: &str, value: u8) -> Result<u8> {
    if !(LIKERT_MIN..=LIKERT_MAX).contains(&value) {
        return Err(Error::validation(format!(
            "item {item}: value {value} outside {LIKERT_MIN}..={LIKERT_MAX}"
        )));
    }
    Ok(LIKERT_MAX + LIKERT_MIN - value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversal_examples() {
        assert_eq!(reverse_item("RSK1", 1).unwrap(), 7);
        assert_eq!(reverse_item("RSK1", 4).unwrap(), 4);
        assert_eq!(reverse_item("RSK1", 6).unwrap(), 2);
    }

    #[test]
    fn reversal_is_an_involution() {
        for v in 1..=7 {
            assert_eq!(reverse_item("x", reverse_item("x", v).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn out_of_range_names_item() {
        let err = reverse_item("RSK2", 8).unwrap_err().to_string();
        assert!(err.contains("RSK2"), "{err}");
        assert!(reverse_item("RSK2", 0).is_err());
    }

    #[test]
    fn scale_shapes() {
        assert_eq!(ConstructScale::rsk().item_ids.len(), 3);
        assert_eq!(ConstructScale::rsk().reversed_items, vec!["RSK1", "RSK2"]);
        assert_eq!(ConstructScale::ctrl().item_ids.len(), 3);
        assert_eq!(ConstructScale::eipc().item_ids.len(), 6);
        assert_eq!(ConstructScale::ben().item_ids.len(), 11);
        for s in [ConstructScale::ctrl(), ConstructScale::ben(), ConstructScale::eipc()] {
            assert!(s.reversed_items.is_empty());
        }
    }
}
