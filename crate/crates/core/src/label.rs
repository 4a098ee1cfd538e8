use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::BinaryMask;

/// Target classes. Anything unlabeled is background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Damage,
    Dirt,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Damage, ClassLabel::Dirt];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Damage => "damage",
            ClassLabel::Dirt => "dirt",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown class {value:?}, accepted values are \"damage\" and \"dirt\"")]
pub struct UnknownClass {
    pub value: String,
}

impl FromStr for ClassLabel {
    type Err = UnknownClass;

    /// Case-insensitive, surrounding whitespace ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "damage" => Ok(ClassLabel::Damage),
            "dirt" => Ok(ClassLabel::Dirt),
            _ => Err(UnknownClass {
                value: s.to_string(),
            }),
        }
    }
}

/// A labeled region: ground truth when `confidence` is `None`, a prediction otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub class: ClassLabel,
    pub mask: BinaryMask,
    pub confidence: Option<f64>,
}

impl Instance {
    pub fn ground_truth(class: ClassLabel, mask: BinaryMask) -> Self {
        Self {
            class,
            mask,
            confidence: None,
        }
    }

    pub fn prediction(class: ClassLabel, mask: BinaryMask, confidence: f64) -> Self {
        Self {
            class,
            mask,
            confidence: Some(confidence),
        }
    }

    pub fn is_prediction(&self) -> bool {
        self.confidence.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_case_insensitively() {
        assert_eq!("Damage".parse(), Ok(ClassLabel::Damage));
        assert_eq!(" DIRT ".parse(), Ok(ClassLabel::Dirt));
        let err = "rust".parse::<ClassLabel>().unwrap_err();
        assert!(err.to_string().contains("\"damage\" and \"dirt\""));
    }

    #[test]
    fn serde_uses_lowercase_names() {
        assert_eq!(serde_json::to_string(&ClassLabel::Dirt).unwrap(), "\"dirt\"");
        assert_eq!(
            serde_json::from_str::<ClassLabel>("\"damage\"").unwrap(),
            ClassLabel::Damage
        );
    }
}
