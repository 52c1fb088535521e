use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Class of a response, matrix or prediction.
///
/// `Bad` marks traffic from a server acting as a reflector (an unsolicited
/// response) and is the positive class of the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Good, Label::Bad];

    /// SVM target: bad is +1, good is -1.
    pub fn sign(self) -> f64 {
        match self {
            Label::Good => -1.0,
            Label::Bad => 1.0,
        }
    }

    pub fn from_decision(value: f64) -> Label {
        if value >= 0.0 {
            Label::Bad
        } else {
            Label::Good
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?} (expected \"good\" or \"bad\")")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            other => Err(ParseLabelError(other.to_string())),
        }
    }
}
