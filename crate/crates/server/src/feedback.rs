//! User ratings of delivered answers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const METRICS: [&str; 7] = [
    "overall_rating",
    "satisfied_by_answer",
    "helpful_answer",
    "language_simplicity",
    "response_time",
    "friendliness",
    "helpfulness",
];

#[derive(Debug, Error, PartialEq)]
pub enum FeedbackError {
    #[error("unknown metric {name:?}; valid metrics are {}", METRICS.join(", "))]
    UnknownMetric { name: String },
    #[error("rating for {metric} is {value}; ratings run from 1 to 5")]
    OutOfRange { metric: String, value: i64 },
    #[error("no ratings given; valid metrics are {}", METRICS.join(", "))]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub conversation_id: String,
    pub message_id: String,
    pub ratings: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

impl Feedback {
    /// Any non-empty subset of [`METRICS`], each rated 1 to 5.
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.ratings.is_empty() {
            return Err(FeedbackError::Empty);
        }
        for (name, &value) in &self.ratings {
            if !METRICS.contains(&name.as_str()) {
                return Err(FeedbackError::UnknownMetric { name: name.clone() });
            }
            if !(1..=5).contains(&value) {
                return Err(FeedbackError::OutOfRange { metric: name.clone(), value });
            }
        }
        Ok(())
    }
}
