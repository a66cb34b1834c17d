//! The analytics bundle shared by the admin endpoint and the CLI.

use std::collections::BTreeMap;

use chrono_tz::Tz;
use saathi_core::analytics::{report_files, AnalyticsError, Classifier};
use saathi_core::model::MessageLog;

/// Labels any unlabelled logs with the keyword rules, then renders
/// `topics.csv`, `types.csv`, `hourly.csv` and `lengths.txt`.
pub fn analytics_bundle(mut logs: Vec<MessageLog>, zone: Tz) -> Result<BTreeMap<String, String>, AnalyticsError> {
    Classifier::shipped().label_logs(None, &mut logs);
    report_files(&logs, zone)
}
