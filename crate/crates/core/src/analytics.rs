//! Query taxonomy and descriptive statistics over conversation logs.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Timelike;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, PromptRequest, KEY_CATEGORY};
use crate::generation::PatternList;
use crate::model::{Label, MessageLog, QuestionType, Topic, WireEnum};
use crate::text::{is_question, sentence_spans, word_count};

pub const FALLBACK_TOPIC: Topic = Topic::FamilyPlanning;
pub const FALLBACK_TYPE: QuestionType = QuestionType::BasicConceptualInquiry;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no logs to summarize")]
    Empty,
    #[error("taxonomy rules: {0}")]
    Rules(String),
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Deserialize)]
struct RuleSpec {
    name: String,
    patterns: String,
}

#[derive(Deserialize)]
struct RuleFile {
    topic: Vec<RuleSpec>,
    question_type: Vec<RuleSpec>,
}

/// Rule-first classifier with an optional model fallback.
#[derive(Debug, Clone)]
pub struct Classifier {
    topics: Vec<(Topic, PatternList)>,
    types: Vec<(QuestionType, PatternList)>,
}

fn compile<T: WireEnum>(specs: &[RuleSpec]) -> Result<Vec<(T, PatternList)>, AnalyticsError> {
    specs
        .iter()
        .map(|s| {
            let cat = T::from_wire(&s.name).ok_or_else(|| AnalyticsError::Rules(format!("unknown category `{}`", s.name)))?;
            let list = PatternList::parse(&s.name, &s.patterns).map_err(|e| AnalyticsError::Rules(e.to_string()))?;
            Ok((cat, list))
        })
        .collect()
}

impl Classifier {
    pub fn from_toml(text: &str) -> Result<Self, AnalyticsError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| AnalyticsError::Rules(e.to_string()))?;
        Ok(Classifier { topics: compile(&file.topic)?, types: compile(&file.question_type)? })
    }

    pub fn shipped() -> Self {
        Self::from_toml(crate::assets::TAXONOMY_TOML).expect("shipped taxonomy is valid")
    }

    pub fn rule_topic(&self, query: &str) -> Option<Topic> {
        self.topics.iter().find(|(_, p)| p.is_match(query)).map(|(t, _)| *t)
    }

    pub fn rule_type(&self, query: &str) -> Option<QuestionType> {
        self.types.iter().find(|(_, p)| p.is_match(query)).map(|(t, _)| *t)
    }

    pub fn classify_topic(&self, gateway: Option<&dyn Gateway>, query: &str) -> Topic {
        self.rule_topic(query)
            .or_else(|| ask_model(gateway, query, "topic", Topic::ALL))
            .unwrap_or(FALLBACK_TOPIC)
    }

    pub fn classify_type(&self, gateway: Option<&dyn Gateway>, query: &str) -> QuestionType {
        self.rule_type(query)
            .or_else(|| ask_model(gateway, query, "question type", QuestionType::ALL))
            .unwrap_or(FALLBACK_TYPE)
    }

    /// Classifies a query in context. A query that answers a question the
    /// bot just asked, and matches no topic rule, is a follow-up.
    pub fn classify(&self, gateway: Option<&dyn Gateway>, query: &str, previous_response: Option<&str>) -> (Topic, QuestionType) {
        if previous_response.is_some_and(ends_with_question) && self.rule_topic(query).is_none() {
            return (Topic::FollowUp, QuestionType::FollowUp);
        }
        (self.classify_topic(gateway, query), self.classify_type(gateway, query))
    }

    /// Fills in missing labels, walking each conversation in order.
    pub fn label_logs(&self, gateway: Option<&dyn Gateway>, logs: &mut [MessageLog]) {
        let mut order: Vec<usize> = (0..logs.len()).collect();
        order.sort_by(|&a, &b| {
            (&logs[a].conversation_id, logs[a].timestamp, &logs[a].message_id).cmp(&(
                &logs[b].conversation_id,
                logs[b].timestamp,
                &logs[b].message_id,
            ))
        });
        let mut prev: Option<usize> = None;
        for i in order {
            let previous = prev
                .filter(|&p| logs[p].conversation_id == logs[i].conversation_id)
                .map(|p| logs[p].response_text.clone());
            if logs[i].topic.is_none() || logs[i].question_type.is_none() {
                let (topic, qtype) = self.classify(gateway, &logs[i].user_text, previous.as_deref());
                logs[i].topic.get_or_insert(Label::Known(topic));
                logs[i].question_type.get_or_insert(Label::Known(qtype));
            }
            prev = Some(i);
        }
    }
}

fn ends_with_question(text: &str) -> bool {
    sentence_spans(text).last().is_some_and(|s| is_question(&text[s.clone()]))
}

fn ask_model<T: WireEnum + PartialEq>(gateway: Option<&dyn Gateway>, query: &str, what: &str, all: &[T]) -> Option<T> {
    let gateway = gateway?;
    let choices: Vec<&str> = all.iter().map(|c| c.wire_name()).filter(|n| *n != "follow_up").collect();
    let system = format!(
        "Classify the user's sexual and reproductive health question by {what}. Answer with exactly one of: {}.",
        choices.join(", ")
    );
    let req = PromptRequest::new(system, query, KEY_CATEGORY, 5).ok()?;
    match gateway.complete(&req) {
        Ok(reply) => T::from_wire(reply.trim()).filter(|c| c.wire_name() != "follow_up"),
        Err(e) => {
            tracing::debug!(error = %e, "classification fallback");
            None
        }
    }
}

/// Counts per local hour of day.
pub fn hourly_histogram(logs: &[MessageLog], zone: Tz) -> [u64; 24] {
    let mut bins = [0u64; 24];
    for log in logs {
        bins[log.timestamp.with_timezone(&zone).hour() as usize] += 1;
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: usize,
    pub max: usize,
    /// Rounded to one decimal place.
    pub mean: f64,
}

impl Summary {
    fn of(counts: impl Iterator<Item = usize>) -> Option<Self> {
        let (mut min, mut max, mut sum, mut n) = (usize::MAX, 0, 0usize, 0usize);
        for c in counts {
            min = min.min(c);
            max = max.max(c);
            sum += c;
            n += 1;
        }
        (n > 0).then(|| Summary { min, max, mean: (sum as f64 / n as f64 * 10.0).round() / 10.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub prompt: Summary,
    pub response: Summary,
}

/// Word-count statistics of prompts and responses.
pub fn length_stats(logs: &[MessageLog]) -> Result<LengthStats, AnalyticsError> {
    let prompt = Summary::of(logs.iter().map(|l| word_count(&l.user_text))).ok_or(AnalyticsError::Empty)?;
    let response = Summary::of(logs.iter().map(|l| word_count(&l.response_text))).ok_or(AnalyticsError::Empty)?;
    Ok(LengthStats { prompt, response })
}

pub fn render_lengths(stats: &LengthStats) -> String {
    format!(
        "prompt_words: min {} max {} mean {:.1}\nresponse_words: min {} max {} mean {:.1}\n",
        stats.prompt.min, stats.prompt.max, stats.prompt.mean, stats.response.min, stats.response.max, stats.response.mean
    )
}

/// Count table for one taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub rows: Vec<(String, u64)>,
    pub total: u64,
}

impl CountTable {
    fn build<T: WireEnum + Ord>(labels: impl Iterator<Item = Option<Label<T>>>, display: fn(T) -> &'static str) -> Self {
        let mut known: BTreeMap<T, u64> = T::ALL.iter().map(|t| (*t, 0)).collect();
        let mut other: BTreeMap<String, u64> = BTreeMap::new();
        let mut total = 0;
        for l in labels {
            total += 1;
            match l {
                Some(Label::Known(t)) => *known.entry(t).or_default() += 1,
                Some(Label::Other(raw)) => *other.entry(raw).or_default() += 1,
                None => *other.entry("unclassified".into()).or_default() += 1,
            }
        }
        let mut rows: Vec<(String, u64)> = T::ALL.iter().map(|t| (display(*t).to_string(), known[t])).collect();
        rows.extend(other);
        CountTable { rows, total }
    }

    pub fn count(&self, name: &str) -> Option<u64> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, c)| *c)
    }

    pub fn to_csv(&self, header: &str) -> Result<String, AnalyticsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([header, "count"])?;
        for (name, count) in &self.rows {
            w.write_record([name.as_str(), &count.to_string()])?;
        }
        w.write_record(["Total", &self.total.to_string()])?;
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    pub fn to_text(&self, header: &str) -> String {
        let width = self.rows.iter().map(|(n, _)| n.len()).chain([header.len(), 5]).max().unwrap_or(5);
        let mut out = format!("{header:<width$}  {:>6}\n", "count");
        for (name, count) in &self.rows {
            out.push_str(&format!("{name:<width$}  {count:>6}\n"));
        }
        out.push_str(&format!("{:<width$}  {:>6}\n", "Total", self.total));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tabulation {
    pub topics: CountTable,
    pub types: CountTable,
}

/// Per-category counts of labelled logs.
pub fn tabulate(logs: &[MessageLog]) -> Tabulation {
    Tabulation {
        topics: CountTable::build(logs.iter().map(|l| l.topic.clone()), Topic::display_name),
        types: CountTable::build(logs.iter().map(|l| l.question_type.clone()), QuestionType::display_name),
    }
}

impl Tabulation {
    pub fn to_text(&self) -> String {
        format!("{}\n{}", self.topics.to_text("Topic"), self.types.to_text("Type of question"))
    }
}

pub fn hourly_csv(bins: &[u64; 24]) -> Result<String, AnalyticsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hour", "count"])?;
    for (h, c) in bins.iter().enumerate() {
        w.write_record([h.to_string(), c.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// The four report files, keyed by file name.
pub fn report_files(logs: &[MessageLog], zone: Tz) -> Result<BTreeMap<String, String>, AnalyticsError> {
    let tab = tabulate(logs);
    let lengths = match length_stats(logs) {
        Ok(s) => render_lengths(&s),
        Err(AnalyticsError::Empty) => "no logs\n".to_string(),
        Err(e) => return Err(e),
    };
    Ok(BTreeMap::from([
        ("topics.csv".to_string(), tab.topics.to_csv("topic")?),
        ("types.csv".to_string(), tab.types.to_csv("question_type")?),
        ("hourly.csv".to_string(), hourly_csv(&hourly_histogram(logs, zone))?),
        ("lengths.txt".to_string(), lengths),
    ]))
}

pub fn write_report(logs: &[MessageLog], zone: Tz, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>, AnalyticsError> {
    std::fs::create_dir_all(dir.as_ref())?;
    let mut written = Vec::new();
    for (name, body) in report_files(logs, zone)? {
        let path = dir.as_ref().join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockGateway;
    use crate::model::{Id, Language};
    use chrono::{TimeZone, Utc};

    fn log(text: &str, hour: u32, minute: u32) -> MessageLog {
        MessageLog {
            conversation_id: Id::random(),
            message_id: Id::random(),
            timestamp: Utc.with_ymd_and_hms(2024, 3, 1, hour, minute, 0).unwrap(),
            language: Label::Known(Language::Hinglish),
            user_text: text.into(),
            response_text: "ok".into(),
            topic: None,
            question_type: None,
        }
    }

    #[test]
    fn example_queries_classify() {
        let c = Classifier::shipped();
        let m = MockGateway::new(0, 8);
        let g: Option<&dyn Gateway> = Some(&m);
        assert_eq!(c.classify_topic(g, "Condom Kya hota hai?"), Topic::ContraceptiveMethods);
        assert_eq!(c.classify_topic(g, "IVF india me bhi hota hai kya?"), Topic::FertilitySupport);
        assert_eq!(
            c.classify_topic(g, "Pregnancy rukne ke bad bar bar Miscarriage hone ka kya karan ho sakti hai?"),
            Topic::Miscarriage
        );
        assert_eq!(c.classify_type(g, "Condom Kya hota hai?"), QuestionType::BasicConceptualInquiry);
        assert_eq!(c.classify_type(g, "Paisa Na Ho to Kya family planning ho sakti hai?"), QuestionType::HealthcareAccess);
        assert_eq!(c.classify_type(g, "Adrak ka juice peene se kya abortion hota hai?"), QuestionType::Misconception);
        assert_eq!(c.classify_type(g, "15 saal ki ladki kaise karegi family planning?"), QuestionType::NormsAndEthics);
    }

    #[test]
    fn model_fallback_then_default() {
        let c = Classifier::shipped();
        let mut m = MockGateway::new(0, 8);
        let q = "main doctors se puchna bhul gai thi";
        assert_eq!(c.classify_topic(Some(&m), q), FALLBACK_TOPIC);
        m.insert_value(KEY_CATEGORY, q, "pregnancy");
        assert_eq!(c.classify_topic(Some(&m), q), Topic::Pregnancy);
        m.insert_value(KEY_CATEGORY, q, "follow_up");
        assert_eq!(c.classify_topic(Some(&m), q), FALLBACK_TOPIC);
        assert_eq!(c.classify(None, q, Some("Do you need more information?")), (Topic::FollowUp, QuestionType::FollowUp));
        assert_ne!(c.classify(None, q, Some("Take care.")).0, Topic::FollowUp);
    }

    #[test]
    fn histogram_basics() {
        let logs = vec![log("a", 2, 0), log("b", 2, 30), log("c", 23, 59)];
        let bins = hourly_histogram(&logs, chrono_tz::UTC);
        assert_eq!((bins[2], bins[23], bins.iter().sum::<u64>()), (2, 1, 3));
        let ist = hourly_histogram(&logs[..1], chrono_tz::Asia::Kolkata);
        assert_eq!(ist[7], 1);
    }

    #[test]
    fn lengths() {
        let s = length_stats(&[log("one two three four five", 1, 0)]).unwrap();
        assert_eq!(s.prompt, Summary { min: 5, max: 5, mean: 5.0 });
        assert!(matches!(length_stats(&[]), Err(AnalyticsError::Empty)));
    }

    #[test]
    fn empty_tabulation_is_all_zero() {
        let t = tabulate(&[]);
        assert_eq!(t.topics.rows.len(), 11);
        assert_eq!(t.types.rows.len(), 8);
        assert!(t.topics.rows.iter().chain(&t.types.rows).all(|(_, c)| *c == 0));
        assert_eq!(t.topics.total, 0);
        let csv = t.topics.to_csv("topic").unwrap();
        assert!(csv.starts_with("topic,count\nContraceptive methods,0\n") && csv.ends_with("Total,0\n"));
    }

    #[test]
    fn unknown_labels_get_their_own_row() {
        let mut l = log("x", 1, 0);
        l.topic = Some(Label::parse("marriage_and_relationships"));
        let t = tabulate(&[l]);
        assert_eq!(t.topics.count("marriage_and_relationships"), Some(1));
        assert_eq!(t.topics.total, 1);
    }
}
