//! Text helpers shared across stages: word counting, sentence spans and
//! coarse language detection.

use std::ops::Range;

use crate::model::Language;

/// Words are maximal runs of non-whitespace.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Byte ranges of sentences in `text`, each trimmed of surrounding whitespace.
///
/// A sentence ends at `.`, `?` or `!` (plus any closing quotes/brackets)
/// followed by whitespace or end of text, or at a line break. A bare
/// numeric list marker such as `1.` does not end a sentence.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let mut end = None;
        if c == '\n' {
            end = Some(i);
        } else if matches!(c, '.' | '?' | '!') {
            let mut j = i + c.len_utf8();
            while let Some(&(k, n)) = chars.peek() {
                if matches!(n, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
                    j = k + n.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let at_break = chars.peek().is_none_or(|&(_, n)| n.is_whitespace());
            if at_break && !is_list_marker(&text[start..j]) {
                end = Some(j);
            }
        }
        if let Some(e) = end {
            push_trimmed(text, start..e, &mut spans);
            start = if c == '\n' { i + 1 } else { e };
        }
    }
    push_trimmed(text, start..text.len(), &mut spans);
    spans
}

fn is_list_marker(piece: &str) -> bool {
    let t = piece.trim();
    let body = t.trim_end_matches('.');
    !body.is_empty() && body.len() <= 3 && body.chars().all(|c| c.is_ascii_digit())
}

fn push_trimmed(text: &str, r: Range<usize>, out: &mut Vec<Range<usize>>) {
    let piece = &text[r.clone()];
    let lead = piece.len() - piece.trim_start().len();
    let trail = piece.len() - piece.trim_end().len();
    if lead + trail < piece.len() {
        out.push(r.start + lead..r.end - trail);
    }
}

pub fn is_question(sentence: &str) -> bool {
    sentence
        .trim_end_matches(['"', '\'', ')', '\u{201d}'])
        .ends_with('?')
}

fn is_devanagari(c: char) -> bool {
    ('\u{0900}'..='\u{097F}').contains(&c)
}

/// Share of non-whitespace characters in the Devanagari block.
pub fn devanagari_fraction(text: &str) -> f64 {
    let (mut total, mut deva) = (0usize, 0usize);
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_devanagari(c) {
            deva += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        deva as f64 / total as f64
    }
}

const HINDI_MARKERS: &[&str] = &[
    "kya", "kyu", "kyun", "kyon", "hai", "hain", "hbai", "hota", "hoti", "hote", "ka", "ki", "ke", "ko",
    "se", "mein", "mai", "nahi", "nhi", "aur", "kaise", "karna", "karne", "karte", "karen", "kare",
    "sakta", "sakti", "sakte", "liye", "bhi", "toh", "agar", "mujhe", "muje", "aap", "aapka", "aapko",
    "hame", "kuch", "khuch", "kitna", "kitni", "kaun", "konsi", "chahiye", "chahie", "raha", "rahi",
    "jata", "sahi", "tha", "thi", "hum", "apni", "apna", "kab", "lagta", "bataye", "malum",
];

/// Classifies text as Hinglish, English, or other (mostly Devanagari).
pub fn detect_language(text: &str) -> Language {
    if devanagari_fraction(text) > 0.20 {
        return Language::Other;
    }
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    let markers = tokens.iter().filter(|t| HINDI_MARKERS.contains(&t.as_str())).count();
    if markers >= 2 || (markers == 1 && tokens.len() <= 4) {
        Language::Hinglish
    } else {
        Language::English
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(t: &str) -> Vec<&str> {
        sentence_spans(t).into_iter().map(|r| &t[r]).collect()
    }

    #[test]
    fn splits_sentences_and_list_items() {
        let t = "There are some methods:\n1. Condoms: This is effective. 2. Pills: daily.\nAsk me?  Yes!";
        assert_eq!(
            sentences(t),
            [
                "There are some methods:",
                "1. Condoms: This is effective.",
                "2. Pills: daily.",
                "Ask me?",
                "Yes!"
            ]
        );
    }

    #[test]
    fn decimal_and_quote_handling() {
        assert_eq!(sentences("It costs 2.5 rupees. \"Really?\" he said."), ["It costs 2.5 rupees.", "\"Really?\"", "he said."]);
        assert!(sentences("   ").is_empty());
        assert_eq!(sentences("no terminator"), ["no terminator"]);
    }

    #[test]
    fn language_detection() {
        assert_eq!(detect_language("Condom Kya hota hai?"), Language::Hinglish);
        assert_eq!(detect_language("Kya 3 sal bad purush nasbandi fail ho sakti hai?"), Language::Hinglish);
        assert_eq!(detect_language("Can vasectomy fail after 3 years?"), Language::English);
        assert_eq!(detect_language("कॉपर टी क्या है?"), Language::Other);
        assert_eq!(detect_language("What is a condom?"), Language::English);
    }

    #[test]
    fn question_detection() {
        assert!(is_question("Do you need more information?"));
        assert!(is_question("\"Really?\""));
        assert!(!is_question("Yes."));
    }
}
