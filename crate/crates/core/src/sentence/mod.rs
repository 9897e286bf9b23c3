//! Sentence splitting and cross-language sentence alignment (LAS, SLAS, LO).

mod align;
mod embed;
mod lexicon;
mod slas;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

pub use align::{
    align_sentences, article_sentences, length_ratio, stream_sentences, AlignContext, AlignParams, AlignSide, Provenance, SentencePair,
    Strategy,
};
pub use embed::{
    cosine, hash_embed, las_score, EmbeddingProvider, EmbeddingVector, HashProvider, HttpProvider, StubProvider,
    DEFAULT_DIM,
};
pub use lexicon::{lo_score, lo_score_tokens, PivotLexicon};
pub use slas::{bead_cost, slas_align, slas_brute_force, slas_dp, Bead, SlasParams, SlasPath};

use crate::layout::RoiKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    /// Position within its ROI stream.
    pub index: usize,
    #[serde(default)]
    pub article_id: String,
    #[serde(default)]
    pub language: String,
    pub roi_kind: RoiKind,
    pub word_count: usize,
    /// Byte range within the source text.
    pub span: (usize, usize),
}

const SENTENCE_END: [char; 5] = ['।', '॥', '.', '?', '!'];

/// Tokens before a '.' that do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "no", "vs", "etc", "e.g", "i.e", "डॉ", "श्री", "सौ", "कु", "प्रा",
];

pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '।' | '॥' | '\u{0970}' | '«' | '»' | '¡' | '¿' | '·'
            | '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{3000}'..='\u{303F}')
}

/// NFC, punctuation stripped, lowercased, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace()
        .map(|w| w.chars().filter(|c| !is_punct(*c)).collect::<String>().to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn is_abbreviation(before: &str) -> bool {
    let word = before.rsplit(char::is_whitespace).next().unwrap_or("");
    let word = word.trim_start_matches(|c: char| is_punct(c) && c != '.');
    let lower = word.to_lowercase();
    let letters = lower.chars().filter(|c| c.is_alphabetic()).count();
    // single initials ("A.") and dotted forms ("e.g.") count too
    let initial = letters == 1 && lower.chars().all(|c| c.is_alphabetic() || c == '.');
    initial || ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits on danda, double danda, '.', '?' and '!' followed by whitespace or
/// end of text. Delimiters stay with the preceding sentence.
pub fn split_sentences(text: &str, language: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let push = |from: usize, to: usize, out: &mut Vec<Sentence>| {
        let raw = &text[from..to];
        let lead = raw.len() - raw.trim_start().len();
        let piece = raw.trim();
        let word_count = tokenize(piece).len();
        if word_count > 0 {
            out.push(Sentence {
                text: piece.to_string(),
                index: out.len(),
                article_id: String::new(),
                language: language.to_string(),
                roi_kind: RoiKind::Content,
                word_count,
                span: (from + lead, from + lead + piece.len()),
            });
        }
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        if SENTENCE_END.contains(&c) {
            let mut j = i;
            while j + 1 < chars.len() && SENTENCE_END.contains(&chars[j + 1].1) {
                j += 1;
            }
            // closing quotes and brackets ride along with the delimiter
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '"' | '\'' | ')' | '”' | '’' | ']') {
                j += 1;
            }
            let end = chars.get(j + 1).map_or(text.len(), |(p, _)| *p);
            let at_boundary = chars.get(j + 1).map_or(true, |(_, n)| n.is_whitespace());
            let guarded = c == '.' && j == i && is_abbreviation(&text[start..pos]);
            if at_boundary && !guarded {
                push(start, end, &mut out);
                start = end;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    if start < text.len() {
        push(start, text.len(), &mut out);
    }
    out
}
