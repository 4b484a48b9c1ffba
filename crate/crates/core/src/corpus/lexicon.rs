use std::fs;
use std::io::Write;
use std::path::Path;

use super::{tokenize_graphemes, LangCode, LexiconEntry};
use crate::error::Result;

/// A line that could not be turned into an entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedLexicon {
    pub entries: Vec<LexiconEntry>,
    pub rejects: Vec<Reject>,
}

/// Parses `lang<TAB>spelling<TAB>phonemes` lines. Blank lines and lines
/// starting with `#` are skipped; malformed lines are collected in
/// `rejects` and parsing continues.
pub fn parse_lexicon(text: &str) -> ParsedLexicon {
    let mut out = ParsedLexicon::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(line) {
            Ok(entry) => out.entries.push(entry),
            Err(reason) => out.rejects.push(Reject { line: i + 1, reason }),
        }
    }
    out
}

fn parse_line(line: &str) -> std::result::Result<LexiconEntry, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
    }
    let (lang, spelling, pron) = (fields[0], fields[1], fields[2]);
    if spelling.is_empty() || pron.trim().is_empty() {
        return Err("empty field".into());
    }
    let lang = LangCode::new(lang).map_err(|e| e.to_string())?;
    let graphemes = tokenize_graphemes(spelling, &lang, false).map_err(|e| e.to_string())?;
    let phonemes = pron.split_whitespace().map(String::from).collect();
    LexiconEntry::new(lang, graphemes, phonemes).map_err(|e| e.to_string())
}

pub fn read_lexicon(path: &Path) -> Result<ParsedLexicon> {
    Ok(parse_lexicon(&fs::read_to_string(path)?))
}

/// Writes entries in the same format [`parse_lexicon`] reads.
pub fn write_lexicon<W: Write>(mut w: W, entries: &[LexiconEntry]) -> Result<()> {
    for e in entries {
        writeln!(w, "{}\t{}\t{}", e.lang, e.spelling(), e.phonemes.join(" "))?;
    }
    Ok(())
}
