use std::collections::{BTreeMap, BTreeSet};

use super::LangCode;
use crate::error::{G2pError, Result};

/// Articulatory feature vectors (+1 / 0 / -1 per feature) for every phoneme
/// known across all inventories.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub vectors: BTreeMap<String, Vec<i8>>,
}

impl FeatureTable {
    pub fn get(&self, phoneme: &str) -> Option<&[i8]> {
        self.vectors.get(phoneme).map(Vec::as_slice)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhonemeInventory {
    pub lang: LangCode,
    pub phonemes: BTreeSet<String>,
    pub features: BTreeMap<String, Vec<i8>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InventorySet {
    pub table: FeatureTable,
    pub inventories: BTreeMap<LangCode, PhonemeInventory>,
}

fn parse_feature(s: &str) -> Option<i8> {
    match s.trim() {
        "+" => Some(1),
        "0" => Some(0),
        "-" => Some(-1),
        _ => None,
    }
}

fn format_err(line: usize, detail: impl Into<String>) -> G2pError {
    G2pError::Format {
        what: "inventory",
        detail: format!("line {line}: {}", detail.into()),
    }
}

/// Reads `lang<TAB>phoneme<TAB>f1,f2,...` rows after a header whose last
/// tab-separated field lists the feature names, comma-separated.
pub fn parse_inventory(text: &str) -> Result<InventorySet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or(G2pError::EmptyInput("inventory"))?;
    let names: Vec<String> = header
        .rsplit('\t')
        .next()
        .unwrap_or_default()
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(format_err(1, "header names no features"));
    }

    let mut set = InventorySet {
        table: FeatureTable {
            names: names.clone(),
            vectors: BTreeMap::new(),
        },
        inventories: BTreeMap::new(),
    };
    for (n, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        let [lang, phoneme, feats] = fields[..] else {
            return Err(format_err(n, "expected 3 tab-separated fields"));
        };
        let lang = LangCode::new(lang).map_err(|e| format_err(n, e.to_string()))?;
        if phoneme.is_empty() || phoneme.chars().any(char::is_whitespace) {
            return Err(format_err(n, "bad phoneme"));
        }
        let vector: Vec<i8> = feats
            .split(',')
            .map(parse_feature)
            .collect::<Option<_>>()
            .ok_or_else(|| format_err(n, "features must be +, 0 or -"))?;
        if vector.len() != names.len() {
            return Err(format_err(
                n,
                format!("{} features, header names {}", vector.len(), names.len()),
            ));
        }
        match set.table.vectors.get(phoneme) {
            Some(existing) if *existing != vector => {
                return Err(format_err(n, format!("conflicting features for {phoneme}")));
            }
            Some(_) => {}
            None => {
                set.table.vectors.insert(phoneme.to_string(), vector.clone());
            }
        }
        let inv = set.inventories.entry(lang.clone()).or_insert_with(|| PhonemeInventory {
            lang,
            phonemes: BTreeSet::new(),
            features: BTreeMap::new(),
        });
        inv.phonemes.insert(phoneme.to_string());
        inv.features.insert(phoneme.to_string(), vector);
    }
    Ok(set)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cleaned {
    pub phonemes: Vec<String>,
    pub warnings: Vec<String>,
}

fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Replaces each out-of-inventory phoneme with the inventory phoneme at the
/// smallest Hamming distance in feature space; ties go to the
/// lexicographically smaller phoneme. Phonemes without a feature vector are
/// kept and reported.
pub fn clean_transcription(phonemes: &[String], inventory: &PhonemeInventory, table: &FeatureTable) -> Cleaned {
    let mut out = Cleaned::default();
    for p in phonemes {
        if inventory.phonemes.contains(p) {
            out.phonemes.push(p.clone());
            continue;
        }
        let Some(target) = table.get(p) else {
            out.warnings.push(format!("no feature vector for {p}"));
            out.phonemes.push(p.clone());
            continue;
        };
        // BTreeMap iteration is lexicographic, and min_by_key keeps the first minimum.
        let best = inventory
            .features
            .iter()
            .min_by_key(|(_, v)| hamming(target, v))
            .map(|(q, _)| q.clone());
        match best {
            Some(q) => out.phonemes.push(q),
            None => {
                out.warnings.push(format!("empty inventory for {}", inventory.lang));
                out.phonemes.push(p.clone());
            }
        }
    }
    out
}
