//! Embedding neighbourhoods and cross-token translation.

use std::fmt::Write;

use crate::corpus::{LangCode, Vocabulary};
use crate::decode::BeamConfig;
use crate::error::{G2pError, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::translate::Translator;

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub query: String,
    /// Descending similarity; ties ordered by token.
    pub neighbors: Vec<(String, f64)>,
}

/// Cosine similarity, or `None` when either vector is zero.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Option<f64> {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    Some((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Rows of `table` most similar to row `query`, over the ids accepted by
/// `candidate`. Zero rows are skipped.
pub fn nearest_rows<T: Scalar>(
    table: &Tensor<T>,
    vocab: &Vocabulary,
    query: usize,
    k: usize,
    candidate: impl Fn(usize, &str) -> bool,
) -> Result<NeighborList> {
    let name = vocab.token(query).ok_or(G2pError::IndexOutOfRange {
        index: query,
        size: vocab.len(),
    })?;
    let q = table.row(query);
    if q.iter().all(|v| *v == T::zero()) {
        return Err(G2pError::InvalidArgument(format!("embedding of {name} is zero")));
    }
    let mut neighbors: Vec<(String, f64)> = vocab
        .tokens()
        .iter()
        .enumerate()
        .filter(|&(id, tok)| id != query && !Vocabulary::is_special(id) && candidate(id, tok))
        .filter_map(|(id, tok)| cosine(q, table.row(id)).map(|s| (tok.clone(), s)))
        .collect();
    neighbors.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    neighbors.truncate(k);
    Ok(NeighborList {
        query: name.to_string(),
        neighbors,
    })
}

/// Phonemes whose target embeddings are closest to `symbol`'s.
pub fn nearest_phonemes<T: Scalar>(model: &Model<T>, tgt_vocab: &Vocabulary, symbol: &str, k: usize) -> Result<NeighborList> {
    let id = tgt_vocab
        .id(symbol)
        .filter(|&i| !Vocabulary::is_special(i))
        .ok_or_else(|| G2pError::UnknownToken(symbol.to_string()))?;
    nearest_rows(&model.params.tgt_embedding, tgt_vocab, id, k, |_, _| true)
}

/// Language tokens whose source embeddings are closest to `<lang>`'s.
pub fn nearest_languages<T: Scalar>(model: &Model<T>, src_vocab: &Vocabulary, lang: &LangCode, k: usize) -> Result<NeighborList> {
    let id = src_vocab.id(&lang.token()).ok_or_else(|| G2pError::UnknownToken(lang.token()))?;
    nearest_rows(&model.params.src_embedding, src_vocab, id, k, |_, tok| LangCode::from_token(tok).is_some())
}

/// The top hypothesis for `word` under each language token.
pub fn translate_as<T: Scalar>(
    model: &Model<T>,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    word: &str,
    langs: &[LangCode],
    beam: &BeamConfig,
) -> Result<Vec<(LangCode, Vec<String>)>> {
    let mut tr = Translator::new(model, src_vocab, tgt_vocab, true);
    langs
        .iter()
        .map(|l| Ok((l.clone(), tr.translate(word, l, beam)?.best().to_vec())))
        .collect()
}

/// One line per query: the query, then `token (similarity)` pairs.
pub fn format_neighbors(lists: &[NeighborList]) -> String {
    let mut s = String::new();
    for l in lists {
        let cells: Vec<String> = l.neighbors.iter().map(|(t, c)| format!("{t} ({c:.3})")).collect();
        let _ = writeln!(s, "{}\t{}", l.query, cells.join("\t"));
    }
    s
}

/// One line per language: the code and the space-separated phonemes.
pub fn format_translations(word: &str, rows: &[(LangCode, Vec<String>)]) -> String {
    let mut s = format!("# {word}\n");
    for (l, p) in rows {
        let _ = writeln!(s, "{l}\t{}", p.join(" "));
    }
    s
}
