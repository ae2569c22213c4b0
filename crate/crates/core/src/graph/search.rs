use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::{Fragment, FragmentKind, KnowledgeGraph};
use crate::exec::Execution;

/// Results per query when the caller does not say otherwise.
pub const DEFAULT_SEARCH_K: usize = 10;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchHit<'g> {
    pub fragment: &'g Fragment,
    pub score: u64,
}

/// Lowercased words: alphanumeric runs, joined across single inner `-` or
/// `_` so that `zzz-no-such-term` stays one token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if (c == '-' || c == '_')
            && !current.is_empty()
            && chars.peek().is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Fragment-side counts: every token, plus the parts of compound tokens,
/// so the query `alpha beta` still finds `alpha-beta`.
pub(super) fn term_counts(text: &str) -> HashMap<String, u32> {
    let mut counts = HashMap::new();
    for token in tokenize(text) {
        if token.contains(['-', '_']) {
            for part in token.split(['-', '_']) {
                *counts.entry(part.to_owned()).or_insert(0) += 1;
            }
        }
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

/// Tokens that earn the symbol boost: each symbol name and its `-`/`_`
/// separated parts, lowercased.
pub(super) fn boost_terms<'a>(names: impl Iterator<Item = &'a str>) -> BTreeSet<String> {
    let mut terms = BTreeSet::new();
    for name in names {
        let lower = name.to_lowercase();
        for part in lower.split(['-', '_']) {
            if !part.is_empty() {
                terms.insert(part.to_owned());
            }
        }
        terms.insert(lower);
    }
    terms
}

impl KnowledgeGraph {
    /// Top-`k` definition fragments per query. A fragment scores the sum of
    /// its term frequencies for the query tokens, doubled for tokens that
    /// name a symbol declared in the fragment's module. Zero scores are
    /// dropped; ties keep document order.
    pub fn search_definitions(&self, queries: &[String], k: usize) -> Vec<Vec<SearchHit<'_>>> {
        self.search_definitions_with(queries, k, Execution::default())
    }

    pub fn search_definitions_with(
        &self,
        queries: &[String],
        k: usize,
        exec: Execution,
    ) -> Vec<Vec<SearchHit<'_>>> {
        let definitions: Vec<usize> = self
            .fragments
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == FragmentKind::Definition)
            .map(|(i, _)| i)
            .collect();
        queries
            .iter()
            .map(|query| {
                let tokens = tokenize(query);
                if tokens.is_empty() || k == 0 {
                    return Vec::new();
                }
                let scores = exec.map(&definitions, |&i| self.score(i, &tokens));
                let mut hits: Vec<(usize, u64)> = definitions
                    .iter()
                    .zip(scores)
                    .filter(|(_, s)| *s > 0)
                    .map(|(&i, s)| (i, s))
                    .collect();
                hits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                hits.truncate(k);
                hits.into_iter()
                    .map(|(i, score)| SearchHit {
                        fragment: &self.fragments[i],
                        score,
                    })
                    .collect()
            })
            .collect()
    }

    fn score(&self, fragment: usize, tokens: &[String]) -> u64 {
        let counts = &self.index.term_counts[fragment];
        let boost = self.fragments[fragment]
            .module
            .as_ref()
            .and_then(|m| self.index.boost_terms.get(m));
        tokens
            .iter()
            .map(|t| {
                let tf = u64::from(counts.get(t).copied().unwrap_or(0));
                if boost.is_some_and(|b| b.contains(t)) {
                    tf * 2
                } else {
                    tf
                }
            })
            .sum()
    }
}
