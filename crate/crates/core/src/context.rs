//! Token-budgeted context assembly from concept fragments.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Fragment, Granularity, KnowledgeGraph, ResolveError, SymbolId};

/// Leaves headroom below a 128k-token context window for instructions
/// and the model's answer.
pub const DEFAULT_TOKEN_BUDGET: usize = 100_000;

/// `ceil(bytes / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub fragment_id: String,
    pub text: String,
}

impl ContextEntry {
    /// The id line, the verbatim fragment and a blank separator line.
    pub fn render(&self) -> String {
        format!("{}\n{}\n\n", self.fragment_id, self.text)
    }

    pub fn cost(&self) -> usize {
        estimate_tokens(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub entries: Vec<ContextEntry>,
    pub estimated_tokens: usize,
    pub truncated: bool,
}

impl ContextBundle {
    pub fn render(&self) -> String {
        self.entries.iter().map(ContextEntry::render).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("unknown symbol {0}")]
    UnknownSymbol(SymbolId),
    #[error("defining fragment {fragment} needs {needed} tokens but the budget is {budget}")]
    BudgetTooSmall {
        fragment: String,
        needed: usize,
        budget: usize,
    },
    #[error("token budget must be positive")]
    ZeroBudget,
}

pub fn build_context(
    graph: &KnowledgeGraph,
    symbol: &SymbolId,
    granularity: Granularity,
    budget: usize,
) -> Result<ContextBundle, ContextError> {
    build_context_for(graph, std::slice::from_ref(symbol), granularity, budget)
}

/// Packs the fragments of every concept. Defining fragments go first, in
/// concept order; the rest follow in document order. Packing stops at the
/// first fragment that does not fit, and the kept entries are returned in
/// document order.
pub fn build_context_for(
    graph: &KnowledgeGraph,
    symbols: &[SymbolId],
    granularity: Granularity,
    budget: usize,
) -> Result<ContextBundle, ContextError> {
    if budget == 0 {
        return Err(ContextError::ZeroBudget);
    }
    let mut candidates: Vec<&Fragment> = Vec::new();
    let mut defining: Vec<&Fragment> = Vec::new();
    for symbol in symbols {
        let fragments = graph
            .fragments_for_concept(symbol, granularity)
            .map_err(|e| match e {
                ResolveError::UnknownSymbol(s) => ContextError::UnknownSymbol(s),
                _ => ContextError::UnknownSymbol(symbol.clone()),
            })?;
        let entry = graph
            .symbol(symbol)
            .expect("checked by fragments_for_concept");
        candidates.extend(fragments);
        defining.extend(
            entry
                .defining_fragments
                .iter()
                .filter_map(|id| graph.fragment(id)),
        );
    }
    let mut seen = HashSet::new();
    let order: Vec<&Fragment> = defining
        .iter()
        .chain(candidates.iter())
        .copied()
        .filter(|f| seen.insert(f.id.as_str()))
        .collect();
    let first_defining = defining.first().map(|f| f.id.as_str());

    let mut kept: Vec<(usize, ContextEntry)> = Vec::new();
    let mut used = 0;
    let mut truncated = false;
    for fragment in order {
        let entry = ContextEntry {
            fragment_id: fragment.id.clone(),
            text: fragment.text.clone(),
        };
        let cost = entry.cost();
        if used + cost > budget {
            if Some(fragment.id.as_str()) == first_defining {
                return Err(ContextError::BudgetTooSmall {
                    fragment: fragment.id.clone(),
                    needed: cost,
                    budget,
                });
            }
            truncated = true;
            break;
        }
        used += cost;
        let position = graph
            .fragment_index(&fragment.id)
            .expect("fragment from graph");
        kept.push((position, entry));
    }
    kept.sort_by_key(|(position, _)| *position);
    Ok(ContextBundle {
        entries: kept.into_iter().map(|(_, e)| e).collect(),
        estimated_tokens: used,
        truncated,
    })
}
