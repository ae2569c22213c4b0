//! One generation session: prompt, optional search round, final answer.

use serde::{Deserialize, Serialize};
use stexquiz_core::graph::KnowledgeGraph;
use stexquiz_core::prompt::{build_prompt, GenerationRequest, MasterPromptTemplate, PromptBundle};

use crate::{
    ChatExchange, ChatParams, Completion, CompletionOutcome, GatewayError, LlmBackend, Message,
    Role, ToolSpec,
};

pub const TRANSCRIPT_FORMAT: &str = "stexquiz-transcript/1";
pub const SEARCH_HEADER: &str = "=== SEARCH RESULTS ===";
/// Definitions returned per query.
pub const SEARCH_K: usize = 10;

/// Appended to the prompt while the search tool is offered, and dropped
/// again for the round that carries the results.
pub const TOOL_INSTRUCTION: &str = "You may call the function `search` with a list of strings. For every string it \
returns definitions from the course material. Use it to find out which symbol names to use when annotating text that \
refers to a concept of the course.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub params: ChatParams,
    /// Offer the search tool in the first round.
    pub search_tool: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            params: ChatParams::default(),
            search_tool: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRound {
    pub hash: String,
    pub exchange: ChatExchange,
    pub outcome: CompletionOutcome,
}

/// Everything sent and received in a session. Holds no credentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub format: String,
    pub request: GenerationRequest,
    pub template_version: String,
    pub context_fragments: Vec<String>,
    pub context_truncated: bool,
    pub rounds: Vec<TranscriptRound>,
    pub output: String,
}

impl Transcript {
    /// Hex sha256 of the compact JSON form.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("transcripts serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn tool_rounds(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| {
                r.exchange
                    .messages
                    .iter()
                    .any(|m| m.text.contains(SEARCH_HEADER))
            })
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub text: String,
    pub transcript: Transcript,
    pub bundle: PromptBundle,
}

/// The search section appended for the second round.
pub fn format_search_results(graph: &KnowledgeGraph, queries: &[String]) -> String {
    let mut out = String::from(SEARCH_HEADER);
    out.push('\n');
    for (query, hits) in queries
        .iter()
        .zip(graph.search_definitions(queries, SEARCH_K))
    {
        out.push_str(&format!("query: {query}\n"));
        if hits.is_empty() {
            out.push_str("(no results)\n");
        }
        for hit in hits {
            out.push_str(&format!(
                "{}\n{}\n",
                hit.fragment.id,
                hit.fragment.text.trim_end()
            ));
        }
        out.push('\n');
    }
    out
}

fn exchange(prompt: String, tool: bool, params: &ChatParams) -> ChatExchange {
    ChatExchange {
        messages: vec![Message::new(Role::User, prompt)],
        tool_spec: tool.then(ToolSpec::search),
        params: params.clone(),
    }
}

pub fn run_generation_session(
    backend: &dyn LlmBackend,
    graph: &KnowledgeGraph,
    template: &MasterPromptTemplate,
    request: &GenerationRequest,
    options: &SessionOptions,
) -> Result<SessionOutput, GatewayError> {
    let bundle = build_prompt(graph, template, request)?;
    let mut rounds = Vec::new();
    let call = |ex: ChatExchange,
                rounds: &mut Vec<TranscriptRound>|
     -> Result<CompletionOutcome, GatewayError> {
        let outcome = backend.complete(&ex)?;
        rounds.push(TranscriptRound {
            hash: ex.content_hash(),
            exchange: ex,
            outcome: outcome.clone(),
        });
        Ok(outcome)
    };

    let first_prompt = if options.search_tool {
        format!("{}\n{TOOL_INSTRUCTION}\n", bundle.prompt)
    } else {
        bundle.prompt.clone()
    };
    let first = call(
        exchange(first_prompt, options.search_tool, &options.params),
        &mut rounds,
    )?;
    let text = match first.completion {
        Completion::Text(t) => t,
        Completion::Call(tool_call) => {
            if !options.search_tool || tool_call.name != crate::SEARCH_TOOL {
                return Err(GatewayError::UnknownTool(tool_call.name));
            }
            let results = format_search_results(graph, &tool_call.arguments);
            let second_prompt = format!("{}\n{results}", bundle.prompt);
            match call(exchange(second_prompt, false, &options.params), &mut rounds)?.completion {
                Completion::Text(t) => t,
                Completion::Call(_) => return Err(GatewayError::ToolLoopExceeded),
            }
        }
    };

    let transcript = Transcript {
        format: TRANSCRIPT_FORMAT.to_owned(),
        request: bundle.request.clone(),
        template_version: bundle.template_version.clone(),
        context_fragments: bundle
            .context
            .entries
            .iter()
            .map(|e| e.fragment_id.clone())
            .collect(),
        context_truncated: bundle.context.truncated,
        rounds,
        output: text.clone(),
    };
    Ok(SessionOutput {
        text,
        transcript,
        bundle,
    })
}
