//! The application: corpora, the generation pipeline, review, grading and
//! survey bookkeeping on top of the record store.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use stexquiz_core::graph::{build_graph, load_manifest, KnowledgeGraph, SymbolId};
use stexquiz_core::prompt::{GenerationRequest, MasterPromptTemplate};
use stexquiz_core::question::{
    extract_prerequisites, from_document, grade, instructor_view, student_view, GradeError,
    GradeResult, InstructorView, Prerequisites, QuizQuestion, ReviewStatus, StudentResponse,
    StudentView, UnresolvedSymbol, DEFAULT_POINTS,
};
use stexquiz_core::stex::{parse_document, SourceDocument};
use stexquiz_core::survey::{
    aggregate, build_instrument, AggregateReport, ExpertResponse, SurveyError, SurveyInstrument,
    SurveyItem,
};
use stexquiz_core::validate::{
    validate, validate_document, validate_reject, validate_structural, Severity, ValidationReport,
    Verdict,
};
use stexquiz_gateway::{
    run_generation_session, GatewayError, LlmBackend, SessionOptions, Transcript,
};
use thiserror::Error;

use crate::store::{EntityKind, Store, StoreError, StoreRecord};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("no corpus `{0}`")]
    UnknownCorpus(String),
    #[error("no corpus has been ingested")]
    NoCorpus,
    #[error("no draft `{0}`")]
    UnknownDraft(String),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("edit rejected: {}", summary(.0))]
    EditRejected(Box<ValidationReport>),
    #[error("model output {transcript_ref} contains no usable question")]
    EmptyOutput {
        transcript_ref: String,
        rejects: Vec<PipelineReject>,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("ingest failed: {0}")]
    Ingest(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Grade(#[from] GradeError),
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn summary(report: &ValidationReport) -> String {
    report
        .codes()
        .iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub id: String,
    pub documents: usize,
    pub modules: usize,
    pub symbols: usize,
    pub fragments: usize,
    pub top_level_sections: Vec<String>,
    pub warnings: usize,
}

impl CorpusSummary {
    pub fn of(id: &str, graph: &KnowledgeGraph) -> Self {
        CorpusSummary {
            id: id.to_owned(),
            documents: graph.documents.len(),
            modules: graph.modules.len(),
            symbols: graph.symbols.len(),
            fragments: graph.fragments.len(),
            top_level_sections: graph
                .section_roots
                .iter()
                .map(|&i| graph.sections[i].title.clone())
                .collect(),
            warnings: graph.warnings.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub summary: CorpusSummary,
    pub manifest: String,
    pub documents: Vec<SourceDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionDraft {
    pub question: QuizQuestion,
    pub report: ValidationReport,
    pub prerequisites: Prerequisites,
    pub transcript_ref: String,
    pub topic_tag: String,
    pub corpus: String,
}

/// A fence or problem that produced no question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReject {
    pub id: String,
    pub transcript_ref: String,
    pub fence: usize,
    pub source: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub transcript_ref: String,
    pub drafts: Vec<QuestionDraft>,
    pub rejects: Vec<PipelineReject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewAction {
    pub status: ReviewStatus,
    #[serde(default)]
    pub edited_source: Option<String>,
}

/// Audit entry written for every review action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEvent {
    pub draft_id: String,
    pub status: ReviewStatus,
    pub draft_revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrerequisiteView {
    pub dimension: String,
    pub symbol: String,
    pub symbol_name: String,
}

/// What GET /drafts/{id} returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftView {
    pub id: String,
    pub revision: u64,
    pub corpus: String,
    pub topic_tag: String,
    pub transcript_ref: String,
    pub review_status: ReviewStatus,
    pub verdict: Verdict,
    pub render: InstructorView,
    pub report: ValidationReport,
    pub prerequisites: Vec<PrerequisiteView>,
    pub unresolved: Vec<UnresolvedSymbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftSummary {
    pub id: String,
    pub revision: u64,
    pub topic_tag: String,
    pub qtype: stexquiz_core::question::QuestionType,
    pub review_status: ReviewStatus,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolHit {
    pub uri: String,
    pub name: String,
    pub module: String,
    pub defining_fragments: Vec<String>,
}

/// The text between each pair of ``` markers. A bare word on the opening
/// line (a language tag) is dropped.
pub fn split_fences(output: &str) -> Vec<String> {
    output
        .split("```")
        .skip(1)
        .step_by(2)
        .map(|body| match body.split_once('\n') {
            Some((first, rest))
                if first
                    .trim()
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-') =>
            {
                rest.to_owned()
            }
            _ => body.to_owned(),
        })
        .collect()
}

/// Turns raw model output into drafts and rejects without touching the
/// store.
pub fn process_output(
    output: &str,
    transcript_ref: &str,
    topic_tag: &str,
    corpus: &str,
    graph: &KnowledgeGraph,
    request: Option<&GenerationRequest>,
) -> (Vec<QuestionDraft>, Vec<PipelineReject>) {
    let mut drafts = Vec::new();
    let mut rejects = Vec::new();
    for (i, body) in split_fences(output).into_iter().enumerate() {
        let fence = i + 1;
        let doc =
            SourceDocument::generated(format!("{transcript_ref}/fence-{fence}"), body.clone());
        let reject = |id: String, source: String, report: ValidationReport| PipelineReject {
            id,
            transcript_ref: transcript_ref.to_owned(),
            fence,
            source,
            report,
        };
        let extracted = match from_document(&doc) {
            Ok(e) => e,
            Err(_) => {
                let report = validate_document(&doc, graph, request).remove(0);
                rejects.push(reject(doc.doc_id.clone(), body, report));
                continue;
            }
        };
        if extracted.questions.is_empty() && extracted.rejects.is_empty() {
            let report = validate_document(&doc, graph, request).remove(0);
            rejects.push(reject(doc.doc_id.clone(), body, report));
            continue;
        }
        // questions and rejects back in document order
        let problem_no = |id: &str| {
            id.rsplit_once("#p")
                .and_then(|(_, n)| n.parse::<usize>().ok())
                .unwrap_or(0)
        };
        let mut items: Vec<(usize, Result<QuizQuestion, _>)> = extracted
            .questions
            .into_iter()
            .map(|q| (problem_no(&q.id), Ok(q)))
            .chain(
                extracted
                    .rejects
                    .into_iter()
                    .map(|r| (problem_no(&r.id), Err(r))),
            )
            .collect();
        items.sort_by_key(|(offset, _)| *offset);
        for (_, item) in items {
            let (question, report) = match item {
                Ok(q) => {
                    let report = validate(&q, graph, request);
                    (q, report)
                }
                Err(r) => {
                    let report = validate_reject(&r, graph, request);
                    match r.candidate {
                        Some(q) => (q, report),
                        None => {
                            rejects.push(reject(r.id, r.source, report));
                            continue;
                        }
                    }
                }
            };
            let prerequisites = extract_prerequisites(&question, graph);
            drafts.push(QuestionDraft {
                question,
                report,
                prerequisites,
                transcript_ref: transcript_ref.to_owned(),
                topic_tag: topic_tag.to_owned(),
                corpus: corpus.to_owned(),
            });
        }
    }
    (drafts, rejects)
}

pub struct App {
    store: Store,
    backend: Arc<dyn LlmBackend>,
    template: MasterPromptTemplate,
    options: SessionOptions,
    corpora: RwLock<BTreeMap<String, (String, Arc<KnowledgeGraph>)>>,
}

impl App {
    /// Opens the store and rebuilds every persisted corpus.
    pub fn open(
        store: Store,
        backend: Arc<dyn LlmBackend>,
        template: MasterPromptTemplate,
        options: SessionOptions,
    ) -> Result<Self, AppError> {
        let app = App {
            store,
            backend,
            template,
            options,
            corpora: RwLock::new(BTreeMap::new()),
        };
        for record in app.store.list::<CorpusRecord>(EntityKind::Corpus)? {
            let graph = build_graph(&record.payload.documents)
                .map_err(|e| AppError::Ingest(e.to_string()))?;
            app.corpora
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .insert(record.id.clone(), (record.created_at, Arc::new(graph)));
        }
        Ok(app)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn ingest_corpus(&self, manifest: &Path) -> Result<CorpusSummary, AppError> {
        let documents = load_manifest(manifest).map_err(|e| AppError::Ingest(e.to_string()))?;
        let graph = build_graph(&documents).map_err(|e| AppError::Ingest(e.to_string()))?;
        let id = manifest
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| !n.is_empty())
            .unwrap_or_else(|| "default".to_owned());
        let summary = CorpusSummary::of(&id, &graph);
        let record = self.store.put(
            EntityKind::Corpus,
            &id,
            &CorpusRecord {
                summary: summary.clone(),
                manifest: manifest.display().to_string(),
                documents,
            },
        )?;
        self.corpora
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, (record.created_at, Arc::new(graph)));
        Ok(summary)
    }

    pub fn corpus_ids(&self) -> Vec<String> {
        self.corpora
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    /// The named corpus, or the most recently ingested one.
    pub fn graph(&self, corpus: Option<&str>) -> Result<(String, Arc<KnowledgeGraph>), AppError> {
        let corpora = self.corpora.read().unwrap_or_else(|e| e.into_inner());
        match corpus {
            Some(id) => corpora
                .get(id)
                .map(|(_, g)| (id.to_owned(), g.clone()))
                .ok_or_else(|| AppError::UnknownCorpus(id.to_owned())),
            None => corpora
                .iter()
                .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.0.cmp(a.0)))
                .map(|(id, (_, g))| (id.clone(), g.clone()))
                .ok_or(AppError::NoCorpus),
        }
    }

    pub fn symbols(&self, corpus: Option<&str>, query: &str) -> Result<Vec<SymbolHit>, AppError> {
        let (_, graph) = self.graph(corpus)?;
        Ok(graph
            .find_symbols(query)
            .into_iter()
            .map(|s| SymbolHit {
                uri: s.id.0.clone(),
                name: s.name.clone(),
                module: s.module.0.clone(),
                defining_fragments: s.defining_fragments.clone(),
            })
            .collect())
    }

    pub fn generate(
        &self,
        request: &GenerationRequest,
        corpus: Option<&str>,
    ) -> Result<GenerationResult, AppError> {
        let (corpus, graph) = self.graph(corpus)?;
        request
            .validate()
            .map_err(|e| AppError::InvalidRequest(e.to_string()))?;
        for c in &request.concepts {
            if graph.symbol(c).is_none() {
                return Err(AppError::UnknownSymbol(c.0.clone()));
            }
        }
        let topic_tag = graph
            .symbol(&request.concepts[0])
            .map(|s| s.name.clone())
            .unwrap_or_default();

        let session = run_generation_session(
            self.backend.as_ref(),
            &graph,
            &self.template,
            request,
            &self.options,
        )?;
        let transcript_ref = format!("gen-{}", &session.transcript.content_hash()[..16]);
        self.store
            .put(EntityKind::Transcript, &transcript_ref, &session.transcript)?;

        let (drafts, rejects) = process_output(
            &session.text,
            &transcript_ref,
            &topic_tag,
            &corpus,
            &graph,
            Some(request),
        );
        for d in &drafts {
            self.store.put(EntityKind::Draft, &d.question.id, d)?;
        }
        for r in &rejects {
            self.store.put(EntityKind::Reject, &r.id, r)?;
        }
        if drafts.is_empty() {
            return Err(AppError::EmptyOutput {
                transcript_ref,
                rejects,
            });
        }
        Ok(GenerationResult {
            transcript_ref,
            drafts,
            rejects,
        })
    }

    pub fn transcript(&self, transcript_ref: &str) -> Result<Option<Transcript>, AppError> {
        Ok(self
            .store
            .latest::<Transcript>(EntityKind::Transcript, transcript_ref)?
            .map(|r| r.payload))
    }

    pub fn draft(&self, id: &str) -> Result<StoreRecord<QuestionDraft>, AppError> {
        self.store
            .latest(EntityKind::Draft, id)?
            .ok_or_else(|| AppError::UnknownDraft(id.to_owned()))
    }

    pub fn draft_view(&self, id: &str) -> Result<DraftView, AppError> {
        let record = self.draft(id)?;
        let graph = self
            .graph(Some(&record.payload.corpus))
            .ok()
            .map(|(_, g)| g);
        Ok(view_of(record, graph.as_deref()))
    }

    pub fn student_view(&self, id: &str) -> Result<StudentView, AppError> {
        let record = self.draft(id)?;
        let graph = self
            .graph(Some(&record.payload.corpus))
            .ok()
            .map(|(_, g)| g);
        Ok(student_view(&record.payload.question, graph.as_deref()))
    }

    pub fn list_drafts(&self, status: Option<ReviewStatus>) -> Result<Vec<DraftSummary>, AppError> {
        Ok(self
            .store
            .list::<QuestionDraft>(EntityKind::Draft)?
            .into_iter()
            .filter(|r| status.is_none_or(|s| r.payload.question.review_status == s))
            .map(|r| DraftSummary {
                id: r.id,
                revision: r.revision,
                topic_tag: r.payload.topic_tag,
                qtype: r.payload.question.qtype,
                review_status: r.payload.question.review_status,
                verdict: r.payload.report.verdict,
            })
            .collect())
    }

    pub fn set_review_status(
        &self,
        id: &str,
        action: &ReviewAction,
    ) -> Result<StoreRecord<QuestionDraft>, AppError> {
        let record = self.draft(id)?;
        let mut draft = record.payload;
        match (action.status, &action.edited_source) {
            (ReviewStatus::Accepted | ReviewStatus::Rejected, None) => {
                draft.question.review_status = action.status;
            }
            (ReviewStatus::Edited, Some(source)) => {
                let (_, graph) = self.graph(Some(&draft.corpus))?;
                let mut question = reparse_edit(&draft.question, source, &graph)?;
                question.id = draft.question.id.clone();
                question.review_status = ReviewStatus::Edited;
                draft.report = validate(&question, &graph, None);
                draft.prerequisites = extract_prerequisites(&question, &graph);
                draft.question = question;
            }
            (ReviewStatus::Edited, None) => {
                return Err(AppError::InvalidRequest(
                    "status Edited needs edited_source".into(),
                ));
            }
            (ReviewStatus::Draft, _) => {
                return Err(AppError::InvalidRequest(
                    "a draft cannot be moved back to Draft".into(),
                ));
            }
            (_, Some(_)) => {
                return Err(AppError::InvalidRequest(
                    "edited_source is only allowed with status Edited".into(),
                ));
            }
        }
        let updated = self.store.put(EntityKind::Draft, id, &draft)?;
        self.store.put(
            EntityKind::Review,
            id,
            &ReviewEvent {
                draft_id: id.to_owned(),
                status: action.status,
                draft_revision: updated.revision,
                edited_source: action.edited_source.clone(),
            },
        )?;
        Ok(updated)
    }

    pub fn grade(&self, id: &str, response: &StudentResponse) -> Result<GradeResult, AppError> {
        let record = self.draft(id)?;
        Ok(grade(&record.payload.question, response, DEFAULT_POINTS)?)
    }

    pub fn survey_instrument(&self, id: &str) -> Result<SurveyInstrument, AppError> {
        let draft = self.draft(id)?.payload;
        let request = self.transcript(&draft.transcript_ref)?.map(|t| t.request);
        let graph = self.graph(Some(&draft.corpus)).ok().map(|(_, g)| g);
        Ok(build_instrument(
            &draft.question,
            request.as_ref(),
            graph.as_deref(),
        ))
    }

    pub fn submit_response(
        &self,
        response: &ExpertResponse,
    ) -> Result<StoreRecord<ExpertResponse>, AppError> {
        response.validate()?;
        if self
            .store
            .latest::<QuestionDraft>(EntityKind::Draft, &response.question_id)?
            .is_none()
        {
            return Err(SurveyError::UnknownQuestionId(response.question_id.clone()).into());
        }
        let id = format!("{}@{}", response.question_id, response.expert_id);
        Ok(self.store.put(EntityKind::SurveyResponse, &id, response)?)
    }

    /// Aggregate over accepted or edited drafts plus any draft that has
    /// responses.
    pub fn aggregate_report(&self) -> Result<AggregateReport, AppError> {
        let responses: Vec<ExpertResponse> = self
            .store
            .list::<ExpertResponse>(EntityKind::SurveyResponse)?
            .into_iter()
            .map(|r| r.payload)
            .collect();
        let rated: BTreeSet<&str> = responses.iter().map(|r| r.question_id.as_str()).collect();
        let items: Vec<SurveyItem> = self
            .store
            .list::<QuestionDraft>(EntityKind::Draft)?
            .into_iter()
            .filter(|r| {
                matches!(
                    r.payload.question.review_status,
                    ReviewStatus::Accepted | ReviewStatus::Edited
                ) || rated.contains(r.id.as_str())
            })
            .map(|r| SurveyItem::new(&r.payload.question, r.payload.topic_tag))
            .collect();
        Ok(aggregate(&responses, &items)?)
    }
}

/// Parses an instructor's edit; it must hold exactly one problem free of
/// structural errors.
fn reparse_edit(
    original: &QuizQuestion,
    source: &str,
    graph: &KnowledgeGraph,
) -> Result<QuizQuestion, AppError> {
    let doc = SourceDocument::generated(original.doc_id(), source);
    if parse_document(&doc).is_err() {
        let report = validate_document(&doc, graph, None).remove(0);
        return Err(AppError::EditRejected(Box::new(report)));
    }
    let extracted = from_document(&doc).map_err(|e| AppError::InvalidRequest(e.to_string()))?;
    if extracted.questions.len() + extracted.rejects.len() != 1 {
        let report = validate_document(&doc, graph, None).remove(0);
        if extracted.questions.is_empty() && extracted.rejects.is_empty() {
            return Err(AppError::EditRejected(Box::new(report)));
        }
        return Err(AppError::InvalidRequest(
            "edited source must contain exactly one problem".into(),
        ));
    }
    let question = match extracted.questions.into_iter().next() {
        Some(q) => q,
        None => {
            let reject = extracted.rejects.into_iter().next().expect("one reject");
            return Err(AppError::EditRejected(Box::new(validate_reject(
                &reject, graph, None,
            ))));
        }
    };
    let structural = validate_structural(&question, None);
    if structural.iter().any(|i| i.severity == Severity::Error) {
        return Err(AppError::EditRejected(Box::new(ValidationReport::new(
            question.id.clone(),
            structural,
        ))));
    }
    Ok(question)
}

pub fn view_of(record: StoreRecord<QuestionDraft>, graph: Option<&KnowledgeGraph>) -> DraftView {
    let d = record.payload;
    let name_of = |id: &SymbolId| {
        graph
            .and_then(|g| g.symbol(id))
            .map(|s| s.name.clone())
            .unwrap_or_default()
    };
    DraftView {
        id: record.id,
        revision: record.revision,
        corpus: d.corpus,
        topic_tag: d.topic_tag,
        transcript_ref: d.transcript_ref,
        review_status: d.question.review_status,
        verdict: d.report.verdict,
        render: instructor_view(&d.question, graph),
        prerequisites: d
            .prerequisites
            .pairs
            .iter()
            .map(|p| PrerequisiteView {
                dimension: p.dimension.to_string(),
                symbol: p.symbol.0.clone(),
                symbol_name: name_of(&p.symbol),
            })
            .collect(),
        unresolved: d.prerequisites.unresolved,
        report: d.report,
    }
}
