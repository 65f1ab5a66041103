//! JSON API over the diagnosis pipeline and the icon knowledge base.

use std::path::Path;
use std::sync::Arc;

use axum::extract::multipart::MultipartError;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, Query as UrlQuery, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use leafdx_core::classifier::{load_model, MODEL_VERSION};
use leafdx_core::features::FeatureVector;
use leafdx_core::iconquery::{
    FaqStore, IconNode, IconQueryError, KnowledgeBase, LocalizedFaq, MessageCatalog, QueryPath, Retrieved, Taxonomy,
    ROOT_ID,
};
use leafdx_core::imaging::ImagingError;
use leafdx_core::pipeline::{run_pipeline, AnalysisConfig, PipelineError, PipelineOutput, Timings};
use leafdx_core::segmentation::Aabb;
use leafdx_core::{DiseaseClass, MlpModel};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::config::PipelineConfig;

/// Largest accepted image, before decoding.
pub const MAX_UPLOAD_BYTES: usize = 5 * 1024 * 1024;
/// Room for multipart boundaries and headers around the image.
const MULTIPART_OVERHEAD: usize = 64 * 1024;

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub format_version: u8,
    pub layer_sizes: [usize; 4],
    pub file_bytes: usize,
}

/// Immutable snapshot shared by all requests.
pub struct AppState {
    pub model: MlpModel<f64>,
    pub model_info: ModelInfo,
    pub analysis: AnalysisConfig<f64>,
    pub taxonomy: Taxonomy,
    pub kb: KnowledgeBase,
    pub faq: FaqStore,
    pub messages: MessageCatalog,
    pub default_locale: String,
}

impl AppState {
    pub fn load(cfg: &PipelineConfig) -> anyhow::Result<Self> {
        cfg.check_files()?;
        let bytes = std::fs::read(&cfg.model)?;
        let model: MlpModel<f64> = load_model(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", cfg.model.display()))?;
        let taxonomy = Taxonomy::load(&cfg.taxonomy)?;
        let kb = KnowledgeBase::load(&cfg.knowledge_base)?;
        let problems = leafdx_core::iconquery::lint(&taxonomy, &kb);
        if let Some(p) = problems.first() {
            anyhow::bail!("taxonomy and knowledge base disagree ({} problems), first: {p}", problems.len());
        }
        let messages = match &cfg.messages {
            Some(p) => MessageCatalog::load(p)?,
            None => MessageCatalog::default(),
        };
        Ok(AppState {
            model_info: ModelInfo { format_version: MODEL_VERSION, layer_sizes: model.layer_sizes(), file_bytes: bytes.len() },
            model,
            analysis: cfg.analysis.to_analysis()?,
            taxonomy,
            kb,
            faq: FaqStore::load(&cfg.faq)?,
            messages,
            default_locale: cfg.default_locale.clone(),
        })
    }

    fn locale(&self, requested: Option<&str>, headers: &HeaderMap) -> String {
        requested
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .or_else(|| accept_language(headers))
            .unwrap_or_else(|| self.default_locale.clone())
    }

    fn error(&self, status: StatusCode, code: &'static str, locale: &str, detail: impl ToString) -> ApiError {
        let detail = detail.to_string();
        let (served, message) = match self.messages.get(code, locale) {
            Some((l, m)) => (l.to_string(), m.to_string()),
            None => (leafdx_core::iconquery::DEFAULT_LOCALE.to_string(), detail.clone()),
        };
        ApiError { status, body: ErrorBody { code, message, locale: served, detail } }
    }
}

/// First language tag of an `Accept-Language` header, without region.
fn accept_language(headers: &HeaderMap) -> Option<String> {
    let raw = headers.get("accept-language")?.to_str().ok()?;
    let tag = raw.split(',').next()?.split(';').next()?.trim();
    let lang = tag.split('-').next()?.to_ascii_lowercase();
    (!lang.is_empty() && lang != "*").then_some(lang)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    pub locale: String,
    /// Untranslated technical detail.
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared, assets: Option<&Path>, static_dir: Option<&Path>) -> Router {
    let mut app = Router::new()
        .route(
            "/api/diagnose",
            post(diagnose).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES + MULTIPART_OVERHEAD)),
        )
        .route("/api/icons/root", get(icon_roots))
        .route("/api/icons/{id}/children", get(icon_children))
        .route("/api/query", post(query))
        .route("/api/faq", get(faq))
        .route("/api/health", get(health))
        .with_state(state);
    if let Some(dir) = assets {
        app = app.nest_service("/assets", ServeDir::new(dir));
    }
    if let Some(dir) = static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app
}

/// Router for a loaded config; icon assets are served from the taxonomy's directory.
pub fn app(cfg: &PipelineConfig) -> anyhow::Result<Router> {
    let state = Arc::new(AppState::load(cfg)?);
    Ok(router(state, cfg.taxonomy.parent(), cfg.static_dir.as_deref()))
}

#[derive(Debug, Deserialize, Default)]
pub struct LocaleParam {
    pub locale: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClassScores {
    pub leafblast: f64,
    pub brownspot: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VoteCounts {
    pub leafblast: usize,
    pub brownspot: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpotReport {
    pub label: u32,
    pub bbox: Aabb,
    pub class: DiseaseClass,
    pub probabilities: ClassScores,
    pub features: FeatureVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosisResponse {
    pub image_id: String,
    pub final_class: DiseaseClass,
    pub class_slug: &'static str,
    pub confidence: f64,
    pub spot_count: usize,
    pub votes: VoteCounts,
    pub spots: Vec<SpotReport>,
    /// Milliseconds per stage, in execution order.
    pub timings: Timings,
}

impl DiagnosisResponse {
    pub fn from_output(out: PipelineOutput<f64>) -> Self {
        let d = out.diagnosis;
        let spots = out
            .spots
            .iter()
            .zip(out.features)
            .zip(&d.spot_predictions)
            .map(|((s, features), p)| SpotReport {
                label: s.label,
                bbox: s.aabb(),
                class: p.predicted_class,
                probabilities: ClassScores { leafblast: p.probabilities[0], brownspot: p.probabilities[1] },
                features,
            })
            .collect();
        DiagnosisResponse {
            image_id: d.image_id,
            final_class: d.final_class,
            class_slug: d.final_class.slug(),
            confidence: d.confidence,
            spot_count: d.spot_predictions.len(),
            votes: VoteCounts { leafblast: d.votes[0], brownspot: d.votes[1] },
            spots,
            timings: out.timings,
        }
    }
}

fn multipart_error(state: &AppState, locale: &str, e: MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        state.error(StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge", locale, e.body_text())
    } else {
        state.error(StatusCode::BAD_REQUEST, "BadRequest", locale, e.body_text())
    }
}

/// Multipart upload; the file goes in a field named `image` (or the first
/// field carrying a file name).
async fn diagnose(
    State(state): State<Shared>,
    UrlQuery(params): UrlQuery<LocaleParam>,
    headers: HeaderMap,
    mut form: Multipart,
) -> Result<Json<DiagnosisResponse>, ApiError> {
    let locale = state.locale(params.locale.as_deref(), &headers);
    let mut upload = None;
    while let Some(field) = form.next_field().await.map_err(|e| multipart_error(&state, &locale, e))? {
        if field.name() == Some("image") || (upload.is_none() && field.file_name().is_some()) {
            let name = field.file_name().unwrap_or("upload").to_string();
            let bytes = field.bytes().await.map_err(|e| multipart_error(&state, &locale, e))?;
            upload = Some((name, bytes));
            break;
        }
    }
    let (name, bytes) =
        upload.ok_or_else(|| state.error(StatusCode::BAD_REQUEST, "MissingImage", &locale, "no image field"))?;
    if bytes.len() > MAX_UPLOAD_BYTES {
        return Err(state.error(StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge", &locale, format!("{} bytes", bytes.len())));
    }

    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || run_pipeline(&bytes, &name, &worker.analysis, &worker.model))
        .await
        .map_err(|e| state.error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", &locale, e))?;
    match result {
        Ok(out) => Ok(Json(DiagnosisResponse::from_output(out))),
        Err(e @ PipelineError::Undiagnosable { .. }) => {
            Err(state.error(StatusCode::UNPROCESSABLE_ENTITY, "Undiagnosable", &locale, e))
        }
        Err(PipelineError::Decode(e @ ImagingError::UnsupportedFormat(_))) => {
            Err(state.error(StatusCode::BAD_REQUEST, "UnsupportedFormat", &locale, e))
        }
        Err(PipelineError::Decode(e)) => Err(state.error(StatusCode::BAD_REQUEST, "DecodeError", &locale, e)),
        Err(e) => Err(state.error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", &locale, e)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IconView {
    pub id: String,
    pub label: String,
    pub icon_url: String,
    pub is_leaf: bool,
}

fn icon_view(n: &IconNode, locale: &str) -> IconView {
    IconView {
        id: n.id.clone(),
        label: n.label(locale).unwrap_or(&n.id).to_string(),
        icon_url: format!("/assets/{}", n.icon.trim_start_matches('/')),
        is_leaf: n.is_leaf(),
    }
}

async fn icon_roots(
    State(state): State<Shared>,
    UrlQuery(params): UrlQuery<LocaleParam>,
    headers: HeaderMap,
) -> Result<Json<Vec<IconView>>, ApiError> {
    children_of(&state, ROOT_ID, &state.locale(params.locale.as_deref(), &headers))
}

async fn icon_children(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    UrlQuery(params): UrlQuery<LocaleParam>,
    headers: HeaderMap,
) -> Result<Json<Vec<IconView>>, ApiError> {
    children_of(&state, &id, &state.locale(params.locale.as_deref(), &headers))
}

fn children_of(state: &AppState, id: &str, locale: &str) -> Result<Json<Vec<IconView>>, ApiError> {
    match state.taxonomy.children(id) {
        Ok(nodes) => Ok(Json(nodes.iter().map(|n| icon_view(n, locale)).collect())),
        Err(e) => Err(state.error(StatusCode::NOT_FOUND, "UnknownNode", locale, e)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryRequest {
    pub path: Vec<String>,
    pub locale: Option<String>,
}

async fn query(
    State(state): State<Shared>,
    headers: HeaderMap,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<Retrieved>, ApiError> {
    let Json(req) = body.map_err(|e| {
        let locale = state.locale(None, &headers);
        state.error(StatusCode::BAD_REQUEST, "BadRequest", &locale, e.body_text())
    })?;
    let locale = state.locale(req.locale.as_deref(), &headers);
    let q = state
        .taxonomy
        .build_query(&QueryPath { node_ids: req.path })
        .map_err(|e| state.error(StatusCode::BAD_REQUEST, "InvalidPath", &locale, e))?;
    match state.kb.retrieve(&q, &locale) {
        Ok(r) => Ok(Json(r)),
        Err(e @ IconQueryError::NotFound(_)) => Err(state.error(StatusCode::NOT_FOUND, "NotFound", &locale, e)),
        Err(e) => Err(state.error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", &locale, e)),
    }
}

async fn faq(
    State(state): State<Shared>,
    UrlQuery(params): UrlQuery<LocaleParam>,
    headers: HeaderMap,
) -> Json<Vec<LocalizedFaq>> {
    Json(state.faq.list(&state.locale(params.locale.as_deref(), &headers)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub name: &'static str,
    pub version: &'static str,
    pub model: ModelInfo,
    pub taxonomy_nodes: usize,
    pub kb_entries: usize,
}

async fn health(State(state): State<Shared>) -> Json<Health> {
    Json(Health {
        status: "ok",
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        model: state.model_info.clone(),
        taxonomy_nodes: state.taxonomy.len(),
        kb_entries: state.kb.entries().len(),
    })
}
