//! Tool cards and the plug-and-play registry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::tool::ToolBackend;

pub const DEFAULT_CARDS_JSON: &str = include_str!("../cards/default.json");

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate tool: {0}")]
    DuplicateTool(String),
    #[error("invalid card {name}: {reason}")]
    InvalidCard { name: String, reason: String },
    #[error("invalid card file{}: {message}", location(.line, .column, .field))]
    InvalidCardFile {
        line: Option<usize>,
        column: Option<usize>,
        field: Option<String>,
        message: String,
    },
    #[error("no card for backend {0}")]
    NoSuchCard(String),
    #[error("registry is sealed; registration is closed")]
    Sealed,
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn location(line: &Option<usize>, column: &Option<usize>, field: &Option<String>) -> String {
    let mut s = String::new();
    if let Some(l) = line {
        s.push_str(&format!(" at line {l}"));
        if let Some(c) = column {
            s.push_str(&format!(" column {c}"));
        }
    }
    if let Some(f) = field {
        s.push_str(&format!(" (field `{f}`)"));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    Temporal,
    Spatial,
    Both,
    General,
}

impl ToolCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToolCategory::Temporal => "temporal",
            ToolCategory::Spatial => "spatial",
            ToolCategory::Both => "both",
            ToolCategory::General => "general",
        }
    }

    pub const ALL: [ToolCategory; 4] =
        [ToolCategory::Temporal, ToolCategory::Spatial, ToolCategory::Both, ToolCategory::General];
}

impl fmt::Display for ToolCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Text,
    Label,
    Frame,
    Frames,
    Span,
    Bbox,
    Bboxes,
    Variant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputType {
    Span,
    FrameSelection,
    Text,
    FrameTexts,
    Detections,
    OcrTexts,
    Count,
    Crop,
    Marks,
    Labels,
    Regions,
    Answer,
    Canned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostHint {
    Cheap,
    ModelBacked,
    LlmBacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramesScope {
    SingleFrame,
    FrameSet,
    Segment,
    WholeVideo,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolCard {
    pub name: String,
    pub category: ToolCategory,
    pub description: String,
    pub input_schema: Vec<ParamSpec>,
    pub output_schema: OutputType,
    pub cost_hint: CostHint,
    pub frames_scope: FramesScope,
}

fn is_frame(v: &Value) -> bool {
    v.as_u64().is_some()
}

fn is_bbox(v: &Value) -> bool {
    v.as_array()
        .is_some_and(|a| a.len() == 4 && a.iter().all(|x| x.as_f64().is_some()))
}

fn is_span(v: &Value) -> bool {
    v.as_array().is_some_and(|a| {
        a.len() == 2 && a.iter().all(|x| x.as_i64().is_some())
    })
}

impl ParamType {
    pub fn accepts(&self, v: &Value) -> bool {
        match self {
            ParamType::Text | ParamType::Label | ParamType::Variant => v.is_string(),
            ParamType::Frame => is_frame(v),
            ParamType::Frames => v.as_array().is_some_and(|a| a.iter().all(is_frame)),
            // Signed so out-of-range spans reach the tool and fail there.
            ParamType::Span => is_span(v),
            ParamType::Bbox => is_bbox(v),
            ParamType::Bboxes => v.as_array().is_some_and(|a| a.iter().all(is_bbox)),
        }
    }
}

impl ToolCard {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let bad = |reason: &str| RegistryError::InvalidCard { name: self.name.clone(), reason: reason.to_string() };
        if self.name.trim().is_empty() {
            return Err(bad("empty name"));
        }
        if self.input_schema.is_empty() {
            return Err(bad("empty input_schema"));
        }
        let mut names = BTreeSet::new();
        for p in &self.input_schema {
            if p.name.trim().is_empty() || !names.insert(p.name.as_str()) {
                return Err(bad(&format!("parameter name `{}` empty or repeated", p.name)));
            }
        }
        Ok(())
    }

    /// Checks tool arguments against the input schema.
    pub fn validate_args(&self, args: &Value) -> Result<(), String> {
        let obj = match args {
            Value::Object(m) => m,
            Value::Null => &serde_json::Map::new(),
            _ => return Err("arguments must be a JSON object".to_string()),
        };
        for key in obj.keys() {
            if !self.input_schema.iter().any(|p| &p.name == key) {
                return Err(format!("unknown parameter `{key}`"));
            }
        }
        for p in &self.input_schema {
            match obj.get(&p.name) {
                None if p.required => return Err(format!("missing required parameter `{}`", p.name)),
                None => {}
                Some(v) if !p.ty.accepts(v) => {
                    return Err(format!("parameter `{}` is not a valid {:?}", p.name, p.ty))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Checks a result payload against the output schema.
    pub fn validate_output(&self, payload: &Value) -> Result<(), String> {
        let obj = payload.as_object().ok_or("payload must be a JSON object")?;
        let field = |name: &str| obj.get(name).ok_or_else(|| format!("missing `{name}`"));
        let per_frame = |inner: &str, check: &dyn Fn(&Value) -> bool| -> Result<(), String> {
            let frames = field("frames")?.as_array().ok_or("`frames` must be a list")?;
            for f in frames {
                if !f.get("frame").is_some_and(is_frame) {
                    return Err("entry without `frame`".into());
                }
                if !f.get(inner).is_some_and(check) {
                    return Err(format!("entry without valid `{inner}`"));
                }
            }
            Ok(())
        };
        match self.output_schema {
            OutputType::Span => is_span(field("span")?).then_some(()).ok_or("`span` malformed".into()),
            OutputType::FrameSelection => field("frames")?
                .as_array()
                .filter(|a| a.iter().all(is_frame))
                .map(|_| ())
                .ok_or("`frames` must list frame indices".into()),
            OutputType::Text => field("text")?.is_string().then_some(()).ok_or("`text` must be a string".into()),
            OutputType::FrameTexts => per_frame("text", &|v| v.is_string()),
            OutputType::Detections => per_frame("boxes", &|v| v.as_array().is_some_and(|a| a.iter().all(is_bbox))),
            OutputType::OcrTexts => per_frame("texts", &|v| {
                v.as_array().is_some_and(|a| {
                    a.iter().all(|t| t.get("content").is_some_and(Value::is_string) && t.get("bbox").is_some_and(is_bbox))
                })
            }),
            OutputType::Count => field("count")?.as_u64().map(|_| ()).ok_or("`count` must be a non-negative integer".into()),
            OutputType::Crop => {
                if !field("frame").is_ok_and(is_frame) || !field("crop").is_ok_and(is_bbox) {
                    return Err("crop needs `frame` and `crop`".into());
                }
                Ok(())
            }
            OutputType::Marks => {
                let marks = field("marks")?.as_array().ok_or("`marks` must be a list")?;
                if marks.iter().all(|m| m.get("mark").is_some_and(is_frame) && m.get("bbox").is_some_and(is_bbox)) {
                    Ok(())
                } else {
                    Err("malformed mark".into())
                }
            }
            OutputType::Labels => field("labels")?
                .as_array()
                .filter(|a| a.iter().all(Value::is_string))
                .map(|_| ())
                .ok_or("`labels` must be a list of strings".into()),
            OutputType::Regions => per_frame("regions", &|v| {
                v.as_array().is_some_and(|a| {
                    a.iter().all(|r| r.get("label").is_some_and(Value::is_string) && r.get("bbox").is_some_and(is_bbox))
                })
            }),
            OutputType::Answer => field("answer")?.is_string().then_some(()).ok_or("`answer` must be a string".into()),
            OutputType::Canned => field("result").map(|_| ()),
        }
    }
}

/// Name sets the scheduler draws from. Both-category tools sit
/// in both `temporal` and `spatial`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Toolsets {
    pub temporal: BTreeSet<String>,
    pub spatial: BTreeSet<String>,
    pub general: BTreeSet<String>,
}

impl Toolsets {
    pub fn non_general(&self) -> BTreeSet<String> {
        self.temporal.union(&self.spatial).cloned().collect()
    }
}

#[derive(Clone, Default)]
pub struct ToolRegistry {
    cards: BTreeMap<String, ToolCard>,
    backends: BTreeMap<String, Arc<dyn ToolBackend>>,
    sealed: bool,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolRegistry")
            .field("cards", &self.cards.keys().collect::<Vec<_>>())
            .field("backends", &self.backends.keys().collect::<Vec<_>>())
            .field("sealed", &self.sealed)
            .finish()
    }
}

impl PartialEq for ToolRegistry {
    /// Cards and backend bindings by name; backend identity is not compared.
    fn eq(&self, other: &Self) -> bool {
        self.cards == other.cards
            && self.backends.keys().eq(other.backends.keys())
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a card with its in-process backend.
    pub fn register(&mut self, card: ToolCard, backend: Arc<dyn ToolBackend>) -> Result<(), RegistryError> {
        let name = card.name.clone();
        self.add_card(card)?;
        self.backends.insert(name, backend);
        Ok(())
    }

    /// Registers a card with no in-process backend (remote-capable).
    pub fn add_card(&mut self, card: ToolCard) -> Result<(), RegistryError> {
        if self.sealed {
            return Err(RegistryError::Sealed);
        }
        card.validate()?;
        if self.cards.contains_key(&card.name) {
            return Err(RegistryError::DuplicateTool(card.name));
        }
        self.cards.insert(card.name.clone(), card);
        Ok(())
    }

    /// Binds or replaces the backend for an existing card.
    pub fn bind(&mut self, name: &str, backend: Arc<dyn ToolBackend>) -> Result<(), RegistryError> {
        if self.sealed {
            return Err(RegistryError::Sealed);
        }
        if !self.cards.contains_key(name) {
            return Err(RegistryError::NoSuchCard(name.to_string()));
        }
        self.backends.insert(name.to_string(), backend);
        Ok(())
    }

    pub fn bind_all(&mut self, backend: Arc<dyn ToolBackend>) -> Result<(), RegistryError> {
        let names: Vec<String> = self.cards.keys().cloned().collect();
        for n in names {
            self.bind(&n, backend.clone())?;
        }
        Ok(())
    }

    /// Closes registration. Episodes run against sealed registries.
    pub fn seal(mut self) -> Self {
        self.sealed = true;
        self
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn card(&self, name: &str) -> Option<&ToolCard> {
        self.cards.get(name)
    }

    pub fn backend(&self, name: &str) -> Option<&Arc<dyn ToolBackend>> {
        self.backends.get(name)
    }

    pub fn is_remote_capable(&self, name: &str) -> bool {
        self.cards.contains_key(name) && !self.backends.contains_key(name)
    }

    pub fn cards(&self) -> impl Iterator<Item = &ToolCard> {
        self.cards.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.cards.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn list_by_category(&self, cat: ToolCategory) -> Vec<&ToolCard> {
        self.cards.values().filter(|c| c.category == cat).collect()
    }

    pub fn toolsets(&self) -> Toolsets {
        let mut t = Toolsets::default();
        for c in self.cards.values() {
            match c.category {
                ToolCategory::Temporal => {
                    t.temporal.insert(c.name.clone());
                }
                ToolCategory::Spatial => {
                    t.spatial.insert(c.name.clone());
                }
                ToolCategory::Both => {
                    t.temporal.insert(c.name.clone());
                    t.spatial.insert(c.name.clone());
                }
                ToolCategory::General => {
                    t.general.insert(c.name.clone());
                }
            }
        }
        t
    }

    /// A copy with the named tools removed (cards and backends).
    pub fn without(&self, names: &[String]) -> Result<ToolRegistry, RegistryError> {
        let mut out = self.clone();
        for n in names {
            if out.cards.remove(n).is_none() {
                return Err(RegistryError::UnknownTool(n.clone()));
            }
            out.backends.remove(n);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let cards: Vec<&ToolCard> = self.cards.values().collect();
        serde_json::to_string_pretty(&cards).expect("cards serialize")
    }

    /// Parses a card file: a JSON array of card objects.
    pub fn from_json(text: &str) -> Result<ToolRegistry, RegistryError> {
        if text.trim().is_empty() {
            return Err(RegistryError::InvalidCardFile {
                line: Some(1),
                column: None,
                field: None,
                message: "file is empty".to_string(),
            });
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let cards: Vec<ToolCard> = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            RegistryError::InvalidCardFile {
                line: Some(inner.line()),
                column: Some(inner.column()),
                field: (path != ".").then_some(path),
                message: inner.to_string(),
            }
        })?;
        let mut reg = ToolRegistry::new();
        for c in cards {
            reg.add_card(c).map_err(|e| RegistryError::InvalidCardFile {
                line: None,
                column: None,
                field: None,
                message: e.to_string(),
            })?;
        }
        Ok(reg)
    }

    /// Loads cards from disk; every tool starts remote-capable until a
    /// backend is bound.
    pub fn load_cards(path: &Path) -> Result<ToolRegistry, RegistryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| RegistryError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// The bundled 22-card toolkit.
    pub fn default_cards() -> ToolRegistry {
        Self::from_json(DEFAULT_CARDS_JSON).expect("bundled cards are valid")
    }
}
