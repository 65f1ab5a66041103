//! Icon taxonomy, icon-path queries and localized knowledge-base lookup.
//!
//! The taxonomy file is a flat JSON node list so that cycles and dangling
//! references can be reported by id:
//!
//! ```json
//! { "roots": ["rice"],
//!   "nodes": [ { "id": "rice", "icon": "icons/rice.svg",
//!                "labels": { "en": "Rice" }, "children": ["disease"] }, ... ] }
//! ```
//!
//! A query is the sequence of node ids from a root to the selected node, and
//! a knowledge entry answers exactly one such sequence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LOCALE: &str = "en";
/// Pseudo id whose children are the taxonomy roots.
pub const ROOT_ID: &str = "root";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IconQueryError {
    #[error("malformed {what}: {msg}")]
    Parse { what: &'static str, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("duplicate id {0:?}")]
    DuplicateNode(String),
    #[error("node {parent:?} lists unknown child {child:?}")]
    DanglingChild { parent: String, child: String },
    #[error("cycle through node {0:?}")]
    CycleDetected(String),
    #[error("node {0:?} is reachable from more than one parent")]
    MultipleParents(String),
    #[error("node {0:?} is not reachable from any root")]
    Unreachable(String),
    #[error("leaf {0:?} has no entry")]
    LeafWithoutEntry(String),
    #[error("inner node {0:?} carries an entry")]
    EntryOnInnerNode(String),
    #[error("{what} {id:?} lacks the default locale")]
    MissingDefaultLocale { what: &'static str, id: String },
    #[error("duplicate topic keys {0:?}")]
    DuplicateTopic(Vec<String>),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("no entry for {0:?}")]
    NotFound(Vec<String>),
    #[error("leaf {node:?} points at entry {expected:?} but its path resolves to {found:?}")]
    EntryMismatch { node: String, expected: String, found: String },
}

fn parse<T: for<'de> Deserialize<'de>>(what: &'static str, text: &str) -> Result<T, IconQueryError> {
    serde_json::from_str(text).map_err(|e| IconQueryError::Parse { what, msg: e.to_string() })
}

fn read(path: &Path) -> Result<String, IconQueryError> {
    std::fs::read_to_string(path).map_err(|e| IconQueryError::Io(format!("{}: {e}", path.display())))
}

/// Value for `locale`, or the default-locale value with `fallback = true`.
fn localize<'a>(map: &'a BTreeMap<String, String>, locale: &str) -> Option<(&'a str, &'a str, bool)> {
    if let Some((k, v)) = map.get_key_value(locale) {
        return Some((k, v, false));
    }
    map.get_key_value(DEFAULT_LOCALE).map(|(k, v)| (k.as_str(), v.as_str(), true))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconNode {
    pub id: String,
    /// Asset path relative to the taxonomy file.
    pub icon: String,
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
}

impl IconNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn label(&self, locale: &str) -> Option<&str> {
        localize(&self.labels, locale).map(|(_, v, _)| v)
    }
}

#[derive(Deserialize)]
struct TaxonomyFile {
    roots: Vec<String>,
    nodes: Vec<IconNode>,
}

/// A validated icon tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    roots: Vec<String>,
    nodes: Vec<IconNode>,
    index: HashMap<String, usize>,
    parent: HashMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPath {
    pub node_ids: Vec<String>,
}

impl QueryPath {
    pub fn new<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        QueryPath { node_ids: ids.into_iter().map(Into::into).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Query {
    pub topic_keys: Vec<String>,
}

impl Taxonomy {
    pub fn from_json(text: &str) -> Result<Self, IconQueryError> {
        let file: TaxonomyFile = parse("taxonomy", text)?;
        Self::new(file.roots, file.nodes)
    }

    pub fn load(path: &Path) -> Result<Self, IconQueryError> {
        Self::from_json(&read(path)?)
    }

    /// Checks, in order: unique ids, resolvable children, no cycles, one parent
    /// per node, reachability, and entries exactly on leaves.
    pub fn new(roots: Vec<String>, nodes: Vec<IconNode>) -> Result<Self, IconQueryError> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.id == ROOT_ID || index.insert(n.id.clone(), i).is_some() {
                return Err(IconQueryError::DuplicateNode(n.id.clone()));
            }
            if !n.labels.contains_key(DEFAULT_LOCALE) {
                return Err(IconQueryError::MissingDefaultLocale { what: "node", id: n.id.clone() });
            }
        }
        for r in &roots {
            if !index.contains_key(r) {
                return Err(IconQueryError::DanglingChild { parent: ROOT_ID.into(), child: r.clone() });
            }
        }
        for n in &nodes {
            if let Some(c) = n.children.iter().find(|c| !index.contains_key(*c)) {
                return Err(IconQueryError::DanglingChild { parent: n.id.clone(), child: c.clone() });
            }
        }

        // iterative DFS with colors over every node, so unreachable cycles are found too
        let mut color = vec![0u8; nodes.len()];
        for start in 0..nodes.len() {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(c) = nodes[v].children.get(*next) {
                    *next += 1;
                    let u = index[c];
                    match color[u] {
                        0 => {
                            color[u] = 1;
                            stack.push((u, 0));
                        }
                        1 => return Err(IconQueryError::CycleDetected(c.clone())),
                        _ => {}
                    }
                } else {
                    color[v] = 2;
                    stack.pop();
                }
            }
        }

        let mut parent = HashMap::new();
        let mut seen_root = HashSet::new();
        for r in &roots {
            if !seen_root.insert(r.as_str()) {
                return Err(IconQueryError::MultipleParents(r.clone()));
            }
        }
        for n in &nodes {
            for c in &n.children {
                if seen_root.contains(c.as_str()) || parent.insert(c.clone(), n.id.clone()).is_some() {
                    return Err(IconQueryError::MultipleParents(c.clone()));
                }
            }
        }
        for n in &nodes {
            if !parent.contains_key(&n.id) && !seen_root.contains(n.id.as_str()) {
                return Err(IconQueryError::Unreachable(n.id.clone()));
            }
            match (n.is_leaf(), &n.entry) {
                (true, None) => return Err(IconQueryError::LeafWithoutEntry(n.id.clone())),
                (false, Some(_)) => return Err(IconQueryError::EntryOnInnerNode(n.id.clone())),
                _ => {}
            }
        }
        Ok(Taxonomy { roots, nodes, index, parent })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[IconNode] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Result<&IconNode, IconQueryError> {
        self.index.get(id).map(|&i| &self.nodes[i]).ok_or_else(|| IconQueryError::UnknownNode(id.to_string()))
    }

    pub fn roots(&self) -> Vec<&IconNode> {
        self.roots.iter().map(|r| &self.nodes[self.index[r]]).collect()
    }

    /// Children in authored order; [`ROOT_ID`] yields the roots.
    pub fn children(&self, id: &str) -> Result<Vec<&IconNode>, IconQueryError> {
        if id == ROOT_ID {
            return Ok(self.roots());
        }
        let n = self.node(id)?;
        Ok(n.children.iter().map(|c| &self.nodes[self.index[c]]).collect())
    }

    /// Path from a root down to `id`.
    pub fn path_to(&self, id: &str) -> Result<QueryPath, IconQueryError> {
        self.node(id)?;
        let mut ids = vec![id.to_string()];
        let mut cur = id;
        while let Some(p) = self.parent.get(cur) {
            ids.push(p.clone());
            cur = p;
        }
        ids.reverse();
        Ok(QueryPath { node_ids: ids })
    }

    pub fn leaves(&self) -> impl Iterator<Item = &IconNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Validates that the path starts at a root and follows parent-child edges.
    pub fn build_query(&self, path: &QueryPath) -> Result<Query, IconQueryError> {
        let ids = &path.node_ids;
        let first = ids.first().ok_or_else(|| IconQueryError::InvalidPath("empty path".into()))?;
        for id in ids {
            if !self.index.contains_key(id) {
                return Err(IconQueryError::InvalidPath(format!("unknown node {id:?}")));
            }
        }
        if !self.roots.contains(first) {
            return Err(IconQueryError::InvalidPath(format!("{first:?} is not a root")));
        }
        for w in ids.windows(2) {
            if self.parent.get(&w[1]) != Some(&w[0]) {
                return Err(IconQueryError::InvalidPath(format!("{:?} is not a child of {:?}", w[1], w[0])));
            }
        }
        Ok(Query { topic_keys: ids.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub id: String,
    pub topic_keys: Vec<String>,
    pub content: BTreeMap<String, String>,
    pub updated_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entries: Vec<KnowledgeEntry>,
    by_keys: HashMap<Vec<String>, usize>,
}

/// Localized answer for a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Retrieved {
    pub entry_id: String,
    pub topic_keys: Vec<String>,
    /// Locale actually served.
    pub locale: String,
    pub content: String,
    pub fallback: bool,
    pub updated_at: String,
}

impl KnowledgeBase {
    pub fn new(entries: Vec<KnowledgeEntry>) -> Result<Self, IconQueryError> {
        let mut ids = HashSet::new();
        let mut by_keys = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if !ids.insert(e.id.as_str()) {
                return Err(IconQueryError::DuplicateNode(e.id.clone()));
            }
            if !e.content.contains_key(DEFAULT_LOCALE) {
                return Err(IconQueryError::MissingDefaultLocale { what: "entry", id: e.id.clone() });
            }
            if by_keys.insert(e.topic_keys.clone(), i).is_some() {
                return Err(IconQueryError::DuplicateTopic(e.topic_keys.clone()));
            }
        }
        Ok(KnowledgeBase { entries, by_keys })
    }

    pub fn from_json(text: &str) -> Result<Self, IconQueryError> {
        Self::new(parse("knowledge base", text)?)
    }

    pub fn load(path: &Path) -> Result<Self, IconQueryError> {
        Self::from_json(&read(path)?)
    }

    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    /// Exact lookup on the full key sequence.
    pub fn retrieve(&self, query: &Query, locale: &str) -> Result<Retrieved, IconQueryError> {
        let e = self
            .by_keys
            .get(&query.topic_keys)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| IconQueryError::NotFound(query.topic_keys.clone()))?;
        let (served, content, fallback) = localize(&e.content, locale).expect("default locale checked at load");
        Ok(Retrieved {
            entry_id: e.id.clone(),
            topic_keys: e.topic_keys.clone(),
            locale: served.to_string(),
            content: content.to_string(),
            fallback,
            updated_at: e.updated_at.clone(),
        })
    }
}

/// Every leaf's path must retrieve the entry the leaf names.
pub fn lint(tax: &Taxonomy, kb: &KnowledgeBase) -> Vec<IconQueryError> {
    let mut problems = Vec::new();
    for leaf in tax.leaves() {
        let found = tax
            .path_to(&leaf.id)
            .and_then(|p| tax.build_query(&p))
            .and_then(|q| kb.retrieve(&q, DEFAULT_LOCALE));
        match found {
            Err(e) => problems.push(e),
            Ok(r) => {
                let expected = leaf.entry.clone().unwrap_or_default();
                if r.entry_id != expected {
                    problems.push(IconQueryError::EntryMismatch { node: leaf.id.clone(), expected, found: r.entry_id });
                }
            }
        }
    }
    problems
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaqItem {
    pub id: String,
    pub question: BTreeMap<String, String>,
    pub answer: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalizedFaq {
    pub id: String,
    pub question: String,
    pub answer: String,
    /// True if either field came from the default locale instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaqStore {
    items: Vec<FaqItem>,
}

impl FaqStore {
    pub fn new(items: Vec<FaqItem>) -> Result<Self, IconQueryError> {
        let mut ids = HashSet::new();
        for it in &items {
            if !ids.insert(it.id.as_str()) {
                return Err(IconQueryError::DuplicateNode(it.id.clone()));
            }
            if !it.question.contains_key(DEFAULT_LOCALE) || !it.answer.contains_key(DEFAULT_LOCALE) {
                return Err(IconQueryError::MissingDefaultLocale { what: "faq item", id: it.id.clone() });
            }
        }
        Ok(FaqStore { items })
    }

    pub fn from_json(text: &str) -> Result<Self, IconQueryError> {
        Self::new(parse("faq", text)?)
    }

    pub fn load(path: &Path) -> Result<Self, IconQueryError> {
        Self::from_json(&read(path)?)
    }

    pub fn list(&self, locale: &str) -> Vec<LocalizedFaq> {
        self.items
            .iter()
            .map(|it| {
                let (_, q, fq) = localize(&it.question, locale).expect("default locale checked at load");
                let (_, a, fa) = localize(&it.answer, locale).expect("default locale checked at load");
                LocalizedFaq { id: it.id.clone(), question: q.to_string(), answer: a.to_string(), fallback: fq || fa }
            })
            .collect()
    }
}

/// Localized strings keyed by message code, e.g. error texts:
/// `{ "NotFound": { "en": "...", "hi": "..." } }`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MessageCatalog {
    messages: BTreeMap<String, BTreeMap<String, String>>,
}

impl MessageCatalog {
    pub fn new(messages: BTreeMap<String, BTreeMap<String, String>>) -> Result<Self, IconQueryError> {
        if let Some(code) = messages.iter().find(|(_, m)| !m.contains_key(DEFAULT_LOCALE)).map(|(c, _)| c) {
            return Err(IconQueryError::MissingDefaultLocale { what: "message", id: code.clone() });
        }
        Ok(MessageCatalog { messages })
    }

    pub fn from_json(text: &str) -> Result<Self, IconQueryError> {
        Self::new(parse("messages", text)?)
    }

    pub fn load(path: &Path) -> Result<Self, IconQueryError> {
        Self::from_json(&read(path)?)
    }

    /// `(locale served, text)` with the usual default-locale fallback.
    pub fn get(&self, code: &str, locale: &str) -> Option<(&str, &str)> {
        localize(self.messages.get(code)?, locale).map(|(l, t, _)| (l, t))
    }
}
