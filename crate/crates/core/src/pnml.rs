//! PNML reading and writing, with `xnet` tool-specific extensions.
//!
//! Standard PNML (place/transition net type) carries places, transitions,
//! arcs, arc inscriptions and initial markings. Everything this engine adds
//! lives in a `<toolspecific tool="xnet" version="1.0">` child of the element
//! it extends:
//!
//! | element          | parent     | content                                          |
//! |------------------|------------|--------------------------------------------------|
//! | `placeKind`      | place      | `plain`, `external-input` or `external-output`   |
//! | `mergeGroup`     | place      | group label; marks the place as a merge place    |
//! | `transitionKind` | transition | `immediate`, `timed` or `external`               |
//! | `delay`          | transition | non-negative integer ticks (timed only)          |
//! | `hook`           | transition | callback name (external only)                    |
//!
//! A transition's `<name>` is kept as its label. Pages are flattened, and
//! graphics and other tools' extensions are skipped. `docs/pnml-extensions.md`
//! at the repository root has a full example.

use std::fmt::Write as _;

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::petri::{
    merge_marked, Arc, Marking, NetError, NodeId, PetriNet, Place, PlaceKind, Transition, TransitionKind,
};

pub const PNML_NAMESPACE: &str = "http://www.pnml.org/version-2009/grammar/pnml";
pub const PTNET_TYPE: &str = "http://www.pnml.org/version-2009/grammar/ptnet";
pub const TOOL_NAME: &str = "xnet";
pub const TOOL_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDocument {
    pub id: String,
    pub name: Option<String>,
    pub net: PetriNet,
    pub initial_marking: Marking,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmlDocument {
    pub source_name: String,
    pub nets: Vec<NetDocument>,
}

impl PnmlDocument {
    pub fn single(id: impl Into<String>, net: PetriNet, initial_marking: Marking) -> Self {
        PnmlDocument {
            source_name: String::from("<memory>"),
            nets: vec![NetDocument { id: id.into(), name: None, net, initial_marking }],
        }
    }

    /// Same nets and markings; the source name is ignored.
    pub fn structurally_eq(&self, other: &PnmlDocument) -> bool {
        self.nets == other.nets
    }

    /// Collapses every net of the document (merging merge places) into one
    /// executable net with its initial marking.
    pub fn executable(&self) -> Result<(PetriNet, Marking), NetError> {
        let parts: Vec<_> = self.nets.iter().map(|n| (n.net.clone(), n.initial_marking.clone())).collect();
        merge_marked(&parts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PnmlError {
    #[error("document is not UTF-8: {0}")]
    Encoding(String),
    #[error("malformed XML at {at}: {message}")]
    Xml { message: String, at: Position },
    #[error("expected root element <pnml>, found <{found}>")]
    NotPnml { found: String },
    #[error("unknown extension element <{element}> at {at}")]
    UnknownExtension { element: String, at: Position },
    #[error("<{element}> at {at} is missing {what}")]
    Missing { element: String, what: String, at: Position },
    #[error("invalid {what} `{value}` at {at}")]
    InvalidValue { what: String, value: String, at: Position },
    #[error("net `{net}` is invalid: {source}")]
    Validation { net: String, source: NetError },
}

fn pos(node: Node<'_, '_>) -> Position {
    let p = node.document().text_pos_at(node.range().start);
    Position { line: p.row, column: p.col }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

/// Text of `<name><text>..</text></name>` style labels.
fn text_label(node: Node<'_, '_>, name: &str) -> Option<String> {
    child(node, name).and_then(|n| child(n, "text")).map(|t| t.text().unwrap_or("").trim().to_owned())
}

fn required_attr<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, PnmlError> {
    node.attribute(attr).ok_or_else(|| PnmlError::Missing {
        element: node.tag_name().name().to_owned(),
        what: format!("attribute `{attr}`"),
        at: pos(node),
    })
}

fn parse_number<T: std::str::FromStr>(node: Node<'_, '_>, what: &str, raw: &str) -> Result<T, PnmlError> {
    raw.trim().parse().map_err(|_| PnmlError::InvalidValue {
        what: what.to_owned(),
        value: raw.trim().to_owned(),
        at: pos(node),
    })
}

/// Our tool-specific children of `node`, as (element, text) pairs.
fn extensions<'a, 'i>(node: Node<'a, 'i>) -> Vec<(Node<'a, 'i>, String)> {
    node.children()
        .filter(|c| c.is_element() && c.tag_name().name() == "toolspecific" && c.attribute("tool") == Some(TOOL_NAME))
        .flat_map(|ts| ts.children().filter(Node::is_element))
        .map(|e| (e, e.text().unwrap_or("").trim().to_owned()))
        .collect()
}

#[derive(Default)]
struct RawNet<'a, 'i> {
    places: Vec<(Place, u64)>,
    transitions: Vec<Transition>,
    arcs: Vec<(Node<'a, 'i>, String, String, u32)>,
}

fn collect<'a, 'i>(container: Node<'a, 'i>, raw: &mut RawNet<'a, 'i>) -> Result<(), PnmlError> {
    for node in container.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "page" => collect(node, raw)?,
            "place" => raw.places.push(parse_place(node)?),
            "transition" => raw.transitions.push(parse_transition(node)?),
            "arc" => {
                let source = required_attr(node, "source")?.to_owned();
                let target = required_attr(node, "target")?.to_owned();
                let weight = match text_label(node, "inscription") {
                    Some(w) => parse_number(node, "arc inscription", &w)?,
                    None => 1,
                };
                raw.arcs.push((node, source, target, weight));
            }
            _ => {}
        }
    }
    Ok(())
}

fn parse_place(node: Node<'_, '_>) -> Result<(Place, u64), PnmlError> {
    let id = required_attr(node, "id")?;
    let tokens = match text_label(node, "initialMarking") {
        Some(t) => parse_number(node, "initial marking", &t)?,
        None => 0,
    };
    let mut kind = PlaceKind::Plain;
    let mut group = None;
    for (ext, text) in extensions(node) {
        match ext.tag_name().name() {
            "placeKind" => {
                kind = text.parse().map_err(|_| PnmlError::InvalidValue {
                    what: "place kind".into(),
                    value: text.clone(),
                    at: pos(ext),
                })?
            }
            "mergeGroup" => group = Some(text),
            other => return Err(PnmlError::UnknownExtension { element: other.to_owned(), at: pos(ext) }),
        }
    }
    Ok((Place { id: id.into(), kind, merge_group: group }, tokens))
}

fn parse_transition(node: Node<'_, '_>) -> Result<Transition, PnmlError> {
    let id = required_attr(node, "id")?;
    let label = text_label(node, "name");
    let mut kind_name: Option<(Node<'_, '_>, String)> = None;
    let mut delay = None;
    let mut hook = None;
    for (ext, text) in extensions(node) {
        match ext.tag_name().name() {
            "transitionKind" => kind_name = Some((ext, text)),
            "delay" => delay = Some(parse_number::<u64>(ext, "delay", &text)?),
            "hook" => hook = Some(text),
            other => return Err(PnmlError::UnknownExtension { element: other.to_owned(), at: pos(ext) }),
        }
    }
    let missing =
        |what: &str| PnmlError::Missing { element: "transition".into(), what: what.to_owned(), at: pos(node) };
    let kind = match kind_name.as_ref().map(|(n, k)| (*n, k.as_str())) {
        None | Some((_, "immediate")) => TransitionKind::Immediate,
        Some((_, "timed")) => TransitionKind::Timed { delay: delay.ok_or_else(|| missing("a <delay> extension"))? },
        Some((_, "external")) => TransitionKind::External { hook: hook.ok_or_else(|| missing("a <hook> extension"))? },
        Some((n, other)) => {
            return Err(PnmlError::InvalidValue { what: "transition kind".into(), value: other.into(), at: pos(n) })
        }
    };
    Ok(Transition { id: id.into(), label, kind })
}

fn parse_net(node: Node<'_, '_>) -> Result<NetDocument, PnmlError> {
    let id = required_attr(node, "id")?.to_owned();
    let name = text_label(node, "name");
    let mut raw = RawNet::default();
    collect(node, &mut raw)?;

    let validation = |source| PnmlError::Validation { net: id.clone(), source };
    let place_ids: std::collections::HashSet<&str> = raw.places.iter().map(|(p, _)| p.id.as_str()).collect();
    let transition_ids: std::collections::HashSet<&str> = raw.transitions.iter().map(|t| t.id.as_str()).collect();
    let mut arcs = Vec::with_capacity(raw.arcs.len());
    for (_, source, target, weight) in &raw.arcs {
        let resolve = |id: &str| {
            if place_ids.contains(id) {
                Ok(NodeId::Place(id.into()))
            } else if transition_ids.contains(id) {
                Ok(NodeId::Transition(id.into()))
            } else {
                Err(validation(NetError::UnknownNode(id.to_owned())))
            }
        };
        arcs.push(Arc { source: resolve(source)?, target: resolve(target)?, weight: *weight });
    }
    let counts: Vec<(String, u64)> = raw.places.iter().map(|(p, n)| (p.id.to_string(), *n)).collect();
    let net = PetriNet::new(raw.places.into_iter().map(|(p, _)| p), raw.transitions, arcs).map_err(validation)?;
    let initial_marking =
        Marking::from_counts(&net, counts.iter().map(|(p, n)| (p.as_str(), *n))).map_err(validation)?;
    Ok(NetDocument { id, name, net, initial_marking })
}

/// Parses a PNML document. Every failure carries a diagnostic; a net that
/// comes back is structurally valid.
pub fn parse_pnml(bytes: &[u8]) -> Result<PnmlDocument, PnmlError> {
    parse_pnml_named(bytes, "<memory>")
}

pub fn parse_pnml_named(bytes: &[u8], source_name: &str) -> Result<PnmlDocument, PnmlError> {
    let text = std::str::from_utf8(bytes).map_err(|e| PnmlError::Encoding(e.to_string()))?;
    let doc = Document::parse(text).map_err(|e| {
        let p = e.pos();
        PnmlError::Xml { message: e.to_string(), at: Position { line: p.row, column: p.col } }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "pnml" {
        return Err(PnmlError::NotPnml { found: root.tag_name().name().to_owned() });
    }
    let nets = root
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "net")
        .map(parse_net)
        .collect::<Result<_, _>>()?;
    Ok(PnmlDocument { source_name: source_name.to_owned(), nets })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn push_toolspecific(body: &mut String, ext: &str) {
    if !ext.is_empty() {
        let _ = writeln!(body, "        <toolspecific tool=\"{TOOL_NAME}\" version=\"{TOOL_VERSION}\">");
        body.push_str(ext);
        body.push_str("        </toolspecific>\n");
    }
}

/// Writes `<tag id=..>body</tag>`, self-closing when the body is empty.
fn push_element(out: &mut String, tag: &str, id: &str, body: &str) {
    if body.is_empty() {
        let _ = writeln!(out, "      <{tag} id=\"{}\"/>", escape(id));
    } else {
        let _ = writeln!(out, "      <{tag} id=\"{}\">", escape(id));
        out.push_str(body);
        let _ = writeln!(out, "      </{tag}>");
    }
}

fn write_net(out: &mut String, nd: &NetDocument) {
    let _ = writeln!(out, "  <net id=\"{}\" type=\"{PTNET_TYPE}\">", escape(&nd.id));
    if let Some(name) = &nd.name {
        let _ = writeln!(out, "    <name><text>{}</text></name>", escape(name));
    }
    let _ = writeln!(out, "    <page id=\"{}-page\">", escape(&nd.id));
    for p in nd.net.places() {
        let mut body = String::new();
        let tokens = nd.initial_marking.get(p.id.as_str());
        if tokens > 0 {
            let _ = writeln!(body, "        <initialMarking><text>{tokens}</text></initialMarking>");
        }
        let mut ext = String::new();
        if p.kind != PlaceKind::Plain {
            let _ = writeln!(ext, "          <placeKind>{}</placeKind>", p.kind.as_str());
        }
        if let Some(g) = &p.merge_group {
            let _ = writeln!(ext, "          <mergeGroup>{}</mergeGroup>", escape(g));
        }
        push_toolspecific(&mut body, &ext);
        push_element(out, "place", p.id.as_str(), &body);
    }
    for t in nd.net.transitions() {
        let mut body = String::new();
        if let Some(label) = &t.label {
            let _ = writeln!(body, "        <name><text>{}</text></name>", escape(label));
        }
        let ext = match &t.kind {
            TransitionKind::Immediate => String::new(),
            TransitionKind::Timed { delay } => {
                format!("          <transitionKind>timed</transitionKind>\n          <delay>{delay}</delay>\n")
            }
            TransitionKind::External { hook } => format!(
                "          <transitionKind>external</transitionKind>\n          <hook>{}</hook>\n",
                escape(hook)
            ),
        };
        push_toolspecific(&mut body, &ext);
        push_element(out, "transition", t.id.as_str(), &body);
    }
    for (i, arc) in nd.net.arcs().iter().enumerate() {
        let _ = write!(
            out,
            "      <arc id=\"{}-a{i}\" source=\"{}\" target=\"{}\"",
            escape(&nd.id),
            escape(arc.source.as_str()),
            escape(arc.target.as_str())
        );
        if arc.weight == 1 {
            out.push_str("/>\n");
        } else {
            let _ = writeln!(out, ">\n        <inscription><text>{}</text></inscription>\n      </arc>", arc.weight);
        }
    }
    out.push_str("    </page>\n  </net>\n");
}

/// Serializes a document. Output is deterministic: elements appear sorted by
/// id, so equal documents serialize to identical bytes.
pub fn serialize_pnml(doc: &PnmlDocument) -> Vec<u8> {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<pnml xmlns=\"{PNML_NAMESPACE}\">");
    for nd in &doc.nets {
        write_net(&mut out, nd);
    }
    out.push_str("</pnml>\n");
    out.into_bytes()
}
