//! Strict extraction of JSON answers from free-form backend text.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectedShape {
    /// An object whose values are all strings.
    CorefMap,
    /// An array of reaction objects, or an object with a `reactions` array.
    ReactionList,
    /// An object with a string `molecule`.
    Answer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub page: usize,
    /// Byte range into the document text.
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReaction {
    pub reactants: Vec<String>,
    pub catalyst: Option<String>,
    pub solvent: Option<String>,
    pub products: Vec<String>,
    pub yield_text: Option<String>,
    pub source_spans: Vec<SourceSpan>,
    /// Verbatim quote reported by the backend, used to locate spans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    CorefMap(BTreeMap<String, String>),
    Reactions(Vec<RawReaction>),
    Answer(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

fn yield_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^[<>≥≤~]?\s*\d{1,3}(?:\.\d+)?\s*%?\s*(?:[-–—]|to)\s*\d{1,3}(?:\.\d+)?\s*%$|^[<>≥≤~]?\s*\d{1,3}(?:\.\d+)?\s*%$",
        )
        .expect("valid yield pattern")
    })
}

/// True for a percentage ("93%") or a range ("85–90%", "85%-90%").
pub fn is_yield_text(text: &str) -> bool {
    yield_re().is_match(text.trim())
}

fn opt_string(v: Option<&Value>) -> Result<Option<String>, String> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.trim().to_string())),
        Some(other) => Err(format!("expected string or null, found {other}")),
    }
}

fn string_list(v: Option<&Value>) -> Result<Vec<String>, String> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::String(s)) => Ok(vec![s.trim().to_string()].into_iter().filter(|s| !s.is_empty()).collect()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| i.as_str().map(|s| s.trim().to_string()).ok_or_else(|| format!("expected string, found {i}")))
            .filter(|r| r.as_ref().map_or(true, |s| !s.is_empty()))
            .collect(),
        Some(other) => Err(format!("expected array of strings, found {other}")),
    }
}

fn reaction(v: &Value) -> Result<RawReaction, String> {
    let obj = v.as_object().ok_or("reaction must be an object")?;
    let products = string_list(obj.get("products").or_else(|| obj.get("product")))?;
    if products.is_empty() {
        return Err("reaction without products".into());
    }
    let yield_text = opt_string(obj.get("yield").or_else(|| obj.get("yield_text")))?;
    let yield_text = match yield_text {
        Some(y) if !is_yield_text(&y) => {
            log::debug!("dropping malformed yield {y:?}");
            None
        }
        other => other,
    };
    Ok(RawReaction {
        reactants: string_list(obj.get("reactants"))?,
        catalyst: opt_string(obj.get("catalyst"))?,
        solvent: opt_string(obj.get("solvent"))?,
        products,
        yield_text,
        source_spans: Vec::new(),
        evidence: opt_string(obj.get("evidence"))?,
    })
}

fn conform(value: &Value, shape: ExpectedShape) -> Result<Parsed, String> {
    match shape {
        ExpectedShape::CorefMap => {
            let obj = value.as_object().ok_or("expected a JSON object")?;
            obj.iter()
                .map(|(k, v)| {
                    v.as_str()
                        .map(|s| (k.trim().to_string(), s.trim().to_string()))
                        .ok_or_else(|| format!("value for {k:?} is not a string"))
                })
                .collect::<Result<_, _>>()
                .map(Parsed::CorefMap)
        }
        ExpectedShape::ReactionList => {
            let list = match value {
                Value::Array(a) => a,
                Value::Object(o) => o
                    .get("reactions")
                    .and_then(Value::as_array)
                    .ok_or("expected an array of reactions")?,
                _ => return Err("expected an array of reactions".into()),
            };
            list.iter().map(reaction).collect::<Result<_, _>>().map(Parsed::Reactions)
        }
        ExpectedShape::Answer => value
            .get("molecule")
            .and_then(Value::as_str)
            .map(|s| Parsed::Answer(s.trim().to_string()))
            .ok_or_else(|| "expected {\"molecule\": string}".into()),
    }
}

/// Byte offset of a 1-based line/column pair inside `text`.
fn offset_of(text: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + column.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    text.len()
}

/// Returns the first JSON value in `text` that conforms to `shape`.
///
/// Candidates start at every `{` or `[` outside an already parsed value.
/// Prose around them is ignored. When nothing conforms, the error points at
/// the first syntax or shape problem.
pub fn parse_backend_response(text: &str, shape: ExpectedShape) -> Result<Parsed, ParseError> {
    let mut first_error: Option<ParseError> = None;
    let mut start = 0;
    while let Some(found) = text[start..].find(['{', '[']) {
        start += found;
        let slice = &text[start..];
        let mut stream = serde_json::Deserializer::from_str(slice).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => match conform(&value, shape) {
                Ok(parsed) => return Ok(parsed),
                Err(message) => {
                    first_error.get_or_insert(ParseError { position: start, message });
                    // Values nested inside a rejected one are not candidates.
                    start += stream.byte_offset();
                    continue;
                }
            },
            Some(Err(e)) => {
                first_error.get_or_insert(ParseError {
                    position: start + offset_of(slice, e.line(), e.column()),
                    message: e.to_string(),
                });
            }
            None => {}
        }
        start += 1;
    }
    Err(first_error.unwrap_or(ParseError {
        position: 0,
        message: "no JSON value found".into(),
    }))
}
