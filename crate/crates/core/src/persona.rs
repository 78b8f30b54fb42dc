//! The six virtual viewers.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Default number of virtual viewers. The validator's rate bands assume it.
pub const PERSONA_COUNT: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub label: char,
    pub age: u32,
    pub region: String,
    pub personality: String,
    pub danmaku_sending_style: String,
    pub learning_habits: String,
    pub reasons_for_watching: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaSet {
    pub video_id: String,
    pub personas: Vec<Persona>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PersonaError {
    #[error("expected {expected} personas, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("persona {label} is missing field {field}")]
    MissingField { label: String, field: &'static str },
    #[error("persona {label} has invalid {field}: {reason}")]
    InvalidField { label: String, field: &'static str, reason: String },
    #[error("unexpected persona label {0:?}")]
    BadLabel(String),
    #[error("malformed persona JSON: {0}")]
    MalformedJson(String),
}

const FIELDS: [&str; 6] =
    ["age", "region", "personality", "danmaku_sending_style", "learning_habits", "reasons_for_watching"];

fn expected_labels(n: usize) -> impl Iterator<Item = char> {
    (b'A'..=b'Z').take(n).map(char::from)
}

/// The persona-creation prompt for one video title.
pub fn build_persona_prompt(title: &str, n: usize) -> String {
    format!(
        "- Your task is to create {n} distinct personas with different backgrounds and personalities. \
They are interested in watching the online educational video {title}. \
Each persona should have the habit of sending danmaku while watching the video. \
Use \"A\", \"B\", \"C\", \"D\", etc., as persona labels.\n\
- For each persona, please provide the following details in JSON format, including age, region, personality, \
danmaku sending style, learning habits, and reasons for watching the video.\n\
- Return a single JSON object keyed by persona label; each value has the keys \"age\", \"region\", \
\"personality\", \"danmaku_sending_style\", \"learning_habits\" and \"reasons_for_watching\".\n"
    )
}

fn normalize_key(k: &str) -> String {
    let mut out = String::with_capacity(k.len());
    for c in k.trim().chars() {
        match c {
            ' ' | '-' | '_' => {
                if !out.ends_with('_') {
                    out.push('_');
                }
            }
            c => out.extend(c.to_lowercase()),
        }
    }
    out
}

fn field_for(key: &str) -> Option<&'static str> {
    let k = normalize_key(key);
    let k = k.as_str();
    Some(match k {
        "age" => "age",
        "region" | "location" => "region",
        "personality" | "personality_traits" => "personality",
        "danmaku_sending_style" | "danmaku_style" | "sending_style" => "danmaku_sending_style",
        "learning_habits" | "learning_habit" => "learning_habits",
        _ if k.starts_with("reasons_for_watching") || k.starts_with("reason_for_watching") => "reasons_for_watching",
        _ => return None,
    })
}

/// Cuts a JSON object out of a chat reply that may wrap it in prose or a code fence.
fn extract_object(text: &str) -> &str {
    match (text.find('{'), text.rfind('}')) {
        (Some(a), Some(b)) if a < b => &text[a..=b],
        _ => text.trim(),
    }
}

fn text_field(label: &str, field: &'static str, v: &Value) -> Result<String, PersonaError> {
    let s = match v {
        Value::String(s) => s.trim().to_string(),
        Value::Array(items) => items.iter().filter_map(|i| i.as_str().map(str::trim)).collect::<Vec<_>>().join(", "),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    if s.is_empty() {
        return Err(PersonaError::InvalidField { label: label.into(), field, reason: "empty".into() });
    }
    Ok(s)
}

fn age_field(label: &str, v: &Value) -> Result<u32, PersonaError> {
    let invalid = |reason: String| PersonaError::InvalidField { label: label.into(), field: "age", reason };
    let age = match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| invalid(n.to_string()))?,
        Value::String(s) => s.trim().parse::<f64>().map_err(|_| invalid(s.clone()))?,
        other => return Err(invalid(other.to_string())),
    };
    if age.fract() != 0.0 || !(10.0..=100.0).contains(&age) {
        return Err(invalid(format!("{age} not an integer in [10, 100]")));
    }
    Ok(age as u32)
}

fn parse_one(label: char, obj: &Map<String, Value>) -> Result<Persona, PersonaError> {
    let l = label.to_string();
    let mut found: [Option<&Value>; 6] = [None; 6];
    for (k, v) in obj {
        if let Some(f) = field_for(k) {
            let idx = FIELDS.iter().position(|x| *x == f).unwrap();
            found[idx].get_or_insert(v);
        }
    }
    let get = |i: usize| found[i].ok_or(PersonaError::MissingField { label: l.clone(), field: FIELDS[i] });
    Ok(Persona {
        label,
        age: age_field(&l, get(0)?)?,
        region: text_field(&l, FIELDS[1], get(1)?)?,
        personality: text_field(&l, FIELDS[2], get(2)?)?,
        danmaku_sending_style: text_field(&l, FIELDS[3], get(3)?)?,
        learning_habits: text_field(&l, FIELDS[4], get(4)?)?,
        reasons_for_watching: text_field(&l, FIELDS[5], get(5)?)?,
    })
}

/// Parses the object-of-objects persona layout and requires exactly six
/// personas labelled `A` to `F`.
pub fn parse_personas(json_text: &str, video_id: &str) -> Result<PersonaSet, PersonaError> {
    parse_personas_with_count(json_text, video_id, PERSONA_COUNT)
}

/// As [`parse_personas`], with an explicit persona count override.
pub fn parse_personas_with_count(json_text: &str, video_id: &str, count: usize) -> Result<PersonaSet, PersonaError> {
    let value: Value =
        serde_json::from_str(extract_object(json_text)).map_err(|e| PersonaError::MalformedJson(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(PersonaError::MalformedJson("top level is not an object".into()));
    };
    if map.len() != count {
        return Err(PersonaError::WrongCount { expected: count, found: map.len() });
    }
    let mut personas = Vec::with_capacity(count);
    for (key, v) in &map {
        let label = {
            let k = key.trim();
            let k = k.strip_prefix("Persona ").unwrap_or(k);
            let mut chars = k.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => c.to_ascii_uppercase(),
                _ => return Err(PersonaError::BadLabel(key.clone())),
            }
        };
        let Value::Object(obj) = v else {
            return Err(PersonaError::MalformedJson(format!("persona {key} is not an object")));
        };
        personas.push(parse_one(label, obj)?);
    }
    personas.sort_by_key(|p| p.label);
    for (p, want) in personas.iter().zip(expected_labels(count)) {
        if p.label != want {
            return Err(PersonaError::BadLabel(p.label.to_string()));
        }
    }
    Ok(PersonaSet { video_id: video_id.to_string(), personas })
}

impl PersonaSet {
    /// The persona JSON layout, keyed by label in label order.
    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        for p in &self.personas {
            let mut obj = Map::new();
            obj.insert("age".into(), Value::from(p.age));
            obj.insert("region".into(), Value::from(p.region.clone()));
            obj.insert("personality".into(), Value::from(p.personality.clone()));
            obj.insert("danmaku_sending_style".into(), Value::from(p.danmaku_sending_style.clone()));
            obj.insert("learning_habits".into(), Value::from(p.learning_habits.clone()));
            obj.insert("reasons_for_watching".into(), Value::from(p.reasons_for_watching.clone()));
            map.insert(p.label.to_string(), Value::Object(obj));
        }
        Value::Object(map)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("personas serialize")
    }

    pub fn to_json_compact(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("personas serialize")
    }

    pub fn labels(&self) -> impl Iterator<Item = char> + '_ {
        self.personas.iter().map(|p| p.label)
    }

    pub fn contains(&self, label: char) -> bool {
        self.personas.iter().any(|p| p.label == label)
    }

    pub fn get(&self, label: char) -> Option<&Persona> {
        self.personas.iter().find(|p| p.label == label)
    }
}
