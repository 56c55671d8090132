//! Filename → emotion label schemes.
//!
//! A scheme is a kind (how the code is cut out of the filename) plus an
//! editable `code=label` table. Tables round-trip through a small text
//! format:
//!
//! ```text
//! # comment
//! %scheme=regex_manifest
//! %pattern=^([a-z]+)_\d+\.wav$
//! angry=angry
//! ```
//!
//! Class order is the order in which labels first appear in the table.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Third dash-separated field of a seven-field stem (`03-01-06-…`).
    RavdessFields,
    /// Sixth character of a seven-character stem (`03a01Wa`).
    EmodbLetter,
    /// Last underscore-separated token of the stem, lowercased.
    TessToken,
    /// First capture group of a user regex applied to the file name.
    RegexManifest,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::RavdessFields => "ravdess_fields",
            SchemeKind::EmodbLetter => "emodb_letter",
            SchemeKind::TessToken => "tess_token",
            SchemeKind::RegexManifest => "regex_manifest",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DatasetError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ravdess_fields" | "ravdess" => Ok(SchemeKind::RavdessFields),
            "emodb_letter" | "emodb" => Ok(SchemeKind::EmodbLetter),
            "tess_token" | "tess" => Ok(SchemeKind::TessToken),
            "regex_manifest" | "regex" => Ok(SchemeKind::RegexManifest),
            other => Err(DatasetError::UnknownScheme(other.to_string())),
        }
    }
}

const RAVDESS_TABLE: &[(&str, &str)] = &[
    ("01", "neutral"),
    ("02", "calm"),
    ("03", "happy"),
    ("04", "sad"),
    ("05", "angry"),
    ("06", "fearful"),
    ("07", "disgust"),
    ("08", "surprised"),
];

const EMODB_TABLE: &[(&str, &str)] = &[
    ("W", "anger"),
    ("L", "boredom"),
    ("E", "disgust"),
    ("A", "fear"),
    ("F", "happiness"),
    ("T", "sadness"),
    ("N", "neutral"),
];

const TESS_TABLE: &[(&str, &str)] = &[
    ("angry", "angry"),
    ("disgust", "disgust"),
    ("fear", "fearful"),
    ("happy", "happy"),
    ("neutral", "neutral"),
    ("ps", "surprised"),
    ("sad", "sad"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionLabel {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct LabelScheme {
    kind: SchemeKind,
    pattern: Option<Regex>,
    table: Vec<(String, String)>,
    class_names: Vec<String>,
}

impl PartialEq for LabelScheme {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.pattern.as_ref().map(Regex::as_str) == other.pattern.as_ref().map(Regex::as_str)
            && self.table == other.table
    }
}

impl LabelScheme {
    pub fn new(kind: SchemeKind, pattern: Option<&str>, table: Vec<(String, String)>) -> Result<Self, DatasetError> {
        let bad = |m: String| DatasetError::BadMappingFile(m);
        let pattern = match (kind, pattern) {
            (SchemeKind::RegexManifest, Some(p)) => {
                let re = Regex::new(p).map_err(|e| bad(format!("bad pattern: {e}")))?;
                if re.captures_len() < 2 {
                    return Err(bad("pattern needs a capture group".into()));
                }
                Some(re)
            }
            (SchemeKind::RegexManifest, None) => return Err(bad("regex_manifest needs %pattern=".into())),
            (_, Some(_)) => return Err(bad(format!("{} takes no pattern", kind.as_str()))),
            (_, None) => None,
        };
        if table.is_empty() {
            return Err(bad("empty label table".into()));
        }
        let mut class_names: Vec<String> = Vec::new();
        for (i, (code, label)) in table.iter().enumerate() {
            if table[..i].iter().any(|(c, _)| c == code) {
                return Err(bad(format!("duplicate code '{code}'")));
            }
            if !class_names.contains(label) {
                class_names.push(label.clone());
            }
        }
        Ok(Self {
            kind,
            pattern,
            table,
            class_names,
        })
    }

    /// Built-in table for one of the fixed-layout corpora.
    pub fn builtin(kind: SchemeKind) -> Result<Self, DatasetError> {
        let table = match kind {
            SchemeKind::RavdessFields => RAVDESS_TABLE,
            SchemeKind::EmodbLetter => EMODB_TABLE,
            SchemeKind::TessToken => TESS_TABLE,
            SchemeKind::RegexManifest => {
                return Err(DatasetError::BadMappingFile(
                    "regex_manifest has no built-in table".into(),
                ))
            }
        };
        let table = table.iter().map(|(c, l)| (c.to_string(), l.to_string())).collect();
        Self::new(kind, None, table)
    }

    pub fn from_mapping_text(text: &str) -> Result<Self, DatasetError> {
        let mut kind = None;
        let mut pattern = None;
        let mut table = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DatasetError::BadMappingFile(format!("line {}: expected key=value", n + 1))
            })?;
            match key.trim() {
                "%scheme" => kind = Some(SchemeKind::parse(value)?),
                // The pattern is taken verbatim so it may contain '='.
                "%pattern" => pattern = Some(value.to_string()),
                k if k.starts_with('%') => {
                    return Err(DatasetError::BadMappingFile(format!("unknown directive {k}")))
                }
                k => table.push((k.to_string(), value.trim().to_string())),
            }
        }
        let kind = kind.ok_or_else(|| DatasetError::BadMappingFile("missing %scheme=".into()))?;
        Self::new(kind, pattern.as_deref(), table)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::from_mapping_text(&std::fs::read_to_string(path)?)
    }

    /// A built-in scheme name, or a path to a mapping file.
    pub fn resolve(spec: &str) -> Result<Self, DatasetError> {
        match SchemeKind::parse(spec) {
            Ok(kind) if kind != SchemeKind::RegexManifest => Self::builtin(kind),
            _ if Path::new(spec).is_file() => Self::load(Path::new(spec)),
            Ok(_) => Err(DatasetError::BadMappingFile(
                "regex_manifest needs a mapping file".into(),
            )),
            Err(e) => Err(e),
        }
    }

    pub fn to_mapping_text(&self) -> String {
        let mut out = format!("%scheme={}\n", self.kind.as_str());
        if let Some(p) = &self.pattern {
            out.push_str(&format!("%pattern={}\n", p.as_str()));
        }
        for (code, label) in &self.table {
            out.push_str(&format!("{code}={label}\n"));
        }
        out
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn label_for_name(&self, name: &str) -> Option<EmotionLabel> {
        self.class_names.iter().position(|c| c == name).map(|index| EmotionLabel {
            name: name.to_string(),
            index,
        })
    }

    fn code<'a>(&self, file_name: &'a str) -> Option<std::borrow::Cow<'a, str>> {
        let stem = file_name.rsplit_once('.').map_or(file_name, |(s, _)| s);
        match self.kind {
            SchemeKind::RavdessFields => {
                let fields: Vec<&str> = stem.split('-').collect();
                (fields.len() == 7 && fields.iter().all(|f| f.len() == 2 && f.bytes().all(|b| b.is_ascii_digit())))
                    .then(|| fields[2].into())
            }
            SchemeKind::EmodbLetter => {
                let chars: Vec<char> = stem.chars().collect();
                (chars.len() == 7).then(|| chars[5].to_string().into())
            }
            SchemeKind::TessToken => stem
                .rsplit_once('_')
                .map(|(_, last)| last.to_ascii_lowercase().into()),
            SchemeKind::RegexManifest => {
                let re = self.pattern.as_ref()?;
                re.captures(file_name)?.get(1).map(|m| m.as_str().into())
            }
        }
    }

    /// Label for a file name (directories are ignored).
    pub fn parse_label(&self, file_name: &str) -> Result<EmotionLabel, DatasetError> {
        let base = file_name.rsplit(['/', '\\']).next().unwrap_or(file_name);
        let code = self
            .code(base)
            .ok_or_else(|| DatasetError::UnrecognizedFilename(base.to_string()))?;
        let label = self
            .table
            .iter()
            .find(|(c, _)| c.as_str() == code.as_ref())
            .map(|(_, l)| l)
            .ok_or_else(|| DatasetError::UnrecognizedFilename(base.to_string()))?;
        Ok(self.label_for_name(label).expect("table labels are classes"))
    }
}

/// Label for `file_name` under `scheme`.
pub fn parse_label(file_name: &str, scheme: &LabelScheme) -> Result<EmotionLabel, DatasetError> {
    scheme.parse_label(file_name)
}
