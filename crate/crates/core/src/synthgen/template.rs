use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "{item_name}";

const REDIAL_EN: &str = include_str!("../../templates/redial_en.txt");
const TGREDIAL_ZH: &str = include_str!("../../templates/tgredial_zh.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::En => "en",
            Language::Zh => "zh",
        })
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(Error::Template(format!("unknown language `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub language: Language,
    pub system_preamble: String,
    pub body: String,
}

/// A catalog item handed to the generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ItemRef {
    pub id: String,
    pub name: String,
}

impl ItemRef {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
        }
    }
}

impl PromptTemplate {
    pub fn new(
        template_id: impl Into<String>,
        language: Language,
        system_preamble: impl Into<String>,
        body: impl Into<String>,
    ) -> Result<Self> {
        let t = Self {
            template_id: template_id.into(),
            language,
            system_preamble: system_preamble.into(),
            body: body.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        match self.body.matches(PLACEHOLDER).count() {
            1 => Ok(()),
            n => Err(Error::Template(format!(
                "template `{}` body has {n} `{PLACEHOLDER}` placeholders, expected exactly 1",
                self.template_id
            ))),
        }
    }

    /// Parses the template file format: a header line
    /// `# template_id=<id> language=<en|zh>`, the system preamble, a line
    /// holding only `---`, then the prompt body.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| Error::Template("missing `# template_id=... language=...` header".into()))?;
        let mut id = None;
        let mut language = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("template_id", v)) => id = Some(v.to_string()),
                Some(("language", v)) => language = Some(v.parse()?),
                _ => {}
            }
        }
        let id = id.ok_or_else(|| Error::Template("header lacks template_id".into()))?;
        let language = language.ok_or_else(|| Error::Template("header lacks language".into()))?;

        let rest: Vec<&str> = lines.collect();
        let (preamble, body) = match rest.iter().position(|l| l.trim() == "---") {
            Some(sep) => (rest[..sep].join("\n"), rest[sep + 1..].join("\n")),
            None => (String::new(), rest.join("\n")),
        };
        Self::new(id, language, preamble.trim(), body.trim())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Bundled templates: `redial_en` and `tgredial_zh`.
    pub fn builtin(id: &str) -> Result<Self> {
        match id {
            "redial_en" => Self::parse(REDIAL_EN),
            "tgredial_zh" => Self::parse(TGREDIAL_ZH),
            other => Err(Error::Template(format!("no built-in template `{other}`"))),
        }
    }
}

/// Substitutes the item name into the template body.
pub fn render_prompt(template: &PromptTemplate, item: &ItemRef) -> Result<String> {
    template.validate()?;
    if item.name.trim().is_empty() {
        return Err(Error::Template(format!("item `{}` has an empty name", item.id)));
    }
    Ok(template.body.replacen(PLACEHOLDER, &item.name, 1))
}
