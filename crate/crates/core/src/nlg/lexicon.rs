//! The word maps and sentential templates driving generation, plus the
//! template DSL parser.
//!
//! Template strings use plain tokens with `X`/`Y` participant slots,
//! `{Adv}` for the preferred adverb position, `{PPendo}`/`{PPexo}` for
//! direction adjuncts, and `[...]` for optional groups.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NlgError;

const DEFAULT_LEXICON: &str = include_str!("../../assets/lexicon.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicon {
    /// Object class -> head noun.
    pub nouns: BTreeMap<String, String>,
    /// Object class -> restrictive or person-pose adjective.
    pub restrictive: BTreeMap<String, String>,
    /// Object class -> class-mapped size adjective.
    #[serde(rename = "sizeAdjectives")]
    pub size_adjectives: BTreeMap<String, String>,
    /// Action class -> template DSL string.
    pub templates: BTreeMap<String, String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_LEXICON).expect("embedded lexicon is valid")
    }
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NlgError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| NlgError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| NlgError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NlgError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("lexicon serialization");
        fs::write(path, text).map_err(|source| NlgError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn noun(&self, object_class: &str) -> Result<&str, NlgError> {
        self.nouns
            .get(object_class)
            .map(String::as_str)
            .ok_or_else(|| NlgError::MissingNoun {
                class: object_class.to_string(),
            })
    }

    pub fn template(&self, action_class: &str) -> Result<Template, NlgError> {
        let text = self
            .templates
            .get(action_class)
            .ok_or_else(|| NlgError::UnknownAction {
                action: action_class.to_string(),
            })?;
        Template::parse(action_class, text)
    }

    pub fn action_classes(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateToken {
    Word(String),
    Subject,
    Object,
    AdvSlot,
    PpEndo,
    PpExo,
    Optional(Vec<TemplateToken>),
}

impl TemplateToken {
    pub fn mentions_object(&self) -> bool {
        match self {
            TemplateToken::Object => true,
            TemplateToken::Optional(inner) => inner.iter().any(|t| t.mentions_object()),
            _ => false,
        }
    }
}

/// Where the template's adverb slot sits relative to the verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdverbPosition {
    Preverbal,
    Postverbal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub action_class: String,
    pub tokens: Vec<TemplateToken>,
}

impl Template {
    pub fn parse(action_class: &str, text: &str) -> Result<Template, NlgError> {
        let spaced = text.replace('[', " [ ").replace(']', " ] ");
        let mut stack: Vec<Vec<TemplateToken>> = vec![Vec::new()];
        for raw in spaced.split_whitespace() {
            match raw {
                "[" => stack.push(Vec::new()),
                "]" => {
                    let group = stack.pop().ok_or_else(|| NlgError::BadTemplate {
                        action: action_class.to_string(),
                        message: "unmatched ]".into(),
                    })?;
                    stack
                        .last_mut()
                        .ok_or_else(|| NlgError::BadTemplate {
                            action: action_class.to_string(),
                            message: "unmatched ]".into(),
                        })?
                        .push(TemplateToken::Optional(group));
                }
                "X" => stack.last_mut().unwrap().push(TemplateToken::Subject),
                "Y" => stack.last_mut().unwrap().push(TemplateToken::Object),
                "{Adv}" => stack.last_mut().unwrap().push(TemplateToken::AdvSlot),
                "{PPendo}" => stack.last_mut().unwrap().push(TemplateToken::PpEndo),
                "{PPexo}" => stack.last_mut().unwrap().push(TemplateToken::PpExo),
                w => stack
                    .last_mut()
                    .unwrap()
                    .push(TemplateToken::Word(w.to_string())),
            }
        }
        if stack.len() != 1 {
            return Err(NlgError::BadTemplate {
                action: action_class.to_string(),
                message: "unmatched [".into(),
            });
        }
        Ok(Template {
            action_class: action_class.to_string(),
            tokens: stack.pop().unwrap(),
        })
    }

    /// Y appears outside any optional group.
    pub fn requires_object(&self) -> bool {
        self.tokens.iter().any(|t| *t == TemplateToken::Object)
    }

    /// Y appears anywhere, including inside optional groups.
    pub fn mentions_object(&self) -> bool {
        self.tokens.iter().any(|t| t.mentions_object())
    }

    pub fn has_adverb_slot(&self) -> bool {
        self.tokens.iter().any(|t| *t == TemplateToken::AdvSlot)
    }

    pub fn adjunct_kind(&self) -> Option<super::phrases::AdjunctKind> {
        for t in &self.tokens {
            match t {
                TemplateToken::PpEndo => return Some(super::phrases::AdjunctKind::Endogenous),
                TemplateToken::PpExo => return Some(super::phrases::AdjunctKind::Exogenous),
                _ => {}
            }
        }
        None
    }

    pub fn adverb_position(&self) -> Option<AdverbPosition> {
        let adv = self
            .tokens
            .iter()
            .position(|t| *t == TemplateToken::AdvSlot)?;
        let verb = self
            .tokens
            .iter()
            .position(|t| matches!(t, TemplateToken::Word(w) if *w == self.action_class))
            .unwrap_or(usize::MAX);
        Some(if adv < verb {
            AdverbPosition::Preverbal
        } else {
            AdverbPosition::Postverbal
        })
    }
}
