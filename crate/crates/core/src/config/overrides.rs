//! Hierarchical overrides applied to an input document.
//!
//! A scalar override sets the text of a child element (creating it when
//! absent). A tree override replaces the whole child subtree, which is how a
//! movement pattern block is swapped for another.

use std::path::Path;

use super::schema::{Schema, ValidationReport};
use super::xml::Element;
use super::{parse_xml, read_text, ConfigError};

#[derive(Debug, Clone, PartialEq)]
pub enum OverrideValue {
    Scalar(String),
    Tree(OverrideTree),
}

impl From<&str> for OverrideValue {
    fn from(s: &str) -> Self {
        OverrideValue::Scalar(s.to_string())
    }
}

impl From<OverrideTree> for OverrideValue {
    fn from(t: OverrideTree) -> Self {
        OverrideValue::Tree(t)
    }
}

/// Ordered name -> value map with optional attributes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OverrideTree {
    pub attributes: Vec<(String, String)>,
    pub children: Vec<(String, OverrideValue)>,
}

impl OverrideTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty() && self.children.is_empty()
    }

    pub fn set(mut self, name: &str, value: impl Into<OverrideValue>) -> Self {
        self.insert(name, value.into());
        self
    }

    pub fn attr(mut self, name: &str, value: &str) -> Self {
        self.attributes.push((name.to_string(), value.to_string()));
        self
    }

    fn insert(&mut self, name: &str, value: OverrideValue) {
        match self.children.iter_mut().find(|(k, _)| k == name) {
            Some((_, v)) => *v = value,
            None => self.children.push((name.to_string(), value)),
        }
    }

    fn subtree(&mut self, name: &str) -> Result<&mut OverrideTree, ConfigError> {
        if !self.children.iter().any(|(k, _)| k == name) {
            self.children
                .push((name.to_string(), OverrideValue::Tree(OverrideTree::new())));
        }
        match self.children.iter_mut().find(|(k, _)| k == name) {
            Some((_, OverrideValue::Tree(t))) => Ok(t),
            _ => Err(ConfigError::Override(format!(
                "'{name}' is assigned both a value and nested fields"
            ))),
        }
    }

    /// Builds a tree from `key=value` assignments. Keys are dot-separated
    /// element paths; a trailing `@name` addresses an attribute, e.g.
    /// `movement_pattern.manhattan_grid@type=home_work_manhattan`.
    pub fn from_assignments<S: AsRef<str>>(assignments: &[S]) -> Result<Self, ConfigError> {
        let mut tree = OverrideTree::new();
        for a in assignments {
            let a = a.as_ref();
            let (key, value) = a
                .split_once('=')
                .ok_or_else(|| ConfigError::Override(format!("expected key=value, got '{a}'")))?;
            let (path, attr) = match key.split_once('@') {
                Some((p, at)) => (p, Some(at)),
                None => (key, None),
            };
            let segments: Vec<&str> = path.split('.').collect();
            if segments.iter().any(|s| s.is_empty()) || attr.is_some_and(str::is_empty) {
                return Err(ConfigError::Override(format!("malformed key '{key}'")));
            }
            let (parents, last) = match attr {
                Some(_) => (&segments[..], None),
                None => (&segments[..segments.len() - 1], segments.last()),
            };
            let mut node = &mut tree;
            for seg in parents {
                node = node.subtree(seg)?;
            }
            match (attr, last) {
                (Some(at), _) => node.attributes.push((at.to_string(), value.to_string())),
                (None, Some(name)) => {
                    if matches!(
                        node.children.iter().find(|(k, _)| k == name),
                        Some((_, OverrideValue::Tree(_)))
                    ) {
                        return Err(ConfigError::Override(format!(
                            "'{name}' is assigned both a value and nested fields"
                        )));
                    }
                    node.insert(name, OverrideValue::Scalar(value.to_string()));
                }
                (None, None) => unreachable!(),
            }
        }
        Ok(tree)
    }

    /// Builds a tree from a JSON object. Strings, numbers and booleans become
    /// scalars, objects become subtrees, and keys starting with `@` are
    /// attributes.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, ConfigError> {
        let obj = value.as_object().ok_or_else(|| {
            ConfigError::Override("override document must be a JSON object".into())
        })?;
        let mut tree = OverrideTree::new();
        for (k, v) in obj {
            let scalar = match v {
                serde_json::Value::String(s) => Some(s.clone()),
                serde_json::Value::Number(n) => Some(n.to_string()),
                serde_json::Value::Bool(b) => Some(b.to_string()),
                _ => None,
            };
            if let Some(name) = k.strip_prefix('@') {
                let s = scalar.ok_or_else(|| {
                    ConfigError::Override(format!("attribute '{name}' must be a scalar"))
                })?;
                tree.attributes.push((name.to_string(), s));
            } else if let Some(s) = scalar {
                tree.children.push((k.clone(), OverrideValue::Scalar(s)));
            } else if v.is_object() {
                tree.children
                    .push((k.clone(), OverrideValue::Tree(Self::from_json(v)?)));
            } else {
                return Err(ConfigError::Override(format!(
                    "unsupported value for '{k}': arrays and nulls are not allowed"
                )));
            }
        }
        Ok(tree)
    }

    fn to_element(&self, name: &str) -> Element {
        let mut el = Element::new(name);
        for (k, v) in &self.attributes {
            el.set_attribute(k, v);
        }
        for (k, v) in &self.children {
            el.children.push(match v {
                OverrideValue::Scalar(s) => Element::leaf(k, s),
                OverrideValue::Tree(t) => t.to_element(k),
            });
        }
        el
    }
}

/// Applies `overrides` to the children of `root` in place.
pub fn update_element(root: &mut Element, overrides: &OverrideTree) -> Result<(), ConfigError> {
    for (k, v) in &overrides.attributes {
        root.set_attribute(k, v);
    }
    for (name, value) in &overrides.children {
        let positions: Vec<usize> = root
            .children
            .iter()
            .enumerate()
            .filter(|(_, c)| &c.name == name)
            .map(|(i, _)| i)
            .collect();
        if positions.len() > 1 {
            return Err(ConfigError::Override(format!(
                "<{name}> occurs {} times; cannot tell which to override",
                positions.len()
            )));
        }
        let existing = positions.first().copied();
        match value {
            OverrideValue::Scalar(s) => match existing {
                Some(i) if !root.children[i].children.is_empty() => {
                    return Err(ConfigError::Override(format!(
                        "<{name}> has nested elements and cannot take a scalar value"
                    )));
                }
                Some(i) => root.children[i].text = Some(s.trim().to_string()),
                None => root.children.push(Element::leaf(name, s.trim())),
            },
            OverrideValue::Tree(t) => {
                let el = t.to_element(name);
                match existing {
                    Some(i) => root.children[i] = el,
                    None => root.children.push(el),
                }
            }
        }
    }
    Ok(())
}

/// Writes `document_path` with `overrides` applied to `output_path`, after
/// re-validating against the rule file. The input is never modified and
/// nothing is written when the result is invalid.
pub fn update_config(
    document_path: &Path,
    overrides: &OverrideTree,
    schema_path: &Path,
    output_path: &Path,
) -> Result<ValidationReport, ConfigError> {
    if same_file(document_path, output_path) {
        return Err(ConfigError::Override(
            "output path must differ from the input document".into(),
        ));
    }
    let schema = Schema::resolve(schema_path)?;
    let text = read_text(document_path)?;
    let mut root = parse_xml(document_path, &text)?;
    update_element(&mut root, overrides)?;
    let report = schema.validate(&root);
    if !report.is_valid() {
        return Err(ConfigError::Invalid {
            path: output_path.to_path_buf(),
            report,
        });
    }
    std::fs::write(output_path, root.to_xml_string()).map_err(|source| ConfigError::Io {
        path: output_path.to_path_buf(),
        source,
    })?;
    Ok(report)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}
