//! Element tree for the configuration XML subset.
//!
//! Only elements, attributes and text are kept. Namespaces are rejected;
//! comments and processing instructions are dropped.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Element {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    /// Trimmed text content; `None` when the element holds no text.
    pub text: Option<String>,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn leaf(name: impl Into<String>, text: impl ToString) -> Self {
        Element {
            name: name.into(),
            text: Some(text.to_string()),
            ..Default::default()
        }
    }

    pub fn with_child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.push((name.into(), value.into()));
        self
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    pub fn child_text(&self, name: &str) -> Option<&str> {
        self.child(name).and_then(|c| c.text.as_deref())
    }

    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_attribute(&mut self, name: &str, value: &str) {
        match self.attributes.iter_mut().find(|(k, _)| k == name) {
            Some((_, v)) => *v = value.to_string(),
            None => self.attributes.push((name.to_string(), value.to_string())),
        }
    }

    /// Canonical serialization: XML declaration, two-space indentation,
    /// LF line endings, attributes in document order.
    pub fn to_xml_string(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        self.write_into(&mut out, 0);
        out
    }

    fn write_into(&self, out: &mut String, depth: usize) {
        let indent = "  ".repeat(depth);
        let _ = write!(out, "{indent}<{}", self.name);
        for (k, v) in &self.attributes {
            let _ = write!(out, " {k}=\"{}\"", escape(v));
        }
        match (&self.text, self.children.is_empty()) {
            (None, true) => out.push_str("/>\n"),
            (Some(t), true) => {
                let _ = writeln!(out, ">{}</{}>", escape(t), self.name);
            }
            (text, false) => {
                out.push_str(">\n");
                if let Some(t) = text {
                    let _ = writeln!(out, "{indent}  {}", escape(t));
                }
                for c in &self.children {
                    c.write_into(out, depth + 1);
                }
                let _ = writeln!(out, "{indent}</{}>", self.name);
            }
        }
    }
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

/// Parses a document into its root element. Errors carry the parser's
/// message with line and column.
pub fn parse(text: &str) -> Result<Element, String> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: false,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(text, opts).map_err(|e| e.to_string())?;
    convert(doc.root_element())
}

fn convert(node: roxmltree::Node<'_, '_>) -> Result<Element, String> {
    let tag = node.tag_name();
    if tag.namespace().is_some() {
        return Err(format!(
            "namespaced element <{}> is not supported",
            tag.name()
        ));
    }
    let mut el = Element::new(tag.name());
    for a in node.attributes() {
        if a.namespace().is_some() {
            return Err(format!(
                "namespaced attribute '{}' is not supported",
                a.name()
            ));
        }
        el.attributes
            .push((a.name().to_string(), a.value().to_string()));
    }
    let mut text = String::new();
    for child in node.children() {
        if child.is_element() {
            el.children.push(convert(child)?);
        } else if child.is_text() {
            text.push_str(child.text().unwrap_or_default());
        }
    }
    let trimmed = text.trim();
    if !trimmed.is_empty() {
        el.text = Some(trimmed.to_string());
    }
    Ok(el)
}
