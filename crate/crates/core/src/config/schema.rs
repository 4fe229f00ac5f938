//! Declarative rule files and the validator that applies them.
//!
//! A rule file is TOML. It names the root element and lists, per element
//! path, its cardinality and scalar type, plus a handful of cross-field
//! rules (sums, orderings, choices, conditionals, uniqueness). Paths are
//! slash-separated element names starting at the root, e.g.
//! `simulation/prob_devices/p0`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use super::xml::Element;
use super::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Complex,
    Integer,
    Decimal,
    String,
    Enum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Unbounded {
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum MaxOccurs {
    Bounded(u32),
    #[allow(private_interfaces)]
    Unbounded(Unbounded),
}

impl MaxOccurs {
    fn allows(&self, n: usize) -> bool {
        match self {
            MaxOccurs::Bounded(m) => n <= *m as usize,
            MaxOccurs::Unbounded(_) => true,
        }
    }

    fn is_repeatable(&self) -> bool {
        !matches!(self, MaxOccurs::Bounded(0 | 1))
    }
}

fn one() -> u32 {
    1
}

fn max_one() -> MaxOccurs {
    MaxOccurs::Bounded(1)
}

fn complex() -> ValueType {
    ValueType::Complex
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementRule {
    pub path: String,
    #[serde(rename = "type", default = "complex")]
    pub value_type: ValueType,
    #[serde(default = "one")]
    pub min_occurs: u32,
    #[serde(default = "max_one")]
    pub max_occurs: MaxOccurs,
    pub min: Option<f64>,
    pub max: Option<f64>,
    #[serde(default)]
    pub min_exclusive: bool,
    #[serde(default)]
    pub max_exclusive: bool,
    #[serde(default)]
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeRule {
    pub element: String,
    pub name: String,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub values: Vec<String>,
}

/// Named children of `scope` must add up to `total` within `tolerance`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumRule {
    #[serde(default = "sum_name")]
    pub name: String,
    pub scope: String,
    pub fields: Vec<String>,
    pub total: f64,
    #[serde(default)]
    pub tolerance: f64,
}

fn sum_name() -> String {
    "sum".into()
}

/// Child `lesser` must be strictly less than child `greater`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingRule {
    #[serde(default = "ordering_name")]
    pub name: String,
    pub scope: String,
    pub lesser: String,
    pub greater: String,
}

fn ordering_name() -> String {
    "ordering".into()
}

/// Exactly one of `options` must be present below `scope`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceRule {
    pub scope: String,
    pub options: Vec<String>,
}

/// When child `when` has text `equals`, child `requires` must exist.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalRule {
    pub scope: String,
    pub when: String,
    pub equals: String,
    pub requires: String,
}

/// Field `field` of every `element` child of `scope` must be distinct.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniqueRule {
    pub scope: String,
    pub element: String,
    pub field: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub root: String,
    #[serde(default, rename = "element")]
    pub elements: Vec<ElementRule>,
    #[serde(default, rename = "attribute")]
    pub attributes: Vec<AttributeRule>,
    #[serde(default, rename = "sum")]
    pub sums: Vec<SumRule>,
    #[serde(default, rename = "ordering")]
    pub orderings: Vec<OrderingRule>,
    #[serde(default, rename = "choice")]
    pub choices: Vec<ChoiceRule>,
    #[serde(default, rename = "conditional")]
    pub conditionals: Vec<ConditionalRule>,
    #[serde(default, rename = "unique")]
    pub uniques: Vec<UniqueRule>,
}

/// The four input documents and their shipped rule files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Simulation,
    Persons,
    Antennas,
    Map,
}

impl DocumentKind {
    pub const ALL: [DocumentKind; 4] = [
        DocumentKind::Simulation,
        DocumentKind::Persons,
        DocumentKind::Antennas,
        DocumentKind::Map,
    ];

    pub fn rules_name(self) -> &'static str {
        match self {
            DocumentKind::Simulation => "simulation_rules",
            DocumentKind::Persons => "persons_rules",
            DocumentKind::Antennas => "antennas_rules",
            DocumentKind::Map => "map_rules",
        }
    }

    pub fn builtin_rules(self) -> &'static str {
        match self {
            DocumentKind::Simulation => include_str!("../../schemas/simulation_rules.toml"),
            DocumentKind::Persons => include_str!("../../schemas/persons_rules.toml"),
            DocumentKind::Antennas => include_str!("../../schemas/antennas_rules.toml"),
            DocumentKind::Map => include_str!("../../schemas/map_rules.toml"),
        }
    }
}

impl Schema {
    pub fn from_toml(text: &str) -> Result<Schema, String> {
        let schema: Schema = toml::from_str(text).map_err(|e| e.to_string())?;
        schema.check()?;
        Ok(schema)
    }

    pub fn builtin(kind: DocumentKind) -> Schema {
        Schema::from_toml(kind.builtin_rules()).expect("shipped rule files are well-formed")
    }

    pub fn load(path: &Path) -> Result<Schema, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Schema::from_toml(&text).map_err(|message| ConfigError::Schema {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Loads `rules` as a file if it exists, otherwise falls back to a shipped
    /// rule set whose name matches (`simulation_rules`, optionally with a
    /// `.toml` extension).
    pub fn resolve(rules: &Path) -> Result<Schema, ConfigError> {
        if rules.exists() {
            return Schema::load(rules);
        }
        let name = rules
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let name = name.strip_suffix(".toml").unwrap_or(name);
        DocumentKind::ALL
            .into_iter()
            .find(|k| k.rules_name() == name)
            .map(Schema::builtin)
            .ok_or_else(|| ConfigError::Io {
                path: rules.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "rule file not found"),
            })
    }

    fn check(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for e in &self.elements {
            let parent = parent_path(&e.path);
            if parent != self.root && !self.elements.iter().any(|p| p.path == parent) {
                return Err(format!("element '{}' has undeclared parent", e.path));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(format!("element '{}' declared twice", e.path));
            }
            if e.value_type == ValueType::Enum && e.values.is_empty() {
                return Err(format!("enum element '{}' lists no values", e.path));
            }
        }
        Ok(())
    }

    pub fn element_rule(&self, path: &str) -> Option<&ElementRule> {
        self.elements.iter().find(|e| e.path == path)
    }

    fn child_rules<'a>(&'a self, parent: &'a str) -> impl Iterator<Item = &'a ElementRule> + 'a {
        self.elements
            .iter()
            .filter(move |e| parent_path(&e.path) == parent)
    }

    /// Validates a parsed document. Never mutates it.
    pub fn validate(&self, root: &Element) -> ValidationReport {
        let mut issues = Vec::new();
        if root.name != self.root {
            issues.push(Issue::new(
                format!("/{}", root.name),
                "root_element",
                format!(
                    "expected root element <{}>, found <{}>",
                    self.root, root.name
                ),
            ));
            return ValidationReport::from_issues(issues);
        }
        self.walk(
            root,
            &self.root,
            &format!("/{}", root.name),
            None,
            &mut issues,
        );
        self.cross_rules(root, &mut issues);
        ValidationReport::from_issues(issues)
    }

    fn walk(
        &self,
        el: &Element,
        schema_path: &str,
        instance: &str,
        rule: Option<&ElementRule>,
        issues: &mut Vec<Issue>,
    ) {
        self.check_attributes(el, schema_path, instance, issues);
        let value_type = rule.map_or(ValueType::Complex, |r| r.value_type);
        if value_type != ValueType::Complex {
            if !el.children.is_empty() {
                issues.push(Issue::new(
                    instance,
                    "unexpected_children",
                    format!(
                        "<{}> holds a scalar value and may not contain elements",
                        el.name
                    ),
                ));
            }
            if let Some(r) = rule {
                check_scalar(el, r, instance, issues);
            }
            return;
        }
        if el.text.is_some() {
            issues.push(Issue::new(
                instance,
                "unexpected_text",
                format!("<{}> may only contain elements", el.name),
            ));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for child in &el.children {
            let child_schema = format!("{schema_path}/{}", child.name);
            let n = counts.entry(child.name.as_str()).or_default();
            *n += 1;
            match self.element_rule(&child_schema) {
                None => issues.push(Issue::new(
                    format!("{instance}/{}", child.name),
                    "unknown_element",
                    format!("<{}> is not allowed inside <{}>", child.name, el.name),
                )),
                Some(r) => {
                    let child_instance = if r.max_occurs.is_repeatable() {
                        format!("{instance}/{}[{n}]", child.name)
                    } else {
                        format!("{instance}/{}", child.name)
                    };
                    self.walk(child, &child_schema, &child_instance, Some(r), issues);
                }
            }
        }
        for r in self.child_rules(schema_path) {
            let name = last_segment(&r.path);
            let n = counts.get(name).copied().unwrap_or(0);
            if n < r.min_occurs as usize {
                issues.push(Issue::new(
                    format!("{instance}/{name}"),
                    "missing_element",
                    format!(
                        "required element <{name}> is missing (expected at least {}, found {n})",
                        r.min_occurs
                    ),
                ));
            } else if !r.max_occurs.allows(n) {
                issues.push(Issue::new(
                    format!("{instance}/{name}"),
                    "too_many_elements",
                    format!("<{name}> occurs {n} times, more than allowed"),
                ));
            }
        }
    }

    fn check_attributes(
        &self,
        el: &Element,
        schema_path: &str,
        instance: &str,
        issues: &mut Vec<Issue>,
    ) {
        let declared: Vec<&AttributeRule> = self
            .attributes
            .iter()
            .filter(|a| a.element == schema_path)
            .collect();
        for (name, value) in &el.attributes {
            match declared.iter().find(|a| &a.name == name) {
                None => issues.push(Issue::new(
                    format!("{instance}/@{name}"),
                    "unknown_attribute",
                    format!("attribute '{name}' is not allowed on <{}>", el.name),
                )),
                Some(a) if !a.values.is_empty() && !a.values.contains(value) => {
                    issues.push(Issue::new(
                        format!("{instance}/@{name}"),
                        "invalid_attribute_value",
                        format!("'{value}' is not one of {:?}", a.values),
                    ))
                }
                Some(_) => {}
            }
        }
        for a in declared {
            if a.required && el.attribute(&a.name).is_none() {
                issues.push(Issue::new(
                    format!("{instance}/@{}", a.name),
                    "missing_attribute",
                    format!("required attribute '{}' is missing", a.name),
                ));
            }
        }
    }

    fn cross_rules(&self, root: &Element, issues: &mut Vec<Issue>) {
        for rule in &self.sums {
            for (inst, el) in instances(root, &self.root, &rule.scope) {
                let values: Option<Vec<f64>> = rule
                    .fields
                    .iter()
                    .map(|f| el.child_text(f).and_then(|t| t.parse::<f64>().ok()))
                    .collect();
                // missing or malformed fields are reported by the element walk
                if let Some(values) = values {
                    let sum: f64 = values.iter().sum();
                    if (sum - rule.total).abs() > rule.tolerance {
                        issues.push(Issue::new(
                            inst,
                            rule.name.clone(),
                            format!(
                                "{} must sum to {} (tolerance {}), got {sum}",
                                rule.fields.join(" + "),
                                rule.total,
                                rule.tolerance
                            ),
                        ));
                    }
                }
            }
        }
        for rule in &self.orderings {
            for (inst, el) in instances(root, &self.root, &rule.scope) {
                let lo = el
                    .child_text(&rule.lesser)
                    .and_then(|t| t.parse::<f64>().ok());
                let hi = el
                    .child_text(&rule.greater)
                    .and_then(|t| t.parse::<f64>().ok());
                if let (Some(lo), Some(hi)) = (lo, hi) {
                    if lo >= hi {
                        issues.push(Issue::new(
                            inst,
                            rule.name.clone(),
                            format!(
                                "{} ({lo}) must be less than {} ({hi})",
                                rule.lesser, rule.greater
                            ),
                        ));
                    }
                }
            }
        }
        for rule in &self.choices {
            for (inst, el) in instances(root, &self.root, &rule.scope) {
                let present: Vec<&str> = rule
                    .options
                    .iter()
                    .filter(|o| el.child(o).is_some())
                    .map(String::as_str)
                    .collect();
                if present.len() != 1 {
                    issues.push(Issue::new(
                        inst,
                        "choice",
                        format!(
                            "exactly one of {:?} is required, found {:?}",
                            rule.options, present
                        ),
                    ));
                }
            }
        }
        for rule in &self.conditionals {
            for (inst, el) in instances(root, &self.root, &rule.scope) {
                if el.child_text(&rule.when) == Some(rule.equals.as_str())
                    && el.child(&rule.requires).is_none()
                {
                    issues.push(Issue::new(
                        format!("{inst}/{}", rule.requires),
                        "conditional_required",
                        format!(
                            "<{}> is required when {} = {}",
                            rule.requires, rule.when, rule.equals
                        ),
                    ));
                }
            }
        }
        for rule in &self.uniques {
            for (inst, el) in instances(root, &self.root, &rule.scope) {
                let mut seen = HashSet::new();
                for item in el.children_named(&rule.element) {
                    if let Some(v) = item.child_text(&rule.field) {
                        if !seen.insert(v) {
                            issues.push(Issue::new(
                                format!("{inst}/{}", rule.element),
                                "duplicate_value",
                                format!("{} '{v}' appears more than once", rule.field),
                            ));
                        }
                    }
                }
            }
        }
    }
}

fn check_scalar(el: &Element, rule: &ElementRule, instance: &str, issues: &mut Vec<Issue>) {
    let Some(text) = el.text.as_deref() else {
        issues.push(Issue::new(
            instance,
            "wrong_type",
            format!("<{}> is empty", el.name),
        ));
        return;
    };
    let number = match rule.value_type {
        ValueType::Integer => match text.parse::<i128>() {
            Ok(v) => Some(v as f64),
            Err(_) => {
                issues.push(Issue::new(
                    instance,
                    "wrong_type",
                    format!("'{text}' is not an integer"),
                ));
                return;
            }
        },
        ValueType::Decimal => match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                issues.push(Issue::new(
                    instance,
                    "wrong_type",
                    format!("'{text}' is not a finite decimal number"),
                ));
                return;
            }
        },
        ValueType::Enum => {
            if !rule.values.iter().any(|v| v == text) {
                issues.push(Issue::new(
                    instance,
                    "not_in_enum",
                    format!("'{text}' is not one of {:?}", rule.values),
                ));
            }
            None
        }
        ValueType::String | ValueType::Complex => None,
    };
    if let Some(v) = number {
        let below = rule
            .min
            .is_some_and(|m| if rule.min_exclusive { v <= m } else { v < m });
        let above = rule
            .max
            .is_some_and(|m| if rule.max_exclusive { v >= m } else { v > m });
        if below || above {
            let lo = match rule.min {
                Some(m) => format!("{}{m}", if rule.min_exclusive { "(" } else { "[" }),
                None => "(-inf".into(),
            };
            let hi = match rule.max {
                Some(m) => format!("{m}{}", if rule.max_exclusive { ")" } else { "]" }),
                None => "inf)".into(),
            };
            issues.push(Issue::new(
                instance,
                "out_of_range",
                format!("{text} is outside {lo}, {hi}"),
            ));
        }
    }
}

fn parent_path(path: &str) -> &str {
    path.rsplit_once('/').map_or("", |(p, _)| p)
}

fn last_segment(path: &str) -> &str {
    path.rsplit_once('/').map_or(path, |(_, l)| l)
}

/// Every element matching `schema_path`, with its instance path.
fn instances<'a>(
    root: &'a Element,
    root_name: &str,
    schema_path: &str,
) -> Vec<(String, &'a Element)> {
    let mut segments = schema_path.split('/');
    if segments.next() != Some(root_name) {
        return Vec::new();
    }
    let mut current = vec![(format!("/{root_name}"), root)];
    for seg in segments {
        let mut next = Vec::new();
        for (path, el) in current {
            let matches: Vec<&Element> = el.children.iter().filter(|c| c.name == seg).collect();
            let indexed = matches.len() > 1;
            for (i, m) in matches.into_iter().enumerate() {
                let p = if indexed {
                    format!("{path}/{seg}[{}]", i + 1)
                } else {
                    format!("{path}/{seg}")
                };
                next.push((p, m));
            }
        }
        current = next;
    }
    current
}

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    /// Instance path of the offending node, e.g. `/antennas/antenna[2]/power`.
    pub path: String,
    /// Name of the violated rule, e.g. `missing_element` or `probability_sum`.
    pub rule: String,
    pub message: String,
}

impl Issue {
    pub fn new(
        path: impl Into<String>,
        rule: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Issue {
            path: path.into(),
            rule: rule.into(),
            message: message.into(),
        }
    }
}

/// Outcome of validating one document. Valid exactly when there are no issues.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<Issue>) -> Self {
        ValidationReport { issues }
    }

    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn issues(&self) -> &[Issue] {
        &self.issues
    }

    pub fn push(&mut self, issue: Issue) {
        self.issues.push(issue);
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.issues.iter().any(|i| i.rule == rule)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        write!(f, "{} issue(s)", self.issues.len())?;
        for i in &self.issues {
            write!(f, "; {} [{}]: {}", i.path, i.rule, i.message)?;
        }
        Ok(())
    }
}

impl Serialize for ValidationReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ValidationReport", 2)?;
        s.serialize_field("is_valid", &self.is_valid())?;
        s.serialize_field("issues", &self.issues)?;
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::xml::parse;

    const RULES: &str = r#"
root = "r"

[[element]]
path = "r/n"
type = "integer"
min = 0

[[element]]
path = "r/item"
min_occurs = 0
max_occurs = "unbounded"

[[element]]
path = "r/item/name"
type = "string"

[[element]]
path = "r/item/kind"
type = "enum"
values = ["a", "b"]

[[element]]
path = "r/item/extra"
type = "decimal"
min_occurs = 0
min = 0
min_exclusive = true

[[attribute]]
element = "r/item"
name = "tag"
values = ["x"]

[[conditional]]
scope = "r/item"
when = "kind"
equals = "b"
requires = "extra"

[[unique]]
scope = "r"
element = "item"
field = "name"
"#;

    fn check(doc: &str) -> ValidationReport {
        Schema::from_toml(RULES)
            .unwrap()
            .validate(&parse(doc).unwrap())
    }

    #[test]
    fn valid_document() {
        let r = check("<r><n>3</n><item tag='x'><name>u</name><kind>a</kind></item></r>");
        assert!(r.is_valid(), "{r}");
    }

    #[test]
    fn each_rule_is_reported_by_name() {
        let cases = [
            ("<q/>", "root_element"),
            ("<r/>", "missing_element"),
            ("<r><n>3</n><n>4</n></r>", "too_many_elements"),
            ("<r><n>x</n></r>", "wrong_type"),
            ("<r><n>-1</n></r>", "out_of_range"),
            ("<r><n>1</n><zz/></r>", "unknown_element"),
            ("<r><n>1</n><item><name>u</name><kind>c</kind></item></r>", "not_in_enum"),
            ("<r><n>1</n><item><name>u</name><kind>b</kind></item></r>", "conditional_required"),
            ("<r><n>1</n><item><name>u</name><kind>a</kind><extra>0</extra></item></r>", "out_of_range"),
            ("<r><n>1</n><item bad='1'><name>u</name><kind>a</kind></item></r>", "unknown_attribute"),
            ("<r><n>1</n><item tag='y'><name>u</name><kind>a</kind></item></r>", "invalid_attribute_value"),
            ("<r><n>1<m/></n></r>", "unexpected_children"),
            ("<r>text<n>1</n></r>", "unexpected_text"),
            (
                "<r><n>1</n><item><name>u</name><kind>a</kind></item><item><name>u</name><kind>a</kind></item></r>",
                "duplicate_value",
            ),
        ];
        for (doc, rule) in cases {
            let r = check(doc);
            assert!(r.has_rule(rule), "{doc}: expected {rule}, got {r}");
        }
    }

    #[test]
    fn repeated_elements_get_indexed_paths() {
        let r = check("<r><n>1</n><item><name>a</name><kind>a</kind></item><item><name>b</name><kind>q</kind></item></r>");
        assert_eq!(r.issues().len(), 1);
        assert_eq!(r.issues()[0].path, "/r/item[2]/kind");
    }

    #[test]
    fn validation_is_pure() {
        let doc = "<r><n>x</n><zz/></r>";
        assert_eq!(check(doc), check(doc));
    }

    #[test]
    fn malformed_rule_files_rejected() {
        assert!(Schema::from_toml("root = 1").is_err());
        assert!(Schema::from_toml("root = \"r\"\n[[element]]\npath = \"r/a/b\"").is_err());
        assert!(
            Schema::from_toml("root = \"r\"\n[[element]]\npath = \"r/a\"\ntype = \"enum\"")
                .is_err()
        );
    }

    #[test]
    fn shipped_rules_parse() {
        for k in DocumentKind::ALL {
            let s = Schema::builtin(k);
            assert!(!s.elements.is_empty());
        }
    }
}
