//! Text and JSON serialization for class tables, type patterns, ground
//! types, and subtyping queries.
//!
//! The text format is line-oriented: one declaration per line,
//! `name(+x1, ox2) : super1, super2`, with `: _` for an empty supertype
//! list and `#` starting a comment. Supertype patterns accept both explicit
//! parentheses (`a(v0(a(x)))`) and monadic juxtaposition (`a v0 a x`),
//! which right-folds so every non-final name takes the rest as its single
//! argument.
//!
//! The JSON form writes patterns as nested arrays `["name", child, …]`
//! with parameters as bare strings, and variances as "+", "-", "o".

use std::collections::BTreeSet;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::subtyping::QueryRelation;
use crate::table::{ClassDecl, ClassTable, TableError};
use crate::term::{ClassName, GroundType, TypePattern, Variance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("bad pattern: {0}")]
    Pattern(String),
    #[error("bad query: {0}")]
    Query(String),
    #[error("bad JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Decl(#[from] TableError),
}

fn pattern_err(message: impl Into<String>) -> FormatError {
    FormatError::Pattern(message.into())
}

// ---------------------------------------------------------------- text form

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Open,
    Close,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<Tok>, FormatError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                toks.push(Tok::Open);
                chars.next();
            }
            ')' => {
                toks.push(Tok::Close);
                chars.next();
            }
            ',' => {
                toks.push(Tok::Comma);
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Ident(ident));
            }
            other => return Err(pattern_err(format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }
}

/// One parsed atom: a name with either explicit arguments or none.
struct Atom {
    name: String,
    args: Option<Vec<TypePattern>>,
}

fn parse_sequence(cursor: &mut Cursor, params: &BTreeSet<&str>) -> Result<TypePattern, FormatError> {
    let mut atoms: Vec<Atom> = Vec::new();
    loop {
        match cursor.peek() {
            Some(Tok::Ident(name)) => {
                cursor.next();
                let args = if cursor.peek() == Some(&Tok::Open) {
                    cursor.next();
                    let mut args = vec![parse_sequence(cursor, params)?];
                    loop {
                        match cursor.next() {
                            Some(Tok::Comma) => args.push(parse_sequence(cursor, params)?),
                            Some(Tok::Close) => break,
                            _ => return Err(pattern_err("unbalanced parentheses")),
                        }
                    }
                    Some(args)
                } else {
                    None
                };
                atoms.push(Atom { name: name.clone(), args });
            }
            _ if !atoms.is_empty() => break,
            _ => return Err(pattern_err("expected a name")),
        }
    }
    // Right-fold juxtaposition: every atom but the last wraps the rest as
    // its single child.
    let last = atoms.pop().expect("at least one atom");
    let mut acc = match last.args {
        Some(children) => {
            if params.contains(last.name.as_str()) {
                return Err(pattern_err(format!("parameter `{}` cannot take arguments", last.name)));
            }
            TypePattern::node(ClassName::new(last.name.as_str(), children.len()), children)
        }
        None if params.contains(last.name.as_str()) => TypePattern::param(last.name.as_str()),
        None => TypePattern::leaf(last.name.as_str()),
    };
    for atom in atoms.into_iter().rev() {
        if atom.args.is_some() {
            return Err(pattern_err(format!(
                "`{}` has explicit arguments and cannot also be applied by juxtaposition",
                atom.name
            )));
        }
        if params.contains(atom.name.as_str()) {
            return Err(pattern_err(format!("parameter `{}` cannot take arguments", atom.name)));
        }
        acc = TypePattern::node(ClassName::new(atom.name.as_str(), 1), vec![acc]);
    }
    Ok(acc)
}

/// Parses one type pattern; identifiers in `params` become parameters,
/// everything else a class node.
pub fn parse_type_pattern(text: &str, params: &BTreeSet<&str>) -> Result<TypePattern, FormatError> {
    let toks = tokenize(text)?;
    let mut cursor = Cursor { toks: &toks, pos: 0 };
    let pattern = parse_sequence(&mut cursor, params)?;
    if cursor.peek().is_some() {
        return Err(pattern_err(format!("trailing input after pattern in `{text}`")));
    }
    Ok(pattern)
}

/// Parses a ground type (no parameters permitted).
pub fn parse_ground_type(text: &str) -> Result<GroundType, FormatError> {
    let pattern = parse_type_pattern(text, &BTreeSet::new())?;
    pattern
        .to_ground()
        .ok_or_else(|| pattern_err(format!("`{text}` is not ground")))
}

/// Splits on top-level commas, respecting parentheses.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(text[start..].trim());
    parts
}

/// Parses the line-oriented class-table format.
pub fn parse_class_table(text: &str) -> Result<ClassTable, FormatError> {
    let mut decls: Vec<ClassDecl> = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let number = index + 1;
        let table_err = |message: String| FormatError::Table { line: number, message };
        let Some((header, supers_part)) = line.split_once(':') else {
            return Err(table_err("missing `:` separator".to_string()));
        };
        let header = header.trim();
        let (name, params) = match header.split_once('(') {
            None => (header, Vec::new()),
            Some((name, rest)) => {
                let Some(inner) = rest.trim_end().strip_suffix(')') else {
                    return Err(table_err(format!("unclosed parameter list in `{header}`")));
                };
                let mut params = Vec::new();
                for piece in inner.split(',') {
                    let piece = piece.trim();
                    let mut chars = piece.chars();
                    let Some(marker) = chars.next() else {
                        return Err(table_err("empty parameter".to_string()));
                    };
                    let Some(variance) = Variance::from_symbol(marker) else {
                        return Err(table_err(format!(
                            "parameter `{piece}` must start with `+`, `-`, or `o`"
                        )));
                    };
                    let param_name: String = chars.collect();
                    if param_name.is_empty() {
                        return Err(table_err(format!("parameter `{piece}` has no name")));
                    }
                    params.push((param_name, variance));
                }
                (name.trim(), params)
            }
        };
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(table_err(format!("bad class name `{name}`")));
        }
        let param_names: BTreeSet<&str> = params.iter().map(|(n, _)| n.as_str()).collect();
        let supers_part = supers_part.trim();
        let supers: Vec<TypePattern> = if supers_part == "_" {
            Vec::new()
        } else {
            split_top_level(supers_part)
                .into_iter()
                .map(|piece| {
                    if piece.is_empty() {
                        return Err(table_err("empty supertype entry".to_string()));
                    }
                    parse_type_pattern(piece, &param_names)
                        .map_err(|e| table_err(e.to_string()))
                })
                .collect::<Result<_, _>>()?
        };
        let params: Vec<(Arc<str>, Variance)> =
            params.into_iter().map(|(n, v)| (n.into(), v)).collect();
        decls.push(ClassDecl::new(name, params, supers));
    }
    Ok(ClassTable::new(decls)?)
}

/// Parses `t <: t'`, `t :> t'`, or `t = t'` over ground types.
pub fn parse_query(text: &str) -> Result<(GroundType, QueryRelation, GroundType), FormatError> {
    let candidates: [(&str, QueryRelation); 3] = [
        ("<:", QueryRelation::Sub),
        (":>", QueryRelation::Sup),
        ("=", QueryRelation::Eq),
    ];
    for (sep, rel) in candidates {
        if let Some((left, right)) = text.split_once(sep) {
            let left = parse_ground_type(left.trim()).map_err(|e| FormatError::Query(e.to_string()))?;
            let right =
                parse_ground_type(right.trim()).map_err(|e| FormatError::Query(e.to_string()))?;
            return Ok((left, rel, right));
        }
    }
    Err(FormatError::Query(format!(
        "`{text}` has none of the relations `<:`, `:>`, `=`"
    )))
}

// ---------------------------------------------------------------- JSON form

/// Pattern as nested arrays; parameters as bare strings.
pub fn pattern_to_json(pattern: &TypePattern) -> Value {
    match pattern {
        TypePattern::Param(name) => Value::String(name.to_string()),
        TypePattern::Node(class, children) => {
            let mut items = vec![Value::String(class.name().to_string())];
            items.extend(children.iter().map(pattern_to_json));
            Value::Array(items)
        }
    }
}

pub fn pattern_from_json(value: &Value, params: &BTreeSet<&str>) -> Result<TypePattern, FormatError> {
    match value {
        Value::String(name) => {
            if params.contains(name.as_str()) {
                Ok(TypePattern::param(name.as_str()))
            } else {
                Err(FormatError::Json(format!(
                    "bare string `{name}` is not a declared parameter; wrap leaf classes as [\"{name}\"]"
                )))
            }
        }
        Value::Array(items) => {
            let Some(Value::String(name)) = items.first() else {
                return Err(FormatError::Json("pattern array must start with a name".to_string()));
            };
            let children: Vec<TypePattern> = items[1..]
                .iter()
                .map(|child| pattern_from_json(child, params))
                .collect::<Result<_, _>>()?;
            Ok(TypePattern::node(ClassName::new(name.as_str(), children.len()), children))
        }
        other => Err(FormatError::Json(format!("pattern must be a string or array, got {other}"))),
    }
}

pub fn ground_type_to_json(t: &GroundType) -> Value {
    pattern_to_json(&TypePattern::from_ground(t))
}

pub fn ground_type_from_json(value: &Value) -> Result<GroundType, FormatError> {
    let pattern = pattern_from_json(value, &BTreeSet::new())?;
    pattern
        .to_ground()
        .ok_or_else(|| FormatError::Json("type is not ground".to_string()))
}

pub fn class_table_to_json(table: &ClassTable) -> Value {
    let classes: Vec<Value> = table
        .decls()
        .iter()
        .map(|decl| {
            json!({
                "name": decl.name(),
                "params": decl
                    .params()
                    .iter()
                    .map(|(name, variance)| json!({
                        "name": name.as_ref(),
                        "variance": variance.symbol().to_string(),
                    }))
                    .collect::<Vec<_>>(),
                "supers": decl.supers().iter().map(pattern_to_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "classes": classes })
}

pub fn class_table_from_json(value: &Value) -> Result<ClassTable, FormatError> {
    let classes = value
        .get("classes")
        .and_then(Value::as_array)
        .ok_or_else(|| FormatError::Json("missing `classes` array".to_string()))?;
    let mut decls = Vec::new();
    for class in classes {
        let name = class
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| FormatError::Json("class missing `name`".to_string()))?;
        let mut params: Vec<(Arc<str>, Variance)> = Vec::new();
        for param in class.get("params").and_then(Value::as_array).unwrap_or(&Vec::new()) {
            let param_name = param
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| FormatError::Json("param missing `name`".to_string()))?;
            let symbol = param
                .get("variance")
                .and_then(Value::as_str)
                .and_then(|s| s.chars().next())
                .ok_or_else(|| FormatError::Json("param missing `variance`".to_string()))?;
            let variance = Variance::from_symbol(symbol).ok_or_else(|| {
                FormatError::Json(format!("unknown variance `{symbol}` (use +, -, o)"))
            })?;
            params.push((param_name.into(), variance));
        }
        let param_names: BTreeSet<&str> = params.iter().map(|(n, _)| n.as_ref()).collect();
        let mut supers = Vec::new();
        for sup in class.get("supers").and_then(Value::as_array).unwrap_or(&Vec::new()) {
            supers.push(pattern_from_json(sup, &param_names)?);
        }
        decls.push(ClassDecl::new(name, params, supers));
    }
    Ok(ClassTable::new(decls)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fixture_tables_round_trip_through_text() {
        for table in [
            fixtures::palindrome_table(),
            fixtures::contra_pair_table(),
            fixtures::mixed_features_table(),
            fixtures::pair_positions_table(),
        ] {
            let text = table.to_string();
            let back = parse_class_table(&text).unwrap();
            assert_eq!(back.to_string(), text);
        }
    }

    #[test]
    fn fixture_tables_round_trip_through_json() {
        for table in [
            fixtures::palindrome_table(),
            fixtures::contra_pair_table(),
            fixtures::mixed_features_table(),
        ] {
            let value = class_table_to_json(&table);
            let back = class_table_from_json(&value).unwrap();
            assert_eq!(back.to_string(), table.to_string());
        }
    }

    #[test]
    fn juxtaposition_right_folds() {
        let params: BTreeSet<&str> = BTreeSet::from(["x"]);
        let folded = parse_type_pattern("a v0 a x", &params).unwrap();
        let explicit = parse_type_pattern("a(v0(a(x)))", &params).unwrap();
        assert_eq!(folded, explicit);
        // Mixed: juxtaposition down to an explicit application.
        let mixed = parse_type_pattern("b a(x)", &params).unwrap();
        assert_eq!(mixed, parse_type_pattern("b(a(x))", &params).unwrap());
    }

    #[test]
    fn juxtaposition_onto_an_applied_atom_is_rejected() {
        let params: BTreeSet<&str> = BTreeSet::new();
        let err = parse_type_pattern("a(b) c", &params).unwrap_err();
        assert!(matches!(err, FormatError::Pattern(_)));
    }

    #[test]
    fn parameters_cannot_take_arguments() {
        let params: BTreeSet<&str> = BTreeSet::from(["x"]);
        assert!(parse_type_pattern("x(a)", &params).is_err());
        assert!(parse_type_pattern("x a", &params).is_err());
    }

    #[test]
    fn table_text_accepts_the_juxtaposed_chain_layout() {
        let text = "\
# palindrome machine
a(+x) : _
b(+x) : _
E : _
v0(ox) : a v0 a x, a a x, a x, b v0 b x, b b x, b x
";
        let table = parse_class_table(text).unwrap();
        assert_eq!(table.to_string(), fixtures::palindrome_table().to_string());
    }

    #[test]
    fn table_parse_errors_carry_line_numbers() {
        let err = parse_class_table("a(+x) : _\nnonsense line\n").unwrap_err();
        assert!(matches!(err, FormatError::Table { line: 2, .. }));
        let err = parse_class_table("a(x) : _\n").unwrap_err();
        assert!(matches!(err, FormatError::Table { line: 1, .. }));
    }

    #[test]
    fn ground_types_parse_and_render() {
        let t = parse_ground_type("cons(s(z), nil)").unwrap();
        assert_eq!(t.to_string(), "cons(s(z), nil)");
        assert_eq!(parse_ground_type("a b b E").unwrap().to_string(), "a(b(b(E)))");
        assert!(parse_ground_type("cons(s(z)").is_err());
    }

    #[test]
    fn queries_parse_all_three_relations() {
        let (l, rel, r) = parse_query("v0(E) <: a(b(b(E)))").unwrap();
        assert_eq!(rel, QueryRelation::Sub);
        assert_eq!(l.to_string(), "v0(E)");
        assert_eq!(r.to_string(), "a(b(b(E)))");
        assert_eq!(parse_query("a(E) :> b(E)").unwrap().1, QueryRelation::Sup);
        assert_eq!(parse_query("E = E").unwrap().1, QueryRelation::Eq);
        assert!(parse_query("E E").is_err());
    }

    #[test]
    fn json_patterns_distinguish_params_from_leaf_classes() {
        let params: BTreeSet<&str> = BTreeSet::from(["x"]);
        let pattern = pattern_from_json(&serde_json::json!(["a", "x", ["E"]]), &params).unwrap();
        assert_eq!(pattern.to_string(), "a(x, E)");
        // A bare string that is not a parameter is an error, not a leaf.
        assert!(pattern_from_json(&serde_json::json!("E"), &params).is_err());
        assert_eq!(pattern_to_json(&pattern), serde_json::json!(["a", "x", ["E"]]));
    }
}
