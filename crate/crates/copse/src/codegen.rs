//! Source-text emission: turns a class table into a C# subtyping machine,
//! and a word grammar into a full fluent-API source file.
//!
//! The emitted machine is a set of empty generic interfaces whose
//! inheritance clauses mirror the table's supertype declarations. A word
//! `w1 … wn` is encoded as the nested type `wn<…<w1<BOTTOM>>…>`, and the
//! machine accepts the word exactly when the entry interface is a subtype
//! of that encoding, which the host compiler checks through a `where`
//! constraint. [`compile_machine`] runs the whole pipeline from a string
//! grammar: reverse the grammar, convert to head-terminal normal form,
//! re-read it as a monadic tree grammar, extract the class table, and emit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use crate::analysis::{classify, AnalysisError, FeatureSet};
use crate::grammars::{
    cfg_to_gnf, cfg_to_monadic_cftg, cyk_member, reverse_cfg, GrammarError, StringCfg,
};
use crate::subtyping::{
    decide_non_contravariant, DecideError, QueryError, QueryRelation, SubtypeQuery,
};
use crate::table::{AlphabetSplit, ClassDecl, ClassTable};
use crate::term::{ClassName, GroundType, TypePattern, Variance};
use crate::transforms::{gnf_cftg_to_class_table, TransformError};

#[derive(Debug, Error)]
pub enum EmitError {
    #[error(transparent)]
    IllFormed(#[from] AnalysisError),
    #[error("contravariant tables have no interface encoding ({0})")]
    ContravariantTable(FeatureSet),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("identifier collision: {0}")]
    IdentifierCollision(String),
    #[error("token `{0}` has no rank-1 class in the machine table")]
    UnknownToken(String),
    #[error("entry supertype uses `{0}`, which the table does not declare")]
    UndeclaredClass(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// Failure while running a compiled machine on a word.
#[derive(Debug, Error)]
pub enum MachineError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Decide(#[from] DecideError),
}

/// Names controlling the emitted source. `for_entry("Canvas")` picks the
/// conventional derived names: namespace `CanvasAPI`, token enum
/// `CanvasToken`, output file `CanvasAPI.cs`, bottom interface `BOTTOM`.
#[derive(Debug, Clone)]
pub struct EmitterConfig {
    pub namespace_name: String,
    pub entry_name: String,
    pub bottom_name: String,
    pub token_enum_name: String,
    pub fluent: bool,
}

impl EmitterConfig {
    pub fn for_entry(entry: &str) -> EmitterConfig {
        EmitterConfig {
            namespace_name: format!("{entry}API"),
            entry_name: entry.to_string(),
            bottom_name: "BOTTOM".to_string(),
            token_enum_name: format!("{entry}Token"),
            fluent: false,
        }
    }

    pub fn with_fluent(mut self, fluent: bool) -> EmitterConfig {
        self.fluent = fluent;
        self
    }

    pub fn output_file_name(&self) -> String {
        format!("{}API.cs", self.entry_name)
    }
}

/// Emitted source text plus a machine-readable summary. The machine text is
/// always present; the fluent block exists only when requested and splices
/// into the machine namespace in [`GeneratedSource::full_source`].
#[derive(Debug, Clone)]
pub struct GeneratedSource {
    pub machine_text: String,
    pub fluent_text: Option<String>,
    pub manifest: serde_json::Value,
}

impl GeneratedSource {
    /// Complete output file: the machine namespace with the fluent block,
    /// if any, nested before the closing brace.
    pub fn full_source(&self) -> String {
        match &self.fluent_text {
            None => self.machine_text.clone(),
            Some(fluent) => {
                // Machine text ends with the namespace's closing brace.
                let close = self.machine_text.rfind('}').expect("machine text closes a namespace");
                let mut out = String::with_capacity(self.machine_text.len() + fluent.len());
                out.push_str(&self.machine_text[..close]);
                out.push_str(fluent);
                out.push_str(&self.machine_text[close..]);
                out
            }
        }
    }
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Generic-parameter names used in emitted interfaces: `_x` for rank 1,
/// `_x1 … _xk` above that.
fn emitted_params(rank: usize) -> Vec<String> {
    match rank {
        0 => Vec::new(),
        1 => vec!["_x".to_string()],
        k => (1..=k).map(|i| format!("_x{i}")).collect(),
    }
}

fn render_ground(t: &GroundType) -> String {
    if t.children().is_empty() {
        t.class().name().to_string()
    } else {
        let inner: Vec<String> = t.children().iter().map(render_ground).collect();
        format!("{}<{}>", t.class().name(), inner.join(", "))
    }
}

fn render_pattern(p: &TypePattern, names: &BTreeMap<&str, &str>) -> String {
    match p {
        TypePattern::Param(name) => names
            .get(name.as_ref())
            .expect("well-formed tables bind every parameter")
            .to_string(),
        TypePattern::Node(class, children) => {
            if children.is_empty() {
                class.name().to_string()
            } else {
                let inner: Vec<String> =
                    children.iter().map(|c| render_pattern(c, names)).collect();
                format!("{}<{}>", class.name(), inner.join(", "))
            }
        }
    }
}

fn interface_header(decl: &ClassDecl) -> String {
    let emitted = emitted_params(decl.rank());
    if emitted.is_empty() {
        return decl.name().to_string();
    }
    let params: Vec<String> = decl
        .params()
        .iter()
        .zip(&emitted)
        .map(|((_, variance), fresh)| match variance {
            Variance::Covariant => format!("out {fresh}"),
            _ => fresh.clone(),
        })
        .collect();
    format!("{}<{}>", decl.name(), params.join(", "))
}

fn terminal_slot(decl: &ClassDecl, cfg: &EmitterConfig) -> bool {
    decl.name() != cfg.bottom_name
        && decl.supers().is_empty()
        && decl.params().iter().all(|(_, v)| *v == Variance::Covariant)
}

/// Emits the subtyping machine for a table: one empty interface per class,
/// a bottom interface, and an entry interface extending the rendered
/// `bottom_type`. Classes without supertypes and with only covariant
/// parameters come first, sorted by name; the rest keep declaration order.
/// Refuses contravariant tables, which the encoding cannot express.
pub fn emit_subtyping_machine_source(
    table: &ClassTable,
    bottom_type: &GroundType,
    cfg: &EmitterConfig,
) -> Result<GeneratedSource, EmitError> {
    for name in [&cfg.namespace_name, &cfg.entry_name, &cfg.bottom_name, &cfg.token_enum_name] {
        if !valid_identifier(name) {
            return Err(EmitError::InvalidIdentifier(name.clone()));
        }
    }
    for decl in table.decls() {
        if !valid_identifier(decl.name()) {
            return Err(EmitError::InvalidIdentifier(decl.name().to_string()));
        }
    }
    let features = classify(table)?;
    if features.uses_contravariance {
        return Err(EmitError::ContravariantTable(features));
    }
    if cfg.entry_name == cfg.bottom_name {
        return Err(EmitError::IdentifierCollision(format!(
            "entry interface `{}` is also the bottom interface",
            cfg.entry_name
        )));
    }
    if let Some(decl) = table.get(&cfg.bottom_name) {
        // A declared class may occupy the bottom slot only if it looks like
        // the bottom interface itself.
        if decl.rank() != 0 || !decl.supers().is_empty() {
            return Err(EmitError::IdentifierCollision(format!(
                "class `{}` cannot double as the bottom interface; it needs rank 0 and no supertypes",
                cfg.bottom_name
            )));
        }
    }
    if let Some(decl) = table.get(&cfg.entry_name) {
        if decl.rank() == 0 {
            return Err(EmitError::IdentifierCollision(format!(
                "entry interface `{}` clashes with a rank-0 class of the same name",
                cfg.entry_name
            )));
        }
    }
    for class in bottom_type.classes() {
        let is_bottom_leaf = class.name() == cfg.bottom_name && class.rank() == 0;
        if !table.declares(class) && !is_bottom_leaf {
            return Err(EmitError::UndeclaredClass(class.name().to_string()));
        }
    }

    let mut terminals: Vec<&ClassDecl> =
        table.decls().iter().filter(|d| terminal_slot(d, cfg)).collect();
    terminals.sort_by(|a, b| a.name().cmp(b.name()));
    let variables: Vec<&ClassDecl> = table
        .decls()
        .iter()
        .filter(|d| d.name() != cfg.bottom_name && !terminal_slot(d, cfg))
        .collect();

    let mut text = String::new();
    let _ = writeln!(text, "namespace {} {{", cfg.namespace_name);
    for decl in &terminals {
        let _ = writeln!(text, "  public interface {} {{}}", interface_header(decl));
    }
    for decl in &variables {
        let emitted = emitted_params(decl.rank());
        let names: BTreeMap<&str, &str> = decl
            .params()
            .iter()
            .zip(&emitted)
            .map(|((declared, _), fresh)| (declared.as_ref(), fresh.as_str()))
            .collect();
        let supers: Vec<String> =
            decl.supers().iter().map(|s| render_pattern(s, &names)).collect();
        if supers.is_empty() {
            let _ = writeln!(text, "  public interface {} {{}}", interface_header(decl));
        } else {
            let _ = writeln!(
                text,
                "  public interface {} : {} {{}}",
                interface_header(decl),
                supers.join(", ")
            );
        }
    }
    let _ = writeln!(text, "  public interface {} {{}}", cfg.bottom_name);
    let _ = writeln!(
        text,
        "  public interface {} : {} {{}}",
        cfg.entry_name,
        render_ground(bottom_type)
    );
    text.push_str("}\n");

    let mut interfaces = serde_json::Map::new();
    for decl in table.decls() {
        let slot = if decl.name() == cfg.bottom_name {
            "bottom"
        } else if terminal_slot(decl, cfg) {
            "terminal"
        } else {
            "variable"
        };
        interfaces.insert(
            decl.name().to_string(),
            json!({
                "arity": decl.rank(),
                "slot": slot,
                "supertypes": decl.supers().len(),
            }),
        );
    }
    let manifest = json!({
        "namespace": cfg.namespace_name,
        "entry": cfg.entry_name,
        "entryExtends": render_ground(bottom_type),
        "bottom": cfg.bottom_name,
        "bottomDeclared": table.contains(&cfg.bottom_name),
        "file": cfg.output_file_name(),
        "interfaces": interfaces,
        "fluent": serde_json::Value::Null,
    });
    Ok(GeneratedSource { machine_text: text, fluent_text: None, manifest })
}

/// Emits the machine for `table` plus a nested `FluentAPI` namespace: a
/// value-collecting `Wrapper<T>`, the token enum, and a `Start` class with
/// one starting and one chaining method per token (sorted by name). A
/// parameterless `Done` overload appears exactly when the grammar accepts
/// the empty word. Tokens are the grammar's terminals and must each have a
/// rank-1 class in the table.
pub fn emit_fluent_api_source(
    g: &StringCfg,
    table: &ClassTable,
    bottom_type: &GroundType,
    cfg: &EmitterConfig,
) -> Result<GeneratedSource, EmitError> {
    let mut source = emit_subtyping_machine_source(table, bottom_type, cfg)?;
    let mut tokens: Vec<&str> = g.terminals().iter().map(String::as_str).collect();
    tokens.sort_unstable();
    for token in &tokens {
        if !valid_identifier(token) {
            return Err(EmitError::InvalidIdentifier(token.to_string()));
        }
        if *token == "Done" {
            return Err(EmitError::IdentifierCollision(
                "token `Done` clashes with the finishing method".to_string(),
            ));
        }
        match table.get(token) {
            Some(decl) if decl.rank() == 1 => {}
            _ => return Err(EmitError::UnknownToken(token.to_string())),
        }
    }
    for reserved in ["Wrapper", "Start"] {
        if cfg.token_enum_name == reserved || tokens.contains(&reserved) {
            return Err(EmitError::IdentifierCollision(format!(
                "`{reserved}` is reserved inside the fluent namespace"
            )));
        }
    }
    if tokens.contains(&cfg.token_enum_name.as_str()) {
        return Err(EmitError::IdentifierCollision(format!(
            "token enum `{}` is also a token",
            cfg.token_enum_name
        )));
    }

    let empty_word = cyk_member::<&str>(g, &[]);
    let tok = &cfg.token_enum_name;
    let bottom = &cfg.bottom_name;
    let list = format!("System.Collections.Generic.List<{tok}>");

    let mut f = String::new();
    f.push_str("  namespace FluentAPI {\n");
    let _ = writeln!(f, "    public class Wrapper<T> {{");
    let _ = writeln!(f, "      public readonly {list} values =");
    let _ = writeln!(f, "        new {list}();");
    let _ = writeln!(f, "      public Wrapper<T> AddRange<S>(Wrapper<S> other) {{");
    let _ = writeln!(f, "        this.values.AddRange(other.values);");
    let _ = writeln!(f, "        return this;");
    let _ = writeln!(f, "      }}");
    let _ = writeln!(f, "      public Wrapper<T> Add({tok} value) {{");
    let _ = writeln!(f, "        values.Add(value);");
    let _ = writeln!(f, "        return this;");
    let _ = writeln!(f, "      }}");
    let _ = writeln!(f, "      public {list} Done<API>() where API : T {{");
    let _ = writeln!(f, "        return values;");
    let _ = writeln!(f, "      }}");
    let _ = writeln!(f, "    }}");
    let mut members = String::new();
    for token in &tokens {
        let _ = write!(members, "{token}, ");
    }
    let _ = writeln!(f, "    public enum {tok} {{ {members}}}");
    let _ = writeln!(f, "    public static class Start {{");
    for token in &tokens {
        let _ = writeln!(f, "      public static Wrapper<{token}<{bottom}>> {token}() {{");
        let _ = writeln!(
            f,
            "        return new Wrapper<{token}<{bottom}>>().Add({tok}.{token}); }}"
        );
        let _ = writeln!(
            f,
            "      public static Wrapper<{token}<_x>> {token}<_x>(this Wrapper<_x> _wrapper) {{"
        );
        let _ = writeln!(
            f,
            "        return new Wrapper<{token}<_x>>().AddRange(_wrapper).Add({tok}.{token}); }}"
        );
    }
    if empty_word {
        let _ = writeln!(f, "      public static {list} Done<{}>() {{", cfg.entry_name);
        let _ = writeln!(f, "        return new {list}(); }}");
    }
    f.push_str("    }\n");
    f.push_str("  }\n");

    source.fluent_text = Some(f);
    let manifest =
        source.manifest.as_object_mut().expect("manifest is an object");
    manifest.insert(
        "fluent".to_string(),
        json!({
            "enum": tok,
            "tokens": tokens,
            "emptyWordDone": empty_word,
        }),
    );
    Ok(source)
}

/// A fully compiled machine: the normal-form grammar it encodes, the class
/// table behind the interfaces, and the emitted source.
#[derive(Debug, Clone)]
pub struct CompiledMachine {
    pub config: EmitterConfig,
    /// Reversed, head-terminal form of the input grammar.
    pub gnf: StringCfg,
    pub empty_word: bool,
    pub table: ClassTable,
    pub bottom_type: GroundType,
    pub split: AlphabetSplit,
    pub source: GeneratedSource,
}

impl CompiledMachine {
    /// Runs the machine on a word given in call order (leftmost token
    /// first), mirroring what the host compiler would check for the
    /// corresponding fluent chain.
    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> Result<bool, MachineError> {
        if word.is_empty() {
            return Ok(self.empty_word);
        }
        let right = encode_chain(word, &self.config.bottom_name);
        let query = SubtypeQuery::new(
            self.bottom_type.clone(),
            QueryRelation::Sub,
            right,
            self.split.clone(),
        )?;
        Ok(decide_non_contravariant(&self.table, &query)?.holds())
    }
}

/// Full pipeline from a word grammar to emitted source: reverse the
/// grammar, normalize it so every production starts with a terminal, read
/// the result as a monadic tree grammar over the bottom marker, extract the
/// class table, and emit the machine (plus the fluent block when the config
/// asks for it). Reversal makes the table accept chains built inside-out,
/// so fluent call order equals word order.
pub fn compile_machine(g: &StringCfg, cfg: &EmitterConfig) -> Result<CompiledMachine, EmitError> {
    let reversed = reverse_cfg(g);
    let gnf = cfg_to_gnf(&reversed);
    let monadic = cfg_to_monadic_cftg(&gnf.grammar, &cfg.bottom_name)?;
    let (table, bottom_type, split) = gnf_cftg_to_class_table(&monadic, true)?;
    let source = if cfg.fluent {
        emit_fluent_api_source(g, &table, &bottom_type, cfg)?
    } else {
        emit_subtyping_machine_source(&table, &bottom_type, cfg)?
    };
    Ok(CompiledMachine {
        config: cfg.clone(),
        gnf: gnf.grammar,
        empty_word: gnf.empty_word,
        table,
        bottom_type,
        split,
        source,
    })
}

/// Encodes a fluent call chain as a ground type: each call wraps the
/// accumulated type, so the first token ends up innermost around the bottom
/// leaf and the last token outermost.
pub fn encode_chain<S: AsRef<str>>(word: &[S], bottom_name: &str) -> GroundType {
    let mut t = GroundType::leaf(bottom_name);
    for token in word {
        t = GroundType::new(ClassName::new(token.as_ref(), 1), vec![t]);
    }
    t
}

/// Shape of one interface after normalization: per-parameter variance
/// markers (`true` for `out`) and the multiset of supertype strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceShape {
    pub variance_markers: Vec<bool>,
    pub supers: BTreeMap<String, usize>,
}

/// Layout-independent view of an emitted source file, for comparing
/// against stored golden output. Fresh machine names (interfaces that have
/// supertypes and at least one generic parameter) are canonicalized to
/// `M0, M1, …` in declaration order, so two sources compare equal exactly
/// when they declare the same interfaces up to renaming, the same enums,
/// and the same method signatures.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedSource {
    /// Keyed by `name/arity` after canonicalization.
    pub interfaces: BTreeMap<String, InterfaceShape>,
    pub enums: BTreeMap<String, BTreeSet<String>>,
    pub methods: BTreeSet<String>,
}

struct RawInterface {
    name: String,
    markers: Vec<bool>,
    supers: Vec<String>,
}

/// Splits on commas that sit outside any angle brackets.
fn split_top_level(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '<' => {
                depth += 1;
                current.push(c);
            }
            '>' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            ',' if depth == 0 => {
                parts.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(c),
        }
    }
    let last = current.trim();
    if !last.is_empty() {
        parts.push(last.to_string());
    }
    parts
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Replaces `from<` with `to<` wherever `from` starts at a word boundary.
fn rewrite_applications(text: &str, from: &str, to: &str) -> String {
    let needle = format!("{from}<");
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(at) = rest.find(&needle) {
        let prev_is_ident = if at > 0 {
            rest[..at].chars().next_back().is_some_and(is_ident_char)
        } else {
            out.chars().next_back().is_some_and(is_ident_char)
        };
        out.push_str(&rest[..at]);
        if prev_is_ident {
            out.push_str(&needle);
        } else {
            out.push_str(to);
            out.push('<');
        }
        rest = &rest[at + needle.len()..];
    }
    out.push_str(rest);
    out
}

/// Parses an emitted (or transcribed) source into its normalized form.
/// Understands exactly the dialect the emitter produces: empty interfaces
/// with optional generic parameter lists and inheritance clauses, enums
/// with plain members, and method signatures ending at the opening brace.
pub fn normalize_source(text: &str) -> NormalizedSource {
    let collapsed: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let bytes = collapsed.as_bytes();

    let mut raw: Vec<RawInterface> = Vec::new();
    let mut search = 0usize;
    while let Some(found) = collapsed[search..].find("interface ") {
        let at = search + found;
        search = at + "interface ".len();
        if at > 0 && is_ident_char(collapsed[..at].chars().next_back().unwrap()) {
            continue;
        }
        let mut i = search;
        let name_start = i;
        while i < bytes.len() && is_ident_char(bytes[i] as char) {
            i += 1;
        }
        let name = collapsed[name_start..i].to_string();
        if name.is_empty() {
            continue;
        }
        while i < bytes.len() && bytes[i] == b' ' {
            i += 1;
        }
        let mut markers = Vec::new();
        if i < bytes.len() && bytes[i] == b'<' {
            let mut depth = 0usize;
            let params_start = i + 1;
            let mut end = i;
            for (offset, c) in collapsed[i..].char_indices() {
                match c {
                    '<' => depth += 1,
                    '>' => {
                        depth -= 1;
                        if depth == 0 {
                            end = i + offset;
                            break;
                        }
                    }
                    _ => {}
                }
            }
            for part in split_top_level(&collapsed[params_start..end]) {
                markers.push(part.starts_with("out ") || part == "out");
            }
            i = end + 1;
        }
        while i < bytes.len() && bytes[i] == b' ' {
            i += 1;
        }
        let mut supers = Vec::new();
        if i < bytes.len() && bytes[i] == b':' {
            i += 1;
            let supers_start = i;
            let brace = collapsed[i..].find('{').map_or(bytes.len(), |o| i + o);
            supers = split_top_level(&collapsed[supers_start..brace]);
            i = brace;
        }
        raw.push(RawInterface { name, markers, supers });
        search = i;
    }

    // Fresh machine names: parameterized interfaces with supertypes, in
    // declaration order.
    let mut canon: Vec<(String, String)> = Vec::new();
    for decl in &raw {
        if !decl.markers.is_empty()
            && !decl.supers.is_empty()
            && !canon.iter().any(|(orig, _)| *orig == decl.name)
        {
            canon.push((decl.name.clone(), format!("M{}", canon.len())));
        }
    }
    let rename = |s: &str| -> String {
        let mut out = s.to_string();
        for (orig, fresh) in &canon {
            out = rewrite_applications(&out, orig, fresh);
        }
        out
    };

    let mut interfaces = BTreeMap::new();
    for decl in &raw {
        let name = canon
            .iter()
            .find(|(orig, _)| *orig == decl.name && !decl.markers.is_empty())
            .map_or(decl.name.clone(), |(_, fresh)| fresh.clone());
        let mut supers = BTreeMap::new();
        for s in &decl.supers {
            *supers.entry(rename(s)).or_insert(0usize) += 1;
        }
        interfaces.insert(
            format!("{}/{}", name, decl.markers.len()),
            InterfaceShape { variance_markers: decl.markers.clone(), supers },
        );
    }

    let mut enums = BTreeMap::new();
    let mut search = 0usize;
    while let Some(found) = collapsed[search..].find("enum ") {
        let at = search + found;
        search = at + "enum ".len();
        if at > 0 && is_ident_char(collapsed[..at].chars().next_back().unwrap()) {
            continue;
        }
        let mut i = search;
        let name_start = i;
        while i < bytes.len() && is_ident_char(bytes[i] as char) {
            i += 1;
        }
        let name = collapsed[name_start..i].to_string();
        let open = match collapsed[i..].find('{') {
            Some(o) => i + o + 1,
            None => break,
        };
        let close = match collapsed[open..].find('}') {
            Some(o) => open + o,
            None => break,
        };
        let members: BTreeSet<String> = collapsed[open..close]
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(str::to_string)
            .collect();
        enums.insert(name, members);
        search = close;
    }

    let mut methods = BTreeSet::new();
    let mut search = 0usize;
    while let Some(found) = collapsed[search..].find("public ") {
        let at = search + found;
        search = at + "public ".len();
        if at > 0 && is_ident_char(collapsed[..at].chars().next_back().unwrap()) {
            continue;
        }
        let stop = collapsed[at..]
            .find(['{', ';'])
            .map_or(collapsed.len(), |o| at + o);
        let slice = collapsed[at..stop].trim();
        let paren = slice.find('(');
        let assign = slice.find('=');
        let is_method = match (paren, assign) {
            (Some(p), Some(a)) => p < a,
            (Some(_), None) => true,
            _ => false,
        };
        if is_method {
            methods.insert(rename(slice));
        }
        search = stop;
    }

    NormalizedSource { interfaces, enums, methods }
}
