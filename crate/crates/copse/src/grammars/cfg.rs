//! String context-free grammars: the `.cfg` file format, reversal, the
//! terminal-head normal-form pipeline, the monadic tree encoding, and a CYK
//! membership oracle.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tree::{Cftg, CftgProduction, GrammarError, RankedSymbol, TreeForm};

/// One production `lhs -> rhs` of a string grammar; an empty `rhs` is the
/// empty word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgProduction {
    pub lhs: String,
    pub rhs: Vec<String>,
}

/// A string context-free grammar. Variables are the symbols that appear on
/// some left-hand side; every other symbol is a terminal. Declaration order
/// of variables and productions is preserved, which downstream conversions
/// rely on for reproducible output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCfg", into = "RawCfg")]
pub struct StringCfg {
    start: String,
    variables: Vec<String>,
    terminals: Vec<String>,
    productions: Vec<CfgProduction>,
}

#[derive(Serialize, Deserialize)]
struct RawCfg {
    start: String,
    productions: Vec<CfgProduction>,
}

impl From<StringCfg> for RawCfg {
    fn from(g: StringCfg) -> RawCfg {
        RawCfg { start: g.start, productions: g.productions }
    }
}

impl TryFrom<RawCfg> for StringCfg {
    type Error = CfgError;

    fn try_from(raw: RawCfg) -> Result<StringCfg, CfgError> {
        StringCfg::new(raw.start, raw.productions.into_iter().map(|p| (p.lhs, p.rhs)))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfgError {
    #[error("line {line}: missing `::=` separator")]
    MissingSeparator { line: usize },
    #[error("line {line}: left-hand side must be a single symbol")]
    BadLhs { line: usize },
    #[error("no productions found")]
    NoProductions,
    #[error("start symbol `{0}` never appears as a left-hand side")]
    StartNotDeclared(String),
}

impl StringCfg {
    /// Builds a grammar from a start symbol and productions. The start must
    /// be a left-hand side unless the production list is empty (the empty
    /// language).
    pub fn new(
        start: impl Into<String>,
        productions: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Result<StringCfg, CfgError> {
        let start = start.into();
        let productions: Vec<CfgProduction> = productions
            .into_iter()
            .map(|(lhs, rhs)| CfgProduction { lhs, rhs })
            .collect();
        let mut variables: Vec<String> = Vec::new();
        for p in &productions {
            if !variables.contains(&p.lhs) {
                variables.push(p.lhs.clone());
            }
        }
        if productions.is_empty() {
            variables.push(start.clone());
        } else if !variables.contains(&start) {
            return Err(CfgError::StartNotDeclared(start));
        }
        let mut terminals: Vec<String> = Vec::new();
        for p in &productions {
            for symbol in &p.rhs {
                if !variables.contains(symbol) && !terminals.contains(symbol) {
                    terminals.push(symbol.clone());
                }
            }
        }
        Ok(StringCfg { start, variables, terminals, productions })
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    /// Variables in declaration order (the start need not be first when the
    /// grammar was built programmatically).
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Terminals in order of first appearance.
    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn productions(&self) -> &[CfgProduction] {
        &self.productions
    }

    pub fn productions_of<'a>(&'a self, lhs: &'a str) -> impl Iterator<Item = &'a CfgProduction> {
        self.productions.iter().filter(move |p| p.lhs == lhs)
    }

    pub fn is_variable(&self, symbol: &str) -> bool {
        self.variables.iter().any(|v| v == symbol)
    }

    /// True when every production is nonempty with a terminal head.
    pub fn is_terminal_headed(&self) -> bool {
        self.productions
            .iter()
            .all(|p| p.rhs.first().is_some_and(|head| !self.is_variable(head)))
    }
}

impl fmt::Display for StringCfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.productions {
            if p.rhs.is_empty() {
                writeln!(f, "{} ::=", p.lhs)?;
            } else {
                writeln!(f, "{} ::= {}", p.lhs, p.rhs.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Parses the line-oriented grammar format: one `LHS ::= tok1 tok2 …` per
/// line, an empty right-hand side for the empty word, `#` comments, blank
/// lines ignored. The first left-hand side is the start symbol.
pub fn parse_cfg(text: &str) -> Result<StringCfg, CfgError> {
    let mut productions: Vec<(String, Vec<String>)> = Vec::new();
    let mut start: Option<String> = None;
    for (index, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let number = index + 1;
        let Some((lhs_part, rhs_part)) = line.split_once("::=") else {
            return Err(CfgError::MissingSeparator { line: number });
        };
        let mut lhs_tokens = lhs_part.split_whitespace();
        let Some(lhs) = lhs_tokens.next() else {
            return Err(CfgError::BadLhs { line: number });
        };
        if lhs_tokens.next().is_some() {
            return Err(CfgError::BadLhs { line: number });
        }
        let rhs: Vec<String> = rhs_part.split_whitespace().map(str::to_string).collect();
        start.get_or_insert_with(|| lhs.to_string());
        productions.push((lhs.to_string(), rhs));
    }
    let Some(start) = start else {
        return Err(CfgError::NoProductions);
    };
    StringCfg::new(start, productions)
}

/// Reverses the right-hand side of every production; the result generates
/// exactly the reversed words of the input language.
pub fn reverse_cfg(g: &StringCfg) -> StringCfg {
    let productions = g
        .productions
        .iter()
        .map(|p| (p.lhs.clone(), p.rhs.iter().rev().cloned().collect()))
        .collect::<Vec<_>>();
    StringCfg::new(g.start.clone(), productions).expect("reversal preserves well-formedness")
}

/// Result of the normal-form conversion: the rewritten grammar and whether
/// the input language contained the empty word (which the output never
/// generates).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GnfResult {
    pub grammar: StringCfg,
    pub empty_word: bool,
}

/// Rewrites a grammar so that every production has a terminal head, via the
/// standard pipeline: fresh start, empty-word elimination, unit-cycle
/// collapse, useless-symbol removal, left-recursion elimination in
/// declaration order, and head substitution. The empty word is stripped and
/// reported separately. Tails may still mix terminals and variables; only
/// heads are guaranteed terminal.
///
/// Fresh variables are named by appending the lowest free numeric suffix
/// (>= 2) to the base name, and each left-recursion tail interleaves its
/// bodies as `β, β·tail`, so output production order is deterministic.
pub fn cfg_to_gnf(g: &StringCfg) -> GnfResult {
    if g.is_terminal_headed() {
        return GnfResult { grammar: g.clone(), empty_word: false };
    }
    let mut work = Work::from_cfg(g);
    let empty_word = work.nullable().contains(&g.start);

    work.ensure_fresh_start();
    work.eliminate_empty_words();
    work.collapse_unit_cycles();
    work.remove_useless();
    work.eliminate_left_recursion();
    work.substitute_heads();
    work.dedup();
    work.remove_useless();

    let grammar = work.into_cfg();
    debug_assert!(grammar.productions().is_empty() || grammar.is_terminal_headed());
    GnfResult { grammar, empty_word }
}

/// Mutable pipeline state: productions grouped per variable, variables in
/// declaration order.
struct Work {
    start: String,
    vars: Vec<String>,
    prods: HashMap<String, Vec<Vec<String>>>,
    terminals: HashSet<String>,
}

impl Work {
    fn from_cfg(g: &StringCfg) -> Work {
        let mut prods: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for v in g.variables() {
            prods.insert(v.clone(), Vec::new());
        }
        for p in g.productions() {
            prods.get_mut(&p.lhs).expect("lhs is a variable").push(p.rhs.clone());
        }
        Work {
            start: g.start().to_string(),
            vars: g.variables().to_vec(),
            prods,
            terminals: g.terminals().iter().cloned().collect(),
        }
    }

    fn is_var(&self, symbol: &str) -> bool {
        self.prods.contains_key(symbol)
    }

    fn nullable(&self) -> HashSet<String> {
        let mut nullable: HashSet<String> = HashSet::new();
        loop {
            let mut changed = false;
            for v in &self.vars {
                if nullable.contains(v) {
                    continue;
                }
                let derives_empty = self.prods[v]
                    .iter()
                    .any(|rhs| rhs.iter().all(|s| nullable.contains(s)));
                if derives_empty {
                    nullable.insert(v.clone());
                    changed = true;
                }
            }
            if !changed {
                return nullable;
            }
        }
    }

    fn fresh_name(&self, base: &str) -> String {
        let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
        let stem = if stem.is_empty() { base } else { stem };
        let taken: HashSet<&str> = self
            .vars
            .iter()
            .map(String::as_str)
            .chain(self.terminals.iter().map(String::as_str))
            .collect();
        let mut n = 2usize;
        loop {
            let candidate = format!("{stem}{n}");
            if candidate != base && !taken.contains(candidate.as_str()) {
                return candidate;
            }
            n += 1;
        }
    }

    /// Introduces a fresh start above the current one when the start appears
    /// on a right-hand side or derives the empty word.
    fn ensure_fresh_start(&mut self) {
        let on_rhs = self
            .vars
            .iter()
            .flat_map(|v| &self.prods[v])
            .any(|rhs| rhs.contains(&self.start));
        if !on_rhs && !self.nullable().contains(&self.start) {
            return;
        }
        let fresh = self.fresh_name(&self.start);
        self.prods.insert(fresh.clone(), vec![vec![self.start.clone()]]);
        self.vars.insert(0, fresh.clone());
        self.start = fresh;
    }

    /// Replaces each production by its variants over dropping or keeping
    /// every nullable occurrence (drop explored first, positions left to
    /// right), then removes empty productions and trivial self-loops.
    fn eliminate_empty_words(&mut self) {
        let nullable = self.nullable();
        for v in &self.vars {
            let mut out: Vec<Vec<String>> = Vec::new();
            for rhs in &self.prods[v] {
                let mut variants = Vec::new();
                expand_nullable(rhs, 0, &mut Vec::new(), &nullable, &mut variants);
                for variant in variants {
                    if variant.is_empty() || variant == [v.clone()] {
                        continue;
                    }
                    if !out.contains(&variant) {
                        out.push(variant);
                    }
                }
            }
            self.prods.insert(v.clone(), out);
        }
    }

    /// Collapses mutually unit-reachable variables onto the earliest-declared
    /// member of each cycle.
    fn collapse_unit_cycles(&mut self) {
        // Unit reachability closure per variable.
        let mut reach: HashMap<&str, HashSet<&str>> = HashMap::new();
        for v in &self.vars {
            let mut seen: HashSet<&str> = HashSet::new();
            let mut queue: VecDeque<&str> = VecDeque::from([v.as_str()]);
            while let Some(current) = queue.pop_front() {
                for rhs in &self.prods[current] {
                    if let [single] = rhs.as_slice() {
                        if self.is_var(single) && seen.insert(single) {
                            queue.push_back(single);
                        }
                    }
                }
            }
            reach.insert(v, seen);
        }
        let mut replace: HashMap<String, String> = HashMap::new();
        for (i, v) in self.vars.iter().enumerate() {
            if replace.contains_key(v.as_str()) {
                continue;
            }
            for w in self.vars.iter().skip(i + 1) {
                let mutual = reach[v.as_str()].contains(w.as_str())
                    && reach[w.as_str()].contains(v.as_str());
                if mutual {
                    replace.insert(w.clone(), v.clone());
                }
            }
        }
        if replace.is_empty() {
            return;
        }
        let rename = |s: &String| replace.get(s).cloned().unwrap_or_else(|| s.clone());
        let vars: Vec<String> =
            self.vars.iter().filter(|v| !replace.contains_key(*v)).cloned().collect();
        let mut prods: HashMap<String, Vec<Vec<String>>> =
            vars.iter().map(|v| (v.clone(), Vec::new())).collect();
        for v in &self.vars {
            let target = rename(v);
            for rhs in &self.prods[v] {
                let renamed: Vec<String> = rhs.iter().map(rename).collect();
                if renamed == [target.clone()] {
                    continue;
                }
                let bucket = prods.get_mut(&target).expect("target survives");
                if !bucket.contains(&renamed) {
                    bucket.push(renamed);
                }
            }
        }
        self.start = rename(&self.start);
        self.vars = vars;
        self.prods = prods;
    }

    /// Drops variables that generate no terminal word or are unreachable
    /// from the start, along with productions mentioning them.
    fn remove_useless(&mut self) {
        let mut generating: HashSet<String> = HashSet::new();
        loop {
            let mut changed = false;
            for v in &self.vars {
                if generating.contains(v) {
                    continue;
                }
                let generates = self.prods[v].iter().any(|rhs| {
                    rhs.iter().all(|s| !self.is_var(s) || generating.contains(s))
                });
                if generates {
                    generating.insert(v.clone());
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut reachable: HashSet<String> = HashSet::from([self.start.clone()]);
        let mut queue: VecDeque<String> = VecDeque::from([self.start.clone()]);
        while let Some(v) = queue.pop_front() {
            if !generating.contains(&v) {
                continue;
            }
            for rhs in &self.prods[&v] {
                if rhs.iter().any(|s| self.is_var(s) && !generating.contains(s)) {
                    continue;
                }
                for s in rhs {
                    if self.is_var(s) && reachable.insert(s.clone()) {
                        queue.push_back(s.clone());
                    }
                }
            }
        }
        let keep = |v: &String| reachable.contains(v) && (generating.contains(v) || v == &self.start);
        let vars: Vec<String> = self.vars.iter().filter(|v| keep(v)).cloned().collect();
        let mut prods: HashMap<String, Vec<Vec<String>>> =
            vars.iter().map(|v| (v.clone(), Vec::new())).collect();
        for v in &vars {
            let kept: Vec<Vec<String>> = self.prods[v]
                .iter()
                .filter(|rhs| rhs.iter().all(|s| !self.is_var(s) || keep(&s.to_string())))
                .cloned()
                .collect();
            prods.insert(v.clone(), kept);
        }
        self.vars = vars;
        self.prods = prods;
    }

    /// Classic left-recursion elimination over the declaration order: first
    /// substitute heads of earlier variables, then split direct recursion
    /// `A -> A α | β` into `A -> β | β T` and `T -> α | α T`.
    fn eliminate_left_recursion(&mut self) {
        let original = self.vars.clone();
        for (i, v) in original.iter().enumerate() {
            // Substitute away heads declared before v.
            loop {
                let mut changed = false;
                let mut out: Vec<Vec<String>> = Vec::new();
                for rhs in &self.prods[v] {
                    let earlier_head = rhs
                        .first()
                        .and_then(|head| original[..i].iter().find(|u| *u == head));
                    match earlier_head {
                        Some(u) => {
                            changed = true;
                            for body in &self.prods[u] {
                                let mut expanded = body.clone();
                                expanded.extend(rhs[1..].iter().cloned());
                                if !out.contains(&expanded) {
                                    out.push(expanded);
                                }
                            }
                        }
                        None => {
                            if !out.contains(rhs) {
                                out.push(rhs.clone());
                            }
                        }
                    }
                }
                self.prods.insert(v.clone(), out);
                if !changed {
                    break;
                }
            }
            // Split direct left recursion.
            let (alphas, betas): (Vec<_>, Vec<_>) =
                self.prods[v].iter().cloned().partition(|rhs| rhs.first() == Some(v));
            if alphas.is_empty() {
                continue;
            }
            let tail = self.fresh_name(v);
            let mut base: Vec<Vec<String>> = Vec::new();
            for beta in &betas {
                base.push(beta.clone());
                let mut with_tail = beta.clone();
                with_tail.push(tail.clone());
                base.push(with_tail);
            }
            let mut tail_prods: Vec<Vec<String>> = Vec::new();
            for alpha in &alphas {
                let alpha = alpha[1..].to_vec();
                tail_prods.push(alpha.clone());
                let mut with_tail = alpha;
                with_tail.push(tail.clone());
                tail_prods.push(with_tail);
            }
            self.prods.insert(v.clone(), base);
            self.prods.insert(tail.clone(), tail_prods);
            self.vars.push(tail);
        }
    }

    /// Replaces variable heads by the head variable's productions until all
    /// heads are terminal. Terminates because left recursion is gone and
    /// substituted heads move strictly later in the order.
    fn substitute_heads(&mut self) {
        loop {
            let mut changed = false;
            for v in &self.vars.clone() {
                let mut out: Vec<Vec<String>> = Vec::new();
                for rhs in &self.prods[v] {
                    match rhs.first() {
                        Some(head) if self.is_var(head) => {
                            changed = true;
                            for body in self.prods[head].clone() {
                                let mut expanded = body;
                                expanded.extend(rhs[1..].iter().cloned());
                                out.push(expanded);
                            }
                        }
                        _ => out.push(rhs.clone()),
                    }
                }
                self.prods.insert(v.clone(), out);
            }
            if !changed {
                return;
            }
        }
    }

    fn dedup(&mut self) {
        for v in &self.vars {
            let mut seen: HashSet<Vec<String>> = HashSet::new();
            let list = self.prods.get_mut(v).expect("declared");
            list.retain(|rhs| seen.insert(rhs.clone()));
        }
    }

    fn into_cfg(self) -> StringCfg {
        let mut productions: Vec<(String, Vec<String>)> = Vec::new();
        for v in &self.vars {
            for rhs in &self.prods[v] {
                productions.push((v.clone(), rhs.clone()));
            }
        }
        StringCfg::new(self.start, productions).expect("pipeline output is well-formed")
    }
}

fn expand_nullable(
    rhs: &[String],
    index: usize,
    acc: &mut Vec<String>,
    nullable: &HashSet<String>,
    out: &mut Vec<Vec<String>>,
) {
    if index == rhs.len() {
        out.push(acc.clone());
        return;
    }
    let symbol = &rhs[index];
    if nullable.contains(symbol) {
        expand_nullable(rhs, index + 1, acc, nullable, out);
    }
    acc.push(symbol.clone());
    expand_nullable(rhs, index + 1, acc, nullable, out);
    acc.pop();
}

/// Encodes a terminal-headed string grammar as a monadic tree grammar: each
/// symbol becomes a rank-1 tree symbol, a production `v -> a ξ1 … ξk`
/// becomes `v(x) -> a(ξ1(… ξk(x) …))`, and the initial tree applies the
/// start variable to the rank-0 end marker. A word `w` is in the string
/// language exactly when the monadic tree `w·endMarker` is in the tree
/// language.
pub fn cfg_to_monadic_cftg(g: &StringCfg, end_marker: &str) -> Result<Cftg, GrammarError> {
    if let Some(p) = g
        .productions()
        .iter()
        .find(|p| p.rhs.first().map_or(true, |head| g.is_variable(head)))
    {
        return Err(GrammarError::NotGnf(format!("{} ::= {}", p.lhs, p.rhs.join(" "))));
    }
    let param: Arc<str> = "_x".into();
    let mut terminals: Vec<RankedSymbol> =
        g.terminals().iter().map(|t| RankedSymbol::new(t.clone(), 1)).collect();
    terminals.push(RankedSymbol::new(end_marker.to_string(), 0));
    let variables: Vec<RankedSymbol> =
        g.variables().iter().map(|v| RankedSymbol::new(v.clone(), 1)).collect();
    let symbol_of = |name: &str| -> RankedSymbol { RankedSymbol::new(name.to_string(), 1) };

    let mut productions = Vec::new();
    for p in g.productions() {
        let mut body = TreeForm::Param(param.clone());
        for symbol in p.rhs[1..].iter().rev() {
            body = if g.is_variable(symbol) {
                TreeForm::Variable(symbol_of(symbol), vec![body])
            } else {
                TreeForm::Terminal(symbol_of(symbol), vec![body])
            };
        }
        productions.push(CftgProduction::new(
            symbol_of(&p.lhs),
            vec![param.clone()],
            TreeForm::Terminal(symbol_of(&p.rhs[0]), vec![body]),
        ));
    }
    let initial_tree = TreeForm::Variable(
        symbol_of(g.start()),
        vec![TreeForm::Terminal(RankedSymbol::new(end_marker.to_string(), 0), vec![])],
    );
    Cftg::new(terminals, variables, initial_tree, productions)
}

/// Chomsky-normal-form copy of a grammar, kept private to the oracle.
struct Cnf {
    start: usize,
    empty_word: bool,
    n_vars: usize,
    // token -> variables deriving it in one step
    token_rules: HashMap<String, Vec<usize>>,
    // (left, right) -> variables with that binary body
    pair_rules: HashMap<(usize, usize), Vec<usize>>,
}

enum Sym {
    Var(usize),
    Tok(String),
}

fn to_cnf(g: &StringCfg) -> Cnf {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut n_vars = 0usize;
    let var_id = |name: &str, n: &mut usize, ids: &mut HashMap<String, usize>| -> usize {
        *ids.entry(name.to_string()).or_insert_with(|| {
            let id = *n;
            *n += 1;
            id
        })
    };
    let mut rules: Vec<(usize, Vec<Sym>)> = Vec::new();
    for p in g.productions() {
        let lhs = var_id(&p.lhs, &mut n_vars, &mut ids);
        let rhs = p
            .rhs
            .iter()
            .map(|s| {
                if g.is_variable(s) {
                    Sym::Var(var_id(s, &mut n_vars, &mut ids))
                } else {
                    Sym::Tok(s.clone())
                }
            })
            .collect();
        rules.push((lhs, rhs));
    }
    let old_start = var_id(g.start(), &mut n_vars, &mut ids);
    // Fresh start so the start never occurs on a right-hand side.
    let start = n_vars;
    n_vars += 1;
    rules.push((start, vec![Sym::Var(old_start)]));

    // Isolate tokens inside long bodies.
    let mut token_vars: HashMap<String, usize> = HashMap::new();
    let mut extra: Vec<(usize, Vec<Sym>)> = Vec::new();
    for (_, rhs) in rules.iter_mut() {
        if rhs.len() < 2 {
            continue;
        }
        for sym in rhs.iter_mut() {
            if let Sym::Tok(token) = sym {
                let id = *token_vars.entry(token.clone()).or_insert_with(|| {
                    let id = n_vars;
                    n_vars += 1;
                    extra.push((id, vec![Sym::Tok(token.clone())]));
                    id
                });
                *sym = Sym::Var(id);
            }
        }
    }
    rules.extend(extra);

    // Binarize.
    let mut binary: Vec<(usize, usize, usize)> = Vec::new();
    let mut unit: Vec<(usize, usize)> = Vec::new();
    let mut token_rules_raw: Vec<(usize, String)> = Vec::new();
    let mut empty_lhs: HashSet<usize> = HashSet::new();
    for (lhs, rhs) in rules {
        match rhs.as_slice() {
            [] => {
                empty_lhs.insert(lhs);
            }
            [Sym::Tok(token)] => token_rules_raw.push((lhs, token.clone())),
            [Sym::Var(v)] => unit.push((lhs, *v)),
            _ => {
                let vars: Vec<usize> = rhs
                    .iter()
                    .map(|s| match s {
                        Sym::Var(v) => *v,
                        Sym::Tok(_) => unreachable!("tokens isolated above"),
                    })
                    .collect();
                let mut right = vars[vars.len() - 1];
                for &v in vars[1..vars.len() - 1].iter().rev() {
                    let fresh = n_vars;
                    n_vars += 1;
                    binary.push((fresh, v, right));
                    right = fresh;
                }
                binary.push((lhs, vars[0], right));
            }
        }
    }

    // Empty-word elimination over the binarized rules.
    let mut nullable: HashSet<usize> = empty_lhs;
    loop {
        let mut changed = false;
        for &(lhs, left, right) in &binary {
            if !nullable.contains(&lhs) && nullable.contains(&left) && nullable.contains(&right) {
                nullable.insert(lhs);
                changed = true;
            }
        }
        for &(lhs, v) in &unit {
            if !nullable.contains(&lhs) && nullable.contains(&v) {
                nullable.insert(lhs);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut expanded_binary: Vec<(usize, usize, usize)> = Vec::new();
    let mut expanded_unit: Vec<(usize, usize)> = unit.clone();
    for &(lhs, left, right) in &binary {
        expanded_binary.push((lhs, left, right));
        if nullable.contains(&left) {
            expanded_unit.push((lhs, right));
        }
        if nullable.contains(&right) {
            expanded_unit.push((lhs, left));
        }
    }

    // Unit-pair closure.
    let mut unit_reach: HashMap<usize, HashSet<usize>> = HashMap::new();
    for v in 0..n_vars {
        let mut seen: HashSet<usize> = HashSet::from([v]);
        let mut queue: VecDeque<usize> = VecDeque::from([v]);
        while let Some(current) = queue.pop_front() {
            for &(lhs, target) in &expanded_unit {
                if lhs == current && seen.insert(target) {
                    queue.push_back(target);
                }
            }
        }
        unit_reach.insert(v, seen);
    }

    let mut token_rules: HashMap<String, Vec<usize>> = HashMap::new();
    let mut pair_rules: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for v in 0..n_vars {
        for reached in &unit_reach[&v] {
            for (lhs, token) in &token_rules_raw {
                if lhs == reached {
                    let bucket = token_rules.entry(token.clone()).or_default();
                    if !bucket.contains(&v) {
                        bucket.push(v);
                    }
                }
            }
            for &(lhs, left, right) in &expanded_binary {
                if lhs == *reached {
                    let bucket = pair_rules.entry((left, right)).or_default();
                    if !bucket.contains(&v) {
                        bucket.push(v);
                    }
                }
            }
        }
    }

    Cnf { start, empty_word: nullable.contains(&start), n_vars, token_rules, pair_rules }
}

/// Reusable CYK membership oracle over an internal Chomsky-normal-form copy
/// of the grammar.
pub struct CykOracle {
    cnf: Cnf,
}

impl CykOracle {
    pub fn new(g: &StringCfg) -> CykOracle {
        CykOracle { cnf: to_cnf(g) }
    }

    /// True exactly when the word belongs to the grammar's language. The
    /// empty word reports the grammar's empty-word flag.
    pub fn member<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let n = word.len();
        if n == 0 {
            return self.cnf.empty_word;
        }
        // table[i][l] = variables deriving word[i .. i + l + 1]
        let mut table: Vec<Vec<HashSet<usize>>> = vec![vec![HashSet::new(); n]; n];
        for (i, token) in word.iter().enumerate() {
            if let Some(vars) = self.cnf.token_rules.get(token.as_ref()) {
                table[i][0].extend(vars.iter().copied());
            }
        }
        for length in 2..=n {
            for i in 0..=n - length {
                let mut cell: HashSet<usize> = HashSet::new();
                for split in 1..length {
                    let left = &table[i][split - 1];
                    let right = &table[i + split][length - split - 1];
                    if left.is_empty() || right.is_empty() {
                        continue;
                    }
                    for &l in left {
                        for &r in right {
                            if let Some(vars) = self.cnf.pair_rules.get(&(l, r)) {
                                cell.extend(vars.iter().copied());
                            }
                        }
                    }
                }
                table[i][length - 1] = cell;
            }
        }
        table[0][n - 1].contains(&self.cnf.start)
    }

    /// All words of length 1..=max_len in the language, plus the empty word
    /// when the grammar derives it.
    pub fn enumerate_words(&self, max_len: usize) -> BTreeSet<Vec<String>> {
        // words[v][l] = words of length l derived from v
        let mut words: Vec<Vec<BTreeSet<Vec<String>>>> =
            vec![vec![BTreeSet::new(); max_len + 1]; self.cnf.n_vars];
        if max_len >= 1 {
            for (token, vars) in &self.cnf.token_rules {
                for &v in vars {
                    words[v][1].insert(vec![token.clone()]);
                }
            }
        }
        for length in 2..=max_len {
            for (&(left, right), vars) in &self.cnf.pair_rules {
                for split in 1..length {
                    if words[left][split].is_empty() || words[right][length - split].is_empty() {
                        continue;
                    }
                    let combos: Vec<Vec<String>> = words[left][split]
                        .iter()
                        .flat_map(|w1| {
                            words[right][length - split].iter().map(move |w2| {
                                let mut w = w1.clone();
                                w.extend(w2.iter().cloned());
                                w
                            })
                        })
                        .collect();
                    for &v in vars {
                        words[v][length].extend(combos.iter().cloned());
                    }
                }
            }
        }
        let mut out: BTreeSet<Vec<String>> = BTreeSet::new();
        if self.cnf.empty_word {
            out.insert(Vec::new());
        }
        for length in 1..=max_len {
            out.extend(words[self.cnf.start][length].iter().cloned());
        }
        out
    }
}

/// One-shot membership check; builds the oracle afresh on every call.
pub fn cyk_member<S: AsRef<str>>(g: &StringCfg, word: &[S]) -> bool {
    CykOracle::new(g).member(word)
}
