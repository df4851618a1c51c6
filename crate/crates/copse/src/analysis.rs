//! Table analyses: well-formedness checking, inheritance-and-decomposition
//! closure, and feature classification.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{ClassDecl, ClassTable};
use crate::term::{GroundType, TypePattern, Variance};

/// Default node budget for [`closure`].
pub const DEFAULT_CLOSURE_BUDGET: usize = 10_000;

/// Machine-readable well-formedness diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    /// Class-level inheritance is cyclic.
    #[serde(rename = "WF-CYCLE")]
    Cycle,
    /// A parameter occurs at a position its variance does not admit.
    #[serde(rename = "WF-VARIANCE")]
    Variance,
    /// A class is applied to the wrong number of arguments.
    #[serde(rename = "WF-ARITY")]
    Arity,
    /// A supertype mentions a class the table does not declare.
    #[serde(rename = "WF-UNDECLARED")]
    Undeclared,
    /// A supertype is a bare parameter.
    #[serde(rename = "WF-MIXIN")]
    Mixin,
    /// A supertype mentions a parameter the class does not declare.
    #[serde(rename = "WF-UNBOUND")]
    Unbound,
    /// A class declares the same parameter name twice.
    #[serde(rename = "WF-PARAM")]
    Param,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::Cycle => "WF-CYCLE",
            DiagnosticCode::Variance => "WF-VARIANCE",
            DiagnosticCode::Arity => "WF-ARITY",
            DiagnosticCode::Undeclared => "WF-UNDECLARED",
            DiagnosticCode::Mixin => "WF-MIXIN",
            DiagnosticCode::Unbound => "WF-UNBOUND",
            DiagnosticCode::Param => "WF-PARAM",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One well-formedness finding, attached to the class whose declaration
/// violates the rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub class: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, class: &str, message: String) -> Diagnostic {
        Diagnostic { code, class: class.to_string(), message }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code, self.class, self.message)
    }
}

/// Position polarity during the variance walk. `Both` marks positions under
/// an invariant argument, which are simultaneously positive and negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Positive,
    Negative,
    Both,
}

impl Polarity {
    fn step(self, variance: Variance) -> Polarity {
        match variance {
            Variance::Covariant => self,
            Variance::Contravariant => match self {
                Polarity::Positive => Polarity::Negative,
                Polarity::Negative => Polarity::Positive,
                Polarity::Both => Polarity::Both,
            },
            Variance::Invariant => Polarity::Both,
        }
    }

    fn admits(self, variance: Variance) -> bool {
        match self {
            Polarity::Positive => variance != Variance::Contravariant,
            Polarity::Negative => variance != Variance::Covariant,
            Polarity::Both => variance == Variance::Invariant,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Both => "invariant",
        }
    }
}

/// Checks a class table for well-formedness.
///
/// Returns the empty list exactly when the table is well formed. The checks
/// are: (1) class-level inheritance is acyclic, considering only supertype
/// roots; (2) every parameter occurrence sits at a position its declared
/// variance admits, where covariant parameters may appear only positively,
/// contravariant ones only negatively, and positions under an invariant
/// argument admit only invariant parameters; (3) declarations are
/// structurally sound: declared arities are respected, supertypes mention
/// only declared classes and declared parameters, no supertype is a bare
/// parameter, and parameter names are distinct.
pub fn check_well_formed(table: &ClassTable) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for decl in table.decls() {
        check_decl_structure(table, decl, &mut out);
    }
    check_acyclic(table, &mut out);
    for decl in table.decls() {
        for sup in decl.supers() {
            walk_polarity(table, decl, sup, Polarity::Positive, &mut out);
        }
    }
    out
}

fn check_decl_structure(table: &ClassTable, decl: &ClassDecl, out: &mut Vec<Diagnostic>) {
    let mut seen = BTreeSet::new();
    for name in decl.param_names() {
        if !seen.insert(name) {
            out.push(Diagnostic::new(
                DiagnosticCode::Param,
                decl.name(),
                format!("parameter `{name}` is declared twice"),
            ));
        }
    }
    let declared: BTreeSet<&str> = decl.param_names().collect();
    for sup in decl.supers() {
        if sup.is_param() {
            out.push(Diagnostic::new(
                DiagnosticCode::Mixin,
                decl.name(),
                format!("supertype `{sup}` is a bare parameter"),
            ));
            continue;
        }
        for param in sup.params() {
            if !declared.contains(param) {
                out.push(Diagnostic::new(
                    DiagnosticCode::Unbound,
                    decl.name(),
                    format!("supertype `{sup}` uses undeclared parameter `{param}`"),
                ));
            }
        }
        check_pattern_classes(table, decl, sup, out);
    }
}

fn check_pattern_classes(
    table: &ClassTable,
    decl: &ClassDecl,
    pattern: &TypePattern,
    out: &mut Vec<Diagnostic>,
) {
    if let TypePattern::Node(class, children) = pattern {
        match table.get(class.name()) {
            None => out.push(Diagnostic::new(
                DiagnosticCode::Undeclared,
                decl.name(),
                format!("supertype mentions undeclared class `{}`", class.name()),
            )),
            Some(target) if target.rank() != class.rank() => out.push(Diagnostic::new(
                DiagnosticCode::Arity,
                decl.name(),
                format!(
                    "class `{}` has rank {} but is applied to {} arguments",
                    class.name(),
                    target.rank(),
                    class.rank()
                ),
            )),
            Some(_) => {}
        }
        for child in children {
            check_pattern_classes(table, decl, child, out);
        }
    }
}

fn check_acyclic(table: &ClassTable, out: &mut Vec<Diagnostic>) {
    // Depth-first search over the class-level inheritance graph; only the
    // roots of supertype patterns induce edges.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    let mut reported: BTreeSet<&str> = BTreeSet::new();

    fn visit<'a>(
        table: &'a ClassTable,
        name: &'a str,
        marks: &mut HashMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
        reported: &mut BTreeSet<&'a str>,
        out: &mut Vec<Diagnostic>,
    ) {
        match marks.get(name) {
            Some(Mark::Done) => return,
            Some(Mark::Open) => {
                // `name` is on the current stack: report the cycle once.
                if reported.insert(name) {
                    let start = stack.iter().position(|&n| n == name).unwrap_or(0);
                    let mut cycle: Vec<&str> = stack[start..].to_vec();
                    cycle.push(name);
                    out.push(Diagnostic::new(
                        DiagnosticCode::Cycle,
                        name,
                        format!("inheritance cycle: {}", cycle.join(" -> ")),
                    ));
                }
                return;
            }
            None => {}
        }
        marks.insert(name, Mark::Open);
        stack.push(name);
        if let Some(decl) = table.get(name) {
            for sup in decl.supers() {
                if let Some(root) = sup.root() {
                    if table.contains(root.name()) {
                        visit(table, table.get(root.name()).unwrap().name(), marks, stack, reported, out);
                    }
                }
            }
        }
        stack.pop();
        marks.insert(name, Mark::Done);
    }

    for decl in table.decls() {
        let mut stack = Vec::new();
        visit(table, decl.name(), &mut marks, &mut stack, &mut reported, out);
    }
}

fn walk_polarity(
    table: &ClassTable,
    decl: &ClassDecl,
    pattern: &TypePattern,
    polarity: Polarity,
    out: &mut Vec<Diagnostic>,
) {
    match pattern {
        TypePattern::Param(name) => {
            let Some(variance) = decl
                .params()
                .iter()
                .find(|(n, _)| n.as_ref() == name.as_ref())
                .map(|(_, v)| *v)
            else {
                return; // unbound parameter: reported by the structural check
            };
            if !polarity.admits(variance) {
                out.push(Diagnostic::new(
                    DiagnosticCode::Variance,
                    decl.name(),
                    format!(
                        "{variance}-parameter `{name}` occurs at a {} position",
                        polarity.describe()
                    ),
                ));
            }
        }
        TypePattern::Node(class, children) => {
            let Some(target) = table.get(class.name()) else {
                return; // undeclared class: reported by the structural check
            };
            if target.rank() != class.rank() {
                return; // arity error: reported by the structural check
            }
            for (i, child) in children.iter().enumerate() {
                walk_polarity(table, decl, child, polarity.step(target.variance(i)), out);
            }
        }
    }
}

/// Outcome of the budgeted inheritance-and-decomposition closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosureOutcome {
    /// The closure reached a fixed point within the budget.
    Closed(BTreeSet<GroundType>),
    /// The budget was exceeded; carries a derivation chain witnessing growth.
    BudgetExceeded(GrowthWitness),
}

impl ClosureOutcome {
    pub fn closed(&self) -> Option<&BTreeSet<GroundType>> {
        match self {
            ClosureOutcome::Closed(set) => Some(set),
            ClosureOutcome::BudgetExceeded(_) => None,
        }
    }
}

/// A derivation chain from a seed to the type whose insertion exceeded the
/// budget. Consecutive entries are related by one inheritance or
/// decomposition step; overall the chain exhibits unbounded growth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthWitness {
    pub derivation: Vec<GroundType>,
}

impl GrowthWitness {
    /// The subsequence of the derivation whose sizes strictly increase,
    /// starting from the seed.
    pub fn growing_chain(&self) -> Vec<GroundType> {
        let mut out: Vec<GroundType> = Vec::new();
        for t in &self.derivation {
            if out.last().map_or(true, |last| t.size() > last.size()) {
                out.push(t.clone());
            }
        }
        out
    }
}

/// Closes a set of ground types under child decomposition and one-step
/// inheritance, stopping when the set would exceed `budget` distinct types.
pub fn closure(table: &ClassTable, seeds: &[GroundType], budget: usize) -> ClosureOutcome {
    let mut set: BTreeSet<GroundType> = BTreeSet::new();
    let mut parents: HashMap<GroundType, Option<GroundType>> = HashMap::new();
    let mut queue: VecDeque<GroundType> = VecDeque::new();

    let admit = |t: GroundType,
                     parent: Option<GroundType>,
                     set: &mut BTreeSet<GroundType>,
                     parents: &mut HashMap<GroundType, Option<GroundType>>,
                     queue: &mut VecDeque<GroundType>|
     -> Result<(), GrowthWitness> {
        if set.contains(&t) {
            return Ok(());
        }
        if set.len() + 1 > budget {
            let mut derivation = vec![t.clone()];
            let mut cursor = parent;
            while let Some(p) = cursor {
                cursor = parents.get(&p).cloned().flatten();
                derivation.push(p);
            }
            derivation.reverse();
            return Err(GrowthWitness { derivation });
        }
        parents.insert(t.clone(), parent);
        set.insert(t.clone());
        queue.push_back(t);
        Ok(())
    };

    for seed in seeds {
        if let Err(witness) = admit(seed.clone(), None, &mut set, &mut parents, &mut queue) {
            return ClosureOutcome::BudgetExceeded(witness);
        }
    }
    while let Some(t) = queue.pop_front() {
        for child in t.children() {
            if let Err(witness) =
                admit(child.clone(), Some(t.clone()), &mut set, &mut parents, &mut queue)
            {
                return ClosureOutcome::BudgetExceeded(witness);
            }
        }
        for sup in table.super_types_of(&t) {
            if let Err(witness) = admit(sup, Some(t.clone()), &mut set, &mut parents, &mut queue)
            {
                return ClosureOutcome::BudgetExceeded(witness);
            }
        }
    }
    ClosureOutcome::Closed(set)
}

/// The feature fingerprint of a class table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    /// Some declared parameter is contravariant.
    pub uses_contravariance: bool,
    /// Some inheritance cycle in the parameter dependency graph passes
    /// through a deepening edge.
    pub expansive: bool,
    /// Some class inherits two distinct instantiations of one class.
    pub multiple_instantiation: bool,
}

impl FeatureSet {
    /// Ground subtyping over the table is decidable exactly when
    /// contravariance and expansive inheritance do not both occur.
    pub fn decidable(&self) -> bool {
        !(self.uses_contravariance && self.expansive)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        write!(
            f,
            "contravariance={} expansive={} multiple-instantiation={} decidable={}",
            yn(self.uses_contravariance),
            yn(self.expansive),
            yn(self.multiple_instantiation),
            yn(self.decidable())
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("table is not well formed: {}", format_diagnostics(.0))]
    IllFormed(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(Diagnostic::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Classifies a well-formed table by its features.
pub fn classify(table: &ClassTable) -> Result<FeatureSet, AnalysisError> {
    let diagnostics = check_well_formed(table);
    if !diagnostics.is_empty() {
        return Err(AnalysisError::IllFormed(diagnostics));
    }
    Ok(FeatureSet {
        uses_contravariance: table
            .decls()
            .iter()
            .any(|d| d.params().iter().any(|(_, v)| *v == Variance::Contravariant)),
        expansive: is_expansive(table),
        multiple_instantiation: has_multiple_instantiation(table),
    })
}

/// Expansiveness test on the parameter dependency graph.
///
/// The graph has a node per (class, parameter index). For each declared
/// supertype and each of its subterms `δ(..., ω_j, ...)`, a parameter `x_i`
/// of the declaring class induces an edge `(γ, i) -> (δ, j)`: non-deepening
/// when `ω_j` is exactly `x_i`, deepening when `x_i` occurs strictly below
/// `ω_j`'s root. The table is expansive exactly when some cycle contains a
/// deepening edge, i.e. when some deepening edge connects two nodes of one
/// strongly connected component.
fn is_expansive(table: &ClassTable) -> bool {
    let mut node_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    for (ci, decl) in table.decls().iter().enumerate() {
        for pi in 0..decl.rank() {
            node_ids.insert((ci, pi), nodes.len());
            nodes.push((ci, pi));
        }
    }
    let mut edges: Vec<(usize, usize, bool)> = Vec::new(); // (from, to, deepening)
    for (ci, decl) in table.decls().iter().enumerate() {
        for sup in decl.supers() {
            collect_dependency_edges(table, ci, decl, sup, &node_ids, &mut edges);
        }
    }
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for &(from, to, _) in &edges {
        adjacency[from].push(to);
    }
    let component = strongly_connected_components(nodes.len(), &adjacency);
    edges
        .iter()
        .any(|&(from, to, deepening)| deepening && component[from] == component[to])
}

fn collect_dependency_edges(
    table: &ClassTable,
    class_index: usize,
    decl: &ClassDecl,
    pattern: &TypePattern,
    node_ids: &HashMap<(usize, usize), usize>,
    edges: &mut Vec<(usize, usize, bool)>,
) {
    if let TypePattern::Node(class, children) = pattern {
        if let Some(target_index) = table.index_of(class.name()) {
            for (j, child) in children.iter().enumerate() {
                for (i, (param, _)) in decl.params().iter().enumerate() {
                    let from = node_ids[&(class_index, i)];
                    let Some(&to) = node_ids.get(&(target_index, j)) else { continue };
                    match child {
                        TypePattern::Param(name) if name == param => {
                            edges.push((from, to, false));
                        }
                        _ if child.params().contains(&param.as_ref()) => {
                            edges.push((from, to, true));
                        }
                        _ => {}
                    }
                }
            }
        }
        for child in children {
            collect_dependency_edges(table, class_index, decl, child, node_ids, edges);
        }
    }
}

/// Iterative Tarjan strongly-connected components; returns the component id
/// of every node.
fn strongly_connected_components(n: usize, adjacency: &[Vec<usize>]) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut component = vec![UNSET; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0;
    let mut next_component = 0;

    for start in 0..n {
        if index[start] != UNSET {
            continue;
        }
        // Explicit DFS frames: (node, next child position).
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next_index;
        lowlink[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (node, ref mut child_pos)) = frames.last_mut() {
            if *child_pos < adjacency[node].len() {
                let next = adjacency[node][*child_pos];
                *child_pos += 1;
                if index[next] == UNSET {
                    index[next] = next_index;
                    lowlink[next] = next_index;
                    next_index += 1;
                    stack.push(next);
                    on_stack[next] = true;
                    frames.push((next, 0));
                } else if on_stack[next] {
                    lowlink[node] = lowlink[node].min(index[next]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    lowlink[parent] = lowlink[parent].min(lowlink[node]);
                }
                if lowlink[node] == index[node] {
                    loop {
                        let member = stack.pop().expect("stack holds the component");
                        on_stack[member] = false;
                        component[member] = next_component;
                        if member == node {
                            break;
                        }
                    }
                    next_component += 1;
                }
            }
        }
    }
    component
}

/// Multiple-instantiation test: some class transitively inherits two
/// distinct argument vectors of one class.
fn has_multiple_instantiation(table: &ClassTable) -> bool {
    for decl in table.decls() {
        let mut seen: HashMap<String, Vec<TypePattern>> = HashMap::new();
        for entry in table.transitive_super_patterns(decl.name()) {
            if entry.steps.is_empty() {
                continue; // reflexive entry is not inheritance
            }
            let Some(root) = entry.pattern.root() else { continue };
            let bucket = seen.entry(root.name().to_string()).or_default();
            if !bucket.contains(&entry.pattern) {
                bucket.push(entry.pattern.clone());
                if bucket.len() > 1 {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::table::ClassDecl;
    use crate::term::ClassName;

    fn codes(diags: &[Diagnostic]) -> Vec<DiagnosticCode> {
        diags.iter().map(|d| d.code).collect()
    }

    #[test]
    fn mixed_features_table_is_well_formed() {
        assert!(check_well_formed(&fixtures::mixed_features_table()).is_empty());
    }

    #[test]
    fn fixtures_are_well_formed() {
        assert!(check_well_formed(&fixtures::palindrome_table()).is_empty());
        assert!(check_well_formed(&fixtures::contra_pair_table()).is_empty());
        assert!(check_well_formed(&fixtures::pair_positions_table()).is_empty());
    }

    #[test]
    fn covariant_param_under_contravariant_position_is_flagged() {
        // a(-x) : _ ; b(+y) : a(y)  — y sits at a negative position.
        let table = ClassTable::new(vec![
            ClassDecl::new("a", vec![("x".into(), Variance::Contravariant)], vec![]),
            ClassDecl::new(
                "b",
                vec![("y".into(), Variance::Covariant)],
                vec![TypePattern::chain(["a"], TypePattern::param("y"))],
            ),
        ])
        .unwrap();
        let diags = check_well_formed(&table);
        assert_eq!(codes(&diags), vec![DiagnosticCode::Variance]);
        assert_eq!(diags[0].class, "b");

        // The double-wrapped variant is fine: a(a(y)) flips twice.
        let fixed = ClassTable::new(vec![
            ClassDecl::new("a", vec![("x".into(), Variance::Contravariant)], vec![]),
            ClassDecl::new(
                "b",
                vec![("y".into(), Variance::Covariant)],
                vec![TypePattern::chain(["a", "a"], TypePattern::param("y"))],
            ),
        ])
        .unwrap();
        assert!(check_well_formed(&fixed).is_empty());
    }

    #[test]
    fn invariant_position_admits_only_invariant_params() {
        // c(ox) : _ ; d(+y) : c(y)  — y sits under an invariant argument.
        let table = ClassTable::new(vec![
            ClassDecl::new("c", vec![("x".into(), Variance::Invariant)], vec![]),
            ClassDecl::new(
                "d",
                vec![("y".into(), Variance::Covariant)],
                vec![TypePattern::chain(["c"], TypePattern::param("y"))],
            ),
        ])
        .unwrap();
        assert_eq!(codes(&check_well_formed(&table)), vec![DiagnosticCode::Variance]);
    }

    #[test]
    fn inheritance_cycle_is_flagged_by_roots_only() {
        // u : w ; w : u  — cyclic. d(+x) : a d a x is *not* a class-level cycle.
        let table = ClassTable::new(vec![
            ClassDecl::new("u", vec![], vec![TypePattern::leaf("w")]),
            ClassDecl::new("w", vec![], vec![TypePattern::leaf("u")]),
        ])
        .unwrap();
        let diags = check_well_formed(&table);
        assert!(diags.iter().any(|d| d.code == DiagnosticCode::Cycle));
    }

    #[test]
    fn arity_undeclared_mixin_unbound_are_flagged() {
        let table = ClassTable::new(vec![
            ClassDecl::new("a", vec![("x".into(), Variance::Covariant)], vec![]),
            ClassDecl::new(
                "bad",
                vec![("y".into(), Variance::Covariant)],
                vec![
                    // a applied to two arguments: arity error.
                    TypePattern::Node(
                        ClassName::new("a", 2),
                        vec![TypePattern::param("y"), TypePattern::param("y")],
                    ),
                    // ghost is not declared.
                    TypePattern::chain(["ghost"], TypePattern::param("y")),
                    // bare parameter supertype.
                    TypePattern::param("y"),
                    // z is not a parameter of bad.
                    TypePattern::chain(["a"], TypePattern::param("z")),
                ],
            ),
        ])
        .unwrap();
        let diags = check_well_formed(&table);
        let found: BTreeSet<DiagnosticCode> = diags.iter().map(|d| d.code).collect();
        assert!(found.contains(&DiagnosticCode::Arity));
        assert!(found.contains(&DiagnosticCode::Undeclared));
        assert!(found.contains(&DiagnosticCode::Mixin));
        assert!(found.contains(&DiagnosticCode::Unbound));
    }

    #[test]
    fn closure_fixpoint_on_contra_pair() {
        // closure({C}) = {C, N(N(C)), N(C)}.
        let table = fixtures::contra_pair_table();
        let c = GroundType::leaf("C");
        let outcome = closure(&table, &[c.clone()], DEFAULT_CLOSURE_BUDGET);
        let set = outcome.closed().expect("closure terminates").clone();
        let expect: BTreeSet<GroundType> = [
            c.clone(),
            GroundType::chain(["N"], c.clone()),
            GroundType::chain(["N", "N"], c),
        ]
        .into_iter()
        .collect();
        assert_eq!(set, expect);
    }

    #[test]
    fn closure_budget_exceeded_yields_growing_chain() {
        // Seeds {d(t)} under the mixed-features table grow without bound:
        // d t, d a t, d a a t, ...
        let table = fixtures::mixed_features_table();
        let seed = GroundType::chain(["d"], GroundType::leaf("c0"));
        // c0 is not declared; declare a fresh leaf to keep the table clean.
        let mut decls = table.decls().to_vec();
        decls.push(ClassDecl::new("c0", vec![], vec![]));
        let table = ClassTable::new(decls).unwrap();
        let outcome = closure(&table, &[seed.clone()], 30);
        let ClosureOutcome::BudgetExceeded(witness) = outcome else {
            panic!("budget must be exceeded");
        };
        assert_eq!(witness.derivation.first(), Some(&seed));
        let growing = witness.growing_chain();
        assert!(growing.len() >= 2, "growth chain has at least two entries");
        for pair in growing.windows(2) {
            assert!(pair[1].size() > pair[0].size());
        }
        // The d-rooted entries of the derivation grow strictly: d t, d a t, ...
        let d_rooted: Vec<&GroundType> = witness
            .derivation
            .iter()
            .filter(|t| t.class().name() == "d")
            .collect();
        assert!(d_rooted.len() >= 2);
        for pair in d_rooted.windows(2) {
            assert_eq!(pair[1].size(), pair[0].size() + 1);
        }
    }

    #[test]
    fn closure_of_empty_seed_set_is_empty() {
        let table = fixtures::palindrome_table();
        let outcome = closure(&table, &[], DEFAULT_CLOSURE_BUDGET);
        assert_eq!(outcome.closed().map(BTreeSet::len), Some(0));
    }

    #[test]
    fn classify_palindrome_table() {
        let features = classify(&fixtures::palindrome_table()).unwrap();
        assert!(!features.uses_contravariance);
        assert!(features.expansive);
        assert!(features.multiple_instantiation);
        assert!(features.decidable());
    }

    #[test]
    fn classify_mixed_features_table() {
        let features = classify(&fixtures::mixed_features_table()).unwrap();
        assert!(features.uses_contravariance);
        assert!(features.expansive);
        assert!(!features.multiple_instantiation);
        assert!(!features.decidable());
    }

    #[test]
    fn classify_contra_pair_table() {
        let features = classify(&fixtures::contra_pair_table()).unwrap();
        assert!(features.uses_contravariance);
        assert!(!features.expansive);
        assert!(!features.multiple_instantiation);
        assert!(features.decidable());
    }

    #[test]
    fn classify_rejects_ill_formed_table() {
        let table = ClassTable::new(vec![
            ClassDecl::new("a", vec![("x".into(), Variance::Contravariant)], vec![]),
            ClassDecl::new(
                "b",
                vec![("y".into(), Variance::Covariant)],
                vec![TypePattern::chain(["a"], TypePattern::param("y"))],
            ),
        ])
        .unwrap();
        let AnalysisError::IllFormed(diags) = classify(&table).unwrap_err();
        assert_eq!(codes(&diags), vec![DiagnosticCode::Variance]);
    }

    #[test]
    fn non_expansive_tables_have_finite_closures() {
        // Cross-check of the graph test: when the classifier reports
        // non-expansive, every singleton closure over small types terminates.
        for table in [fixtures::contra_pair_table(), fixtures::pair_positions_table()] {
            let features = classify(&table).unwrap();
            assert!(!features.expansive);
            for t in enumerate_types(&table, 3) {
                assert!(
                    closure(&table, &[t.clone()], DEFAULT_CLOSURE_BUDGET).closed().is_some(),
                    "closure of {t} must terminate"
                );
            }
        }
        // Conversely the expansive palindrome machine has some unbounded
        // closure.
        let table = fixtures::palindrome_table();
        assert!(classify(&table).unwrap().expansive);
        let unbounded = enumerate_types(&table, 3).into_iter().any(|t| {
            matches!(
                closure(&table, &[t], 2_000),
                ClosureOutcome::BudgetExceeded(_)
            )
        });
        assert!(unbounded);
    }

    /// All ground types over the table's classes with height at most
    /// `max_height`.
    fn enumerate_types(table: &ClassTable, max_height: usize) -> Vec<GroundType> {
        let mut by_height: Vec<Vec<GroundType>> = vec![Vec::new()];
        for h in 1..=max_height {
            let mut level = Vec::new();
            let pool: Vec<GroundType> =
                by_height.iter().flatten().cloned().collect();
            for decl in table.decls() {
                if decl.rank() == 0 {
                    if h == 1 {
                        level.push(GroundType::leaf(decl.name().to_string()));
                    }
                    continue;
                }
                // All argument tuples whose maximum height is h - 1.
                let tuples = cartesian(&pool, decl.rank());
                for tuple in tuples {
                    if tuple.iter().map(GroundType::height).max() == Some(h - 1) {
                        level.push(GroundType::new(decl.class_name(), tuple));
                    }
                }
            }
            by_height.push(level);
        }
        by_height.into_iter().flatten().collect()
    }

    fn cartesian(pool: &[GroundType], k: usize) -> Vec<Vec<GroundType>> {
        let mut out: Vec<Vec<GroundType>> = vec![Vec::new()];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    pool.iter().map(move |t| {
                        let mut next = prefix.clone();
                        next.push(t.clone());
                        next
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn variance_walk_agrees_with_bruteforce_path_products() {
        // Independent check: compute each parameter occurrence's admissible
        // variances by explicitly folding the variance path from the root,
        // then compare verdicts with check_well_formed.
        let tables = vec![
            fixtures::palindrome_table(),
            fixtures::contra_pair_table(),
            fixtures::mixed_features_table(),
            fixtures::pair_positions_table(),
        ];
        for table in tables {
            let walker_clean = check_well_formed(&table)
                .iter()
                .all(|d| d.code != DiagnosticCode::Variance);
            assert_eq!(walker_clean, bruteforce_variance_ok(&table));
        }
    }

    fn bruteforce_variance_ok(table: &ClassTable) -> bool {
        fn paths(
            table: &ClassTable,
            pattern: &TypePattern,
            prefix: Vec<Variance>,
            out: &mut Vec<(String, Vec<Variance>)>,
        ) {
            match pattern {
                TypePattern::Param(name) => out.push((name.to_string(), prefix)),
                TypePattern::Node(class, children) => {
                    let decl = table.get(class.name()).unwrap();
                    for (i, child) in children.iter().enumerate() {
                        let mut next = prefix.clone();
                        next.push(decl.variance(i));
                        paths(table, child, next, out);
                    }
                }
            }
        }
        table.decls().iter().all(|decl| {
            decl.supers().iter().all(|sup| {
                let mut occurrences = Vec::new();
                paths(table, sup, Vec::new(), &mut occurrences);
                occurrences.into_iter().all(|(param, path)| {
                    let variance = decl
                        .params()
                        .iter()
                        .find(|(n, _)| n.as_ref() == param)
                        .map(|(_, v)| *v)
                        .unwrap();
                    // Fold the path: invariant absorbs; contravariant flips.
                    let mut polarity = Polarity::Positive;
                    for v in path {
                        polarity = polarity.step(v);
                    }
                    polarity.admits(variance)
                })
            })
        })
    }
}
