//! Constructive conversions between grammars and class tables.
//!
//! Four transforms connect the two worlds. Regular tree grammars embed
//! into class tables by reading each production as an inheritance rule,
//! and non-expansive tables convert back by searching the subtyping proof
//! space symbolically. Terminal-headed context-free tree grammars embed
//! the same way, and tables without contravariance convert back through
//! covariant/invariant variable pairs that track, for every class, both
//! the types it can widen to and the type it is. Determinism of a grammar
//! corresponds to single-instantiation inheritance of its table, and
//! [`determinism_report_for_grammar`]/[`determinism_report_for_table`]
//! check that correspondence across a round trip.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::{classify, AnalysisError, FeatureSet};
use crate::grammars::{
    is_deterministic_gnf, Cftg, CftgProduction, GrammarError, RankedSymbol, RegularTreeGrammar,
    TreeForm,
};
use crate::subtyping::{decide_non_expansive, QueryRelation, SubtypeQuery};
use crate::table::{AlphabetSplit, ClassDecl, ClassTable, TableError};
use crate::term::{compose_pattern, ClassName, GroundType, TypePattern, Variance};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    IllFormed(#[from] AnalysisError),
    #[error("table refused by the {transform} transform; features: {features}")]
    FragmentRefused { transform: &'static str, features: FeatureSet },
    #[error("grammar is not terminal-headed; normalize it first")]
    NotGnf,
    #[error("class `{0}` is not declared in the table")]
    UndeclaredClass(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Table(#[from] TableError),
}

// ---------------------------------------------------- grammar to table

/// Canonical parameter names for a rank: `x` for rank one, `x1..xk` above.
fn canonical_params(rank: usize) -> Vec<Arc<str>> {
    match rank {
        1 => vec![Arc::from("x")],
        _ => (1..=rank).map(|i| Arc::from(format!("x{i}").as_str())).collect(),
    }
}

/// Encodes a regular tree grammar as a class table: every terminal becomes
/// a class with covariant parameters, every grammar variable a leaf class
/// inheriting one instantiated terminal per production. Returns the table,
/// the bottom type (the start variable), and the alphabet split whose
/// subtype side is the variables and supertype side the terminals.
pub fn rtg_to_class_table(
    g: &RegularTreeGrammar,
) -> Result<(ClassTable, GroundType, AlphabetSplit), TransformError> {
    let mut decls = Vec::new();
    for t in g.terminals() {
        let params = canonical_params(t.rank())
            .into_iter()
            .map(|n| (n, Variance::Covariant))
            .collect();
        decls.push(ClassDecl::new(t.name(), params, Vec::new()));
    }
    for v in g.variables() {
        let supers = g
            .productions()
            .iter()
            .filter(|p| p.lhs == *v)
            .map(|p| {
                TypePattern::node(
                    ClassName::new(p.head.name(), p.head.rank()),
                    p.children.iter().map(|c| TypePattern::leaf(c.name())).collect(),
                )
            })
            .collect();
        decls.push(ClassDecl::new(v.name(), Vec::new(), supers));
    }
    let table = ClassTable::new(decls)?;
    let bottom = GroundType::leaf(g.start().name());
    let split = AlphabetSplit::new(
        g.variables().iter().map(RankedSymbol::name),
        g.terminals().iter().map(RankedSymbol::name),
    );
    Ok((table, bottom, split))
}

/// Encodes a terminal-headed context-free tree grammar as a class table:
/// terminal classes get covariant parameters, variable classes invariant
/// ones, and each production becomes one inheritance rule. With `dedup`,
/// productions that repeat an earlier rule of the same variable are
/// dropped, so determinism-restricted consumers never see two equal
/// supertypes of one class.
pub fn gnf_cftg_to_class_table(
    g: &Cftg,
    dedup: bool,
) -> Result<(ClassTable, GroundType, AlphabetSplit), TransformError> {
    if !g.is_gnf() {
        return Err(TransformError::NotGnf);
    }
    let mut decls = Vec::new();
    for t in g.terminals() {
        let params = canonical_params(t.rank())
            .into_iter()
            .map(|n| (n, Variance::Covariant))
            .collect();
        decls.push(ClassDecl::new(t.name(), params, Vec::new()));
    }
    for v in g.variables() {
        let prods = g.productions_of(v);
        let canonical: Vec<Arc<str>> = match prods.first() {
            Some(p) => p.params().to_vec(),
            None => canonical_params(v.rank()),
        };
        let mut supers: Vec<TypePattern> = Vec::new();
        for p in prods {
            let bindings: BTreeMap<Arc<str>, TypePattern> = p
                .params()
                .iter()
                .zip(&canonical)
                .map(|(from, to)| (from.clone(), TypePattern::param(to.clone())))
                .collect();
            let pattern = compose_pattern(&tree_form_to_pattern(p.rhs()), &bindings);
            if dedup && supers.contains(&pattern) {
                continue;
            }
            supers.push(pattern);
        }
        let params = canonical.into_iter().map(|n| (n, Variance::Invariant)).collect();
        decls.push(ClassDecl::new(v.name(), params, supers));
    }
    let table = ClassTable::new(decls)?;
    let bottom = ground_tree_to_type(g.initial_tree())?;
    let sub: BTreeSet<&str> = g
        .variables()
        .iter()
        .map(RankedSymbol::name)
        .chain(bottom.classes().iter().map(|c| c.name()))
        .collect();
    let split = AlphabetSplit::new(sub, g.terminals().iter().map(RankedSymbol::name));
    Ok((table, bottom, split))
}

fn tree_form_to_pattern(t: &TreeForm) -> TypePattern {
    match t {
        TreeForm::Param(name) => TypePattern::param(name.clone()),
        TreeForm::Terminal(symbol, children) | TreeForm::Variable(symbol, children) => {
            TypePattern::node(
                ClassName::new(symbol.name(), symbol.rank()),
                children.iter().map(tree_form_to_pattern).collect(),
            )
        }
    }
}

fn ground_tree_to_type(t: &TreeForm) -> Result<GroundType, TransformError> {
    match t {
        TreeForm::Param(name) => {
            Err(TransformError::Grammar(GrammarError::ParamInInitialTree(name.to_string())))
        }
        TreeForm::Terminal(symbol, children) | TreeForm::Variable(symbol, children) => {
            let kids = children.iter().map(ground_tree_to_type).collect::<Result<_, _>>()?;
            Ok(GroundType::new(ClassName::new(symbol.name(), symbol.rank()), kids))
        }
    }
}

/// Pairs of declared supertypes of one class that a substitution can
/// unify, reported as (class, earlier index, later index). Empty output is
/// the precondition for deterministic-consumer encodings.
pub fn unifiable_supertype_pairs(table: &ClassTable) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    for decl in table.decls() {
        let supers = decl.supers();
        for i in 0..supers.len() {
            for j in i + 1..supers.len() {
                if crate::term::patterns_unifiable(&supers[i], &supers[j]) {
                    out.push((decl.name().to_string(), i, j));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------- table to grammar

/// One query of a query-set variable: a ground type related to the
/// placeholder tree the variable stands for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryAtom {
    pub rel: QueryRelation,
    pub left: GroundType,
}

impl fmt::Display for QueryAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} x", self.left, self.rel)
    }
}

/// A grammar variable of the regular extraction: the minimal set of
/// queries a derived tree must satisfy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuerySetVariable {
    atoms: BTreeSet<QueryAtom>,
}

impl QuerySetVariable {
    pub fn atoms(&self) -> impl Iterator<Item = &QueryAtom> {
        self.atoms.iter()
    }
}

impl fmt::Display for QuerySetVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{atom}")?;
        }
        write!(f, "}}")
    }
}

/// One satisfying decomposition of a query set at a terminal: the atoms
/// each child position must satisfy.
type Decomposition = Vec<BTreeSet<QueryAtom>>;

/// Symbolic proof search over queries whose right side is a pattern with
/// placeholder leaves. Branches repeating a (type, relation, pattern)
/// triple on the current path are cut, mirroring the ground decider's
/// cycle ledger.
struct SymbolicSearch<'a> {
    table: &'a ClassTable,
    holes: HashMap<Arc<str>, usize>,
    hole_count: usize,
    path: HashSet<(GroundType, QueryRelation, TypePattern)>,
}

impl<'a> SymbolicSearch<'a> {
    fn solve(
        &mut self,
        left: &GroundType,
        rel: QueryRelation,
        template: &TypePattern,
    ) -> Vec<Decomposition> {
        let class = match template {
            TypePattern::Param(name) => {
                let mut decomposition = vec![BTreeSet::new(); self.hole_count];
                decomposition[self.holes[name]].insert(QueryAtom { rel, left: left.clone() });
                return vec![decomposition];
            }
            TypePattern::Node(class, _) => class,
        };
        let kids = match template {
            TypePattern::Node(_, kids) => kids,
            TypePattern::Param(_) => unreachable!(),
        };
        if rel == QueryRelation::Eq {
            // Equality is structural: decompose in lockstep, no widening.
            if left.class() != class {
                return Vec::new();
            }
            let mut out = vec![vec![BTreeSet::new(); self.hole_count]];
            for (lc, kid) in left.children().iter().zip(kids) {
                let child = self.solve(lc, QueryRelation::Eq, kid);
                out = conjoin(&out, &child);
                if out.is_empty() {
                    break;
                }
            }
            return out;
        }
        let key = (left.clone(), rel, template.clone());
        if !self.path.insert(key.clone()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        if left.class() == class {
            if let Some(decl) = self.table.get(class.name()) {
                if decl.rank() == class.rank() {
                    let mut conj = vec![vec![BTreeSet::new(); self.hole_count]];
                    for (i, (_, variance)) in decl.params().iter().enumerate() {
                        let child =
                            self.solve(&left.children()[i], rel.child_relation(*variance), &kids[i]);
                        conj = conjoin(&conj, &child);
                        if conj.is_empty() {
                            break;
                        }
                    }
                    out.extend(conj);
                }
            }
        }
        match rel {
            QueryRelation::Sub => {
                // Widen the ground subtype side one inheritance step.
                for u in self.table.super_types_of(left) {
                    out.extend(self.solve(&u, rel, template));
                }
            }
            QueryRelation::Sup => {
                // The pattern is the subtype side; widen it symbolically.
                if let Some(decl) = self.table.get(class.name()) {
                    if decl.rank() == class.rank() {
                        let bindings: BTreeMap<Arc<str>, TypePattern> = decl
                            .params()
                            .iter()
                            .map(|(n, _)| n.clone())
                            .zip(kids.iter().cloned())
                            .collect();
                        for sp in decl.supers() {
                            let u = compose_pattern(sp, &bindings);
                            out.extend(self.solve(left, rel, &u));
                        }
                    }
                }
            }
            QueryRelation::Eq => unreachable!("handled structurally above"),
        }
        self.path.remove(&key);
        out
    }
}

fn conjoin(a: &[Decomposition], b: &[Decomposition]) -> Vec<Decomposition> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            let merged: Decomposition = x
                .iter()
                .zip(y)
                .map(|(s, t)| s.union(t).cloned().collect())
                .collect();
            out.push(merged);
        }
    }
    out
}

/// True when the ground query holds under the full-search decider. Errors
/// are treated as non-entailment, which only keeps more atoms.
fn ground_holds(table: &ClassTable, left: &GroundType, rel: QueryRelation, right: &GroundType) -> bool {
    SubtypeQuery::full(table, left.clone(), rel, right.clone())
        .ok()
        .and_then(|q| decide_non_expansive(table, &q).ok())
        .is_some_and(|v| v.holds())
}

/// Whether satisfying `stronger` forces satisfying `weaker`, for atoms
/// over the same placeholder.
fn atom_entails(table: &ClassTable, stronger: &QueryAtom, weaker: &QueryAtom) -> bool {
    if stronger == weaker {
        return true;
    }
    match (stronger.rel, weaker.rel) {
        // x equals stronger.left, so the weaker atom is a ground query.
        (QueryRelation::Eq, rel) => ground_holds(table, &weaker.left, rel, &stronger.left),
        // weaker.left <: stronger.left <: x.
        (QueryRelation::Sub, QueryRelation::Sub) => {
            ground_holds(table, &weaker.left, QueryRelation::Sub, &stronger.left)
        }
        // x <: stronger.left <: weaker.left.
        (QueryRelation::Sup, QueryRelation::Sup) => {
            ground_holds(table, &stronger.left, QueryRelation::Sub, &weaker.left)
        }
        _ => false,
    }
}

/// Drops every atom another atom of the set already forces. Sound to do
/// in one pass: distinct atoms never entail each other mutually, since
/// the subtype order on ground types is antisymmetric.
fn minimize_atoms(table: &ClassTable, atoms: BTreeSet<QueryAtom>) -> BTreeSet<QueryAtom> {
    atoms
        .iter()
        .filter(|atom| !atoms.iter().any(|other| *other != **atom && atom_entails(table, other, atom)))
        .cloned()
        .collect()
}

/// Extracts the regular tree grammar of a non-expansive table: the trees
/// derivable from the result are exactly the ground types over `sigma_top`
/// that are supertypes of `bottom`. Grammar variables are minimal query
/// sets discovered lazily from `{bottom <: x}`, named in discovery order.
pub fn class_table_to_rtg(
    table: &ClassTable,
    bottom: &GroundType,
    sigma_top: impl IntoIterator<Item = impl Into<Arc<str>>>,
) -> Result<RegularTreeGrammar, TransformError> {
    let features = classify(table)?;
    if features.expansive {
        return Err(TransformError::FragmentRefused {
            transform: "regular extraction",
            features,
        });
    }
    for class in bottom.classes() {
        if !table.declares(class) {
            return Err(TransformError::UndeclaredClass(class.name().to_string()));
        }
    }
    let sigma_names: BTreeSet<Arc<str>> = sigma_top.into_iter().map(Into::into).collect();
    for name in &sigma_names {
        if !table.contains(name) {
            return Err(TransformError::UndeclaredClass(name.to_string()));
        }
    }
    let sigma: Vec<&ClassDecl> =
        table.decls().iter().filter(|d| sigma_names.contains(d.name())).collect();

    let mut variables: Vec<BTreeSet<QueryAtom>> = Vec::new();
    let mut ids: HashMap<BTreeSet<QueryAtom>, usize> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut intern = |atoms: BTreeSet<QueryAtom>,
                      variables: &mut Vec<BTreeSet<QueryAtom>>,
                      queue: &mut VecDeque<usize>| {
        *ids.entry(atoms.clone()).or_insert_with(|| {
            variables.push(atoms);
            queue.push_back(variables.len() - 1);
            variables.len() - 1
        })
    };
    let start_atoms: BTreeSet<QueryAtom> = [QueryAtom {
        rel: QueryRelation::Sub,
        left: bottom.clone(),
    }]
    .into();
    intern(minimize_atoms(table, start_atoms), &mut variables, &mut queue);

    let mut productions: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut seen: HashSet<(usize, usize, Vec<usize>)> = HashSet::new();
    while let Some(qi) = queue.pop_front() {
        let atoms = variables[qi].clone();
        for (si, decl) in sigma.iter().enumerate() {
            let rank = decl.rank();
            let holes: Vec<Arc<str>> = (0..rank).map(|i| Arc::from(format!("?{i}").as_str())).collect();
            let template = TypePattern::node(
                decl.class_name(),
                holes.iter().map(|h| TypePattern::param(h.clone())).collect(),
            );
            let mut search = SymbolicSearch {
                table,
                holes: holes.iter().cloned().zip(0..).collect(),
                hole_count: rank,
                path: HashSet::new(),
            };
            let mut decompositions = vec![vec![BTreeSet::new(); rank]];
            for atom in &atoms {
                let found = search.solve(&atom.left, atom.rel, &template);
                decompositions = conjoin(&decompositions, &found);
                if decompositions.is_empty() {
                    break;
                }
            }
            let canonical: BTreeSet<Decomposition> = decompositions
                .into_iter()
                .map(|d| d.into_iter().map(|set| minimize_atoms(table, set)).collect())
                .collect();
            for decomposition in canonical {
                let children: Vec<usize> = decomposition
                    .into_iter()
                    .map(|set| intern(set, &mut variables, &mut queue))
                    .collect();
                let key = (qi, si, children.clone());
                if seen.insert(key.clone()) {
                    productions.push(key);
                }
            }
        }
    }

    // Variable names must not collide with terminal names.
    let prefix = ["v", "u", "w", "q"]
        .into_iter()
        .find(|p| {
            !sigma_names.iter().any(|name| {
                name.strip_prefix(p)
                    .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            })
        })
        .unwrap_or("qsv");
    let var_symbols: Vec<RankedSymbol> = (0..variables.len())
        .map(|i| RankedSymbol::new(format!("{prefix}{i}"), 0))
        .collect();
    let terminal_symbols: Vec<RankedSymbol> =
        sigma.iter().map(|d| RankedSymbol::new(d.name(), d.rank())).collect();
    let rules = productions
        .into_iter()
        .map(|(lhs, si, children)| {
            (
                var_symbols[lhs].clone(),
                (
                    terminal_symbols[si].clone(),
                    children.into_iter().map(|c| var_symbols[c].clone()).collect(),
                ),
            )
        })
        .collect();
    Ok(RegularTreeGrammar::new(terminal_symbols, var_symbols.clone(), var_symbols[0].clone(), rules)?)
}

// ------------------------------------------- covariant/invariant forms

/// Polarity of an annotated grammar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    /// Derives every supertype of an instance of the class.
    Covariant,
    /// Derives exactly the instance itself.
    Invariant,
}

/// A class lifted to a grammar variable of the given polarity. The
/// covariant variable carries both halves of every parameter, so its rank
/// doubles; the invariant variable keeps the class's rank.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnotatedVariable {
    pub base: ClassName,
    pub polarity: Polarity,
}

impl AnnotatedVariable {
    pub fn covariant(base: ClassName) -> AnnotatedVariable {
        AnnotatedVariable { base, polarity: Polarity::Covariant }
    }

    pub fn invariant(base: ClassName) -> AnnotatedVariable {
        AnnotatedVariable { base, polarity: Polarity::Invariant }
    }

    pub fn symbol(&self) -> RankedSymbol {
        match self.polarity {
            Polarity::Covariant => {
                RankedSymbol::new(format!("{}_p", self.base.name()), 2 * self.base.rank())
            }
            Polarity::Invariant => {
                RankedSymbol::new(format!("{}_o", self.base.name()), self.base.rank())
            }
        }
    }
}

/// The covariant form of a pattern: parameters split into a covariant and
/// an invariant half, class nodes become covariant variables carrying the
/// covariant halves of their children followed by the invariant halves.
pub fn covariant_form(pattern: &TypePattern) -> TreeForm {
    match pattern {
        TypePattern::Param(name) => TreeForm::Param(Arc::from(format!("{name}_p").as_str())),
        TypePattern::Node(class, children) => {
            let mut kids: Vec<TreeForm> = children.iter().map(covariant_form).collect();
            kids.extend(children.iter().map(invariant_form));
            TreeForm::Variable(AnnotatedVariable::covariant(class.clone()).symbol(), kids)
        }
    }
}

/// The invariant form of a pattern: parameters keep only their invariant
/// half, class nodes become invariant variables over invariant children.
pub fn invariant_form(pattern: &TypePattern) -> TreeForm {
    match pattern {
        TypePattern::Param(name) => TreeForm::Param(Arc::from(format!("{name}_o").as_str())),
        TypePattern::Node(class, children) => TreeForm::Variable(
            AnnotatedVariable::invariant(class.clone()).symbol(),
            children.iter().map(invariant_form).collect(),
        ),
    }
}

/// Extracts the terminal-headed context-free tree grammar of a table
/// without contravariance: derived trees are exactly the ground types over
/// `sigma_top` that are supertypes of `bottom`. Every class contributes a
/// covariant and an invariant variable; invariant variables of `sigma_top`
/// classes immediately re-emit their class, and each transitive
/// inheritance entry with a `sigma_top` head becomes one production of the
/// covariant variable.
pub fn class_table_to_gnf_cftg(
    table: &ClassTable,
    bottom: &GroundType,
    sigma_top: impl IntoIterator<Item = impl Into<Arc<str>>>,
) -> Result<Cftg, TransformError> {
    let features = classify(table)?;
    if features.uses_contravariance {
        return Err(TransformError::FragmentRefused {
            transform: "context-free extraction",
            features,
        });
    }
    for class in bottom.classes() {
        if !table.declares(class) {
            return Err(TransformError::UndeclaredClass(class.name().to_string()));
        }
    }
    let sigma_names: BTreeSet<Arc<str>> = sigma_top.into_iter().map(Into::into).collect();
    for name in &sigma_names {
        if !table.contains(name) {
            return Err(TransformError::UndeclaredClass(name.to_string()));
        }
    }

    let terminals: Vec<RankedSymbol> = table
        .decls()
        .iter()
        .filter(|d| sigma_names.contains(d.name()))
        .map(|d| RankedSymbol::new(d.name(), d.rank()))
        .collect();
    let mut variables = Vec::new();
    for decl in table.decls() {
        variables.push(AnnotatedVariable::covariant(decl.class_name()).symbol());
        variables.push(AnnotatedVariable::invariant(decl.class_name()).symbol());
    }

    let mut productions = Vec::new();
    for decl in table.decls() {
        if !sigma_names.contains(decl.name()) {
            continue;
        }
        // The invariant variable of a terminal class derives the class
        // applied to the invariant halves, and nothing else.
        let inv_params: Vec<Arc<str>> = decl
            .params()
            .iter()
            .map(|(n, _)| Arc::from(format!("{n}_o").as_str()))
            .collect();
        productions.push(CftgProduction::new(
            AnnotatedVariable::invariant(decl.class_name()).symbol(),
            inv_params.clone(),
            TreeForm::Terminal(
                RankedSymbol::new(decl.name(), decl.rank()),
                inv_params.iter().map(|p| TreeForm::Param(p.clone())).collect(),
            ),
        ));
    }
    for decl in table.decls() {
        let plus_params: Vec<Arc<str>> = decl
            .params()
            .iter()
            .map(|(n, _)| Arc::from(format!("{n}_p").as_str()))
            .chain(decl.params().iter().map(|(n, _)| Arc::from(format!("{n}_o").as_str())))
            .collect();
        for entry in table.transitive_super_patterns(decl.name()) {
            let Some(root) = entry.pattern.root() else {
                continue;
            };
            if !sigma_names.contains(root.name()) {
                continue;
            }
            let TypePattern::Node(head, children) = &entry.pattern else {
                continue;
            };
            let Some(head_decl) = table.get(head.name()) else {
                continue;
            };
            let annotated: Vec<TreeForm> = head_decl
                .params()
                .iter()
                .zip(children)
                .map(|((_, variance), child)| match variance {
                    Variance::Covariant => covariant_form(child),
                    Variance::Invariant => invariant_form(child),
                    Variance::Contravariant => unreachable!("fragment check rejects contravariance"),
                })
                .collect();
            productions.push(CftgProduction::new(
                AnnotatedVariable::covariant(decl.class_name()).symbol(),
                plus_params.clone(),
                TreeForm::Terminal(RankedSymbol::new(head.name(), head.rank()), annotated),
            ));
        }
    }
    let initial = covariant_form(&TypePattern::from_ground(bottom));
    let grammar = Cftg::new(terminals, variables, initial, productions)?;
    debug_assert!(grammar.is_gnf());
    Ok(grammar)
}

// --------------------------------------------------------- determinism

/// Whether grammar determinism lines up with single-instantiation
/// inheritance across a conversion round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeterminismReport {
    /// No two productions of one variable share a terminal head.
    pub grammar_deterministic: bool,
    /// No class transitively inherits two instantiations of one class.
    pub single_instantiation: bool,
}

impl DeterminismReport {
    pub fn consistent(&self) -> bool {
        self.grammar_deterministic == self.single_instantiation
    }
}

impl fmt::Display for DeterminismReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grammar {}; table {}; {}",
            if self.grammar_deterministic { "deterministic" } else { "nondeterministic" },
            if self.single_instantiation {
                "single-instantiation"
            } else {
                "multiple-instantiation"
            },
            if self.consistent() { "consistent" } else { "inconsistent" }
        )
    }
}

/// Converts the grammar to a table and compares determinism with the
/// table's instantiation feature.
pub fn determinism_report_for_grammar(
    g: &Cftg,
    dedup: bool,
) -> Result<DeterminismReport, TransformError> {
    let grammar_deterministic = is_deterministic_gnf(g)?;
    let (table, _, _) = gnf_cftg_to_class_table(g, dedup)?;
    let features = classify(&table)?;
    Ok(DeterminismReport {
        grammar_deterministic,
        single_instantiation: !features.multiple_instantiation,
    })
}

/// Converts the table to a grammar and compares the table's instantiation
/// feature with grammar determinism.
pub fn determinism_report_for_table(
    table: &ClassTable,
    bottom: &GroundType,
    sigma_top: impl IntoIterator<Item = impl Into<Arc<str>>>,
) -> Result<DeterminismReport, TransformError> {
    let features = classify(table)?;
    let grammar = class_table_to_gnf_cftg(table, bottom, sigma_top)?;
    Ok(DeterminismReport {
        grammar_deterministic: is_deterministic_gnf(&grammar)?,
        single_instantiation: !features.multiple_instantiation,
    })
}
