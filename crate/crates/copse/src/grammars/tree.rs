//! Ranked symbols, tree forms, regular and context-free tree grammars, and
//! the bounded derivation oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A symbol with a fixed arity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankedSymbol {
    name: Arc<str>,
    rank: usize,
}

impl RankedSymbol {
    pub fn new(name: impl Into<Arc<str>>, rank: usize) -> RankedSymbol {
        RankedSymbol { name: name.into(), rank }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

impl fmt::Display for RankedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A tree over terminals, grammar variables, and production parameters.
///
/// Ground results of derivations contain only `Terminal` nodes. `Param`
/// leaves appear in production right-hand sides and are replaced when the
/// production fires.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TreeForm {
    Terminal(RankedSymbol, Vec<TreeForm>),
    Variable(RankedSymbol, Vec<TreeForm>),
    Param(Arc<str>),
}

impl TreeForm {
    pub fn terminal(symbol: RankedSymbol, children: Vec<TreeForm>) -> TreeForm {
        assert_eq!(symbol.rank(), children.len(), "arity must match rank");
        TreeForm::Terminal(symbol, children)
    }

    pub fn variable(symbol: RankedSymbol, children: Vec<TreeForm>) -> TreeForm {
        assert_eq!(symbol.rank(), children.len(), "arity must match rank");
        TreeForm::Variable(symbol, children)
    }

    pub fn symbol(&self) -> Option<&RankedSymbol> {
        match self {
            TreeForm::Terminal(s, _) | TreeForm::Variable(s, _) => Some(s),
            TreeForm::Param(_) => None,
        }
    }

    pub fn children(&self) -> &[TreeForm] {
        match self {
            TreeForm::Terminal(_, c) | TreeForm::Variable(_, c) => c,
            TreeForm::Param(_) => &[],
        }
    }

    /// Number of nodes on the longest root-to-leaf path; a leaf has height 1.
    pub fn height(&self) -> usize {
        1 + self.children().iter().map(TreeForm::height).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(TreeForm::size).sum::<usize>()
    }

    /// True when the form contains only terminal nodes.
    pub fn is_ground(&self) -> bool {
        match self {
            TreeForm::Terminal(_, c) => c.iter().all(TreeForm::is_ground),
            TreeForm::Variable(..) | TreeForm::Param(_) => false,
        }
    }

    pub fn has_params(&self) -> bool {
        match self {
            TreeForm::Param(_) => true,
            TreeForm::Terminal(_, c) | TreeForm::Variable(_, c) => {
                c.iter().any(TreeForm::has_params)
            }
        }
    }

    /// Replaces every `Param` leaf by its binding; unbound parameters are
    /// left in place.
    pub fn substitute(&self, bindings: &BTreeMap<Arc<str>, TreeForm>) -> TreeForm {
        match self {
            TreeForm::Param(name) => bindings.get(name).cloned().unwrap_or_else(|| self.clone()),
            TreeForm::Terminal(s, c) => {
                TreeForm::Terminal(s.clone(), c.iter().map(|t| t.substitute(bindings)).collect())
            }
            TreeForm::Variable(s, c) => {
                TreeForm::Variable(s.clone(), c.iter().map(|t| t.substitute(bindings)).collect())
            }
        }
    }

    fn walk(&self, f: &mut impl FnMut(&TreeForm)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }
}

impl fmt::Display for TreeForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeForm::Param(name) => write!(f, "{name}"),
            TreeForm::Terminal(s, c) | TreeForm::Variable(s, c) => {
                write!(f, "{}", s.name())?;
                if !c.is_empty() {
                    write!(f, "(")?;
                    for (i, child) in c.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{child}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("symbol `{0}` is declared both as a terminal and as a variable")]
    NameClash(String),
    #[error("symbol `{0}` is declared twice with different ranks")]
    RankConflict(String),
    #[error("symbol `{0}` is used but not declared")]
    Undeclared(String),
    #[error("symbol `{symbol}` has rank {declared} but is applied to {applied} arguments")]
    Arity { symbol: String, declared: usize, applied: usize },
    #[error("variable `{0}` of a regular tree grammar must have rank 0")]
    RegularVariableRank(String),
    #[error("start symbol `{0}` is not a declared variable")]
    StartNotVariable(String),
    #[error("production left-hand side `{0}` is not a declared variable")]
    LhsNotVariable(String),
    #[error("production right-hand side uses `{0}` against its declared kind")]
    KindMismatch(String),
    #[error("production for `{lhs}` declares {given} parameters but the variable has rank {rank}")]
    ParamCount { lhs: String, given: usize, rank: usize },
    #[error("production for `{lhs}` repeats parameter `{param}`")]
    DuplicateParam { lhs: String, param: String },
    #[error("production for `{lhs}` uses unbound parameter `{param}`")]
    UnboundParam { lhs: String, param: String },
    #[error("initial tree contains parameter `{0}`")]
    ParamInInitialTree(String),
    #[error("grammar is not in normal form: production `{0}` has a non-terminal root")]
    NotGnf(String),
}

/// A production `v -> σ(v1, …, vk)` of a regular tree grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtgProduction {
    pub lhs: RankedSymbol,
    pub head: RankedSymbol,
    pub children: Vec<RankedSymbol>,
}

/// A regular tree grammar: rank-0 variables and productions whose right-hand
/// sides are single terminal nodes over variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularTreeGrammar {
    terminals: Vec<RankedSymbol>,
    variables: Vec<RankedSymbol>,
    start: RankedSymbol,
    productions: Vec<RtgProduction>,
}

fn check_alphabets(
    terminals: &[RankedSymbol],
    variables: &[RankedSymbol],
) -> Result<(), GrammarError> {
    let mut ranks: HashMap<&str, usize> = HashMap::new();
    for symbol in terminals.iter().chain(variables) {
        if let Some(&rank) = ranks.get(symbol.name()) {
            if rank != symbol.rank() {
                return Err(GrammarError::RankConflict(symbol.name().to_string()));
            }
        }
        ranks.insert(symbol.name(), symbol.rank());
    }
    let terminal_names: HashSet<&str> = terminals.iter().map(RankedSymbol::name).collect();
    for v in variables {
        if terminal_names.contains(v.name()) {
            return Err(GrammarError::NameClash(v.name().to_string()));
        }
    }
    Ok(())
}

impl RegularTreeGrammar {
    pub fn new(
        terminals: Vec<RankedSymbol>,
        variables: Vec<RankedSymbol>,
        start: RankedSymbol,
        productions: Vec<(RankedSymbol, (RankedSymbol, Vec<RankedSymbol>))>,
    ) -> Result<RegularTreeGrammar, GrammarError> {
        check_alphabets(&terminals, &variables)?;
        for v in &variables {
            if v.rank() != 0 {
                return Err(GrammarError::RegularVariableRank(v.name().to_string()));
            }
        }
        if !variables.contains(&start) {
            return Err(GrammarError::StartNotVariable(start.name().to_string()));
        }
        let productions: Vec<RtgProduction> = productions
            .into_iter()
            .map(|(lhs, (head, children))| RtgProduction { lhs, head, children })
            .collect();
        for p in &productions {
            if !variables.contains(&p.lhs) {
                return Err(GrammarError::LhsNotVariable(p.lhs.name().to_string()));
            }
            if !terminals.contains(&p.head) {
                return Err(GrammarError::KindMismatch(p.head.name().to_string()));
            }
            if p.head.rank() != p.children.len() {
                return Err(GrammarError::Arity {
                    symbol: p.head.name().to_string(),
                    declared: p.head.rank(),
                    applied: p.children.len(),
                });
            }
            for child in &p.children {
                if !variables.contains(child) {
                    return Err(GrammarError::KindMismatch(child.name().to_string()));
                }
            }
        }
        Ok(RegularTreeGrammar { terminals, variables, start, productions })
    }

    pub fn terminals(&self) -> &[RankedSymbol] {
        &self.terminals
    }

    pub fn variables(&self) -> &[RankedSymbol] {
        &self.variables
    }

    pub fn start(&self) -> &RankedSymbol {
        &self.start
    }

    pub fn productions(&self) -> &[RtgProduction] {
        &self.productions
    }

    /// Embeds the grammar as a context-free tree grammar. The embedding is
    /// always in normal form: right-hand sides are single terminal nodes.
    pub fn to_cftg(&self) -> Cftg {
        let productions = self
            .productions
            .iter()
            .map(|p| {
                let children = p
                    .children
                    .iter()
                    .map(|v| TreeForm::Variable(v.clone(), Vec::new()))
                    .collect();
                CftgProduction::new(
                    p.lhs.clone(),
                    Vec::new(),
                    TreeForm::Terminal(p.head.clone(), children),
                )
            })
            .collect();
        Cftg::new(
            self.terminals.clone(),
            self.variables.clone(),
            TreeForm::Variable(self.start.clone(), Vec::new()),
            productions,
        )
        .expect("a valid regular grammar embeds cleanly")
    }
}

impl fmt::Display for RegularTreeGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {}", self.start.name())?;
        for p in &self.productions {
            write!(f, "{} -> {}", p.lhs.name(), p.head.name())?;
            if !p.children.is_empty() {
                let names: Vec<&str> = p.children.iter().map(RankedSymbol::name).collect();
                write!(f, "({})", names.join(", "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A production `v(x1, …, xk) -> rhs` of a context-free tree grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CftgProduction {
    lhs: RankedSymbol,
    params: Vec<Arc<str>>,
    rhs: TreeForm,
}

impl CftgProduction {
    pub fn new(lhs: RankedSymbol, params: Vec<Arc<str>>, rhs: TreeForm) -> CftgProduction {
        CftgProduction { lhs, params, rhs }
    }

    pub fn lhs(&self) -> &RankedSymbol {
        &self.lhs
    }

    pub fn params(&self) -> &[Arc<str>] {
        &self.params
    }

    pub fn rhs(&self) -> &TreeForm {
        &self.rhs
    }

    /// The right-hand side with parameters renamed to positional indices,
    /// for comparison up to parameter names.
    fn positional_rhs(&self) -> TreeForm {
        let bindings: BTreeMap<Arc<str>, TreeForm> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), TreeForm::Param(format!("#{i}").into())))
            .collect();
        self.rhs.substitute(&bindings)
    }
}

impl fmt::Display for CftgProduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.lhs.name())?;
        if !self.params.is_empty() {
            let names: Vec<&str> = self.params.iter().map(|p| p.as_ref()).collect();
            write!(f, "({})", names.join(", "))?;
        }
        write!(f, " -> {}", self.rhs)
    }
}

/// A context-free tree grammar with an arbitrary initial tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cftg {
    terminals: Vec<RankedSymbol>,
    variables: Vec<RankedSymbol>,
    initial_tree: TreeForm,
    productions: Vec<CftgProduction>,
}

impl Cftg {
    pub fn new(
        terminals: Vec<RankedSymbol>,
        variables: Vec<RankedSymbol>,
        initial_tree: TreeForm,
        productions: Vec<CftgProduction>,
    ) -> Result<Cftg, GrammarError> {
        check_alphabets(&terminals, &variables)?;
        let grammar = Cftg { terminals, variables, initial_tree, productions };
        if grammar.initial_tree.has_params() {
            let mut param = String::new();
            grammar.initial_tree.walk(&mut |t| {
                if let TreeForm::Param(p) = t {
                    if param.is_empty() {
                        param = p.to_string();
                    }
                }
            });
            return Err(GrammarError::ParamInInitialTree(param));
        }
        grammar.check_form(&grammar.initial_tree, &BTreeSet::new(), "the initial tree")?;
        for p in &grammar.productions {
            if !grammar.variables.contains(&p.lhs) {
                return Err(GrammarError::LhsNotVariable(p.lhs.name().to_string()));
            }
            if p.params.len() != p.lhs.rank() {
                return Err(GrammarError::ParamCount {
                    lhs: p.lhs.name().to_string(),
                    given: p.params.len(),
                    rank: p.lhs.rank(),
                });
            }
            let mut bound: BTreeSet<&str> = BTreeSet::new();
            for param in &p.params {
                if !bound.insert(param.as_ref()) {
                    return Err(GrammarError::DuplicateParam {
                        lhs: p.lhs.name().to_string(),
                        param: param.to_string(),
                    });
                }
            }
            grammar.check_form(&p.rhs, &bound, p.lhs.name())?;
        }
        Ok(grammar)
    }

    fn check_form(
        &self,
        form: &TreeForm,
        bound: &BTreeSet<&str>,
        context: &str,
    ) -> Result<(), GrammarError> {
        match form {
            TreeForm::Param(name) => {
                if !bound.contains(name.as_ref()) {
                    return Err(GrammarError::UnboundParam {
                        lhs: context.to_string(),
                        param: name.to_string(),
                    });
                }
            }
            TreeForm::Terminal(symbol, children) => {
                if !self.terminals.contains(symbol) {
                    return Err(if self.variables.contains(symbol) {
                        GrammarError::KindMismatch(symbol.name().to_string())
                    } else {
                        GrammarError::Undeclared(symbol.name().to_string())
                    });
                }
                if symbol.rank() != children.len() {
                    return Err(GrammarError::Arity {
                        symbol: symbol.name().to_string(),
                        declared: symbol.rank(),
                        applied: children.len(),
                    });
                }
                for child in children {
                    self.check_form(child, bound, context)?;
                }
            }
            TreeForm::Variable(symbol, children) => {
                if !self.variables.contains(symbol) {
                    return Err(if self.terminals.contains(symbol) {
                        GrammarError::KindMismatch(symbol.name().to_string())
                    } else {
                        GrammarError::Undeclared(symbol.name().to_string())
                    });
                }
                if symbol.rank() != children.len() {
                    return Err(GrammarError::Arity {
                        symbol: symbol.name().to_string(),
                        declared: symbol.rank(),
                        applied: children.len(),
                    });
                }
                for child in children {
                    self.check_form(child, bound, context)?;
                }
            }
        }
        Ok(())
    }

    pub fn terminals(&self) -> &[RankedSymbol] {
        &self.terminals
    }

    pub fn variables(&self) -> &[RankedSymbol] {
        &self.variables
    }

    pub fn initial_tree(&self) -> &TreeForm {
        &self.initial_tree
    }

    pub fn productions(&self) -> &[CftgProduction] {
        &self.productions
    }

    pub fn productions_of(&self, variable: &RankedSymbol) -> Vec<&CftgProduction> {
        self.productions.iter().filter(|p| &p.lhs == variable).collect()
    }

    /// True when every production right-hand side has a terminal root.
    pub fn is_gnf(&self) -> bool {
        self.gnf_violations().is_empty()
    }

    /// The productions whose right-hand side root is not a terminal.
    pub fn gnf_violations(&self) -> Vec<&CftgProduction> {
        self.productions
            .iter()
            .filter(|p| !matches!(p.rhs, TreeForm::Terminal(..)))
            .collect()
    }
}

impl fmt::Display for Cftg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "init {}", self.initial_tree)?;
        for p in &self.productions {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

/// True when no variable has two distinct productions with the same terminal
/// head. Productions are compared up to parameter renaming.
pub fn is_deterministic_gnf(g: &Cftg) -> Result<bool, GrammarError> {
    if let Some(violation) = g.gnf_violations().first() {
        return Err(GrammarError::NotGnf(violation.to_string()));
    }
    let mut seen: HashMap<(String, String), TreeForm> = HashMap::new();
    for p in &g.productions {
        let TreeForm::Terminal(head, _) = &p.rhs else { unreachable!("checked above") };
        let key = (p.lhs.name().to_string(), head.name().to_string());
        let body = p.positional_rhs();
        match seen.get(&key) {
            Some(existing) if existing != &body => return Ok(false),
            Some(_) => {}
            None => {
                seen.insert(key, body);
            }
        }
    }
    Ok(true)
}

/// Rewrites a grammar with an arbitrary initial tree into one whose initial
/// tree is a bare variable, preserving the tree language. Normal form is
/// preserved when the input is in normal form.
pub fn ecftg_to_cftg(g: &Cftg) -> Cftg {
    match &g.initial_tree {
        TreeForm::Variable(v, children) if children.is_empty() && v.rank() == 0 => g.clone(),
        TreeForm::Terminal(..) => {
            let start = fresh_start_symbol(g);
            let mut variables = g.variables.clone();
            variables.push(start.clone());
            let mut productions = g.productions.clone();
            productions.push(CftgProduction::new(
                start.clone(),
                Vec::new(),
                g.initial_tree.clone(),
            ));
            Cftg::new(
                g.terminals.clone(),
                variables,
                TreeForm::Variable(start, Vec::new()),
                productions,
            )
            .expect("the rewritten grammar is well formed")
        }
        TreeForm::Variable(v, children) => {
            // Start is an applied variable: instantiate each of its
            // productions with the initial tree's arguments.
            let start = fresh_start_symbol(g);
            let mut variables = g.variables.clone();
            variables.push(start.clone());
            let mut productions = g.productions.clone();
            for p in g.productions_of(v) {
                let bindings: BTreeMap<Arc<str>, TreeForm> = p
                    .params
                    .iter()
                    .cloned()
                    .zip(children.iter().cloned())
                    .collect();
                productions.push(CftgProduction::new(
                    start.clone(),
                    Vec::new(),
                    p.rhs.substitute(&bindings),
                ));
            }
            Cftg::new(
                g.terminals.clone(),
                variables,
                TreeForm::Variable(start, Vec::new()),
                productions,
            )
            .expect("the rewritten grammar is well formed")
        }
        TreeForm::Param(_) => unreachable!("initial trees never contain parameters"),
    }
}

fn fresh_start_symbol(g: &Cftg) -> RankedSymbol {
    let taken: HashSet<&str> = g
        .terminals
        .iter()
        .chain(&g.variables)
        .map(RankedSymbol::name)
        .collect();
    if !taken.contains("S") {
        return RankedSymbol::new("S", 0);
    }
    let mut n = 2usize;
    loop {
        let candidate = format!("S{n}");
        if !taken.contains(candidate.as_str()) {
            return RankedSymbol::new(candidate, 0);
        }
        n += 1;
    }
}

/// Bounds for the derivation oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeriveBounds {
    /// Maximum height (node count along a path, leaf = 1) of collected trees.
    pub max_height: usize,
    /// Maximum number of rewriting steps along the canonical strategy.
    pub max_steps: usize,
    /// Maximum number of live intermediate forms before the oracle refuses.
    pub max_frontier: usize,
}

impl DeriveBounds {
    pub fn new(max_height: usize, max_steps: usize) -> DeriveBounds {
        DeriveBounds { max_height, max_steps, max_frontier: 1_000_000 }
    }

    pub fn with_frontier(mut self, max_frontier: usize) -> DeriveBounds {
        self.max_frontier = max_frontier;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeriveError {
    #[error("derivation frontier exceeded {limit} live forms")]
    FrontierOverflow { limit: usize },
}

/// Enumerates the ground trees of height at most `bounds.max_height`
/// derivable from the grammar's initial tree.
///
/// The oracle rewrites the leftmost-outermost variable of each form, which
/// enumerates the same tree language as rewriting at arbitrary redexes (the
/// unrestricted relation standardizes to outside-in order) while keeping the
/// search space canonical. `max_steps` bounds the number of rewriting steps
/// along that strategy. Forms are deduplicated structurally and forms whose
/// every completion provably exceeds `max_height` are pruned.
pub fn derive_trees(g: &Cftg, bounds: &DeriveBounds) -> Result<BTreeSet<TreeForm>, DeriveError> {
    let min_completion = min_variable_heights(g, bounds.max_height + 1);
    let mut results: BTreeSet<TreeForm> = BTreeSet::new();
    let mut seen: HashSet<TreeForm> = HashSet::new();
    let mut frontier: Vec<TreeForm> = Vec::new();

    let root = g.initial_tree.clone();
    if root.is_ground() {
        if root.height() <= bounds.max_height {
            results.insert(root);
        }
        return Ok(results);
    }
    if lower_height_bound(&root, &min_completion) <= bounds.max_height {
        seen.insert(root.clone());
        frontier.push(root);
    }

    for _ in 0..bounds.max_steps {
        if frontier.is_empty() {
            break;
        }
        let mut next: Vec<TreeForm> = Vec::new();
        for form in &frontier {
            for expansion in expand_leftmost_outermost(g, form) {
                if expansion.is_ground() {
                    if expansion.height() <= bounds.max_height {
                        results.insert(expansion);
                    }
                    continue;
                }
                if lower_height_bound(&expansion, &min_completion) > bounds.max_height {
                    continue;
                }
                if seen.insert(expansion.clone()) {
                    next.push(expansion);
                }
            }
            if next.len() > bounds.max_frontier {
                return Err(DeriveError::FrontierOverflow { limit: bounds.max_frontier });
            }
        }
        frontier = next;
    }
    Ok(results)
}

/// Expands the leftmost-outermost variable node with every production.
fn expand_leftmost_outermost(g: &Cftg, form: &TreeForm) -> Vec<TreeForm> {
    match form {
        TreeForm::Variable(symbol, children) => g
            .productions_of(symbol)
            .into_iter()
            .map(|p| {
                let bindings: BTreeMap<Arc<str>, TreeForm> =
                    p.params.iter().cloned().zip(children.iter().cloned()).collect();
                p.rhs.substitute(&bindings)
            })
            .collect(),
        TreeForm::Terminal(symbol, children) => {
            for (i, child) in children.iter().enumerate() {
                if child.is_ground() {
                    continue;
                }
                return expand_leftmost_outermost(g, child)
                    .into_iter()
                    .map(|expanded| {
                        let mut next = children.clone();
                        next[i] = expanded;
                        TreeForm::Terminal(symbol.clone(), next)
                    })
                    .collect();
            }
            Vec::new()
        }
        TreeForm::Param(_) => Vec::new(),
    }
}

/// Least possible height of any ground tree derivable from each variable,
/// treating parameters as height-1 placeholders; values are capped. Dead
/// variables (no derivable completion) sit above the cap.
fn min_variable_heights(g: &Cftg, cap: usize) -> HashMap<RankedSymbol, usize> {
    let mut heights: HashMap<RankedSymbol, usize> =
        g.variables.iter().map(|v| (v.clone(), cap + 1)).collect();
    loop {
        let mut changed = false;
        for p in &g.productions {
            let bound = rhs_lower_bound(&p.rhs, &heights, cap);
            let entry = heights.get_mut(&p.lhs).expect("lhs is declared");
            if bound < *entry {
                *entry = bound;
                changed = true;
            }
        }
        if !changed {
            return heights;
        }
    }
}

fn rhs_lower_bound(
    form: &TreeForm,
    heights: &HashMap<RankedSymbol, usize>,
    cap: usize,
) -> usize {
    match form {
        TreeForm::Param(_) => 1,
        TreeForm::Terminal(_, children) => {
            let below = children
                .iter()
                .map(|c| rhs_lower_bound(c, heights, cap))
                .max()
                .unwrap_or(0);
            (1 + below).min(cap + 1)
        }
        // A production may drop the variable's arguments entirely, so only
        // the variable's own minimum counts toward the lower bound.
        TreeForm::Variable(symbol, _) => *heights.get(symbol).unwrap_or(&(cap + 1)),
    }
}

fn lower_height_bound(form: &TreeForm, heights: &HashMap<RankedSymbol, usize>) -> usize {
    rhs_lower_bound(form, heights, usize::MAX / 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn sym(name: &str, rank: usize) -> RankedSymbol {
        RankedSymbol::new(name, rank)
    }

    #[test]
    fn rtg_validates_shapes() {
        let a = sym("a", 1);
        let v = sym("v", 0);
        let w = sym("w", 1);
        let err = RegularTreeGrammar::new(
            vec![a.clone()],
            vec![v.clone(), w.clone()],
            v.clone(),
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GrammarError::RegularVariableRank("w".to_string()));

        let err = RegularTreeGrammar::new(
            vec![a.clone(), sym("v", 0)],
            vec![v.clone()],
            v.clone(),
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GrammarError::NameClash("v".to_string()));

        let err = RegularTreeGrammar::new(
            vec![a.clone()],
            vec![v.clone()],
            v.clone(),
            vec![(v.clone(), (a.clone(), vec![]))],
        )
        .unwrap_err();
        assert!(matches!(err, GrammarError::Arity { .. }));
    }

    #[test]
    fn rtg_embedding_is_always_normal_form() {
        let g = fixtures::numbers_and_lists_rtg().to_cftg();
        assert!(g.is_gnf());
        assert_eq!(g.productions().len(), 4);
    }

    #[test]
    fn cftg_rejects_unbound_params_and_kind_errors() {
        let a = sym("a", 1);
        let v = sym("v", 1);
        let err = Cftg::new(
            vec![a.clone()],
            vec![v.clone()],
            TreeForm::Variable(v.clone(), vec![TreeForm::Terminal(a.clone(), vec![])]),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, GrammarError::Arity { .. }));

        let e = sym("E", 0);
        let err = Cftg::new(
            vec![a.clone(), e.clone()],
            vec![v.clone()],
            TreeForm::Variable(v.clone(), vec![TreeForm::Terminal(e.clone(), vec![])]),
            vec![CftgProduction::new(
                v.clone(),
                vec!["x".into()],
                TreeForm::Terminal(a.clone(), vec![TreeForm::Param("y".into())]),
            )],
        )
        .unwrap_err();
        assert_eq!(
            err,
            GrammarError::UnboundParam { lhs: "v".to_string(), param: "y".to_string() }
        );
    }

    #[test]
    fn palindrome_grammar_is_gnf_binary_tree_grammar_is_not() {
        assert!(fixtures::palindrome_cftg().is_gnf());

        // Complete binary trees: v -> b | f(v, v) is not in normal form on
        // the variable-rooted production shapes below.
        let b = sym("b", 0);
        let f = sym("f", 2);
        let v = sym("v", 0);
        let u = sym("u", 0);
        let g = Cftg::new(
            vec![b.clone(), f.clone()],
            vec![v.clone(), u.clone()],
            TreeForm::Variable(v.clone(), vec![]),
            vec![
                CftgProduction::new(v.clone(), vec![], TreeForm::Variable(u.clone(), vec![])),
                CftgProduction::new(u.clone(), vec![], TreeForm::Terminal(b.clone(), vec![])),
                CftgProduction::new(
                    v.clone(),
                    vec![],
                    TreeForm::Terminal(
                        f.clone(),
                        vec![TreeForm::Variable(u.clone(), vec![]), TreeForm::Variable(u, vec![])],
                    ),
                ),
            ],
        )
        .unwrap();
        assert!(!g.is_gnf());
        assert_eq!(g.gnf_violations().len(), 1);
    }

    #[test]
    fn determinism_check_distinguishes_the_fixtures() {
        let nat_list = fixtures::numbers_and_lists_rtg().to_cftg();
        assert_eq!(is_deterministic_gnf(&nat_list), Ok(true));

        let palindrome = fixtures::palindrome_cftg();
        assert_eq!(is_deterministic_gnf(&palindrome), Ok(false));

        let empty = Cftg::new(
            vec![sym("a", 0)],
            vec![sym("v", 0)],
            TreeForm::Variable(sym("v", 0), vec![]),
            vec![],
        )
        .unwrap();
        assert_eq!(is_deterministic_gnf(&empty), Ok(true));
    }

    #[test]
    fn derive_nat_list_trees() {
        let g = fixtures::numbers_and_lists_rtg().to_cftg();
        let trees = derive_trees(&g, &DeriveBounds::new(4, 40)).unwrap();
        // Lists of height <= 4: 1 + 3 * (1 + 2 * (1 + 1)) = 16.
        assert_eq!(trees.len(), 16);
        let target = fixtures::two_one_zero_list();
        let as_form = ground_to_form(&target);
        assert!(trees.contains(&as_form), "missing {as_form}");
        for t in &trees {
            assert!(t.is_ground());
            assert!(t.height() <= 4);
        }
    }

    fn ground_to_form(t: &crate::term::GroundType) -> TreeForm {
        TreeForm::Terminal(
            RankedSymbol::new(t.class().name().to_string(), t.class().rank()),
            t.children().iter().map(ground_to_form).collect(),
        )
    }

    #[test]
    fn derive_palindrome_words() {
        let g = fixtures::palindrome_cftg();
        // Words of length <= 7 end in E: trees have height <= 8.
        let trees = derive_trees(&g, &DeriveBounds::new(8, 40)).unwrap();
        let words: BTreeSet<String> = trees.iter().map(spell_monadic).collect();
        assert!(words.contains("abbabbaE"));
        assert!(!words.contains("abbabaaE"));
        // Exactly the nonempty palindromes over {a, b} of length <= 7.
        let expected: BTreeSet<String> = (1..=7usize)
            .flat_map(|n| all_words(n))
            .filter(|w| w.chars().rev().collect::<String>() == *w)
            .map(|w| format!("{w}E"))
            .collect();
        assert_eq!(words, expected);
    }

    fn all_words(n: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|w| ["a", "b"].into_iter().map(move |c| format!("{w}{c}")))
                .collect();
        }
        out
    }

    fn spell_monadic(t: &TreeForm) -> String {
        let mut out = String::new();
        let mut cursor = t;
        loop {
            let symbol = cursor.symbol().expect("ground tree");
            out.push_str(symbol.name());
            match cursor.children() {
                [] => return out,
                [child] => cursor = child,
                _ => panic!("not a monadic tree"),
            }
        }
    }

    #[test]
    fn derive_height_zero_is_empty_and_ground_initial_tree_is_itself() {
        let g = fixtures::palindrome_cftg();
        assert!(derive_trees(&g, &DeriveBounds::new(0, 10)).unwrap().is_empty());

        let e = sym("E", 0);
        let ground = Cftg::new(
            vec![e.clone()],
            vec![sym("v", 0)],
            TreeForm::Terminal(e.clone(), vec![]),
            vec![],
        )
        .unwrap();
        let trees = derive_trees(&ground, &DeriveBounds::new(3, 5)).unwrap();
        assert_eq!(trees.len(), 1);
    }

    #[test]
    fn derive_agrees_with_naive_any_redex_expansion() {
        // Step budgets chosen to be non-binding at height 4 (a full binary
        // tree of height 4 takes 15 expansions), so both engines must find
        // exactly the derivable ground trees of height <= 4.
        for g in [fixtures::palindrome_cftg(), fixtures::numbers_and_lists_rtg().to_cftg()] {
            let canonical = derive_trees(&g, &DeriveBounds::new(4, 32)).unwrap();
            let naive = naive_derive(&g, 4, 32);
            assert_eq!(canonical, naive);
        }
    }

    /// Reference expander: rewrites at every redex, no pruning beyond the
    /// height filter applied to results.
    fn naive_derive(g: &Cftg, max_height: usize, max_steps: usize) -> BTreeSet<TreeForm> {
        let mut results = BTreeSet::new();
        let mut seen: HashSet<TreeForm> = HashSet::new();
        let mut frontier = vec![g.initial_tree.clone()];
        seen.insert(g.initial_tree.clone());
        if g.initial_tree.is_ground() && g.initial_tree.height() <= max_height {
            results.insert(g.initial_tree.clone());
        }
        for _ in 0..max_steps {
            let mut next = Vec::new();
            for form in &frontier {
                for expanded in expand_everywhere(g, form) {
                    if expanded.is_ground() {
                        if expanded.height() <= max_height {
                            results.insert(expanded);
                        }
                    } else if expanded.height() <= max_height + 2 && seen.insert(expanded.clone())
                    {
                        // Generous slack keeps the reference exhaustive for
                        // the bounds used here while staying finite.
                        next.push(expanded);
                    }
                }
            }
            frontier = next;
        }
        results
    }

    fn expand_everywhere(g: &Cftg, form: &TreeForm) -> Vec<TreeForm> {
        let mut out = Vec::new();
        if let TreeForm::Variable(symbol, children) = form {
            for p in g.productions_of(symbol) {
                let bindings: BTreeMap<Arc<str>, TreeForm> =
                    p.params.iter().cloned().zip(children.iter().cloned()).collect();
                out.push(p.rhs.substitute(&bindings));
            }
        }
        let children = form.children();
        for (i, child) in children.iter().enumerate() {
            for expanded in expand_everywhere(g, child) {
                let mut next = children.to_vec();
                next[i] = expanded;
                out.push(match form {
                    TreeForm::Terminal(s, _) => TreeForm::Terminal(s.clone(), next),
                    TreeForm::Variable(s, _) => TreeForm::Variable(s.clone(), next),
                    TreeForm::Param(_) => unreachable!(),
                });
            }
        }
        out
    }

    #[test]
    fn ecftg_rewrite_preserves_language_and_normal_form() {
        let g = fixtures::palindrome_cftg();
        let rewritten = ecftg_to_cftg(&g);
        assert!(rewritten.is_gnf());
        assert!(matches!(rewritten.initial_tree(), TreeForm::Variable(v, c) if c.is_empty() && v.name() == "S"));
        // Six productions instantiated from v0, on top of the originals.
        assert_eq!(rewritten.productions().len(), g.productions().len() + 6);
        let before = derive_trees(&g, &DeriveBounds::new(6, 30)).unwrap();
        let after = derive_trees(&rewritten, &DeriveBounds::new(6, 30)).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn ecftg_rewrite_keeps_variable_starts_and_wraps_terminal_starts() {
        let nat_list = fixtures::numbers_and_lists_rtg().to_cftg();
        assert_eq!(ecftg_to_cftg(&nat_list), nat_list);

        let e = sym("E", 0);
        let leaf_start = Cftg::new(
            vec![e.clone()],
            vec![sym("v", 0)],
            TreeForm::Terminal(e.clone(), vec![]),
            vec![],
        )
        .unwrap();
        let rewritten = ecftg_to_cftg(&leaf_start);
        assert_eq!(rewritten.productions().len(), 1);
        let trees = derive_trees(&rewritten, &DeriveBounds::new(2, 4)).unwrap();
        assert_eq!(trees.len(), 1);
        assert!(trees.contains(&TreeForm::Terminal(e, vec![])));
    }
}
