//! Subtyping deciders for the decidable class-table fragments.
//!
//! Queries relate two ground types by `<:`, `=`, or `:>` and are decided by
//! the two rules of the system: Var decomposes a query between types with
//! the same root class into child queries directed by the declared
//! variances, and Super rewrites the subtype side one inheritance step
//! upward. Tables without contravariance get the goal-directed decider
//! whose right side strictly shrinks; non-expansive tables get the full
//! search with a cycle ledger that rejects any branch repeating a
//! (left, relation, right) triple on the current path. Every positive
//! verdict carries a proof trace replayable by [`check_trace`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;
use std::sync::Mutex;

use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{classify, AnalysisError, FeatureSet};
use crate::table::{AlphabetSplit, ClassTable, TransitiveSuper};
use crate::term::{apply_subst, GroundType, Substitution, Variance};

/// The relation of a query: `<:` (Sub), `=` (Eq), or `:>` (Sup).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryRelation {
    Sub,
    Eq,
    Sup,
}

impl QueryRelation {
    /// The relation read from the other side: Sub and Sup swap, Eq stays.
    pub fn mirror(self) -> QueryRelation {
        match self {
            QueryRelation::Sub => QueryRelation::Sup,
            QueryRelation::Eq => QueryRelation::Eq,
            QueryRelation::Sup => QueryRelation::Sub,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            QueryRelation::Sub => "<:",
            QueryRelation::Eq => "=",
            QueryRelation::Sup => ":>",
        }
    }

    /// The child relation produced by the Var rule at a position with the
    /// given variance: covariant keeps the relation, invariant demands
    /// equality, contravariant flips. Under Eq every child is Eq.
    pub fn child_relation(self, variance: Variance) -> QueryRelation {
        match (self, variance) {
            (QueryRelation::Eq, _) => QueryRelation::Eq,
            (rel, Variance::Covariant) => rel,
            (_, Variance::Invariant) => QueryRelation::Eq,
            (rel, Variance::Contravariant) => rel.mirror(),
        }
    }
}

impl fmt::Display for QueryRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("{side} type `{type_text}` uses class `{class}` outside the {side}-side alphabet")]
    AlphabetViolation { side: &'static str, type_text: String, class: String },
}

/// A subtyping query `left rel right` together with the alphabet split that
/// constrains which classes may appear on each side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtypeQuery {
    left: GroundType,
    rel: QueryRelation,
    right: GroundType,
    split: AlphabetSplit,
}

impl SubtypeQuery {
    /// Builds a query, enforcing the split: under Sub the left side ranges
    /// over the subtype alphabet and the right over the supertype alphabet;
    /// under Sup the sides swap; under Eq each side may use either.
    pub fn new(
        left: GroundType,
        rel: QueryRelation,
        right: GroundType,
        split: AlphabetSplit,
    ) -> Result<SubtypeQuery, QueryError> {
        let check_sub = |side: &'static str, t: &GroundType| -> Result<(), QueryError> {
            for class in t.classes() {
                if !split.sub_contains(class.name()) {
                    return Err(QueryError::AlphabetViolation {
                        side,
                        type_text: t.to_string(),
                        class: class.name().to_string(),
                    });
                }
            }
            Ok(())
        };
        let check_sup = |side: &'static str, t: &GroundType| -> Result<(), QueryError> {
            for class in t.classes() {
                if !split.sup_contains(class.name()) {
                    return Err(QueryError::AlphabetViolation {
                        side,
                        type_text: t.to_string(),
                        class: class.name().to_string(),
                    });
                }
            }
            Ok(())
        };
        let check_either = |side: &'static str, t: &GroundType| -> Result<(), QueryError> {
            for class in t.classes() {
                if !split.sub_contains(class.name()) && !split.sup_contains(class.name()) {
                    return Err(QueryError::AlphabetViolation {
                        side,
                        type_text: t.to_string(),
                        class: class.name().to_string(),
                    });
                }
            }
            Ok(())
        };
        match rel {
            QueryRelation::Sub => {
                check_sub("subtype", &left)?;
                check_sup("supertype", &right)?;
            }
            QueryRelation::Sup => {
                check_sup("supertype", &left)?;
                check_sub("subtype", &right)?;
            }
            QueryRelation::Eq => {
                check_either("left", &left)?;
                check_either("right", &right)?;
            }
        }
        Ok(SubtypeQuery { left, rel, right, split })
    }

    /// Builds a query over the full split of the table (every declared
    /// class on both sides); fails only if a query type mentions an
    /// undeclared class.
    pub fn full(
        table: &ClassTable,
        left: GroundType,
        rel: QueryRelation,
        right: GroundType,
    ) -> Result<SubtypeQuery, QueryError> {
        SubtypeQuery::new(left, rel, right, AlphabetSplit::full(table))
    }

    pub fn left(&self) -> &GroundType {
        &self.left
    }

    pub fn rel(&self) -> QueryRelation {
        self.rel
    }

    pub fn right(&self) -> &GroundType {
        &self.right
    }

    pub fn split(&self) -> &AlphabetSplit {
        &self.split
    }

    /// The same query read from the other side.
    pub fn mirrored(&self) -> SubtypeQuery {
        SubtypeQuery {
            left: self.right.clone(),
            rel: self.rel.mirror(),
            right: self.left.clone(),
            split: self.split.clone(),
        }
    }
}

impl fmt::Display for SubtypeQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.rel, self.right)
    }
}

/// A replayable proof. Nodes carry only the rule applications; the queries
/// they prove are recomputed from the root query during replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofTrace {
    /// Axiom: both sides are the same ground type.
    Refl,
    /// Var rule: one sub-trace per child position, labeled with the
    /// declared variance that directed it.
    Var { children: Vec<(Variance, ProofTrace)> },
    /// Super rule: rewrite the subtype side (the right side under Sup) by
    /// the named class's `super_index`-th declared supertype.
    Super { class: String, super_index: usize, premise: Box<ProofTrace> },
}

impl ProofTrace {
    /// Number of rule applications in the trace.
    pub fn len(&self) -> usize {
        match self {
            ProofTrace::Refl => 1,
            ProofTrace::Var { children } => {
                1 + children.iter().map(|(_, t)| t.len()).sum::<usize>()
            }
            ProofTrace::Super { premise, .. } => 1 + premise.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// JSON rendering: step kind, declaration used, child variances.
    pub fn to_json(&self) -> Value {
        match self {
            ProofTrace::Refl => json!({ "rule": "refl" }),
            ProofTrace::Var { children } => json!({
                "rule": "var",
                "children": children
                    .iter()
                    .map(|(variance, trace)| json!({
                        "variance": variance.symbol().to_string(),
                        "trace": trace.to_json(),
                    }))
                    .collect::<Vec<_>>(),
            }),
            ProofTrace::Super { class, super_index, premise } => json!({
                "rule": "super",
                "class": class,
                "superIndex": super_index,
                "premise": premise.to_json(),
            }),
        }
    }
}

/// The repeating segment of a search path that forced a cyclic branch to be
/// rejected. The first and last triples coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleWitness {
    pub chain: Vec<(GroundType, QueryRelation, GroundType)>,
}

impl fmt::Display for CycleWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (l, rel, r)) in self.chain.iter().enumerate() {
            if i > 0 {
                write!(f, "  =>  ")?;
            }
            write!(f, "{l} {rel} {r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// The query is derivable; the trace replays under [`check_trace`].
    Holds(ProofTrace),
    /// No derivation exists.
    Fails,
    /// Every remaining derivation would be infinite; the witness shows one
    /// repeating query segment. Only the full-search decider returns this.
    CycleRejected(CycleWitness),
    /// The table lies outside the decided fragments (or a bounded attempt
    /// ran out of depth).
    Undecided(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds(_))
    }
}

#[derive(Debug, Error)]
pub enum DecideError {
    #[error(transparent)]
    IllFormed(#[from] AnalysisError),
    #[error("query mentions class `{0}`, which the table does not declare at that rank")]
    Undeclared(String),
    #[error("table refused by the {fragment} decider; features: {features}")]
    FragmentRefused { fragment: &'static str, features: FeatureSet },
}

/// Per-call counters exposed for cost assertions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecideStats {
    /// Memo-missed query expansions performed by the search.
    pub expansions: u64,
}

// ------------------------------------------------------------- term pool

/// Interning pool giving small dense ids to ground types, so memo keys are
/// cheap to hash and equality checks are id comparisons. Shared subterms
/// hit the pointer fast path.
#[derive(Default)]
struct TermPool {
    by_addr: HashMap<usize, u32>,
    by_shape: HashMap<(String, Vec<u32>), u32>,
    terms: Vec<GroundType>,
    // Every term with a recorded address is pinned here; otherwise a
    // dropped term's allocation could be reused by a structurally
    // different node, which would then inherit the stale id.
    pinned: Vec<GroundType>,
}

impl TermPool {
    fn id(&mut self, t: &GroundType) -> u32 {
        if let Some(&id) = self.by_addr.get(&t.node_addr()) {
            return id;
        }
        let child_ids: Vec<u32> = t.children().iter().map(|c| self.id(c)).collect();
        let key = (t.class().name().to_string(), child_ids);
        let id = match self.by_shape.get(&key) {
            Some(&id) => {
                self.pinned.push(t.clone());
                id
            }
            None => {
                let id = self.terms.len() as u32;
                self.by_shape.insert(key, id);
                self.terms.push(t.clone());
                id
            }
        };
        self.by_addr.insert(t.node_addr(), id);
        id
    }

    fn term(&self, id: u32) -> &GroundType {
        &self.terms[id as usize]
    }
}

// ------------------------------------------- non-contravariant decider

/// Cached transitive supertype entries, shared per root class.
type SuperSets = HashMap<String, Rc<Vec<TransitiveSuper>>>;

struct NcSearch<'a> {
    table: &'a ClassTable,
    supers: SuperSets,
    pool: TermPool,
    memo: HashMap<(u32, u32), Option<ProofTrace>>,
    stats: DecideStats,
}

impl<'a> NcSearch<'a> {
    fn new(table: &'a ClassTable) -> NcSearch<'a> {
        NcSearch {
            table,
            supers: HashMap::new(),
            pool: TermPool::default(),
            memo: HashMap::new(),
            stats: DecideStats::default(),
        }
    }

    fn supers_of(&mut self, class: &str) -> Rc<Vec<TransitiveSuper>> {
        if let Some(entry) = self.supers.get(class) {
            return Rc::clone(entry);
        }
        let entry = Rc::new(self.table.transitive_super_patterns(class));
        self.supers.insert(class.to_string(), Rc::clone(&entry));
        entry
    }

    /// Decides `l <: r`. Returns the proof trace on success. Terminates
    /// because every recursive call descends into a child of `r`.
    fn sub(&mut self, l: &GroundType, r: &GroundType) -> Option<ProofTrace> {
        let key = (self.pool.id(l), self.pool.id(r));
        if let Some(cached) = self.memo.get(&key) {
            return cached.clone();
        }
        self.stats.expansions += 1;
        let result = self.expand(l, r);
        self.memo.insert(key, result.clone());
        result
    }

    fn expand(&mut self, l: &GroundType, r: &GroundType) -> Option<ProofTrace> {
        let Some(right_decl) = self.table.get(r.class().name()) else {
            return None;
        };
        if right_decl.rank() != r.class().rank() {
            return None;
        }
        let Some(left_decl) = self.table.get(l.class().name()) else {
            return None;
        };
        if left_decl.rank() != l.class().rank() {
            return None;
        }
        let subst: Substitution =
            left_decl.param_names().zip(l.children().iter().cloned()).collect();
        let entries = self.supers_of(l.class().name());
        'entries: for entry in entries.iter() {
            if entry.pattern.root().map(|c| c.name()) != Some(r.class().name()) {
                continue;
            }
            let Ok(u) = apply_subst(&entry.pattern, &subst) else {
                continue;
            };
            if u.class() != r.class() {
                continue;
            }
            let mut children = Vec::with_capacity(right_decl.rank());
            for (i, (_, variance)) in right_decl.params().iter().enumerate() {
                let (uc, rc) = (&u.children()[i], &r.children()[i]);
                match variance {
                    Variance::Covariant => match self.sub(uc, rc) {
                        Some(trace) => children.push((Variance::Covariant, trace)),
                        None => continue 'entries,
                    },
                    Variance::Invariant => {
                        if self.pool.id(uc) == self.pool.id(rc) {
                            children.push((Variance::Invariant, ProofTrace::Refl));
                        } else {
                            continue 'entries;
                        }
                    }
                    // The fragment check upstream rules this out; treat a
                    // stray contravariant position as a dead branch.
                    Variance::Contravariant => continue 'entries,
                }
            }
            let mut trace = ProofTrace::Var { children };
            for (class, index) in entry.steps.iter().rev() {
                trace = ProofTrace::Super {
                    class: class.clone(),
                    super_index: *index,
                    premise: Box::new(trace),
                };
            }
            return Some(trace);
        }
        None
    }
}

/// Goal-directed decider for tables without contravariance. `Sup` queries
/// are decided through their mirror; `Eq` is structural equality.
pub fn decide_non_contravariant(
    table: &ClassTable,
    query: &SubtypeQuery,
) -> Result<Verdict, DecideError> {
    decide_non_contravariant_with_stats(table, query).map(|(verdict, _)| verdict)
}

/// Same as [`decide_non_contravariant`], exposing the expansion counter.
pub fn decide_non_contravariant_with_stats(
    table: &ClassTable,
    query: &SubtypeQuery,
) -> Result<(Verdict, DecideStats), DecideError> {
    let features = classify(table)?;
    if features.uses_contravariance {
        return Err(DecideError::FragmentRefused {
            fragment: "non-contravariant",
            features,
        });
    }
    check_declared(table, query)?;
    let (left, rel, right) = (query.left(), query.rel(), query.right());
    match rel {
        QueryRelation::Eq => {
            let verdict =
                if left == right { Verdict::Holds(ProofTrace::Refl) } else { Verdict::Fails };
            Ok((verdict, DecideStats::default()))
        }
        QueryRelation::Sub | QueryRelation::Sup => {
            // A Sup query is its mirror read from the other side, and the
            // trace tree is identical for both readings.
            let (l, r) = match rel {
                QueryRelation::Sub => (left, right),
                _ => (right, left),
            };
            let mut search = NcSearch::new(table);
            let verdict = match search.sub(l, r) {
                Some(trace) => Verdict::Holds(trace),
                None => Verdict::Fails,
            };
            Ok((verdict, search.stats))
        }
    }
}

// ----------------------------------------------- non-expansive decider

type NeKey = (u32, QueryRelation, u32);

const NO_PRUNE: usize = usize::MAX;

struct NeSearch<'a> {
    table: &'a ClassTable,
    pool: TermPool,
    path: Vec<NeKey>,
    on_path: HashMap<NeKey, usize>,
    proved: HashMap<NeKey, ProofTrace>,
    refuted: HashSet<NeKey>,
    first_cycle: Option<CycleWitness>,
    depth_cap: Option<usize>,
    cap_hit: bool,
    stats: DecideStats,
}

impl<'a> NeSearch<'a> {
    fn new(table: &'a ClassTable, depth_cap: Option<usize>) -> NeSearch<'a> {
        NeSearch {
            table,
            pool: TermPool::default(),
            path: Vec::new(),
            on_path: HashMap::new(),
            proved: HashMap::new(),
            refuted: HashSet::new(),
            first_cycle: None,
            depth_cap,
            cap_hit: false,
            stats: DecideStats::default(),
        }
    }

    /// Full Var/Super search. Returns the proof on success plus the
    /// shallowest path depth this subtree pruned against (NO_PRUNE if none);
    /// failures entangled with a prune above the current node must not be
    /// memoized, since they are contingent on that ancestor being on the
    /// path.
    fn run(
        &mut self,
        l: &GroundType,
        rel: QueryRelation,
        r: &GroundType,
    ) -> (Option<ProofTrace>, usize) {
        if rel == QueryRelation::Eq {
            let proof = if l == r { Some(ProofTrace::Refl) } else { None };
            return (proof, NO_PRUNE);
        }
        let key = (self.pool.id(l), rel, self.pool.id(r));
        if let Some(trace) = self.proved.get(&key) {
            return (Some(trace.clone()), NO_PRUNE);
        }
        if self.refuted.contains(&key) {
            return (None, NO_PRUNE);
        }
        if let Some(&ancestor_depth) = self.on_path.get(&key) {
            if self.first_cycle.is_none() {
                let mut chain: Vec<(GroundType, QueryRelation, GroundType)> = self.path
                    [ancestor_depth..]
                    .iter()
                    .map(|&(lid, rel, rid)| {
                        (self.pool.term(lid).clone(), rel, self.pool.term(rid).clone())
                    })
                    .collect();
                chain.push((l.clone(), rel, r.clone()));
                self.first_cycle = Some(CycleWitness { chain });
            }
            return (None, ancestor_depth);
        }
        if let Some(cap) = self.depth_cap {
            if self.path.len() >= cap {
                self.cap_hit = true;
                // Taint everything above: a capped branch proves nothing
                // about the queries that led here.
                return (None, 0);
            }
        }
        let depth = self.path.len();
        self.on_path.insert(key, depth);
        self.path.push(key);
        self.stats.expansions += 1;

        let mut min_prune = NO_PRUNE;
        let mut proof: Option<ProofTrace> = None;

        // Var rule: same root class on both sides.
        if l.class() == r.class() {
            if let Some(decl) = self.table.get(l.class().name()) {
                if decl.rank() == l.class().rank() {
                    let mut children = Vec::with_capacity(decl.rank());
                    let mut ok = true;
                    for (i, (_, variance)) in decl.params().iter().enumerate() {
                        let child_rel = rel.child_relation(*variance);
                        let (lc, rc) = (&l.children()[i], &r.children()[i]);
                        let (child_proof, prune) = self.run(lc, child_rel, rc);
                        min_prune = min_prune.min(prune);
                        match child_proof {
                            Some(trace) => children.push((*variance, trace)),
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        proof = Some(ProofTrace::Var { children });
                    }
                }
            }
        }

        // Super rule: one inheritance step on the subtype side (the right
        // side when the query reads from the supertype side).
        if proof.is_none() {
            let (base, mirror) = match rel {
                QueryRelation::Sub => (l, false),
                QueryRelation::Sup => (r, true),
                QueryRelation::Eq => unreachable!("Eq handled structurally"),
            };
            for (index, u) in self.table.super_types_of(base).into_iter().enumerate() {
                let (premise, prune) = if mirror {
                    self.run(l, rel, &u)
                } else {
                    self.run(&u, rel, r)
                };
                min_prune = min_prune.min(prune);
                if let Some(trace) = premise {
                    proof = Some(ProofTrace::Super {
                        class: base.class().name().to_string(),
                        super_index: index,
                        premise: Box::new(trace),
                    });
                    break;
                }
            }
        }

        self.path.pop();
        self.on_path.remove(&key);
        match &proof {
            Some(trace) => {
                self.proved.insert(key, trace.clone());
            }
            None => {
                // Safe to memoize only when no prune reached above this
                // node; a self-targeted prune (min_prune == depth) means
                // every cyclic continuation came back here, which is a
                // definitive rejection.
                if min_prune >= depth {
                    self.refuted.insert(key);
                }
            }
        }
        let propagated = if proof.is_some() || min_prune >= depth { NO_PRUNE } else { min_prune };
        (proof, propagated)
    }
}

fn ne_engine(
    table: &ClassTable,
    query: &SubtypeQuery,
    depth_cap: Option<usize>,
) -> (Verdict, DecideStats) {
    let mut search = NeSearch::new(table, depth_cap);
    let (proof, _) = search.run(query.left(), query.rel(), query.right());
    let verdict = match proof {
        Some(trace) => Verdict::Holds(trace),
        None if search.cap_hit => {
            Verdict::Undecided(format!(
                "search reached the depth cap of {} without a proof",
                depth_cap.expect("cap_hit implies a cap")
            ))
        }
        None => match search.first_cycle.take() {
            Some(witness) => Verdict::CycleRejected(witness),
            None => Verdict::Fails,
        },
    };
    (verdict, search.stats)
}

/// Full Var/Super search with a cycle ledger, for non-expansive tables.
/// Ill-formed tables and expansive tables are refused.
pub fn decide_non_expansive(
    table: &ClassTable,
    query: &SubtypeQuery,
) -> Result<Verdict, DecideError> {
    let features = classify(table)?;
    if features.expansive {
        return Err(DecideError::FragmentRefused { fragment: "non-expansive", features });
    }
    check_declared(table, query)?;
    Ok(ne_engine(table, query, None).0)
}

// --------------------------------------------------------------- dispatch

/// Options for [`decide_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecideOptions {
    /// When the table is outside both decidable fragments, still attempt
    /// the full search down to this depth; a proof found is definitive, a
    /// capped search returns Undecided.
    pub bounded_depth: Option<usize>,
}

/// Routes the query to the decider for the table's fragment: tables without
/// contravariance use the goal-directed decider, non-expansive tables the
/// full search, and tables with both features are undecided (unless a
/// bounded attempt is requested via [`decide_with`]).
pub fn decide(table: &ClassTable, query: &SubtypeQuery) -> Result<Verdict, DecideError> {
    decide_with(table, query, &DecideOptions::default())
}

pub fn decide_with(
    table: &ClassTable,
    query: &SubtypeQuery,
    options: &DecideOptions,
) -> Result<Verdict, DecideError> {
    let features = classify(table)?;
    check_declared(table, query)?;
    if !features.uses_contravariance {
        return decide_non_contravariant(table, query);
    }
    if !features.expansive {
        return decide_non_expansive(table, query);
    }
    match options.bounded_depth {
        Some(cap) => Ok(ne_engine(table, query, Some(cap)).0),
        None => Ok(Verdict::Undecided(
            "table uses both contravariance and expansive inheritance".to_string(),
        )),
    }
}

fn check_declared(table: &ClassTable, query: &SubtypeQuery) -> Result<(), DecideError> {
    for t in [query.left(), query.right()] {
        for class in t.classes() {
            if !table.declares(class) {
                return Err(DecideError::Undeclared(class.name().to_string()));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------ trace replay

/// Independently replays a trace against a query: true iff every node is a
/// legal Var or Super instance for the query it must prove, with Refl
/// leaves closing on syntactically equal sides.
pub fn check_trace(table: &ClassTable, query: &SubtypeQuery, trace: &ProofTrace) -> bool {
    replay(table, query.left(), query.rel(), query.right(), trace)
}

fn replay(
    table: &ClassTable,
    l: &GroundType,
    rel: QueryRelation,
    r: &GroundType,
    trace: &ProofTrace,
) -> bool {
    match trace {
        ProofTrace::Refl => l == r,
        ProofTrace::Var { children } => {
            if l.class() != r.class() {
                return false;
            }
            let Some(decl) = table.get(l.class().name()) else {
                return false;
            };
            if decl.rank() != l.class().rank() || children.len() != decl.rank() {
                return false;
            }
            decl.params().iter().zip(children).enumerate().all(
                |(i, ((_, declared), (recorded, child)))| {
                    declared == recorded
                        && replay(
                            table,
                            &l.children()[i],
                            rel.child_relation(*declared),
                            &r.children()[i],
                            child,
                        )
                },
            )
        }
        ProofTrace::Super { class, super_index, premise } => {
            let (base, other) = match rel {
                QueryRelation::Sub => (l, r),
                QueryRelation::Sup => (r, l),
                QueryRelation::Eq => return false,
            };
            if base.class().name() != class {
                return false;
            }
            let supers = table.super_types_of(base);
            let Some(u) = supers.get(*super_index) else {
                return false;
            };
            match rel {
                QueryRelation::Sub => replay(table, u, rel, other, premise),
                QueryRelation::Sup => replay(table, other, rel, u, premise),
                QueryRelation::Eq => false,
            }
        }
    }
}

// ------------------------------------------------------- persistent cache

/// Opt-in cross-call verdict cache. Entries are keyed by a fingerprint of
/// the table's rendered declarations plus the query triple, so edits to the
/// table never serve stale verdicts. Behaves as a linearizable map.
pub struct DecisionCache {
    entries: Mutex<HashMap<(u64, GroundType, QueryRelation, GroundType), Verdict>>,
}

impl DecisionCache {
    pub fn new() -> DecisionCache {
        DecisionCache { entries: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decides through the cache; equivalent to [`decide`] in isolation.
    pub fn decide(&self, table: &ClassTable, query: &SubtypeQuery) -> Result<Verdict, DecideError> {
        let key = (
            fingerprint(table),
            query.left().clone(),
            query.rel(),
            query.right().clone(),
        );
        if let Some(v) = self.entries.lock().expect("cache lock poisoned").get(&key) {
            return Ok(v.clone());
        }
        let verdict = decide(table, query)?;
        self.entries
            .lock()
            .expect("cache lock poisoned")
            .insert(key, verdict.clone());
        Ok(verdict)
    }
}

impl Default for DecisionCache {
    fn default() -> DecisionCache {
        DecisionCache::new()
    }
}

fn fingerprint(table: &ClassTable) -> u64 {
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    table.to_string().hash(&mut hasher);
    hasher.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::table::{ClassDecl, ClassTable};
    use crate::term::{ClassName, TypePattern};

    fn word_type(word: &str) -> GroundType {
        GroundType::chain(word.chars().map(|c| c.to_string()), GroundType::leaf("E"))
    }

    fn v0e() -> GroundType {
        GroundType::new(ClassName::new("v0", 1), vec![GroundType::leaf("E")])
    }

    fn palindrome_split() -> AlphabetSplit {
        AlphabetSplit::new(["v0", "E"], ["a", "b", "E"])
    }

    #[test]
    fn palindrome_membership_worked_example() {
        let table = fixtures::palindrome_table();
        let accept = SubtypeQuery::new(
            v0e(),
            QueryRelation::Sub,
            word_type("abbabba"),
            palindrome_split(),
        )
        .unwrap();
        let verdict = decide_non_contravariant(&table, &accept).unwrap();
        let Verdict::Holds(trace) = &verdict else {
            panic!("expected Holds, got {verdict:?}");
        };
        assert!(check_trace(&table, &accept, trace));

        let reject = SubtypeQuery::new(
            v0e(),
            QueryRelation::Sub,
            word_type("abbabaa"),
            palindrome_split(),
        )
        .unwrap();
        assert_eq!(decide_non_contravariant(&table, &reject).unwrap(), Verdict::Fails);

        // A trace for one query must not replay against another.
        assert!(!check_trace(&table, &reject, trace));
    }

    #[test]
    fn palindrome_sup_queries_mirror_sub() {
        let table = fixtures::palindrome_table();
        for word in ["a", "aba", "abbabba", "ab", "abbabaa"] {
            let sub = SubtypeQuery::full(
                &table,
                v0e(),
                QueryRelation::Sub,
                word_type(word),
            )
            .unwrap();
            let sup = sub.mirrored();
            let forward = decide(&table, &sub).unwrap();
            let mirrored = decide(&table, &sup).unwrap();
            assert_eq!(forward.holds(), mirrored.holds(), "word {word}");
            if let Verdict::Holds(trace) = &mirrored {
                assert!(check_trace(&table, &sup, trace), "mirrored trace replay for {word}");
            }
        }
    }

    #[test]
    fn alphabet_split_rejects_misplaced_classes() {
        let err = SubtypeQuery::new(
            word_type("a"),
            QueryRelation::Sub,
            v0e(),
            palindrome_split(),
        )
        .unwrap_err();
        assert!(matches!(err, QueryError::AlphabetViolation { class, .. } if class == "a"));
    }

    #[test]
    fn contra_pair_even_chains_hold_and_odd_chains_cycle() {
        let table = fixtures::contra_pair_table();
        let c = GroundType::leaf("C");
        let n = |t: GroundType| GroundType::new(ClassName::new("N", 1), vec![t]);

        let even = SubtypeQuery::full(&table, c.clone(), QueryRelation::Sub, n(n(c.clone())))
            .unwrap();
        let verdict = decide_non_expansive(&table, &even).unwrap();
        let Verdict::Holds(trace) = &verdict else {
            panic!("expected Holds, got {verdict:?}");
        };
        assert!(check_trace(&table, &even, trace));

        let odd = SubtypeQuery::full(&table, c.clone(), QueryRelation::Sub, n(c.clone())).unwrap();
        let Verdict::CycleRejected(witness) = decide_non_expansive(&table, &odd).unwrap() else {
            panic!("expected a cycle rejection");
        };
        assert!(witness.chain.len() > 1);
        assert_eq!(witness.chain.first(), witness.chain.last());

        let mirrored = SubtypeQuery::full(&table, n(c.clone()), QueryRelation::Sup, c).unwrap();
        assert!(matches!(
            decide_non_expansive(&table, &mirrored).unwrap(),
            Verdict::CycleRejected(_)
        ));
    }

    #[test]
    fn reflexivity_holds_everywhere() {
        let table = fixtures::palindrome_table();
        for t in [v0e(), word_type("ab"), GroundType::leaf("E")] {
            let q = SubtypeQuery::full(&table, t.clone(), QueryRelation::Sub, t).unwrap();
            let verdict = decide(&table, &q).unwrap();
            let Verdict::Holds(trace) = &verdict else {
                panic!("expected reflexive Holds for {q}");
            };
            assert!(check_trace(&table, &q, trace));
        }
    }

    #[test]
    fn pair_positions_query_uses_one_super_then_var() {
        let table = fixtures::pair_positions_table();
        let e = GroundType::leaf("E");
        let b_e = GroundType::new(ClassName::new("b", 1), vec![e.clone()]);
        let a_ee = GroundType::new(ClassName::new("a", 2), vec![e.clone(), e]);
        let q = SubtypeQuery::full(&table, b_e, QueryRelation::Sub, a_ee).unwrap();
        let verdict = decide(&table, &q).unwrap();
        let Verdict::Holds(trace) = &verdict else {
            panic!("expected Holds, got {verdict:?}");
        };
        assert!(check_trace(&table, &q, trace));
        let ProofTrace::Super { class, super_index, premise } = trace else {
            panic!("expected a Super step, got {trace:?}");
        };
        assert_eq!((class.as_str(), *super_index), ("b", 0));
        let ProofTrace::Var { children } = premise.as_ref() else {
            panic!("expected Var under the Super step");
        };
        assert_eq!(children.len(), 2);
        assert_eq!(children[0].0, Variance::Covariant);
        assert_eq!(children[1].0, Variance::Invariant);
    }

    #[test]
    fn undecided_and_refused_fragments() {
        let mixed = fixtures::mixed_features_table();
        let g = GroundType::leaf("g");
        let q = SubtypeQuery::full(&mixed, g.clone(), QueryRelation::Sub, g).unwrap();
        assert!(matches!(decide(&mixed, &q).unwrap(), Verdict::Undecided(_)));
        // The bounded attempt still finds the trivial reflexive proof.
        let bounded = DecideOptions { bounded_depth: Some(16) };
        assert!(decide_with(&mixed, &q, &bounded).unwrap().holds());

        assert!(matches!(
            decide_non_contravariant(&mixed, &q),
            Err(DecideError::FragmentRefused { fragment: "non-contravariant", .. })
        ));
        assert!(matches!(
            decide_non_expansive(&mixed, &q),
            Err(DecideError::FragmentRefused { fragment: "non-expansive", .. })
        ));
    }

    #[test]
    fn undeclared_classes_are_reported() {
        let table = fixtures::palindrome_table();
        let q = SubtypeQuery::new(
            GroundType::leaf("Mystery"),
            QueryRelation::Sub,
            GroundType::leaf("E"),
            AlphabetSplit::new(["Mystery"], ["E"]),
        )
        .unwrap();
        assert!(matches!(decide(&table, &q), Err(DecideError::Undeclared(name)) if name == "Mystery"));
    }

    /// Non-expansive and non-contravariant at once, with multiple
    /// instantiation: `E : _ ; a(+x) : _ ; v(ox) : a(x), a(a(x))`.
    fn overlap_table() -> ClassTable {
        ClassTable::new(vec![
            ClassDecl::new("E", vec![], vec![]),
            ClassDecl::new("a", vec![("x".into(), Variance::Covariant)], vec![]),
            ClassDecl::new(
                "v",
                vec![("x".into(), Variance::Invariant)],
                vec![
                    TypePattern::chain(["a"], TypePattern::param("x")),
                    TypePattern::chain(["a", "a"], TypePattern::param("x")),
                ],
            ),
        ])
        .unwrap()
    }

    fn all_types_up_to(table: &ClassTable, max_height: usize) -> Vec<GroundType> {
        let mut layers: Vec<Vec<GroundType>> = vec![Vec::new()];
        for h in 1..=max_height {
            let mut layer = Vec::new();
            for decl in table.decls() {
                if decl.rank() == 0 {
                    if h == 1 {
                        layer.push(GroundType::leaf(decl.name()));
                    }
                    continue;
                }
                // All rank-one-or-more combinations with max child height h-1.
                let shorter: Vec<GroundType> =
                    layers.iter().take(h).flatten().cloned().collect();
                let exact: &[GroundType] = &layers[h - 1];
                if decl.rank() == 1 {
                    for child in exact {
                        layer.push(GroundType::new(decl.class_name(), vec![child.clone()]));
                    }
                } else {
                    for first in &shorter {
                        for second in &shorter {
                            if first.height().max(second.height()) == h - 1 {
                                layer.push(GroundType::new(
                                    decl.class_name(),
                                    vec![first.clone(), second.clone()],
                                ));
                            }
                        }
                    }
                }
            }
            layers.push(layer);
        }
        layers.into_iter().flatten().collect()
    }

    #[test]
    fn deciders_agree_on_the_overlap_fragment() {
        let table = overlap_table();
        let types = all_types_up_to(&table, 4);
        assert!(types.len() > 10);
        let mut holds = 0usize;
        for l in &types {
            for r in &types {
                for rel in [QueryRelation::Sub, QueryRelation::Eq, QueryRelation::Sup] {
                    let q = SubtypeQuery::full(&table, l.clone(), rel, r.clone()).unwrap();
                    let nc = decide_non_contravariant(&table, &q).unwrap();
                    let ne = decide_non_expansive(&table, &q).unwrap();
                    assert_eq!(
                        nc.holds(),
                        ne.holds(),
                        "deciders disagree on {q}: {nc:?} vs {ne:?}"
                    );
                    if let Verdict::Holds(trace) = &nc {
                        assert!(check_trace(&table, &q, trace), "nc trace replay for {q}");
                    }
                    if let Verdict::Holds(trace) = &ne {
                        assert!(check_trace(&table, &q, trace), "ne trace replay for {q}");
                        holds += 1;
                    }
                }
            }
        }
        assert!(holds > types.len(), "expected nontrivial positive coverage");
    }

    #[test]
    fn mirror_symmetry_is_exhaustive_on_the_overlap_table() {
        let table = overlap_table();
        let types = all_types_up_to(&table, 3);
        for l in &types {
            for r in &types {
                let q = SubtypeQuery::full(&table, l.clone(), QueryRelation::Sub, r.clone())
                    .unwrap();
                let direct = decide(&table, &q).unwrap();
                let mirrored = decide(&table, &q.mirrored()).unwrap();
                assert_eq!(direct.holds(), mirrored.holds(), "mirror mismatch on {q}");
            }
        }
    }

    #[test]
    fn expansion_count_stays_within_the_closure_bound() {
        let table = fixtures::palindrome_table();
        let closure_entries: usize = ["v0", "a", "b", "E"]
            .iter()
            .map(|c| table.transitive_super_patterns(c).len())
            .sum();
        for word in ["abbabba", "abbabaa", "aaaaaaa", "bababab"] {
            let q = SubtypeQuery::full(&table, v0e(), QueryRelation::Sub, word_type(word))
                .unwrap();
            let (_, stats) = decide_non_contravariant_with_stats(&table, &q).unwrap();
            let bound = (closure_entries * q.right().size()) as u64;
            assert!(
                stats.expansions <= bound,
                "word {word}: {} expansions exceed bound {bound}",
                stats.expansions
            );
        }
    }

    #[test]
    fn decision_cache_replays_verdicts() {
        let cache = DecisionCache::new();
        let table = fixtures::palindrome_table();
        let q = SubtypeQuery::full(&table, v0e(), QueryRelation::Sub, word_type("aba")).unwrap();
        let first = cache.decide(&table, &q).unwrap();
        assert_eq!(cache.len(), 1);
        let second = cache.decide(&table, &q).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(first, second);
        assert!(first.holds());
    }

    #[test]
    fn trace_json_names_rules() {
        let table = fixtures::palindrome_table();
        let q = SubtypeQuery::full(&table, v0e(), QueryRelation::Sub, word_type("a")).unwrap();
        let Verdict::Holds(trace) = decide(&table, &q).unwrap() else {
            panic!("expected Holds");
        };
        let rendered = trace.to_json().to_string();
        assert!(rendered.contains("\"rule\":\"super\""));
        assert!(rendered.contains("\"rule\":\"var\""));
    }
}
