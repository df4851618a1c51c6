//! Ground types and type patterns over ranked class names.
//!
//! A ground type is a finite tree of class applications; a type pattern is
//! the same tree shape with named parameters at the leaves. Patterns appear
//! on the right-hand side of class declarations and instantiate to ground
//! types by substitution.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Variance annotation of a class parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variance {
    /// `o`: the parameter admits neither widening nor narrowing.
    Invariant,
    /// `+`: the parameter widens with the surrounding type.
    Covariant,
    /// `-`: the parameter narrows when the surrounding type widens.
    Contravariant,
}

impl Variance {
    /// Flip of the annotation; invariant is its own flip.
    pub fn flip(self) -> Variance {
        match self {
            Variance::Invariant => Variance::Invariant,
            Variance::Covariant => Variance::Contravariant,
            Variance::Contravariant => Variance::Covariant,
        }
    }

    /// Single-character spelling used by the text formats: `o`, `+`, `-`.
    pub fn symbol(self) -> char {
        match self {
            Variance::Invariant => 'o',
            Variance::Covariant => '+',
            Variance::Contravariant => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Variance> {
        match c {
            'o' => Some(Variance::Invariant),
            '+' => Some(Variance::Covariant),
            '-' => Some(Variance::Contravariant),
            _ => None,
        }
    }
}

impl fmt::Display for Variance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A class name together with its arity. Two occurrences denote the same
/// class only if both the spelling and the rank agree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassName {
    name: Arc<str>,
    rank: usize,
}

impl ClassName {
    pub fn new(name: impl Into<Arc<str>>, rank: usize) -> ClassName {
        ClassName { name: name.into(), rank }
    }

    /// Leaf class: rank zero.
    pub fn leaf(name: impl Into<Arc<str>>) -> ClassName {
        ClassName::new(name, 0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// A ground type: a class applied to ground types, one per parameter.
///
/// Nodes are reference-counted so sharing subterms is cheap; equality and
/// ordering are structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundType {
    node: Arc<GroundNode>,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct GroundNode {
    class: ClassName,
    children: Vec<GroundType>,
}

impl GroundType {
    /// Builds `class(children...)`. The number of children must equal the
    /// class rank; arity errors at this level are programming errors, so the
    /// constructor asserts.
    pub fn new(class: ClassName, children: Vec<GroundType>) -> GroundType {
        assert_eq!(
            class.rank(),
            children.len(),
            "class {} has rank {} but was applied to {} children",
            class.name(),
            class.rank(),
            children.len()
        );
        GroundType { node: Arc::new(GroundNode { class, children }) }
    }

    pub fn leaf(name: impl Into<Arc<str>>) -> GroundType {
        GroundType::new(ClassName::leaf(name), Vec::new())
    }

    /// Monadic chain `names[0](names[1](... tail))`; every name must be rank 1.
    pub fn chain<I, S>(names: I, tail: GroundType) -> GroundType
    where
        I: IntoIterator<Item = S>,
        I::IntoIter: DoubleEndedIterator,
        S: Into<Arc<str>>,
    {
        let mut acc = tail;
        for name in names.into_iter().rev() {
            acc = GroundType::new(ClassName::new(name, 1), vec![acc]);
        }
        acc
    }

    pub fn class(&self) -> &ClassName {
        &self.node.class
    }

    /// Address of the shared node; used for pointer-identity fast paths.
    pub(crate) fn node_addr(&self) -> usize {
        Arc::as_ptr(&self.node) as usize
    }

    pub fn children(&self) -> &[GroundType] {
        &self.node.children
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(GroundType::size).sum::<usize>()
    }

    /// Height counted in nodes: a leaf has height 1.
    pub fn height(&self) -> usize {
        1 + self.children().iter().map(GroundType::height).max().unwrap_or(0)
    }

    /// All class names used anywhere in the type.
    pub fn classes(&self) -> Vec<&ClassName> {
        let mut out = Vec::new();
        self.collect_classes(&mut out);
        out
    }

    fn collect_classes<'a>(&'a self, out: &mut Vec<&'a ClassName>) {
        out.push(self.class());
        for child in self.children() {
            child.collect_classes(out);
        }
    }
}

impl fmt::Display for GroundType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.class())?;
        if !self.children().is_empty() {
            write!(f, "(")?;
            for (i, child) in self.children().iter().enumerate() {
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

/// A type pattern: a tree of class applications whose leaves may be named
/// parameters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypePattern {
    /// A parameter occurrence, e.g. `x`.
    Param(Arc<str>),
    /// A class applied to sub-patterns.
    Node(ClassName, Vec<TypePattern>),
}

impl TypePattern {
    pub fn param(name: impl Into<Arc<str>>) -> TypePattern {
        TypePattern::Param(name.into())
    }

    pub fn node(class: ClassName, children: Vec<TypePattern>) -> TypePattern {
        assert_eq!(
            class.rank(),
            children.len(),
            "class {} has rank {} but was applied to {} sub-patterns",
            class.name(),
            class.rank(),
            children.len()
        );
        TypePattern::Node(class, children)
    }

    pub fn leaf(name: impl Into<Arc<str>>) -> TypePattern {
        TypePattern::Node(ClassName::leaf(name), Vec::new())
    }

    /// Monadic chain `names[0](... names[n-1](tail))`.
    pub fn chain<I, S>(names: I, tail: TypePattern) -> TypePattern
    where
        I: IntoIterator<Item = S>,
        I::IntoIter: DoubleEndedIterator,
        S: Into<Arc<str>>,
    {
        let mut acc = tail;
        for name in names.into_iter().rev() {
            acc = TypePattern::Node(ClassName::new(name, 1), vec![acc]);
        }
        acc
    }

    /// Converts a ground type into the equivalent parameter-free pattern.
    pub fn from_ground(t: &GroundType) -> TypePattern {
        TypePattern::Node(
            t.class().clone(),
            t.children().iter().map(TypePattern::from_ground).collect(),
        )
    }

    /// Converts a parameter-free pattern back into a ground type.
    pub fn to_ground(&self) -> Option<GroundType> {
        match self {
            TypePattern::Param(_) => None,
            TypePattern::Node(class, children) => {
                let children = children
                    .iter()
                    .map(TypePattern::to_ground)
                    .collect::<Option<Vec<_>>>()?;
                Some(GroundType::new(class.clone(), children))
            }
        }
    }

    /// Names of the parameters occurring in the pattern, in first-occurrence
    /// order, without duplicates.
    pub fn params(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TypePattern::Param(name) => {
                if !out.contains(&name.as_ref()) {
                    out.push(name);
                }
            }
            TypePattern::Node(_, children) => {
                for child in children {
                    child.collect_params(out);
                }
            }
        }
    }

    pub fn is_param(&self) -> bool {
        matches!(self, TypePattern::Param(_))
    }

    /// Root class of the pattern, if it is not a bare parameter.
    pub fn root(&self) -> Option<&ClassName> {
        match self {
            TypePattern::Param(_) => None,
            TypePattern::Node(class, _) => Some(class),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            TypePattern::Param(_) => 1,
            TypePattern::Node(_, children) => {
                1 + children.iter().map(TypePattern::size).sum::<usize>()
            }
        }
    }

    pub fn height(&self) -> usize {
        match self {
            TypePattern::Param(_) => 1,
            TypePattern::Node(_, children) => {
                1 + children.iter().map(TypePattern::height).max().unwrap_or(0)
            }
        }
    }

    /// All class names used anywhere in the pattern.
    pub fn classes(&self) -> Vec<&ClassName> {
        let mut out = Vec::new();
        self.collect_classes(&mut out);
        out
    }

    fn collect_classes<'a>(&'a self, out: &mut Vec<&'a ClassName>) {
        if let TypePattern::Node(class, children) = self {
            out.push(class);
            for child in children {
                child.collect_classes(out);
            }
        }
    }
}

impl fmt::Display for TypePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypePattern::Param(name) => write!(f, "{name}"),
            TypePattern::Node(class, children) => {
                write!(f, "{class}")?;
                if !children.is_empty() {
                    write!(f, "(")?;
                    for (i, child) in children.iter().enumerate() {
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

/// A finite binding of parameter names to ground types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<Arc<str>, GroundType>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn bind(&mut self, param: impl Into<Arc<str>>, t: GroundType) {
        self.bindings.insert(param.into(), t);
    }

    pub fn get(&self, param: &str) -> Option<&GroundType> {
        self.bindings.get(param)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GroundType)> {
        self.bindings.iter().map(|(k, v)| (k.as_ref(), v))
    }
}

impl<S: Into<Arc<str>>> FromIterator<(S, GroundType)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (S, GroundType)>>(iter: I) -> Substitution {
        let mut s = Substitution::new();
        for (k, v) in iter {
            s.bind(k, v);
        }
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubstError {
    #[error("parameter `{0}` is not bound by the substitution")]
    Unbound(String),
}

/// Matches a ground type against a pattern.
///
/// Returns the unique substitution `s` with `apply_subst(pattern, s) == t`,
/// or `None` when the shapes disagree. A parameter occurring twice matches
/// only if both occurrences cover equal subterms.
pub fn match_pattern(pattern: &TypePattern, t: &GroundType) -> Option<Substitution> {
    let mut subst = Substitution::new();
    if match_into(pattern, t, &mut subst) {
        Some(subst)
    } else {
        None
    }
}

fn match_into(pattern: &TypePattern, t: &GroundType, subst: &mut Substitution) -> bool {
    match pattern {
        TypePattern::Param(name) => match subst.get(name) {
            Some(bound) => bound == t,
            None => {
                subst.bind(name.clone(), t.clone());
                true
            }
        },
        TypePattern::Node(class, children) => {
            class == t.class()
                && children
                    .iter()
                    .zip(t.children())
                    .all(|(p, c)| match_into(p, c, subst))
        }
    }
}

/// Instantiates a pattern under a substitution. Every parameter of the
/// pattern must be bound.
pub fn apply_subst(pattern: &TypePattern, subst: &Substitution) -> Result<GroundType, SubstError> {
    match pattern {
        TypePattern::Param(name) => subst
            .get(name)
            .cloned()
            .ok_or_else(|| SubstError::Unbound(name.to_string())),
        TypePattern::Node(class, children) => {
            let children = children
                .iter()
                .map(|c| apply_subst(c, subst))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GroundType::new(class.clone(), children))
        }
    }
}

/// Composes a pattern with a pattern-valued substitution: every parameter
/// occurrence `x` is replaced by `bindings[x]`, and parameters without a
/// binding are left in place.
pub fn compose_pattern(pattern: &TypePattern, bindings: &BTreeMap<Arc<str>, TypePattern>) -> TypePattern {
    match pattern {
        TypePattern::Param(name) => bindings
            .get(name)
            .cloned()
            .unwrap_or_else(|| TypePattern::Param(name.clone())),
        TypePattern::Node(class, children) => TypePattern::Node(
            class.clone(),
            children.iter().map(|c| compose_pattern(c, bindings)).collect(),
        ),
    }
}

/// First-order syntactic unification of two patterns, treating parameters of
/// both sides as variables drawn from one namespace.
///
/// Returns true when some substitution makes the patterns equal. Used to
/// audit generated class tables, where two unifiable supertypes of one class
/// would be rejected by mainstream compilers.
pub fn patterns_unifiable(left: &TypePattern, right: &TypePattern) -> bool {
    let mut bindings: BTreeMap<Arc<str>, TypePattern> = BTreeMap::new();
    unify(left.clone(), right.clone(), &mut bindings)
}

fn resolve(p: TypePattern, bindings: &BTreeMap<Arc<str>, TypePattern>) -> TypePattern {
    match p {
        TypePattern::Param(name) => match bindings.get(&name) {
            Some(next) => resolve(next.clone(), bindings),
            None => TypePattern::Param(name),
        },
        other => other,
    }
}

fn occurs(name: &str, p: &TypePattern, bindings: &BTreeMap<Arc<str>, TypePattern>) -> bool {
    match p {
        TypePattern::Param(n) => {
            if n.as_ref() == name {
                true
            } else {
                match bindings.get(n) {
                    Some(next) => occurs(name, &next.clone(), bindings),
                    None => false,
                }
            }
        }
        TypePattern::Node(_, children) => children.iter().any(|c| occurs(name, c, bindings)),
    }
}

fn unify(left: TypePattern, right: TypePattern, bindings: &mut BTreeMap<Arc<str>, TypePattern>) -> bool {
    let left = resolve(left, bindings);
    let right = resolve(right, bindings);
    match (left, right) {
        (TypePattern::Param(a), TypePattern::Param(b)) if a == b => true,
        (TypePattern::Param(a), other) | (other, TypePattern::Param(a)) => {
            if occurs(&a, &other, bindings) {
                false
            } else {
                bindings.insert(a, other);
                true
            }
        }
        (TypePattern::Node(ca, lefts), TypePattern::Node(cb, rights)) => {
            ca == cb
                && lefts
                    .into_iter()
                    .zip(rights)
                    .all(|(l, r)| unify(l, r, bindings))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pal_pattern() -> TypePattern {
        // a(v0(a(x)))
        TypePattern::chain(["a", "v0", "a"], TypePattern::param("x"))
    }

    #[test]
    fn match_monadic_pattern_extracts_binding() {
        let t = GroundType::chain(["a", "v0", "a", "b"], GroundType::leaf("E"));
        let subst = match_pattern(&pal_pattern(), &t).expect("should match");
        assert_eq!(
            subst.get("x").unwrap(),
            &GroundType::chain(["b"], GroundType::leaf("E"))
        );
    }

    #[test]
    fn match_fails_on_head_mismatch() {
        let t = GroundType::chain(["b", "v0", "a", "b"], GroundType::leaf("E"));
        assert!(match_pattern(&pal_pattern(), &t).is_none());
    }

    #[test]
    fn match_fails_on_leaf_mismatch() {
        // Pattern a(x) against leaf E.
        let p = TypePattern::chain(["a"], TypePattern::param("x"));
        assert!(match_pattern(&p, &GroundType::leaf("E")).is_none());
    }

    #[test]
    fn repeated_param_requires_equal_subterms() {
        let f = ClassName::new("f", 2);
        let p = TypePattern::node(
            f.clone(),
            vec![TypePattern::param("x"), TypePattern::param("x")],
        );
        let e = GroundType::leaf("E");
        let ae = GroundType::chain(["a"], e.clone());
        let same = GroundType::new(f.clone(), vec![ae.clone(), ae.clone()]);
        let diff = GroundType::new(f, vec![ae, e]);
        assert!(match_pattern(&p, &same).is_some());
        assert!(match_pattern(&p, &diff).is_none());
    }

    #[test]
    fn apply_subst_instantiates() {
        let subst: Substitution =
            [("x", GroundType::chain(["b"], GroundType::leaf("E")))].into_iter().collect();
        let t = apply_subst(&pal_pattern(), &subst).unwrap();
        assert_eq!(t, GroundType::chain(["a", "v0", "a", "b"], GroundType::leaf("E")));
    }

    #[test]
    fn apply_subst_reports_unbound_param() {
        let err = apply_subst(&pal_pattern(), &Substitution::new()).unwrap_err();
        assert_eq!(err, SubstError::Unbound("x".to_string()));
    }

    #[test]
    fn match_then_apply_is_identity() {
        let t = GroundType::chain(["a", "v0", "a", "a", "b"], GroundType::leaf("E"));
        let p = pal_pattern();
        let subst = match_pattern(&p, &t).unwrap();
        assert_eq!(apply_subst(&p, &subst).unwrap(), t);
    }

    #[test]
    fn unification_respects_structure() {
        // a(x) and a(b(y)) unify; a(x) and b(y) do not; f(x, x) and f(E, a(E)) do not.
        let ax = TypePattern::chain(["a"], TypePattern::param("x"));
        let aby = TypePattern::chain(["a", "b"], TypePattern::param("y"));
        let by = TypePattern::chain(["b"], TypePattern::param("y"));
        assert!(patterns_unifiable(&ax, &aby));
        assert!(!patterns_unifiable(&ax, &by));

        let f = ClassName::new("f", 2);
        let fxx = TypePattern::node(
            f.clone(),
            vec![TypePattern::param("x"), TypePattern::param("x")],
        );
        let fea = TypePattern::node(
            f,
            vec![
                TypePattern::leaf("E"),
                TypePattern::chain(["a"], TypePattern::leaf("E")),
            ],
        );
        assert!(!patterns_unifiable(&fxx, &fea));
    }

    #[test]
    fn occurs_check_rejects_cyclic_binding() {
        // x against a(x) must not unify.
        let x = TypePattern::param("x");
        let ax = TypePattern::chain(["a"], TypePattern::param("x"));
        assert!(!patterns_unifiable(&x, &ax));
    }

    #[test]
    fn size_and_height_count_nodes() {
        let t = GroundType::chain(["a", "v0"], GroundType::leaf("E"));
        assert_eq!(t.size(), 3);
        assert_eq!(t.height(), 3);
        let cons = ClassName::new("cons", 2);
        let s = GroundType::new(
            cons,
            vec![GroundType::chain(["s"], GroundType::leaf("z")), GroundType::leaf("nil")],
        );
        assert_eq!(s.size(), 4);
        assert_eq!(s.height(), 3);
    }
}
