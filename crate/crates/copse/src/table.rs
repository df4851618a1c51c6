//! Class tables: ordered collections of parameterized class declarations
//! with declared supertypes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::term::{
    apply_subst, compose_pattern, ClassName, GroundType, Substitution, TypePattern, Variance,
};

/// One class declaration: a name, its parameters with variance annotations,
/// and the declared supertype patterns over those parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    name: Arc<str>,
    params: Vec<(Arc<str>, Variance)>,
    supers: Vec<TypePattern>,
}

impl ClassDecl {
    pub fn new(
        name: impl Into<Arc<str>>,
        params: Vec<(Arc<str>, Variance)>,
        supers: Vec<TypePattern>,
    ) -> ClassDecl {
        ClassDecl { name: name.into(), params, supers }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.params.len()
    }

    pub fn class_name(&self) -> ClassName {
        ClassName::new(self.name.clone(), self.rank())
    }

    pub fn params(&self) -> &[(Arc<str>, Variance)] {
        &self.params
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(n, _)| n.as_ref())
    }

    /// Variance of the i-th parameter.
    pub fn variance(&self, index: usize) -> Variance {
        self.params[index].1
    }

    pub fn supers(&self) -> &[TypePattern] {
        &self.supers
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("class `{0}` is declared more than once")]
    DuplicateClass(String),
}

/// An ordered class table. Declaration order is preserved; class names are
/// unique.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassTable {
    decls: Vec<ClassDecl>,
    by_name: HashMap<Arc<str>, usize>,
}

impl ClassTable {
    pub fn new(decls: Vec<ClassDecl>) -> Result<ClassTable, TableError> {
        let mut by_name = HashMap::with_capacity(decls.len());
        for (i, decl) in decls.iter().enumerate() {
            if by_name.insert(decl.name.clone(), i).is_some() {
                return Err(TableError::DuplicateClass(decl.name().to_string()));
            }
        }
        Ok(ClassTable { decls, by_name })
    }

    pub fn decls(&self) -> &[ClassDecl] {
        &self.decls
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ClassDecl> {
        self.by_name.get(name).map(|&i| &self.decls[i])
    }

    /// Index of a declaration in declaration order.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    /// True when the class is declared with exactly this rank.
    pub fn declares(&self, class: &ClassName) -> bool {
        self.get(class.name()).is_some_and(|d| d.rank() == class.rank())
    }

    /// All declared class names, in declaration order.
    pub fn class_names(&self) -> Vec<ClassName> {
        self.decls.iter().map(ClassDecl::class_name).collect()
    }

    /// True when every class used by `t` is declared (name and rank).
    pub fn covers_type(&self, t: &GroundType) -> bool {
        t.classes().iter().all(|c| self.declares(c))
    }

    /// One-step declared supertypes of a ground type, instantiated with the
    /// type's own arguments, in declaration order. Types rooted at an
    /// undeclared class have none.
    pub fn super_types_of(&self, t: &GroundType) -> Vec<GroundType> {
        let Some(decl) = self.get(t.class().name()) else {
            return Vec::new();
        };
        if decl.rank() != t.class().rank() {
            return Vec::new();
        }
        let subst: Substitution = decl
            .param_names()
            .zip(t.children().iter().cloned())
            .collect();
        decl.supers()
            .iter()
            .filter_map(|pattern| apply_subst(pattern, &subst).ok())
            .collect()
    }

    /// Transitive-reflexive inheritance at the pattern level.
    ///
    /// Entry `k` describes `γ(x...) :* pattern` where `pattern` is a type
    /// pattern over γ's own parameters, obtained by composing declared
    /// supertype steps. The reflexive entry `γ(x...)` comes first; the
    /// chain records the `(class, super-index)` steps used, in order.
    pub fn transitive_super_patterns(&self, class: &str) -> Vec<TransitiveSuper> {
        let Some(decl) = self.get(class) else {
            return Vec::new();
        };
        let root = TypePattern::Node(
            decl.class_name(),
            decl.param_names().map(TypePattern::param).collect(),
        );
        let mut out = vec![TransitiveSuper { pattern: root.clone(), steps: Vec::new() }];
        let mut seen: BTreeSet<TypePattern> = BTreeSet::new();
        seen.insert(root);
        // Breadth-first composition; class-level acyclicity bounds the depth,
        // and deduplication bounds the width.
        let mut frontier = 0;
        while frontier < out.len() {
            let current = out[frontier].clone();
            frontier += 1;
            let Some(head) = current.pattern.root().cloned() else { continue };
            let Some(head_decl) = self.get(head.name()) else { continue };
            if head_decl.rank() != head.rank() {
                continue;
            }
            let TypePattern::Node(_, args) = &current.pattern else { continue };
            let bindings: BTreeMap<Arc<str>, TypePattern> = head_decl
                .param_names()
                .map(|n| Arc::<str>::from(n))
                .zip(args.iter().cloned())
                .collect();
            for (i, sup) in head_decl.supers().iter().enumerate() {
                let composed = compose_pattern(sup, &bindings);
                if seen.insert(composed.clone()) {
                    let mut steps = current.steps.clone();
                    steps.push((head.name().to_string(), i));
                    out.push(TransitiveSuper { pattern: composed, steps });
                }
            }
        }
        out
    }
}

/// One entry of the transitive-reflexive inheritance relation of a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitiveSuper {
    /// Supertype pattern over the class's own parameters.
    pub pattern: TypePattern,
    /// Sequence of one-step inheritance steps `(class, super-index)` that
    /// produces the pattern; empty for the reflexive entry.
    pub steps: Vec<(String, usize)>,
}

impl fmt::Display for ClassTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for decl in &self.decls {
            write!(f, "{}", decl.name())?;
            if decl.rank() > 0 {
                write!(f, "(")?;
                for (i, (name, variance)) in decl.params().iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{variance}{name}")?;
                }
                write!(f, ")")?;
            }
            write!(f, " : ")?;
            if decl.supers().is_empty() {
                write!(f, "_")?;
            } else {
                for (i, sup) in decl.supers().iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{sup}")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Designates which classes may root subtype-side types and which may root
/// supertype-side types in queries against a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphabetSplit {
    sub: BTreeSet<Arc<str>>,
    sup: BTreeSet<Arc<str>>,
}

impl AlphabetSplit {
    pub fn new<I, J, S, T>(sub: I, sup: J) -> AlphabetSplit
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<Arc<str>>,
        T: Into<Arc<str>>,
    {
        AlphabetSplit {
            sub: sub.into_iter().map(Into::into).collect(),
            sup: sup.into_iter().map(Into::into).collect(),
        }
    }

    /// Both sides cover the whole table.
    pub fn full(table: &ClassTable) -> AlphabetSplit {
        let all: BTreeSet<Arc<str>> = table
            .decls()
            .iter()
            .map(|d| Arc::<str>::from(d.name()))
            .collect();
        AlphabetSplit { sub: all.clone(), sup: all }
    }

    pub fn sub(&self) -> impl Iterator<Item = &str> {
        self.sub.iter().map(|s| s.as_ref())
    }

    pub fn sup(&self) -> impl Iterator<Item = &str> {
        self.sup.iter().map(|s| s.as_ref())
    }

    pub fn sub_contains(&self, name: &str) -> bool {
        self.sub.contains(name)
    }

    pub fn sup_contains(&self, name: &str) -> bool {
        self.sup.contains(name)
    }

    /// True when every class of `t` lies in the subtype-side alphabet.
    pub fn covers_sub(&self, t: &GroundType) -> bool {
        t.classes().iter().all(|c| self.sub_contains(c.name()))
    }

    /// True when every class of `t` lies in the supertype-side alphabet.
    pub fn covers_sup(&self, t: &GroundType) -> bool {
        t.classes().iter().all(|c| self.sup_contains(c.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn duplicate_class_is_rejected() {
        let decls = vec![
            ClassDecl::new("a", vec![("x".into(), Variance::Covariant)], vec![]),
            ClassDecl::new("a", vec![], vec![]),
        ];
        assert_eq!(
            ClassTable::new(decls).unwrap_err(),
            TableError::DuplicateClass("a".to_string())
        );
    }

    #[test]
    fn super_types_of_palindrome_start() {
        // v0(E) has the six declared supertypes, in declaration order.
        let table = fixtures::palindrome_table();
        let e = GroundType::leaf("E");
        let t = GroundType::chain(["v0"], e.clone());
        let supers = table.super_types_of(&t);
        let expect = vec![
            GroundType::chain(["a", "v0", "a"], e.clone()),
            GroundType::chain(["a", "a"], e.clone()),
            GroundType::chain(["a"], e.clone()),
            GroundType::chain(["b", "v0", "b"], e.clone()),
            GroundType::chain(["b", "b"], e.clone()),
            GroundType::chain(["b"], e),
        ];
        assert_eq!(supers, expect);
    }

    #[test]
    fn super_types_of_contra_pair() {
        // With N(-x) : _ and C : N(N(C)), the only supertype of C is N(N(C)).
        let table = fixtures::contra_pair_table();
        let c = GroundType::leaf("C");
        let supers = table.super_types_of(&c);
        assert_eq!(supers, vec![GroundType::chain(["N", "N"], c)]);
    }

    #[test]
    fn super_types_of_leaf_with_no_supers_is_empty() {
        let table = fixtures::palindrome_table();
        assert!(table.super_types_of(&GroundType::leaf("E")).is_empty());
    }

    #[test]
    fn transitive_supers_start_reflexive() {
        let table = fixtures::contra_pair_table();
        let entries = table.transitive_super_patterns("C");
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].pattern, TypePattern::leaf("C"));
        assert!(entries[0].steps.is_empty());
        assert_eq!(
            entries[1].pattern,
            TypePattern::chain(["N", "N"], TypePattern::leaf("C"))
        );
        assert_eq!(entries[1].steps, vec![("C".to_string(), 0)]);
    }

    #[test]
    fn transitive_supers_compose_through_intermediate_class() {
        // u(+x) : w(a(x)); w(+y) : a(y)  gives  u(x) :* a(a(x)).
        let a = |p| TypePattern::chain(["a"], p);
        let decls = vec![
            ClassDecl::new("a", vec![("z".into(), Variance::Covariant)], vec![]),
            ClassDecl::new(
                "w",
                vec![("y".into(), Variance::Covariant)],
                vec![a(TypePattern::param("y"))],
            ),
            ClassDecl::new(
                "u",
                vec![("x".into(), Variance::Covariant)],
                vec![TypePattern::chain(["w"], a(TypePattern::param("x")))],
            ),
        ];
        let table = ClassTable::new(decls).unwrap();
        let entries = table.transitive_super_patterns("u");
        let patterns: Vec<_> = entries.iter().map(|e| e.pattern.clone()).collect();
        assert!(patterns.contains(&a(a(TypePattern::param("x")))));
        let composed = entries
            .iter()
            .find(|e| e.pattern == a(a(TypePattern::param("x"))))
            .unwrap();
        assert_eq!(
            composed.steps,
            vec![("u".to_string(), 0), ("w".to_string(), 0)]
        );
    }

    #[test]
    fn table_text_round_trips_display() {
        let table = fixtures::palindrome_table();
        let text = table.to_string();
        assert!(text.contains("v0(ox) : a(v0(a(x))), a(a(x)), a(x), b(v0(b(x))), b(b(x)), b(x)"));
        assert!(text.contains("E : _"));
    }
}
