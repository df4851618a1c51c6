//! Small ready-made tables and grammars used throughout the tests and docs.
//!
//! These are the running examples of the workbench: a palindrome recognizer
//! machine, a two-class contravariant pair with an even-depth language, a
//! numbers-and-lists regular vocabulary, and an expansive table whose
//! closures grow without bound.

use crate::grammars::{Cftg, CftgProduction, RankedSymbol, RegularTreeGrammar, TreeForm};
use crate::table::{ClassDecl, ClassTable};
use crate::term::{ClassName, GroundType, TypePattern, Variance};

/// `a(+x) : _ ; b(+x) : _ ; E : _ ; v0(ox) : a v0 a x, a a x, a x, b v0 b x, b b x, b x`.
///
/// Subtyping `v0(E) <: w(E)` holds exactly when `w` is a nonempty palindrome
/// over `{a, b}`.
pub fn palindrome_table() -> ClassTable {
    let x = TypePattern::param("x");
    let chain = |names: &[&str]| TypePattern::chain(names.iter().copied(), x.clone());
    ClassTable::new(vec![
        ClassDecl::new("a", vec![("x".into(), Variance::Covariant)], vec![]),
        ClassDecl::new("b", vec![("x".into(), Variance::Covariant)], vec![]),
        ClassDecl::new("E", vec![], vec![]),
        ClassDecl::new(
            "v0",
            vec![("x".into(), Variance::Invariant)],
            vec![
                chain(&["a", "v0", "a"]),
                chain(&["a", "a"]),
                chain(&["a"]),
                chain(&["b", "v0", "b"]),
                chain(&["b", "b"]),
                chain(&["b"]),
            ],
        ),
    ])
    .expect("fixture table is well constructed")
}

/// `N(-x) : _ ; C : N(N(C))`.
///
/// The supertypes of `C` over `{N, C}` are exactly the types `N^{2k}(C)`.
pub fn contra_pair_table() -> ClassTable {
    ClassTable::new(vec![
        ClassDecl::new("N", vec![("x".into(), Variance::Contravariant)], vec![]),
        ClassDecl::new(
            "C",
            vec![],
            vec![TypePattern::chain(["N", "N"], TypePattern::leaf("C"))],
        ),
    ])
    .expect("fixture table is well constructed")
}

/// A well-formed table that uses contravariance and expansive inheritance:
/// `a(+x) : _ ; b(-x) : _ ; c(ox) : _ ; d(+x1) : a d a x1 ;
///  e(-x2) : b b a b x2 ; f(-x3, ox4, +x5) : a f(x4, a x4, x4) ; g : _`.
pub fn mixed_features_table() -> ClassTable {
    let p = TypePattern::param;
    ClassTable::new(vec![
        ClassDecl::new("a", vec![("x".into(), Variance::Covariant)], vec![]),
        ClassDecl::new("b", vec![("x".into(), Variance::Contravariant)], vec![]),
        ClassDecl::new("c", vec![("x".into(), Variance::Invariant)], vec![]),
        ClassDecl::new(
            "d",
            vec![("x1".into(), Variance::Covariant)],
            vec![TypePattern::chain(["a", "d", "a"], p("x1"))],
        ),
        ClassDecl::new(
            "e",
            vec![("x2".into(), Variance::Contravariant)],
            vec![TypePattern::chain(["b", "b", "a", "b"], p("x2"))],
        ),
        ClassDecl::new(
            "f",
            vec![
                ("x3".into(), Variance::Contravariant),
                ("x4".into(), Variance::Invariant),
                ("x5".into(), Variance::Covariant),
            ],
            vec![TypePattern::chain(
                ["a"],
                TypePattern::node(
                    ClassName::new("f", 3),
                    vec![p("x4"), TypePattern::chain(["a"], p("x4")), p("x4")],
                ),
            )],
        ),
        ClassDecl::new("g", vec![], vec![]),
    ])
    .expect("fixture table is well constructed")
}

/// `a(+x, oy) : _ ; b(oz) : a(z, z) ; E : _`: one covariant and one
/// invariant position, a class that fills both with the same parameter, and
/// a leaf so ground types exist.
pub fn pair_positions_table() -> ClassTable {
    ClassTable::new(vec![
        ClassDecl::new(
            "a",
            vec![("x".into(), Variance::Covariant), ("y".into(), Variance::Invariant)],
            vec![],
        ),
        ClassDecl::new("E", vec![], vec![]),
        ClassDecl::new(
            "b",
            vec![("z".into(), Variance::Invariant)],
            vec![TypePattern::node(
                ClassName::new("a", 2),
                vec![TypePattern::param("z"), TypePattern::param("z")],
            )],
        ),
    ])
    .expect("fixture table is well constructed")
}

/// Regular tree grammar of natural numbers and lists of naturals:
/// `Nat -> z | s(Nat)` and `List -> nil | cons(Nat, List)`, start `List`.
pub fn numbers_and_lists_rtg() -> RegularTreeGrammar {
    let z = RankedSymbol::new("z", 0);
    let s = RankedSymbol::new("s", 1);
    let nil = RankedSymbol::new("nil", 0);
    let cons = RankedSymbol::new("cons", 2);
    let nat = RankedSymbol::new("Nat", 0);
    let list = RankedSymbol::new("List", 0);
    RegularTreeGrammar::new(
        vec![z.clone(), s.clone(), nil.clone(), cons.clone()],
        vec![nat.clone(), list.clone()],
        list.clone(),
        vec![
            (nat.clone(), (z, vec![])),
            (nat.clone(), (s, vec![nat.clone()])),
            (list.clone(), (nil, vec![])),
            (list.clone(), (cons, vec![nat, list])),
        ],
    )
    .expect("fixture grammar is well constructed")
}

/// Monadic context-free tree grammar of palindrome chains:
/// `v0(x) -> a v0 a x | a a x | a x | b v0 b x | b b x | b x`,
/// with initial tree `v0(E)`.
pub fn palindrome_cftg() -> Cftg {
    let a = RankedSymbol::new("a", 1);
    let b = RankedSymbol::new("b", 1);
    let e = RankedSymbol::new("E", 0);
    let v0 = RankedSymbol::new("v0", 1);
    let x = || TreeForm::Param("x".into());
    let t = |sym: &RankedSymbol, child: TreeForm| TreeForm::Terminal(sym.clone(), vec![child]);
    let v = |sym: &RankedSymbol, child: TreeForm| TreeForm::Variable(sym.clone(), vec![child]);
    let prod = |rhs: TreeForm| CftgProduction::new(v0.clone(), vec!["x".into()], rhs);
    Cftg::new(
        vec![a.clone(), b.clone(), e.clone()],
        vec![v0.clone()],
        TreeForm::Variable(v0.clone(), vec![TreeForm::Terminal(e.clone(), vec![])]),
        vec![
            prod(t(&a, v(&v0, t(&a, x())))),
            prod(t(&a, t(&a, x()))),
            prod(t(&a, x())),
            prod(t(&b, v(&v0, t(&b, x())))),
            prod(t(&b, t(&b, x()))),
            prod(t(&b, x())),
        ],
    )
    .expect("fixture grammar is well constructed")
}

/// The tree of `cons(s(s(z)), cons(s(z), cons(z, nil)))`, i.e. the list
/// `[2, 1, 0]`, as a ground type.
pub fn two_one_zero_list() -> GroundType {
    let cons = ClassName::new("cons", 2);
    let num = |n: usize| GroundType::chain(vec!["s"; n], GroundType::leaf("z"));
    let mut list = GroundType::leaf("nil");
    for n in [0, 1, 2] {
        list = GroundType::new(cons.clone(), vec![num(n), list]);
    }
    list
}
