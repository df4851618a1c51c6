//! Round-trip properties for the text and JSON formats: whatever the
//! library prints, it must parse back to the same value.

use std::collections::BTreeSet;

use copse::format::{
    class_table_from_json, class_table_to_json, ground_type_from_json, ground_type_to_json,
    parse_class_table, parse_ground_type, parse_query, parse_type_pattern,
};
use copse::table::{ClassDecl, ClassTable};
use copse::term::{ClassName, GroundType, TypePattern, Variance};
use proptest::prelude::*;

fn class_names() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("E".to_string()),
        Just("a".to_string()),
        Just("b".to_string()),
        Just("pair".to_string()),
        Just("v0".to_string()),
    ]
}

fn ground_types() -> impl Strategy<Value = GroundType> {
    let leaf = class_names().prop_map(GroundType::leaf);
    leaf.prop_recursive(4, 24, 2, |inner| {
        (class_names(), prop::collection::vec(inner, 1..=2)).prop_map(|(name, children)| {
            GroundType::new(ClassName::new(name, children.len()), children)
        })
    })
}

fn patterns() -> impl Strategy<Value = TypePattern> {
    let leaf = prop_oneof![
        Just(TypePattern::param("x")),
        Just(TypePattern::param("y")),
        class_names().prop_map(TypePattern::leaf),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        (class_names(), prop::collection::vec(inner, 1..=2)).prop_map(|(name, children)| {
            TypePattern::node(ClassName::new(name, children.len()), children)
        })
    })
}

/// A small well-constructed table: leaf classes plus one class whose
/// supertypes reuse its own parameter.
fn tables() -> impl Strategy<Value = ClassTable> {
    let variance = prop_oneof![
        Just(Variance::Covariant),
        Just(Variance::Contravariant),
        Just(Variance::Invariant),
    ];
    (variance, prop::collection::vec(prop_oneof![Just("g"), Just("h")], 1..=3)).prop_map(
        |(v, chain)| {
            ClassTable::new(vec![
                ClassDecl::new("g", vec![("x".into(), Variance::Covariant)], vec![]),
                ClassDecl::new("h", vec![("x".into(), Variance::Covariant)], vec![]),
                ClassDecl::new("E", vec![], vec![]),
                ClassDecl::new(
                    "k",
                    vec![("y".into(), v)],
                    vec![TypePattern::chain(chain, TypePattern::param("y"))],
                ),
            ])
            .expect("generated decls are distinct")
        },
    )
}

proptest! {
    #[test]
    fn ground_type_text_round_trips(t in ground_types()) {
        prop_assert_eq!(parse_ground_type(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn ground_type_json_round_trips(t in ground_types()) {
        prop_assert_eq!(ground_type_from_json(&ground_type_to_json(&t)).unwrap(), t);
    }

    #[test]
    fn pattern_text_round_trips(p in patterns()) {
        let params: BTreeSet<&str> = BTreeSet::from(["x", "y"]);
        prop_assert_eq!(parse_type_pattern(&p.to_string(), &params).unwrap(), p);
    }

    #[test]
    fn table_text_round_trips(table in tables()) {
        let parsed = parse_class_table(&table.to_string()).unwrap();
        prop_assert_eq!(parsed.to_string(), table.to_string());
    }

    #[test]
    fn table_json_round_trips(table in tables()) {
        let parsed = class_table_from_json(&class_table_to_json(&table)).unwrap();
        prop_assert_eq!(parsed.to_string(), table.to_string());
    }

    #[test]
    fn query_text_round_trips(l in ground_types(), r in ground_types()) {
        let text = format!("{l} <: {r}");
        let (pl, rel, pr) = parse_query(&text).unwrap();
        prop_assert_eq!(pl, l);
        prop_assert_eq!(pr, r);
        prop_assert_eq!(rel, copse::subtyping::QueryRelation::Sub);
    }
}
