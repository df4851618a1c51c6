//! Tree and string grammar machinery: ranked alphabets, regular tree
//! grammars, context-free tree grammars with normal-form checks and a
//! bounded derivation oracle, plus string CFGs with normal-form conversion
//! and a CYK membership oracle.

mod cfg;
mod tree;

pub use cfg::{
    cfg_to_gnf, cfg_to_monadic_cftg, cyk_member, parse_cfg, reverse_cfg, CfgError,
    CfgProduction, CykOracle, GnfResult, StringCfg,
};
pub use tree::{
    derive_trees, ecftg_to_cftg, is_deterministic_gnf, Cftg, CftgProduction, DeriveBounds,
    DeriveError, GrammarError, RankedSymbol, RegularTreeGrammar, RtgProduction, TreeForm,
};
