"""Stratified rule inference over telemetry fact bases."""

from .rules import (
    Atom,
    Comparison,
    Literal,
    Rule,
    RulePack,
    Var,
    parse_body,
    parse_rule_pack,
    render_body,
)
from .engine import (
    DerivedFacts,
    StratifiedProgram,
    evaluate,
    match_body,
    stratify,
)

__all__ = [
    "Atom",
    "Comparison",
    "Literal",
    "Rule",
    "RulePack",
    "Var",
    "parse_body",
    "parse_rule_pack",
    "render_body",
    "DerivedFacts",
    "StratifiedProgram",
    "evaluate",
    "match_body",
    "stratify",
]
