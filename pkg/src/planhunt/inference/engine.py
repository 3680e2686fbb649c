"""Stratification and bottom-up evaluation of rule packs.

Stratification condenses the predicate dependency graph; a negative edge
inside a strongly connected component means the program has no perfect
model and raises NegationCycle. Evaluation runs semi-naive within each
stratum: after one naive round, rules only re-fire with at least one
current-stratum body atom restricted to the facts new in the last round.
"""

import logging
from dataclasses import dataclass

from ..errors import (
    ArityConflict,
    ComparisonTypeError,
    DeclarationConflict,
    NegationCycle,
    ResourceLimit,
)
from ..telemetry import Fact, FactBase
from .rules import Atom, BodyItem, Comparison, Literal, Rule, RulePack, Var

logger = logging.getLogger(__name__)

__all__ = ["StratifiedProgram", "DerivedFacts", "stratify", "evaluate", "match_body"]

DEFAULT_FACT_LIMIT = 10**6


@dataclass(frozen=True)
class StratifiedProgram:
    """Rules grouped into dense strata; lower strata never depend on higher."""

    pack: RulePack
    strata: tuple[tuple[Rule, ...], ...]
    stratum_of: dict[str, int]


@dataclass(frozen=True)
class DerivedFacts:
    """Output of evaluation: the intensional slice of the perfect model."""

    facts: FactBase


def stratify(pack: RulePack) -> StratifiedProgram:
    """Layer the pack so negation only reaches strictly lower strata."""
    predicates = set(pack.declared)
    pos_edges: dict[str, set[str]] = {p: set() for p in predicates}
    neg_edges: dict[str, set[str]] = {p: set() for p in predicates}
    for rule in pack.rules:
        head = rule.head.predicate
        for item in rule.body:
            if not isinstance(item, Literal):
                continue
            source = item.atom.predicate
            (neg_edges if item.negated else pos_edges)[source].add(head)

    component_of = _condense(predicates, pos_edges, neg_edges)
    members: dict[int, list[str]] = {}
    for pred, comp in component_of.items():
        members.setdefault(comp, []).append(pred)
    for comp, preds in members.items():
        for src in preds:
            for dst in neg_edges[src]:
                if component_of[dst] == comp:
                    raise NegationCycle(tuple(preds))

    # Longest-path layering over the condensation; sparse levels compressed.
    level: dict[int, int] = {comp: 0 for comp in members}
    order = _topo_order(members, component_of, pos_edges, neg_edges)
    for comp in order:
        for src in members[comp]:
            for dst in pos_edges[src]:
                target = component_of[dst]
                if target != comp:
                    level[target] = max(level[target], level[comp])
            for dst in neg_edges[src]:
                level[component_of[dst]] = max(level[component_of[dst]], level[comp] + 1)

    pred_level = {p: level[component_of[p]] for p in predicates}
    height = max(pred_level.values(), default=0) + 1 if pack.rules else 1
    strata: list[list[Rule]] = [[] for _ in range(height)]
    for rule in pack.rules:
        strata[pred_level[rule.head.predicate]].append(rule)
    return StratifiedProgram(
        pack=pack,
        strata=tuple(tuple(group) for group in strata),
        stratum_of=pred_level,
    )


def _condense(
    predicates: set[str],
    pos_edges: dict[str, set[str]],
    neg_edges: dict[str, set[str]],
) -> dict[str, int]:
    """Iterative Tarjan SCC over the combined dependency graph."""
    succ = {p: sorted(pos_edges[p] | neg_edges[p]) for p in predicates}
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    component_of: dict[str, int] = {}
    counter = 0
    comp_counter = 0

    for root in sorted(predicates):
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            for i in range(child_i, len(succ[node])):
                child = succ[node][i]
                if child not in index:
                    work[-1] = (node, i + 1)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            if low[node] == index[node]:
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component_of[member] = comp_counter
                    if member == node:
                        break
                comp_counter += 1
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return component_of


def _topo_order(
    members: dict[int, list[str]],
    component_of: dict[str, int],
    pos_edges: dict[str, set[str]],
    neg_edges: dict[str, set[str]],
) -> list[int]:
    indegree = {comp: 0 for comp in members}
    succs: dict[int, set[int]] = {comp: set() for comp in members}
    for src_comp, preds in members.items():
        for src in preds:
            for dst in pos_edges[src] | neg_edges[src]:
                dst_comp = component_of[dst]
                if dst_comp != src_comp and dst_comp not in succs[src_comp]:
                    succs[src_comp].add(dst_comp)
                    indegree[dst_comp] += 1
    ready = sorted(comp for comp, deg in indegree.items() if deg == 0)
    order: list[int] = []
    while ready:
        comp = ready.pop(0)
        order.append(comp)
        for nxt in sorted(succs[comp]):
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
    return order


# --- evaluation -------------------------------------------------------------------


def evaluate(
    program: StratifiedProgram,
    base: FactBase,
    max_derived: int = DEFAULT_FACT_LIMIT,
) -> DerivedFacts:
    """Compute the perfect model and return its intensional slice.

    The base must be arity-consistent with the pack and contain only
    extensional predicates. Raises ResourceLimit past ``max_derived``
    derived facts.
    """
    pack = program.pack
    intensional = pack.intensional()
    for pred, arity in base.arity.items():
        declared = pack.arity_of(pred)
        if declared is not None and declared != arity:
            raise ArityConflict(pred, arity, declared)
        if pred in intensional:
            raise DeclarationConflict(pred, "intensional predicate given as input")

    relations: dict[str, set[tuple]] = {}
    for fact in base:
        relations.setdefault(fact.predicate, set()).add(fact.args)
    for pred in pack.declared:
        relations.setdefault(pred, set())

    derived_total = 0
    for stratum_index, rules in enumerate(program.strata):
        local = {
            rule.head.predicate
            for rule in rules
        }
        plans = [_plan_rule(rule, local) for rule in rules]

        # Naive first round over everything known so far. Each firing is
        # materialized before insertion so relations stay stable under the
        # generator's iteration.
        delta: dict[str, set[tuple]] = {p: set() for p in local}
        for rule, plan in plans:
            for args in list(_fire(rule, plan, relations, None, None)):
                if args not in relations[rule.head.predicate]:
                    relations[rule.head.predicate].add(args)
                    delta[rule.head.predicate].add(args)
                    derived_total += 1
        _check_budget(derived_total, max_derived)

        # Semi-naive rounds: one body atom ranges over the last delta.
        while any(delta.values()):
            fresh: dict[str, set[tuple]] = {p: set() for p in local}
            for rule, plan in plans:
                recursive_positions = [
                    i
                    for i, item in enumerate(rule.body)
                    if isinstance(item, Literal)
                    and not item.negated
                    and item.atom.predicate in local
                ]
                for position in recursive_positions:
                    pred = rule.body[position].atom.predicate
                    if not delta[pred]:
                        continue
                    for args in list(_fire(rule, plan, relations, position, delta[pred])):
                        if args not in relations[rule.head.predicate]:
                            relations[rule.head.predicate].add(args)
                            fresh[rule.head.predicate].add(args)
                            derived_total += 1
            _check_budget(derived_total, max_derived)
            delta = fresh
        logger.debug(
            "stratum %d fixpoint: %d facts derived so far", stratum_index, derived_total
        )

    out = FactBase()
    for pred in sorted(intensional):
        for args in relations.get(pred, ()):
            out.add(Fact(pred, args))
    return DerivedFacts(facts=out)


def _check_budget(total: int, limit: int) -> None:
    if total > limit:
        raise ResourceLimit(limit)


def _plan_rule(rule: Rule, local: set[str]) -> tuple[Rule, list[tuple[str, int]]]:
    """Order body items for evaluation: each positive atom in written order,
    with comparisons and negations placed as soon as their variables bind."""
    pending: list[tuple[int, BodyItem]] = list(enumerate(rule.body))
    plan: list[tuple[str, int]] = []  # ("atom" | "filter", body index)
    bound: set[str] = set()

    def flush_filters() -> None:
        progressed = True
        while progressed:
            progressed = False
            for i, item in list(pending):
                if isinstance(item, Literal) and not item.negated:
                    continue
                needs = (
                    item.variables()
                    if isinstance(item, Comparison)
                    else item.atom.variables()
                )
                if needs <= bound:
                    plan.append(("filter", i))
                    pending.remove((i, item))
                    progressed = True

    flush_filters()
    for i, item in list(pending):
        if isinstance(item, Literal) and not item.negated:
            plan.append(("atom", i))
            pending.remove((i, item))
            bound |= item.atom.variables()
            flush_filters()
    # Safety guarantees rules leave no residue. Bare patterns skip the
    # safety check, so a negation may keep wildcard variables: it runs
    # last, as a scan for any matching fact.
    for i, item in list(pending):
        if isinstance(item, Literal) and item.negated:
            plan.append(("filter", i))
            pending.remove((i, item))
    assert not pending, f"unbound residue in rule: {rule}"
    return rule, plan


def _fire(
    rule: Rule,
    plan: list[tuple[str, int]],
    relations: dict[str, set[tuple]],
    delta_position: int | None,
    delta_relation: set[tuple] | None,
):
    """Yield head argument tuples derivable by one rule firing."""

    def rows_for(index: int) -> set[tuple]:
        item = rule.body[index]
        assert isinstance(item, Literal)
        if index == delta_position and delta_relation is not None:
            return delta_relation
        return relations.get(item.atom.predicate, set())

    def step(plan_index: int, binding: dict[str, object]):
        if plan_index == len(plan):
            yield _substitute(rule.head, binding)
            return
        kind, body_index = plan[plan_index]
        item = rule.body[body_index]
        if kind == "atom":
            assert isinstance(item, Literal)
            for row in rows_for(body_index):
                extended = _match(item.atom, row, binding)
                if extended is not None:
                    yield from step(plan_index + 1, extended)
        elif isinstance(item, Comparison):
            if _compare(item, binding):
                yield from step(plan_index + 1, binding)
        else:
            assert isinstance(item, Literal) and item.negated
            rows = relations.get(item.atom.predicate, set())
            if item.atom.variables() <= binding.keys():
                hit = _substitute(item.atom, binding) in rows
            else:
                # Unbound variables act as wildcards: the negation holds
                # only when no fact matches the pattern.
                hit = any(_match(item.atom, row, binding) is not None for row in rows)
            if not hit:
                yield from step(plan_index + 1, binding)

    yield from step(0, {})


def _match(atom: Atom, row: tuple, binding: dict) -> dict | None:
    if len(atom.args) != len(row):
        return None
    local = binding
    copied = False
    for term, value in zip(atom.args, row):
        if isinstance(term, Var):
            seen = local.get(term.name)
            if seen is None:
                if not copied:
                    local = dict(local)
                    copied = True
                local[term.name] = value
            elif seen != value:
                return None
        elif term != value:
            return None
    return local


def _substitute(atom: Atom, binding: dict) -> tuple:
    out = []
    for term in atom.args:
        if isinstance(term, Var):
            out.append(binding[term.name])
        else:
            out.append(term)
    return tuple(out)


def _resolve(term, binding: dict):
    if isinstance(term, Var):
        return binding[term.name]
    return term


def _compare(item: Comparison, binding: dict) -> bool:
    lhs = _resolve(item.lhs, binding)
    rhs = _resolve(item.rhs, binding)
    if item.op == "!=":
        return lhs != rhs
    if not isinstance(lhs, int) or not isinstance(rhs, int):
        raise ComparisonTypeError(
            f"order comparison on non-integer terms: {lhs!r} {item.op} {rhs!r}"
        )
    if item.op == "<":
        return lhs < rhs
    if item.op == "<=":
        return lhs <= rhs
    if item.op == ">":
        return lhs > rhs
    return lhs >= rhs


def match_body(body: tuple[BodyItem, ...], base: FactBase) -> bool:
    """Check whether a conjunction of literals has a satisfying binding in
    ``base`` alone. Negation is closed-world over the base; variables a
    negated atom never binds act as wildcards (no matching fact may exist)."""
    relations: dict[str, set[tuple]] = {}
    for fact in base:
        relations.setdefault(fact.predicate, set()).add(fact.args)
    probe = Rule(Atom("__match__"), body)
    try:
        _, plan = _plan_rule(probe, set())
    except AssertionError:
        # A malformed pattern (filter variable never bound) cannot match.
        return False
    for _args in _fire(probe, plan, relations, None, None):
        return True
    return False
