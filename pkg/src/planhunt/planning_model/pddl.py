"""Parser and renderer for the supported PDDL subset.

Supported requirements: :strips :typing :negative-preconditions
:disjunctive-preconditions :action-costs. Preconditions are and/or trees
over literals with negation applied to atoms only; effects are add/delete
lists plus an optional constant (increase (total-cost) n). Symbols are
case-insensitive and normalized to lowercase; ``;`` starts a comment.
"""

import re
from dataclasses import dataclass

from ..errors import (
    PddlSyntaxError,
    UndeclaredObject,
    UndeclaredPredicate,
    UndeclaredType,
    UndeclaredVariable,
    UnsupportedRequirement,
)
from .model import (
    ActionSchema,
    DomainModel,
    FAnd,
    FAtom,
    FNot,
    FOr,
    Formula,
    Parameter,
    PredicateSchema,
    ProblemInstance,
    TypeHierarchy,
)

__all__ = ["parse_domain", "parse_problem", "render_problem", "render_formula"]

SUPPORTED_REQUIREMENTS = (
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":disjunctive-preconditions",
    ":action-costs",
)


@dataclass(frozen=True)
class _Sym:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class _Node:
    items: tuple
    line: int
    col: int


_LEX_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def _read(text: str):
    """Tokenize and build the nested s-expression forms."""
    stack: list[list] = [[]]
    positions: list[tuple[int, int]] = []
    line = 1
    col = 1
    pos = 0
    while pos < len(text):
        match = _LEX_RE.match(text, pos)
        if match is None:
            raise PddlSyntaxError(line, col, f"bad character {text[pos]!r}")
        tok = match.group()
        tok_line, tok_col = line, col
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rindex("\n")
        else:
            col += len(tok)
        pos = match.end()
        if tok.isspace() or tok.startswith(";"):
            continue
        if tok == "(":
            stack.append([])
            positions.append((tok_line, tok_col))
        elif tok == ")":
            if len(stack) == 1:
                raise PddlSyntaxError(tok_line, tok_col, "unbalanced ')'")
            items = stack.pop()
            open_line, open_col = positions.pop()
            stack[-1].append(_Node(tuple(items), open_line, open_col))
        else:
            stack[-1].append(_Sym(tok.lower(), tok_line, tok_col))
    if len(stack) != 1:
        open_line, open_col = positions[-1]
        raise PddlSyntaxError(open_line, open_col, "unclosed '('")
    return stack[0]


def _err(node, reason: str) -> PddlSyntaxError:
    return PddlSyntaxError(node.line, node.col, reason)


def _sym_text(node, context: str) -> str:
    if not isinstance(node, _Sym):
        raise _err(node, f"expected a name in {context}")
    return node.text


def _parse_typed_list(items, context: str) -> list[tuple[str, str]]:
    """Parse ``a b - t c - u d`` into (name, type) pairs; trailing names
    without a dash default to type object."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        text = _sym_text(items[i], context)
        if text == "-":
            if not pending:
                raise _err(items[i], f"dangling '-' in {context}")
            if i + 1 >= len(items):
                raise _err(items[i], f"missing type after '-' in {context}")
            type_name = _sym_text(items[i + 1], context)
            out.extend((name, type_name) for name in pending)
            pending = []
            i += 2
        else:
            pending.append(text)
            i += 1
    out.extend((name, "object") for name in pending)
    return out


# --- domains ---------------------------------------------------------------------


def parse_domain(text: str) -> DomainModel:
    forms = _read(text)
    if len(forms) != 1 or not isinstance(forms[0], _Node):
        raise PddlSyntaxError(1, 1, "expected a single (define ...) form")
    top = forms[0]
    items = top.items
    if (
        len(items) < 2
        or not isinstance(items[0], _Sym)
        or items[0].text != "define"
        or not isinstance(items[1], _Node)
        or len(items[1].items) != 2
        or _sym_text(items[1].items[0], "define") != "domain"
    ):
        raise _err(top, "expected (define (domain NAME) ...)")
    name = _sym_text(items[1].items[1], "domain name")

    requirements: tuple[str, ...] = ()
    types = TypeHierarchy()
    predicates: dict[str, PredicateSchema] = {}
    constants: dict[str, str] = {}
    actions: list[ActionSchema] = []
    saw_types = False

    for section in items[2:]:
        if not isinstance(section, _Node) or not section.items:
            raise _err(section, "expected a (:section ...) form")
        head = _sym_text(section.items[0], "section")
        rest = section.items[1:]
        if head == ":requirements":
            requirements = tuple(_sym_text(s, ":requirements") for s in rest)
            for req in requirements:
                if req not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirement(req)
        elif head == ":types":
            saw_types = True
            for type_name, parent in _parse_typed_list(rest, ":types"):
                if parent != "object" and not types.known(parent):
                    types.declare(parent, "object")
                types.declare(type_name, parent)
        elif head == ":constants":
            for obj, type_name in _parse_typed_list(rest, ":constants"):
                if not types.known(type_name):
                    raise UndeclaredType(type_name)
                constants[obj] = type_name
        elif head == ":predicates":
            for decl in rest:
                if not isinstance(decl, _Node) or not decl.items:
                    raise _err(decl, "expected a predicate declaration")
                pred_name = _sym_text(decl.items[0], ":predicates")
                params = _parse_typed_list(decl.items[1:], f"predicate {pred_name}")
                for _, type_name in params:
                    if not types.known(type_name):
                        raise UndeclaredType(type_name)
                predicates[pred_name] = PredicateSchema(
                    pred_name, tuple(t for _, t in params)
                )
        elif head == ":functions":
            # Only (total-cost) is meaningful; anything else is rejected.
            for decl in rest:
                if (
                    not isinstance(decl, _Node)
                    or len(decl.items) != 1
                    or _sym_text(decl.items[0], ":functions") != "total-cost"
                ):
                    raise _err(decl, "only (total-cost) is supported in :functions")
        elif head == ":action":
            actions.append(
                _parse_action(section, types, predicates, constants, requirements)
            )
        else:
            raise _err(section, f"unknown domain section {head}")

    if not saw_types and ":typing" in requirements:
        # Typing declared but no :types section: everything is object.
        pass
    return DomainModel(
        name=name,
        requirements=requirements,
        types=types,
        predicates=predicates,
        constants=constants,
        actions=tuple(actions),
    )


def _parse_action(section, types, predicates, constants, requirements) -> ActionSchema:
    items = section.items
    if len(items) < 2 or not isinstance(items[1], _Sym):
        raise _err(section, "action needs a name")
    name = items[1].text
    fields: dict[str, object] = {}
    i = 2
    while i < len(items):
        key = _sym_text(items[i], f"action {name}")
        if i + 1 >= len(items):
            raise _err(items[i], f"missing value for {key} in action {name}")
        fields[key] = items[i + 1]
        i += 2
    if ":parameters" not in fields or not isinstance(fields[":parameters"], _Node):
        raise _err(section, f"action {name} needs :parameters (...)")

    params: list[Parameter] = []
    for var, type_name in _parse_typed_list(
        fields[":parameters"].items, f"action {name} parameters"
    ):
        if not var.startswith("?"):
            raise _err(fields[":parameters"], f"parameter {var} must start with '?'")
        if not types.known(type_name):
            raise UndeclaredType(type_name)
        params.append(Parameter(var, type_name))
    param_types = {p.name: p.type for p in params}

    precondition: Formula = FAnd(())
    if ":precondition" in fields:
        precondition = _parse_formula(
            fields[":precondition"], predicates, param_types, constants, types,
            allow_or=True,
        )

    add: list[FAtom] = []
    delete: list[FAtom] = []
    cost = 1
    if ":effect" in fields:
        cost = _parse_effect(
            fields[":effect"], predicates, param_types, constants, types, add, delete
        )
    for atom in add:
        if atom in delete:
            raise _err(section, f"action {name} both adds and deletes {atom.render()}")
    return ActionSchema(
        name=name,
        parameters=tuple(params),
        precondition=precondition,
        add=tuple(add),
        delete=tuple(delete),
        cost=cost,
    )


def _check_atom_args(node, pred: PredicateSchema, args, param_types, constants, types):
    if len(args) != len(pred.param_types):
        raise _err(
            node,
            f"predicate {pred.name} takes {len(pred.param_types)} arguments, "
            f"got {len(args)}",
        )
    for arg, want in zip(args, pred.param_types):
        if arg.startswith("?"):
            if arg not in param_types:
                raise UndeclaredVariable(arg)
            have = param_types[arg]
        elif arg in constants:
            have = constants[arg]
        else:
            raise UndeclaredObject(arg)
        if not types.is_subtype(have, want):
            raise _err(
                node, f"argument {arg} of {pred.name} has type {have}, needs {want}"
            )


def _parse_atom(node, predicates, param_types, constants, types) -> FAtom:
    if not isinstance(node, _Node) or not node.items:
        raise _err(node, "expected an atom")
    pred_name = _sym_text(node.items[0], "atom")
    if pred_name in ("and", "or", "not"):
        raise _err(node, f"expected an atom, found a nested {pred_name}")
    if pred_name not in predicates:
        raise UndeclaredPredicate(pred_name)
    args = tuple(_sym_text(a, f"atom {pred_name}") for a in node.items[1:])
    _check_atom_args(node, predicates[pred_name], args, param_types, constants, types)
    return FAtom(pred_name, args)


def _parse_formula(
    node, predicates, param_types, constants, types, allow_or: bool
) -> Formula:
    if not isinstance(node, _Node) or not node.items:
        raise _err(node, "expected a formula")
    head = node.items[0]
    if isinstance(head, _Sym) and head.text == "and":
        return FAnd(
            tuple(
                _parse_formula(part, predicates, param_types, constants, types, allow_or)
                for part in node.items[1:]
            )
        )
    if isinstance(head, _Sym) and head.text == "or":
        if not allow_or:
            raise _err(node, "disjunction is only allowed in preconditions")
        return FOr(
            tuple(
                _parse_formula(part, predicates, param_types, constants, types, allow_or)
                for part in node.items[1:]
            )
        )
    if isinstance(head, _Sym) and head.text == "not":
        if len(node.items) != 2:
            raise _err(node, "not takes exactly one atom")
        inner = node.items[1]
        atom = _parse_atom(inner, predicates, param_types, constants, types)
        return FNot(atom)
    return _parse_atom(node, predicates, param_types, constants, types)


def _parse_effect(
    node, predicates, param_types, constants, types, add, delete
) -> int:
    """Collect add/delete atoms; returns the action cost (default 1)."""
    cost = 1

    def walk(part) -> None:
        nonlocal cost
        if not isinstance(part, _Node) or not part.items:
            raise _err(part, "expected an effect")
        head = part.items[0]
        if isinstance(head, _Sym) and head.text == "and":
            for sub in part.items[1:]:
                walk(sub)
            return
        if isinstance(head, _Sym) and head.text == "not":
            if len(part.items) != 2:
                raise _err(part, "not takes exactly one atom")
            delete.append(
                _parse_atom(part.items[1], predicates, param_types, constants, types)
            )
            return
        if isinstance(head, _Sym) and head.text == "increase":
            if (
                len(part.items) != 3
                or not isinstance(part.items[1], _Node)
                or len(part.items[1].items) != 1
                or _sym_text(part.items[1].items[0], "increase") != "total-cost"
                or not isinstance(part.items[2], _Sym)
                or not part.items[2].text.isdigit()
            ):
                raise _err(part, "expected (increase (total-cost) N)")
            cost = int(part.items[2].text)
            return
        if isinstance(head, _Sym) and head.text == "or":
            raise _err(part, "disjunction is only allowed in preconditions")
        add.append(_parse_atom(part, predicates, param_types, constants, types))

    walk(node)
    return cost


# --- problems --------------------------------------------------------------------


def parse_problem(text: str, domain: DomainModel) -> ProblemInstance:
    forms = _read(text)
    if len(forms) != 1 or not isinstance(forms[0], _Node):
        raise PddlSyntaxError(1, 1, "expected a single (define ...) form")
    top = forms[0]
    items = top.items
    if (
        len(items) < 2
        or not isinstance(items[0], _Sym)
        or items[0].text != "define"
        or not isinstance(items[1], _Node)
        or len(items[1].items) != 2
        or _sym_text(items[1].items[0], "define") != "problem"
    ):
        raise _err(top, "expected (define (problem NAME) ...)")
    name = _sym_text(items[1].items[1], "problem name")

    objects: dict[str, str] = {}
    init: set = set()
    goal: Formula | None = None
    domain_ref: str | None = None

    for section in items[2:]:
        if not isinstance(section, _Node) or not section.items:
            raise _err(section, "expected a (:section ...) form")
        head = _sym_text(section.items[0], "section")
        rest = section.items[1:]
        if head == ":domain":
            domain_ref = _sym_text(rest[0], ":domain") if rest else None
        elif head == ":objects":
            for obj, type_name in _parse_typed_list(rest, ":objects"):
                if not domain.types.known(type_name):
                    raise UndeclaredType(type_name)
                objects[obj] = type_name
        elif head == ":init":
            all_objects = dict(domain.constants)
            all_objects.update(objects)
            for atom_node in rest:
                if (
                    isinstance(atom_node, _Node)
                    and atom_node.items
                    and isinstance(atom_node.items[0], _Sym)
                    and atom_node.items[0].text == "="
                ):
                    continue  # metric initialization, ignored
                atom = _parse_atom(
                    atom_node, domain.predicates, {}, all_objects, domain.types
                )
                init.add((atom.predicate, atom.args))
        elif head == ":goal":
            if len(rest) != 1:
                raise _err(section, ":goal takes exactly one formula")
            all_objects = dict(domain.constants)
            all_objects.update(objects)
            goal = _parse_formula(
                rest[0], domain.predicates, {}, all_objects, domain.types, allow_or=True
            )
        elif head == ":metric":
            continue
        else:
            raise _err(section, f"unknown problem section {head}")

    if domain_ref is not None and domain_ref != domain.name:
        raise PddlSyntaxError(
            top.line, top.col, f"problem references domain {domain_ref!r}, "
            f"loaded domain is {domain.name!r}"
        )
    if goal is None:
        raise _err(top, "problem has no :goal")
    return ProblemInstance(
        name=name,
        domain_name=domain_ref or domain.name,
        objects=objects,
        init=frozenset(init),
        goal=goal,
    )


# --- rendering -------------------------------------------------------------------


def render_formula(formula: Formula) -> str:
    if isinstance(formula, FAtom):
        return formula.render()
    if isinstance(formula, FNot):
        return f"(not {formula.atom.render()})"
    if isinstance(formula, FAnd):
        return "(and " + " ".join(render_formula(p) for p in formula.parts) + ")"
    if isinstance(formula, FOr):
        return "(or " + " ".join(render_formula(p) for p in formula.parts) + ")"
    raise TypeError(f"unknown formula node {formula!r}")


def render_problem(problem: ProblemInstance) -> str:
    """Render a problem back to PDDL text (stable object/atom order)."""
    lines = [f"(define (problem {problem.name})"]
    lines.append(f"  (:domain {problem.domain_name})")
    if problem.objects:
        by_type: dict[str, list[str]] = {}
        for obj, type_name in problem.objects.items():
            by_type.setdefault(type_name, []).append(obj)
        parts = []
        for type_name in sorted(by_type):
            parts.append(" ".join(sorted(by_type[type_name])) + f" - {type_name}")
        lines.append("  (:objects " + "\n            ".join(parts) + ")")
    atoms = sorted(problem.init)
    rendered = " ".join(FAtom(p, a).render() for p, a in atoms)
    lines.append(f"  (:init {rendered})")
    lines.append(f"  (:goal {render_formula(problem.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"
