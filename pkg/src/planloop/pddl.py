"""PDDL front-end: parse a STRIPS+typing subset and ground it.

Supported subset: ``:strips``, ``:typing``, conjunctive positive goals.
``:action-costs`` is accepted so that domains carrying ``(:functions ...)``
and ``(increase (total-cost) ...)`` blocks still parse; the cost machinery
is discarded because plan length is measured in actions.

Not supported (rejected at parse time): negative preconditions, conditional
effects, quantifiers, derived predicates, numeric fluents beyond total-cost.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from itertools import product

import numpy as np

GROUND_ATOM_BUDGET = 2**20
GROUND_ACTION_BUDGET = 2**22

ACCEPTED_REQUIREMENTS = frozenset({":strips", ":typing", ":action-costs"})

ROOT_TYPE = "object"


class PddlError(Exception):
    """Parse, validation, or grounding failure with source position."""

    def __init__(self, message: str, line: int | None = None,
                 col: int | None = None, filename: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.filename or "<string>"
        if self.line is not None:
            where += f":{self.line}"
            if self.col is not None:
                where += f":{self.col}"
        return f"{where}: {self.message}"


class GroundingError(PddlError):
    """Grounding exceeded a budget or hit an inconsistent definition."""


# ── Core data types ──────────────────────────────────────────────────────────

@dataclass(frozen=True, order=True)
class Atom:
    """A predicate applied to argument terms (objects or ?variables)."""

    pred: str
    args: tuple[str, ...]

    def render(self) -> str:
        if not self.args:
            return f"({self.pred})"
        return f"({self.pred} {' '.join(self.args)})"

    def substitute(self, binding: dict[str, str]) -> "Atom":
        return Atom(self.pred, tuple(binding.get(a, a) for a in self.args))


@dataclass(frozen=True)
class OperatorSchema:
    """Lifted action: typed parameters plus precondition/add/delete atoms."""

    name: str
    params: tuple[tuple[str, str], ...]   # (variable, type)
    pre: tuple[Atom, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class DomainDef:
    name: str
    requirements: tuple[str, ...]
    types: tuple[tuple[str, str], ...]          # (type, parent)
    predicates: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    operators: tuple[OperatorSchema, ...]

    def predicate_arity(self, name: str) -> int:
        for pname, params in self.predicates:
            if pname == name:
                return len(params)
        raise KeyError(name)

    @property
    def operator_names(self) -> tuple[str, ...]:
        return tuple(op.name for op in self.operators)

    def operator(self, name: str) -> OperatorSchema:
        for op in self.operators:
            if op.name == name:
                return op
        raise KeyError(name)


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain: str
    objects: tuple[tuple[str, str], ...]        # (object, type), declaration order
    init: tuple[Atom, ...]                      # sorted canonically
    goal: tuple[Atom, ...]                      # sorted canonically

    def structural_hash(self) -> str:
        """Hash of (init, goal); used for dataset uniqueness and split disjointness."""
        text = ";".join(a.render() for a in self.init)
        text += "|" + ";".join(a.render() for a in self.goal)
        return hashlib.sha256(text.encode()).hexdigest()

    def structurally_equal(self, other: "ProblemDef") -> bool:
        """Equality of objects/init/goal, ignoring the problem and domain names."""
        return (sorted(self.objects) == sorted(other.objects)
                and self.init == other.init and self.goal == other.goal)


@dataclass(frozen=True)
class GroundAction:
    """A grounded operator with precondition/add/delete bitmasks."""

    __slots__ = ("id", "schema", "args", "pre", "add", "delete")

    id: int
    schema: str
    args: tuple[str, ...]
    pre: int
    add: int
    delete: int

    @property
    def name(self) -> str:
        if not self.args:
            return f"({self.schema})"
        return f"({self.schema} {' '.join(self.args)})"


class GroundedTask:
    """A fully grounded planning instance with a dense atom universe.

    Atom index order is (predicate name ascending, object tuple lexicographic)
    and action order is (schema name ascending, argument tuple lexicographic),
    so grounding is a pure function of the input definitions.
    """

    def __init__(self, domain: DomainDef, problem: ProblemDef,
                 atoms: tuple[Atom, ...], actions: tuple[GroundAction, ...],
                 init: int, goal: int,
                 objects_by_type: dict[str, tuple[str, ...]]):
        self.domain = domain
        self.problem = problem
        self.atoms = atoms
        self.atom_index = {a.render(): i for i, a in enumerate(atoms)}
        self.actions = actions
        self.init = init
        self.goal = goal
        self.objects_by_type = objects_by_type
        self._action_index: dict[str, int] | None = None

    @property
    def action_index(self) -> dict[str, int]:
        if self._action_index is None:
            self._action_index = {a.name: a.id for a in self.actions}
        return self._action_index

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def domain_name(self) -> str:
        return self.domain.name

    @property
    def problem_name(self) -> str:
        return self.problem.name

    def atoms_to_mask(self, atoms: list[Atom] | tuple[Atom, ...]) -> int:
        mask = 0
        for a in atoms:
            try:
                mask |= 1 << self.atom_index[a.render()]
            except KeyError:
                raise GroundingError(f"atom {a.render()} not in universe") from None
        return mask

    def mask_to_atoms(self, mask: int) -> list[Atom]:
        out = []
        i = 0
        while mask:
            if mask & 1:
                out.append(self.atoms[i])
            mask >>= 1
            i += 1
        return out

    def find_action(self, schema: str, args: tuple[str, ...]) -> GroundAction | None:
        name = f"({schema} {' '.join(args)})" if args else f"({schema})"
        idx = self.action_index.get(name)
        return self.actions[idx] if idx is not None else None


# ── Lexer ────────────────────────────────────────────────────────────────────

_WORD_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-_?:=")


@dataclass(frozen=True)
class _Tok:
    text: str          # "(" / ")" / lowercased word
    line: int
    col: int


def _tokenize(text: str, filename: str | None) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            toks.append(_Tok(ch, line, col))
            i += 1
            col += 1
        else:
            start = i
            startcol = col
            while i < n and text[i].lower() in _WORD_CHARS:
                i += 1
                col += 1
            if i == start:
                raise PddlError(f"unexpected character {ch!r}", line, col, filename)
            toks.append(_Tok(text[start:i].lower(), line, startcol))
    return toks


class _Parser:
    """Recursive-descent parser over the token stream."""

    def __init__(self, text: str, filename: str | None = None):
        self.toks = _tokenize(text, filename)
        self.pos = 0
        self.filename = filename

    def error(self, message: str, tok: _Tok | None = None) -> PddlError:
        tok = tok or self._cur()
        return PddlError(message, tok.line if tok else None,
                         tok.col if tok else None, self.filename)

    def _cur(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def _peek(self) -> str | None:
        t = self._cur()
        return t.text if t else None

    def _next(self) -> _Tok:
        t = self._cur()
        if t is None:
            last = self.toks[-1] if self.toks else None
            raise PddlError("unexpected end of input",
                            last.line if last else None,
                            last.col if last else None, self.filename)
        self.pos += 1
        return t

    def _expect(self, text: str) -> _Tok:
        t = self._next()
        if t.text != text:
            raise self.error(f"expected {text!r}, got {t.text!r}", t)
        return t

    def _word(self, what: str = "identifier") -> _Tok:
        t = self._next()
        if t.text in ("(", ")"):
            raise self.error(f"expected {what}, got {t.text!r}", t)
        return t

    def _skip_balanced(self):
        # Opening "(" already consumed.
        depth = 1
        while depth:
            t = self._next()
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1

    # typed lists:  a b - t c d - t2  (untyped entries default to `object`)
    def _typed_list(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        pending: list[_Tok] = []
        while self._peek() != ")":
            t = self._next()
            if t.text == "-":
                typ = self._word("type name").text
                out.extend((p.text, typ) for p in pending)
                pending = []
            elif t.text == "(":
                raise self.error("nested form not allowed in typed list", t)
            else:
                pending.append(t)
        out.extend((p.text, ROOT_TYPE) for p in pending)
        return out

    def _atom(self, dom: DomainDef | None, allowed_terms: set[str] | None,
              arity_of: dict[str, int]) -> Atom:
        open_tok = self._expect("(")
        head = self._word("predicate name")
        args: list[str] = []
        while self._peek() != ")":
            args.append(self._word("argument").text)
        self._expect(")")
        if head.text not in arity_of:
            raise self.error(f"undeclared predicate {head.text!r}", head)
        if arity_of[head.text] != len(args):
            raise self.error(
                f"predicate {head.text!r} expects {arity_of[head.text]} "
                f"arguments, got {len(args)}", open_tok)
        if allowed_terms is not None:
            for a in args:
                if a not in allowed_terms:
                    raise self.error(f"unknown term {a!r} in {head.text!r}", open_tok)
        return Atom(head.text, tuple(args))

    def _conjunction(self, arity_of: dict[str, int],
                     allowed_terms: set[str] | None,
                     allow_not: bool, allow_cost: bool) -> tuple[list[Atom], list[Atom]]:
        """Parse an atom, (and ...), or empty (); returns (positive, negated)."""
        pos: list[Atom] = []
        neg: list[Atom] = []

        def one():
            open_tok = self._expect("(")
            head = self._peek()
            if head == ")":          # empty ()
                self._next()
                return
            if head == "and":
                self._next()
                while self._peek() != ")":
                    one()
                self._expect(")")
                return
            if head == "not":
                not_tok = self._next()
                if not allow_not:
                    raise self.error("negation not allowed here "
                                     "(negative preconditions/goals unsupported)", not_tok)
                neg.append(self._atom(None, allowed_terms, arity_of))
                self._expect(")")
                return
            if head in ("increase", "decrease", "assign", "="):
                if not allow_cost:
                    raise self.error(f"numeric expression {head!r} not supported here")
                self._skip_balanced()
                return
            if head in ("or", "imply", "forall", "exists", "when"):
                raise self.error(f"{head!r} is outside the supported subset")
            self.pos -= 1            # rewind the "("
            pos.append(self._atom(None, allowed_terms, arity_of))

        one()
        return pos, neg


# ── Domain parsing ───────────────────────────────────────────────────────────

def parse_domain(text: str, filename: str | None = None) -> DomainDef:
    """Parse a PDDL domain in the supported subset or raise PddlError."""
    p = _Parser(text, filename)
    p._expect("(")
    p._expect("define")
    p._expect("(")
    p._expect("domain")
    name = p._word("domain name").text
    p._expect(")")

    requirements: tuple[str, ...] = ()
    types: list[tuple[str, str]] = []
    predicates: list[tuple[str, tuple[tuple[str, str], ...]]] = []
    operators: list[OperatorSchema] = []
    has_costs = False

    while p._peek() != ")":
        p._expect("(")
        section = p._word("section keyword")
        if section.text == ":requirements":
            reqs = []
            while p._peek() != ")":
                r = p._word("requirement flag")
                if r.text not in ACCEPTED_REQUIREMENTS:
                    raise p.error(f"unsupported requirement {r.text!r}", r)
                reqs.append(r.text)
            p._expect(")")
            requirements = tuple(reqs)
            has_costs = ":action-costs" in requirements
        elif section.text == ":types":
            types.extend(p._typed_list())
            p._expect(")")
        elif section.text == ":predicates":
            seen = set()
            while p._peek() == "(":
                p._expect("(")
                pname = p._word("predicate name").text
                if pname in seen:
                    raise p.error(f"duplicate predicate {pname!r}")
                seen.add(pname)
                params = tuple(p._typed_list())
                for v, _ in params:
                    if not v.startswith("?"):
                        raise p.error(f"predicate parameter {v!r} must be a ?variable")
                p._expect(")")
                predicates.append((pname, params))
            p._expect(")")
        elif section.text == ":functions":
            if not has_costs:
                raise p.error(":functions requires :action-costs", section)
            p._skip_balanced()   # total-cost bookkeeping, discarded
        elif section.text == ":action":
            operators.append(_parse_action(p, predicates, has_costs))
        elif section.text == ":constants":
            raise p.error(":constants are outside the supported subset", section)
        else:
            raise p.error(f"unknown domain section {section.text!r}", section)
    p._expect(")")

    dom = DomainDef(name, requirements, tuple(types), tuple(predicates),
                    tuple(operators))
    _check_type_forest(dom)
    return dom


def _parse_action(p: _Parser, predicates, has_costs: bool) -> OperatorSchema:
    arity_of = {name: len(params) for name, params in predicates}
    name = p._word("action name").text
    params: tuple[tuple[str, str], ...] = ()
    pre: list[Atom] = []
    add: list[Atom] = []
    delete: list[Atom] = []
    while p._peek() != ")":
        key = p._word("action keyword")
        if key.text == ":parameters":
            p._expect("(")
            params = tuple(p._typed_list())
            p._expect(")")
            for v, _ in params:
                if not v.startswith("?"):
                    raise p.error(f"action parameter {v!r} must be a ?variable", key)
        elif key.text == ":precondition":
            allowed = {v for v, _ in params}
            pos, neg = p._conjunction(arity_of, allowed, allow_not=False,
                                      allow_cost=False)
            pre = pos
            assert not neg
        elif key.text == ":effect":
            allowed = {v for v, _ in params}
            add, delete = p._conjunction(arity_of, allowed, allow_not=True,
                                         allow_cost=has_costs)
        else:
            raise p.error(f"unknown action keyword {key.text!r}", key)
    p._expect(")")

    schema = OperatorSchema(name, params, tuple(pre), tuple(add), tuple(delete))
    static_overlap = set(schema.add) & set(schema.delete)
    if static_overlap:
        raise p.error(f"action {name!r} adds and deletes "
                      f"{sorted(a.render() for a in static_overlap)}")
    return schema


def _check_type_forest(dom: DomainDef):
    declared = {t for t, _ in dom.types}
    for t, parent in dom.types:
        if parent != ROOT_TYPE and parent not in declared:
            raise PddlError(f"type {t!r} has undeclared parent {parent!r}")
    # acyclic: walk each type to the root
    parent_of = dict(dom.types)
    for t in declared:
        seen = set()
        cur = t
        while cur != ROOT_TYPE:
            if cur in seen:
                raise PddlError(f"type cycle involving {t!r}")
            seen.add(cur)
            cur = parent_of[cur]
    known = declared | {ROOT_TYPE}
    for pname, params in dom.predicates:
        for _, typ in params:
            if typ not in known:
                raise PddlError(f"predicate {pname!r} uses undeclared type {typ!r}")
    closure = type_closure(dom)
    pred_params = dict(dom.predicates)
    for op in dom.operators:
        param_type = {}
        for v, typ in op.params:
            if typ not in known:
                raise PddlError(f"action {op.name!r} uses undeclared type {typ!r}")
            param_type[v] = typ
        for a in op.pre + op.add + op.delete:
            for arg, (_, typ) in zip(a.args, pred_params[a.pred]):
                if param_type[arg] not in closure[typ]:
                    raise PddlError(
                        f"action {op.name!r}: argument {arg!r} of type "
                        f"{param_type[arg]!r} does not fit {typ!r} in "
                        f"{a.render()}")


# ── Problem parsing ──────────────────────────────────────────────────────────

def parse_problem(text: str, dom: DomainDef,
                  filename: str | None = None) -> ProblemDef:
    """Parse and type-check a PDDL problem against a parsed domain."""
    p = _Parser(text, filename)
    arity_of = {name: len(params) for name, params in dom.predicates}
    p._expect("(")
    p._expect("define")
    p._expect("(")
    p._expect("problem")
    name = p._word("problem name").text
    p._expect(")")

    domain_name = None
    objects: list[tuple[str, str]] = []
    init: list[Atom] = []
    goal: list[Atom] = []

    while p._peek() != ")":
        p._expect("(")
        section = p._word("section keyword")
        if section.text == ":domain":
            domain_name = p._word("domain name").text
            if domain_name != dom.name:
                raise p.error(f"problem references domain {domain_name!r}, "
                              f"expected {dom.name!r}")
            p._expect(")")
        elif section.text == ":requirements":
            while p._peek() != ")":
                r = p._word("requirement flag")
                if r.text not in ACCEPTED_REQUIREMENTS:
                    raise p.error(f"unsupported requirement {r.text!r}", r)
            p._expect(")")
        elif section.text == ":objects":
            objects.extend(p._typed_list())
            p._expect(")")
        elif section.text == ":init":
            while p._peek() == "(":
                save = p.pos
                p._expect("(")
                head = p._peek()
                if head == "=":          # (= (total-cost) 0), discarded
                    p._skip_balanced()
                    continue
                p.pos = save
                init.append(p._atom(dom, None, arity_of))
            p._expect(")")
        elif section.text == ":goal":
            pos, neg = p._conjunction(arity_of, None, allow_not=False,
                                      allow_cost=False)
            goal = pos
            p._expect(")")
        elif section.text == ":metric":
            p._skip_balanced()
        else:
            raise p.error(f"unknown problem section {section.text!r}", section)
    p._expect(")")

    if domain_name is None:
        raise PddlError("problem missing (:domain ...)", filename=filename)

    # type checks
    declared_types = {t for t, _ in dom.types} | {ROOT_TYPE}
    seen_objects: dict[str, str] = {}
    for obj, typ in objects:
        if obj in seen_objects:
            raise PddlError(f"duplicate object {obj!r}", filename=filename)
        if typ not in declared_types:
            raise PddlError(f"object {obj!r} has unknown type {typ!r}",
                            filename=filename)
        seen_objects[obj] = typ
    closure = type_closure(dom)
    pred_params = dict(dom.predicates)
    for where, atoms in (("init", init), ("goal", goal)):
        for a in atoms:
            for arg, (_, typ) in zip(a.args, pred_params[a.pred]):
                if arg not in seen_objects:
                    raise PddlError(f"unknown object {arg!r} in {where} atom "
                                    f"{a.render()}", filename=filename)
                if seen_objects[arg] not in closure[typ]:
                    raise PddlError(
                        f"object {arg!r} of type {seen_objects[arg]!r} does not "
                        f"fit parameter type {typ!r} in {a.render()}",
                        filename=filename)

    return ProblemDef(name, domain_name, tuple(objects),
                      tuple(sorted(set(init))), tuple(sorted(set(goal))))


def type_closure(dom: DomainDef) -> dict[str, set[str]]:
    """Map each type to the set of types in its subtree (itself included)."""
    closure: dict[str, set[str]] = {ROOT_TYPE: {ROOT_TYPE}}
    for t, _ in dom.types:
        closure[t] = {t}
    for t, _ in dom.types:
        closure[ROOT_TYPE].add(t)
    parent_of = dict(dom.types)
    for t, _ in dom.types:
        cur = parent_of[t]
        while cur != ROOT_TYPE:
            closure[cur].add(t)
            cur = parent_of[cur]
    return closure


# ── Rendering (print-parse round trip) ───────────────────────────────────────

def render_domain(dom: DomainDef) -> str:
    lines = [f"(define (domain {dom.name})"]
    if dom.requirements:
        lines.append(f"  (:requirements {' '.join(dom.requirements)})")
    if dom.types:
        decls = " ".join(f"{t} - {parent}" for t, parent in dom.types)
        lines.append(f"  (:types {decls})")
    if dom.predicates:
        lines.append("  (:predicates")
        for name, params in dom.predicates:
            lines.append(f"    ({name}{_render_params(params)})")
        lines.append("  )")
    for op in dom.operators:
        lines.append(f"  (:action {op.name}")
        lines.append(f"    :parameters ({_render_params(op.params).strip()})")
        lines.append(f"    :precondition {_render_conj(op.pre)}")
        effects = [a.render() for a in op.add]
        effects += [f"(not {a.render()})" for a in op.delete]
        lines.append(f"    :effect (and {' '.join(effects)})")
        lines.append("  )")
    lines.append(")")
    return "\n".join(lines) + "\n"


def render_problem(prob: ProblemDef) -> str:
    lines = [f"(define (problem {prob.name})",
             f"  (:domain {prob.domain})"]
    if prob.objects:
        lines.append("  (:objects")
        for obj, typ in prob.objects:
            lines.append(f"    {obj} - {typ}")
        lines.append("  )")
    lines.append("  (:init")
    for a in prob.init:
        lines.append(f"    {a.render()}")
    lines.append("  )")
    lines.append(f"  (:goal {_render_conj(prob.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _render_params(params) -> str:
    return "".join(f" {v} - {t}" for v, t in params)


def _render_conj(atoms) -> str:
    if not atoms:
        return "(and)"
    return f"(and {' '.join(a.render() for a in atoms)})"


# ── Grounding ────────────────────────────────────────────────────────────────

def ground(dom: DomainDef, prob: ProblemDef,
           max_atoms: int = GROUND_ATOM_BUDGET,
           max_actions: int = GROUND_ACTION_BUDGET) -> GroundedTask:
    """Ground every typed instantiation of every operator.

    Instantiations whose add and delete effects would overlap (possible when
    one object fills several parameters) are degenerate under the transition
    formula and are skipped, which keeps the add/delete disjointness
    invariant for every emitted action.
    """
    closure = type_closure(dom)
    objects_of: dict[str, list[str]] = {t: [] for t in closure}
    for obj, typ in prob.objects:
        for t, subtree in closure.items():
            if typ in subtree:
                objects_of[t].append(obj)
    for t in objects_of:
        objects_of[t].sort()
    rank = {t: {obj: i for i, obj in enumerate(objs)}
            for t, objs in objects_of.items()}

    # budget checks before materializing anything
    n_atoms = 0
    for pname, params in sorted(dom.predicates):
        count = 1
        for _, typ in params:
            count *= len(objects_of[typ])
        n_atoms += count
    if n_atoms > max_atoms:
        raise GroundingError(f"grounding needs {n_atoms} atoms, "
                             f"budget is {max_atoms}")
    n_actions = 0
    for op in dom.operators:
        count = 1
        for _, typ in op.params:
            count *= len(objects_of[typ])
        n_actions += count
    if n_actions > max_actions:
        raise GroundingError(f"grounding needs {n_actions} actions, "
                             f"budget is {max_actions}")

    # dense row-major atom layout per predicate, so an atom's index is
    # base + sum(stride_k * rank(arg_k)); grounding then vectorizes over all
    # bindings of an operator at once
    atoms: list[Atom] = []
    layout: dict[str, tuple[int, tuple[int, ...], tuple[str, ...]]] = {}
    for pname, params in sorted(dom.predicates):
        ptypes = tuple(typ for _, typ in params)
        pools = [objects_of[t] for t in ptypes]
        strides = []
        size = 1
        for pool in reversed(pools):
            strides.append(size)
            size *= len(pool)
        layout[pname] = (len(atoms), tuple(reversed(strides)), ptypes)
        for combo in product(*pools):
            atoms.append(Atom(pname, combo))
    n_words = (len(atoms) + 63) // 64 or 1

    actions: list[GroundAction] = []
    for op in sorted(dom.operators, key=lambda o: o.name):
        pools = [objects_of[typ] for _, typ in op.params]
        sizes = [len(p) for p in pools]
        n_combos = 1
        for s in sizes:
            n_combos *= s
        if n_combos == 0:
            continue
        # arg_rank[j][i] = rank (within the action parameter pool) of the
        # object filling parameter j in binding i; product() order, so the
        # last parameter varies fastest
        radix = 1
        arg_rank: list[np.ndarray] = [None] * len(pools)
        for j in range(len(pools) - 1, -1, -1):
            arg_rank[j] = (np.arange(n_combos) // radix) % sizes[j]
            radix *= sizes[j]
        slot = {v: k for k, (v, _) in enumerate(op.params)}

        def atom_indices(a: Atom) -> np.ndarray:
            base, strides, ptypes = layout[a.pred]
            idx = np.full(n_combos, base, dtype=np.int64)
            for k, arg in enumerate(a.args):
                j = slot[arg]
                remap = np.array([rank[ptypes[k]][obj] for obj in pools[j]],
                                 dtype=np.int64)
                idx += strides[k] * remap[arg_rank[j]]
            return idx

        def scatter(group: tuple[Atom, ...]) -> np.ndarray:
            packed = np.zeros((n_combos, n_words), dtype=np.uint64)
            flat = packed.reshape(-1)
            rows = np.arange(n_combos, dtype=np.int64) * n_words
            for a in group:
                idx = atom_indices(a)
                pos = rows + (idx >> 6)
                # one position per row within a call, so |= cannot collide
                flat[pos] |= np.uint64(1) << (idx & 63).astype(np.uint64)
            return packed

        pre_bits = scatter(op.pre)
        add_bits = scatter(op.add)
        del_bits = scatter(op.delete)
        keep = np.nonzero(~np.any(add_bits & del_bits, axis=1))[0]

        rank_cols = [arg_rank[j].tolist() for j in range(len(pools))]
        row_len = n_words * 8
        pre_raw = pre_bits.tobytes()
        add_raw = add_bits.tobytes()
        del_raw = del_bits.tobytes()
        n_params = len(pools)
        for i in map(int, keep):
            off = i * row_len
            args = tuple(pools[j][rank_cols[j][i]] for j in range(n_params))
            actions.append(GroundAction(
                len(actions), op.name, args,
                int.from_bytes(pre_raw[off:off + row_len], "little"),
                int.from_bytes(add_raw[off:off + row_len], "little"),
                int.from_bytes(del_raw[off:off + row_len], "little")))

    atom_index = {(a.pred, a.args): i for i, a in enumerate(atoms)}
    init_mask = 0
    for a in prob.init:
        init_mask |= 1 << atom_index[(a.pred, a.args)]
    goal_mask = 0
    for a in prob.goal:
        goal_mask |= 1 << atom_index[(a.pred, a.args)]

    return GroundedTask(dom, prob, tuple(atoms), tuple(actions),
                        init_mask, goal_mask,
                        {t: tuple(objs) for t, objs in objects_of.items()})
