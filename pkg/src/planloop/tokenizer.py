"""Fixed-vocabulary tokenization of problems and plans.

The vocabulary is built once per domain from its predicate, operator, and
type names plus per-type positional object tokens (block-1 ... block-K up to
a per-type maximum), so every problem within the limits encodes into the
same token space. Problem layout:

    [startofproblem] [objects] (type obj)* [init] atoms [goal] atoms [startofplan]

followed at training time by plan action tokens and [endofplan]. An action
is its operator token followed by one object token per argument.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .pddl import Atom, DomainDef, ProblemDef

PAD = "[pad]"
START_OF_PROBLEM = "[startofproblem]"
OBJECTS_MARK = "[objects]"
INIT_MARK = "[init]"
GOAL_MARK = "[goal]"
START_OF_PLAN = "[startofplan]"
END_OF_PLAN = "[endofplan]"

SPECIALS = (PAD, START_OF_PROBLEM, OBJECTS_MARK, INIT_MARK, GOAL_MARK,
            START_OF_PLAN, END_OF_PLAN)


class TokenizeError(Exception):
    """Encoding failure: unknown symbol or per-type object limit exceeded."""


class DecodeError(Exception):
    """Malformed token sequence; `reason` is a stable tag."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class DecodeFailure:
    """Recorded (not raised) decode outcome for a sampled candidate."""

    reason: str


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    limits: tuple[tuple[str, int], ...]     # (type, max objects) pairs

    def __post_init__(self):
        object.__setattr__(self, "_id", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        try:
            return self._id[token]
        except KeyError:
            raise TokenizeError(f"token {token!r} not in vocabulary") from None

    def token(self, idx: int) -> str:
        return self.tokens[idx]

    @property
    def pad_id(self) -> int:
        return self._id[PAD]

    @property
    def start_of_plan_id(self) -> int:
        return self._id[START_OF_PLAN]

    @property
    def end_of_plan_id(self) -> int:
        return self._id[END_OF_PLAN]

    def limit(self, typ: str) -> int:
        for t, k in self.limits:
            if t == typ:
                return k
        raise TokenizeError(f"type {typ!r} has no object limit")

    def to_json(self) -> str:
        return json.dumps({
            "tokens": list(self.tokens),
            "specials": {"pad": PAD, "startofproblem": START_OF_PROBLEM,
                         "objects": OBJECTS_MARK, "init": INIT_MARK,
                         "goal": GOAL_MARK, "startofplan": START_OF_PLAN,
                         "endofplan": END_OF_PLAN},
            "limits": {t: k for t, k in self.limits},
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        d = json.loads(text)
        return cls(tuple(d["tokens"]), tuple(sorted(d["limits"].items())))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass(frozen=True)
class TokenSeq:
    """Token ids plus the index of the first post-[startofplan] position."""

    ids: tuple[int, ...]
    boundary: int


def build_vocab(dom: DomainDef, limits: dict[str, int]) -> Vocabulary:
    """Deterministic vocabulary: specials, then domain symbols in declaration
    order, then per-type positional object tokens."""
    for t, _ in dom.types:
        if t not in limits:
            raise TokenizeError(f"no object limit given for type {t!r}")
    tokens = list(SPECIALS)
    tokens.extend(name for name, _ in dom.predicates)
    tokens.extend(op.name for op in dom.operators)
    tokens.extend(t for t, _ in dom.types)
    for t, _ in dom.types:
        tokens.extend(f"{t}-{i + 1}" for i in range(limits[t]))
    if len(set(tokens)) != len(tokens):
        raise TokenizeError("vocabulary symbols collide")
    return Vocabulary(tuple(tokens),
                      tuple(sorted((t, limits[t]) for t, _ in dom.types)))


def canonical_renaming(prob: ProblemDef) -> dict[str, str]:
    """Map each object to its per-type positional name (type-1, type-2, ...)."""
    counter: dict[str, int] = {}
    renaming: dict[str, str] = {}
    for obj, typ in prob.objects:
        counter[typ] = counter.get(typ, 0) + 1
        renaming[obj] = f"{typ}-{counter[typ]}"
    return renaming


def encode_problem(prob: ProblemDef, vocab: Vocabulary) -> TokenSeq:
    """Encode objects, init, and goal; ends with [startofplan].

    Object names are normalized to canonical per-type positional names, so
    problems emitted by the generators (already canonical) round-trip.
    """
    renaming = canonical_renaming(prob)
    counts: dict[str, int] = {}
    for _, typ in prob.objects:
        counts[typ] = counts.get(typ, 0) + 1
    for typ, n in counts.items():
        if n > vocab.limit(typ):
            raise TokenizeError(f"{n} objects of type {typ!r} exceed the "
                                f"vocabulary limit {vocab.limit(typ)}")

    ids = [vocab.id(START_OF_PROBLEM), vocab.id(OBJECTS_MARK)]
    for obj, typ in prob.objects:
        ids.append(vocab.id(typ))
        ids.append(vocab.id(renaming[obj]))
    ids.append(vocab.id(INIT_MARK))
    for atom in prob.init:
        ids.append(vocab.id(atom.pred))
        ids.extend(vocab.id(renaming[a]) for a in atom.args)
    ids.append(vocab.id(GOAL_MARK))
    for atom in prob.goal:
        ids.append(vocab.id(atom.pred))
        ids.extend(vocab.id(renaming[a]) for a in atom.args)
    ids.append(vocab.id(START_OF_PLAN))
    return TokenSeq(tuple(ids), len(ids))


def decode_problem(seq: TokenSeq, vocab: Vocabulary, dom: DomainDef,
                   name: str = "decoded") -> ProblemDef:
    """Inverse of encode_problem (up to the uncoded problem/domain names)."""
    toks = [vocab.token(i) for i in seq.ids]
    if toks.count(START_OF_PROBLEM) != 1 or toks.count(START_OF_PLAN) != 1:
        raise DecodeError("malformed", "expected exactly one problem span")
    if toks[0] != START_OF_PROBLEM or toks[1] != OBJECTS_MARK:
        raise DecodeError("malformed", "bad header")
    if toks[-1] != START_OF_PLAN:
        raise DecodeError("malformed", "missing [startofplan]")
    try:
        init_at = toks.index(INIT_MARK)
        goal_at = toks.index(GOAL_MARK)
    except ValueError:
        raise DecodeError("malformed", "missing section mark") from None

    type_names = {t for t, _ in dom.types}
    objects: list[tuple[str, str]] = []
    span = toks[2:init_at]
    if len(span) % 2:
        raise DecodeError("malformed", "odd objects section")
    for typ, obj in zip(span[::2], span[1::2]):
        if typ not in type_names or not obj.startswith(f"{typ}-"):
            raise DecodeError("malformed", f"bad object entry {typ} {obj}")
        objects.append((obj, typ))

    arity_of = {name_: len(params) for name_, params in dom.predicates}

    def read_atoms(span: list[str]) -> list[Atom]:
        atoms = []
        i = 0
        while i < len(span):
            pred = span[i]
            if pred not in arity_of:
                raise DecodeError("malformed", f"expected predicate, got {pred}")
            arity = arity_of[pred]
            args = span[i + 1:i + 1 + arity]
            if len(args) != arity:
                raise DecodeError("malformed", f"truncated atom {pred}")
            atoms.append(Atom(pred, tuple(args)))
            i += 1 + arity
        return atoms

    init = read_atoms(toks[init_at + 1:goal_at])
    goal = read_atoms(toks[goal_at + 1:-1])
    return ProblemDef(name, dom.name, tuple(objects),
                      tuple(sorted(set(init))), tuple(sorted(set(goal))))


def encode_action(schema: str, args: tuple[str, ...],
                  vocab: Vocabulary) -> list[int]:
    return [vocab.id(schema)] + [vocab.id(a) for a in args]


def encode_plan(actions: list[tuple[str, tuple[str, ...]]],
                vocab: Vocabulary) -> list[int]:
    ids: list[int] = []
    for schema, args in actions:
        ids.extend(encode_action(schema, args, vocab))
    ids.append(vocab.end_of_plan_id)
    return ids


def decode_plan(ids: list[int] | tuple[int, ...], vocab: Vocabulary,
                dom: DomainDef) -> list[tuple[str, tuple[str, ...]]]:
    """Greedy left-to-right segmentation of plan tokens by operator arity.

    Raises DecodeError("truncated") when the ids run out before
    [endofplan], and DecodeError("malformed") for any span that is not an
    operator token followed by the right number of object tokens.
    """
    operator_arity = {op.name: op.arity for op in dom.operators}
    types = {t for t, _ in dom.types}
    object_tokens = set()
    for tok in vocab.tokens:
        prefix, _, suffix = tok.rpartition("-")
        if prefix in types and suffix.isdigit():
            object_tokens.add(tok)
    end_id = vocab.end_of_plan_id
    actions: list[tuple[str, tuple[str, ...]]] = []
    i = 0
    n = len(ids)
    while True:
        if i >= n:
            raise DecodeError("truncated", "no [endofplan]")
        if ids[i] == end_id:
            return actions
        tok = vocab.token(ids[i])
        arity = operator_arity.get(tok)
        if arity is None:
            raise DecodeError("malformed", f"expected operator, got {tok!r}")
        args = []
        for j in range(i + 1, i + 1 + arity):
            if j >= n:
                raise DecodeError("truncated", f"action {tok!r} cut off")
            arg = vocab.token(ids[j])
            if arg not in object_tokens:
                raise DecodeError("malformed",
                                  f"bad argument {arg!r} for {tok!r}")
            args.append(arg)
        actions.append((tok, tuple(args)))
        i += 1 + arity
