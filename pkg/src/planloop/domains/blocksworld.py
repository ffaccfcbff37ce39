"""Blocksworld: 4-operator domain, random pile instances, naive tower solver."""

from __future__ import annotations

import numpy as np

from ..pddl import Atom, DomainDef, ProblemDef, parse_domain

DOMAIN_PDDL = """\
(define (domain blocksworld)
  (:requirements :strips :typing)
  (:types block)
  (:predicates
    (on ?x - block ?y - block)
    (ontable ?x - block)
    (clear ?x - block)
    (handempty)
    (holding ?x - block))
  (:action pickup
    :parameters (?x - block)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (holding ?x)
                 (not (ontable ?x)) (not (clear ?x)) (not (handempty))))
  (:action putdown
    :parameters (?x - block)
    :precondition (and (holding ?x))
    :effect (and (ontable ?x) (clear ?x) (handempty)
                 (not (holding ?x))))
  (:action stack
    :parameters (?x - block ?y - block)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (handempty)
                 (not (holding ?x)) (not (clear ?y))))
  (:action unstack
    :parameters (?x - block ?y - block)
    :precondition (and (on ?x ?y) (clear ?x) (handempty))
    :effect (and (holding ?x) (clear ?y)
                 (not (on ?x ?y)) (not (clear ?x)) (not (handempty))))
)
"""

DEFAULT_LIMITS = {"block": 25}

_DOMAIN: DomainDef | None = None


def domain_def() -> DomainDef:
    global _DOMAIN
    if _DOMAIN is None:
        _DOMAIN = parse_domain(DOMAIN_PDDL, "blocksworld.pddl")
    return _DOMAIN


def _random_piles(rng: np.random.Generator, blocks: list[str],
                  new_pile_prob: float) -> list[list[str]]:
    order = [blocks[i] for i in rng.permutation(len(blocks))]
    piles: list[list[str]] = []
    for b in order:
        if not piles or rng.random() < new_pile_prob:
            piles.append([b])
        else:
            piles[int(rng.integers(len(piles)))].append(b)
    return piles


def sample_problem(rng: np.random.Generator, name: str, n_blocks: int,
                   goal_omit_prob: float = 0.3,
                   new_pile_prob: float = 0.4) -> ProblemDef:
    """Random initial piles plus a partial goal over a subset of the blocks.

    Goals are conjunctions of (on x y) atoms; blocks may be omitted from the
    goal, leaving their final position unconstrained. Instances whose goal
    already holds initially are rejected and resampled.
    """
    blocks = [f"block-{i + 1}" for i in range(n_blocks)]
    while True:
        init_piles = _random_piles(rng, blocks, new_pile_prob)
        init: set[Atom] = {Atom("handempty", ())}
        for pile in init_piles:
            init.add(Atom("ontable", (pile[0],)))
            init.add(Atom("clear", (pile[-1],)))
            for above, below in zip(pile[1:], pile):
                init.add(Atom("on", (above, below)))

        kept = [b for b in blocks if rng.random() >= goal_omit_prob]
        if len(kept) < 2:
            continue
        goal_piles = _random_piles(rng, kept, new_pile_prob)
        goal = {Atom("on", (above, below))
                for pile in goal_piles
                for above, below in zip(pile[1:], pile)}
        if goal and not goal <= init:
            break
    return ProblemDef(name, "blocksworld", tuple((b, "block") for b in blocks),
                      tuple(sorted(init)), tuple(sorted(goal)))


# ── Naive solver ─────────────────────────────────────────────────────────────

def naive_plan(prob: ProblemDef) -> list[str]:
    """Unstack-then-build strategy, skipping blocks already in final position.

    Every block moves at most twice (once to the table, once to its goal
    spot), so the result is valid but generally suboptimal.
    """
    blocks = [b for b, _ in prob.objects]
    below: dict[str, str | None] = {b: None for b in blocks}   # None = table
    above: dict[str, str | None] = {b: None for b in blocks}
    for a in prob.init:
        if a.pred == "on":
            below[a.args[0]] = a.args[1]
            above[a.args[1]] = a.args[0]

    goal_below = {a.args[0]: a.args[1] for a in prob.goal if a.pred == "on"}
    goal_above = {a.args[1]: a.args[0] for a in prob.goal if a.pred == "on"}

    final: dict[str, bool] = {}

    def is_final(b: str) -> bool:
        if b in final:
            return final[b]
        under = below[b]
        if under is None:
            ok = b not in goal_below
        elif b in goal_below:
            ok = goal_below[b] == under and is_final(under)
        else:
            # unconstrained block may stay only if its support is final and
            # nothing else is destined for that support
            ok = is_final(under) and goal_above.get(under, b) == b
        final[b] = ok
        return ok

    plan: list[str] = []

    def clear(b: str) -> bool:
        return above[b] is None

    # phase 1: strip every non-final block off its tower onto the table
    stripped = True
    while stripped:
        stripped = False
        for b in blocks:
            if below[b] is not None and clear(b) and not is_final(b):
                under = below[b]
                plan.append(f"(unstack {b} {under})")
                plan.append(f"(putdown {b})")
                below[b] = None
                above[under] = None
                stripped = True

    # phase 2: build goal towers bottom-up
    def settled(b: str) -> bool:
        want = goal_below.get(b)
        if want is None:
            return below[b] is None or is_final(b)
        return below[b] == want and settled(want)

    pending = [b for b in blocks if b in goal_below and not settled(b)]
    while pending:
        progressed = False
        for b in list(pending):
            target = goal_below[b]
            if clear(b) and clear(target) and settled(target):
                plan.append(f"(pickup {b})")
                plan.append(f"(stack {b} {target})")
                below[b] = target
                above[target] = b
                pending.remove(b)
                progressed = True
        if not progressed:
            raise RuntimeError(f"naive solver stuck on {prob.name}: {pending}")
    return plan
