"""Sokoban with positional box goals: (has-box ?l) names target cells only.

Wall cells are simply not declared as locations, so adjacency atoms exist
only between free cells. Goals are a set of has-box atoms collected from a
random push walk, which keeps every generated instance solvable.
"""

from __future__ import annotations

import numpy as np

from ..pddl import Atom, DomainDef, ProblemDef, parse_domain

DOMAIN_PDDL = """\
(define (domain sokoban)
  (:requirements :strips :typing)
  (:types loc dir box)
  (:predicates
    (at-player ?l - loc)
    (at-box ?b - box ?l - loc)
    (clear ?l - loc)
    (adj ?a - loc ?b - loc ?d - dir)
    (has-box ?l - loc))
  (:action move
    :parameters (?from - loc ?to - loc ?d - dir)
    :precondition (and (at-player ?from) (clear ?to) (adj ?from ?to ?d))
    :effect (and (at-player ?to) (clear ?from)
                 (not (at-player ?from)) (not (clear ?to))))
  (:action push
    :parameters (?b - box ?ppos - loc ?bpos - loc ?to - loc ?d - dir)
    :precondition (and (at-player ?ppos) (at-box ?b ?bpos) (clear ?to)
                       (adj ?ppos ?bpos ?d) (adj ?bpos ?to ?d))
    :effect (and (at-player ?bpos) (at-box ?b ?to) (clear ?ppos) (has-box ?to)
                 (not (at-player ?ppos)) (not (at-box ?b ?bpos))
                 (not (clear ?to)) (not (has-box ?bpos))))
)
"""

DEFAULT_LIMITS = {"loc": 196, "dir": 4, "box": 10}

# dir-1..dir-4 = up, down, left, right (row 0 is the top)
_DIRS = [(-1, 0), (1, 0), (0, -1), (0, 1)]

_DOMAIN: DomainDef | None = None


def domain_def() -> DomainDef:
    global _DOMAIN
    if _DOMAIN is None:
        _DOMAIN = parse_domain(DOMAIN_PDDL, "sokoban.pddl")
    return _DOMAIN


def _connected(free: set[tuple[int, int]]) -> bool:
    if not free:
        return False
    seen = {next(iter(free))}
    stack = list(seen)
    while stack:
        r, c = stack.pop()
        for dr, dc in _DIRS:
            nxt = (r + dr, c + dc)
            if nxt in free and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen == free


def sample_problem(rng: np.random.Generator, name: str, width: int,
                   height: int, n_boxes: int, n_walls: int,
                   walk_steps: int | None = None) -> ProblemDef:
    """Random grid, walls, and boxes; goals from a random move/push walk."""
    if not (5 <= width <= 14 and 5 <= height <= 14):
        raise ValueError("sokoban grids range from 5x5 to 14x14")
    cells = [(r, c) for r in range(height) for c in range(width)]
    while True:
        wall_ids = rng.choice(len(cells), size=n_walls, replace=False) \
            if n_walls else np.array([], dtype=int)
        free = set(cells) - {cells[i] for i in wall_ids}
        if len(free) < n_boxes + 2 or not _connected(free):
            continue
        free_list = sorted(free)
        picks = rng.choice(len(free_list), size=n_boxes + 1, replace=False)
        boxes = {free_list[i]: b for b, i in enumerate(picks[:-1])}
        player = free_list[picks[-1]]

        # random walk with pushes to harvest a reachable goal configuration
        box_at = dict(boxes)        # cell -> box id
        ppos = player
        steps = walk_steps if walk_steps is not None \
            else int(rng.integers(2 * n_boxes + 2, 4 * (width + height)))
        moved = False
        for _ in range(steps):
            legal = []
            for d, (dr, dc) in enumerate(_DIRS):
                nxt = (ppos[0] + dr, ppos[1] + dc)
                if nxt not in free:
                    continue
                if nxt in box_at:
                    beyond = (nxt[0] + dr, nxt[1] + dc)
                    if beyond in free and beyond not in box_at:
                        legal.append(("push", d))
                else:
                    legal.append(("move", d))
            if not legal:
                break
            # favor pushes so boxes actually travel
            pushes = [a for a in legal if a[0] == "push"]
            pool = pushes if pushes and rng.random() < 0.7 else legal
            kind, d = pool[int(rng.integers(len(pool)))]
            dr, dc = _DIRS[d]
            nxt = (ppos[0] + dr, ppos[1] + dc)
            if kind == "push":
                beyond = (nxt[0] + dr, nxt[1] + dc)
                box_at[beyond] = box_at.pop(nxt)
                moved = True
            ppos = nxt
        if moved and set(box_at) != set(boxes):
            break

    loc_name = {cell: f"loc-{i + 1}" for i, cell in enumerate(sorted(free))}
    dirs = [f"dir-{d + 1}" for d in range(4)]
    box_names = [f"box-{b + 1}" for b in range(n_boxes)]

    init: set[Atom] = {Atom("at-player", (loc_name[player],))}
    occupied = {player} | set(boxes)
    for cell in sorted(free):
        if cell not in occupied:
            init.add(Atom("clear", (loc_name[cell],)))
        r, c = cell
        for d, (dr, dc) in enumerate(_DIRS):
            nxt = (r + dr, c + dc)
            if nxt in free:
                init.add(Atom("adj", (loc_name[cell], loc_name[nxt], dirs[d])))
    for cell, b in boxes.items():
        init.add(Atom("at-box", (box_names[b], loc_name[cell])))
        init.add(Atom("has-box", (loc_name[cell],)))

    goal = tuple(sorted(Atom("has-box", (loc_name[cell],)) for cell in box_at))
    objects = ([(loc_name[cell], "loc") for cell in sorted(free)]
               + [(d, "dir") for d in dirs]
               + [(b, "box") for b in box_names])
    return ProblemDef(name, "sokoban", tuple(objects),
                      tuple(sorted(init)), goal)
