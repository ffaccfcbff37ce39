"""Labyrinth: walk across open card edges, slide cards around a free slot.

A W x H grid holds W*H - 1 pattern cards and one free slot. The robot stands
on a card and can step to an adjacent card when both facing edges are open.
Any card can slide into the free slot, including across the board edge
(cards pushed out re-enter on the opposite side), which is how rows and
columns shift. The robot rides its card, so its position is tracked per
card, and the goal is to stand on a target card.

The domain file declares :action-costs with unit costs purely so the cost
syntax is exercised; plan length counts actions either way.
"""

from __future__ import annotations

import numpy as np

from ..pddl import Atom, DomainDef, ProblemDef, parse_domain

DOMAIN_PDDL = """\
(define (domain labyrinth)
  (:requirements :strips :typing :action-costs)
  (:types pos card)
  (:functions (total-cost))
  (:predicates
    (robot-on ?c - card)
    (card-at ?c - card ?p - pos)
    (free ?p - pos)
    (open-n ?c - card) (open-e ?c - card)
    (open-s ?c - card) (open-w ?c - card)
    (adj-n ?a - pos ?b - pos) (adj-e ?a - pos ?b - pos)
    (adj-s ?a - pos ?b - pos) (adj-w ?a - pos ?b - pos)
    (wrap-n ?a - pos ?b - pos) (wrap-e ?a - pos ?b - pos)
    (wrap-s ?a - pos ?b - pos) (wrap-w ?a - pos ?b - pos))
  (:action move-n
    :parameters (?c1 - card ?c2 - card ?p1 - pos ?p2 - pos)
    :precondition (and (robot-on ?c1) (card-at ?c1 ?p1) (card-at ?c2 ?p2)
                       (adj-n ?p1 ?p2) (open-n ?c1) (open-s ?c2))
    :effect (and (robot-on ?c2) (not (robot-on ?c1))
                 (increase (total-cost) 1)))
  (:action move-e
    :parameters (?c1 - card ?c2 - card ?p1 - pos ?p2 - pos)
    :precondition (and (robot-on ?c1) (card-at ?c1 ?p1) (card-at ?c2 ?p2)
                       (adj-e ?p1 ?p2) (open-e ?c1) (open-w ?c2))
    :effect (and (robot-on ?c2) (not (robot-on ?c1))
                 (increase (total-cost) 1)))
  (:action move-s
    :parameters (?c1 - card ?c2 - card ?p1 - pos ?p2 - pos)
    :precondition (and (robot-on ?c1) (card-at ?c1 ?p1) (card-at ?c2 ?p2)
                       (adj-s ?p1 ?p2) (open-s ?c1) (open-n ?c2))
    :effect (and (robot-on ?c2) (not (robot-on ?c1))
                 (increase (total-cost) 1)))
  (:action move-w
    :parameters (?c1 - card ?c2 - card ?p1 - pos ?p2 - pos)
    :precondition (and (robot-on ?c1) (card-at ?c1 ?p1) (card-at ?c2 ?p2)
                       (adj-w ?p1 ?p2) (open-w ?c1) (open-e ?c2))
    :effect (and (robot-on ?c2) (not (robot-on ?c1))
                 (increase (total-cost) 1)))
  (:action slide-n
    :parameters (?c - card ?p1 - pos ?p2 - pos)
    :precondition (and (card-at ?c ?p1) (wrap-n ?p1 ?p2) (free ?p2))
    :effect (and (card-at ?c ?p2) (free ?p1)
                 (not (card-at ?c ?p1)) (not (free ?p2))
                 (increase (total-cost) 1)))
  (:action slide-e
    :parameters (?c - card ?p1 - pos ?p2 - pos)
    :precondition (and (card-at ?c ?p1) (wrap-e ?p1 ?p2) (free ?p2))
    :effect (and (card-at ?c ?p2) (free ?p1)
                 (not (card-at ?c ?p1)) (not (free ?p2))
                 (increase (total-cost) 1)))
  (:action slide-s
    :parameters (?c - card ?p1 - pos ?p2 - pos)
    :precondition (and (card-at ?c ?p1) (wrap-s ?p1 ?p2) (free ?p2))
    :effect (and (card-at ?c ?p2) (free ?p1)
                 (not (card-at ?c ?p1)) (not (free ?p2))
                 (increase (total-cost) 1)))
  (:action slide-w
    :parameters (?c - card ?p1 - pos ?p2 - pos)
    :precondition (and (card-at ?c ?p1) (wrap-w ?p1 ?p2) (free ?p2))
    :effect (and (card-at ?c ?p2) (free ?p1)
                 (not (card-at ?c ?p1)) (not (free ?p2))
                 (increase (total-cost) 1)))
)
"""

DEFAULT_LIMITS = {"pos": 16, "card": 16}

# direction -> (dr, dc); n decreases the row index (row 0 is the top)
_DIRS = {"n": (-1, 0), "e": (0, 1), "s": (1, 0), "w": (0, -1)}
_OPPOSITE = {"n": "s", "e": "w", "s": "n", "w": "e"}

# card shapes: openings as direction sets (I, L, T, full cross)
_PATTERNS = [
    frozenset("ns"), frozenset("ew"),
    frozenset("ne"), frozenset("es"), frozenset("sw"), frozenset("wn"),
    frozenset("nes"), frozenset("esw"), frozenset("swn"), frozenset("wne"),
    frozenset("nesw"),
]

_DOMAIN: DomainDef | None = None


def domain_def() -> DomainDef:
    global _DOMAIN
    if _DOMAIN is None:
        _DOMAIN = parse_domain(DOMAIN_PDDL, "labyrinth.pddl")
    return _DOMAIN


class _Board:
    """Mutable grid used for random-walk goal construction."""

    def __init__(self, size: int, patterns: list[frozenset[str]],
                 free_cell: int, robot_card: int):
        self.size = size
        self.patterns = patterns                      # card index -> openings
        self.card_at = list(range(len(patterns)))     # cell -> card index
        self.card_at.insert(free_cell, -1)            # -1 marks the free slot
        self.free = free_cell
        self.robot = robot_card

    def cell_of(self, card: int) -> int:
        return self.card_at.index(card)

    def legal_actions(self) -> list[tuple[str, int]]:
        """(kind, argument) pairs: ("move", target card) or ("slide", cell)."""
        out = []
        size = self.size
        rpos = self.cell_of(self.robot)
        r, c = divmod(rpos, size)
        for d, (dr, dc) in _DIRS.items():
            nr, nc = r + dr, c + dc
            if not (0 <= nr < size and 0 <= nc < size):
                continue
            target = self.card_at[nr * size + nc]
            if target < 0:
                continue
            if d in self.patterns[self.robot] and \
                    _OPPOSITE[d] in self.patterns[target]:
                out.append(("move", target))
        fr, fc = divmod(self.free, size)
        for dr, dc in _DIRS.values():
            nr, nc = (fr + dr) % size, (fc + dc) % size
            cell = nr * size + nc
            if self.card_at[cell] >= 0:
                out.append(("slide", cell))
        return out

    def apply(self, action: tuple[str, int]):
        kind, arg = action
        if kind == "move":
            self.robot = arg
        else:
            self.card_at[self.free] = self.card_at[arg]
            self.card_at[arg] = -1
            self.free = arg


def make_problem(name: str, size: int, patterns: list[frozenset[str]],
                 free_cell: int, robot_card: int,
                 goal_card: int) -> ProblemDef:
    """Assemble a labyrinth instance from an explicit board description.

    Cards are laid out in cell order, skipping the free cell; the goal is
    to stand on `goal_card`.
    """
    n_cells = size * size
    if len(patterns) != n_cells - 1:
        raise ValueError(f"need {n_cells - 1} card patterns")
    cards = [f"card-{i + 1}" for i in range(n_cells - 1)]
    positions = [f"pos-{i + 1}" for i in range(n_cells)]
    init: set[Atom] = {Atom("robot-on", (cards[robot_card],)),
                       Atom("free", (positions[free_cell],))}
    board = _Board(size, patterns, free_cell, robot_card)
    for cell, card in enumerate(board.card_at):
        if card >= 0:
            init.add(Atom("card-at", (cards[card], positions[cell])))
    for i, pat in enumerate(patterns):
        for d in pat:
            init.add(Atom(f"open-{d}", (cards[i],)))
    for cell in range(n_cells):
        r, c = divmod(cell, size)
        for d, (dr, dc) in _DIRS.items():
            nr, nc = r + dr, c + dc
            if 0 <= nr < size and 0 <= nc < size:
                init.add(Atom(f"adj-{d}",
                              (positions[cell], positions[nr * size + nc])))
            wr, wc = (r + dr) % size, (c + dc) % size
            init.add(Atom(f"wrap-{d}",
                          (positions[cell], positions[wr * size + wc])))
    goal = (Atom("robot-on", (cards[goal_card],)),)
    objects = ([(p, "pos") for p in positions] + [(c, "card") for c in cards])
    return ProblemDef(name, "labyrinth", tuple(objects),
                      tuple(sorted(init)), goal)


def sample_problem(rng: np.random.Generator, name: str, size: int,
                   walk_steps: int | None = None) -> ProblemDef:
    """Random board whose goal card is found by a short random walk.

    The goal is (robot-on card) for the card the walk ends on, which bounds
    the optimal plan length by the walk length.
    """
    if size not in (3, 4):
        raise ValueError("labyrinth supports 3x3 and 4x4 grids only")
    n_cells = size * size
    while True:
        patterns = [_PATTERNS[int(rng.integers(len(_PATTERNS)))]
                    for _ in range(n_cells - 1)]
        free_cell = int(rng.integers(n_cells))
        robot_card = int(rng.integers(n_cells - 1))
        board = _Board(size, patterns, free_cell, robot_card)
        steps = walk_steps if walk_steps is not None \
            else int(rng.integers(2, 2 * size + 1))
        for _ in range(steps):
            legal = board.legal_actions()
            if not legal:
                break
            board.apply(legal[int(rng.integers(len(legal)))])
        if board.robot != robot_card:
            break
    return make_problem(name, size, patterns, free_cell, robot_card,
                        board.robot)
