"""Uninformed and greedy search over grounded tasks.

Successor generation filters actions whose static preconditions (atoms no
action ever changes) fail in the initial state, then buckets the survivors
by one dynamic precondition atom, so each expansion only tests actions whose
pivot atom is currently true. The task itself is untouched; this is purely
a search-side index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..pddl import GroundedTask
from ..world import Plan, State


class SearchIndex:
    """Bucketed applicable-action lookup for repeated state expansions."""

    def __init__(self, task: GroundedTask):
        self.task = task
        dynamic = 0
        for a in task.actions:
            dynamic |= a.add | a.delete
        self.dynamic = dynamic
        init_static = task.init & ~dynamic

        self.buckets: dict[int, list] = {}
        self.unpivoted = []          # live actions with purely static pre
        for a in task.actions:
            static_pre = a.pre & ~dynamic
            if static_pre & ~init_static:
                continue             # a static precondition is false forever
            dyn_pre = a.pre & dynamic
            if dyn_pre == 0:
                self.unpivoted.append(a)
            else:
                pivot = (dyn_pre & -dyn_pre).bit_length() - 1
                self.buckets.setdefault(pivot, []).append(a)
        for bucket in self.buckets.values():
            bucket.sort(key=lambda a: a.id)
        self.unpivoted.sort(key=lambda a: a.id)

    def applicable_actions(self, s: State) -> list:
        """Applicable actions in ascending id order."""
        out = [a for a in self.unpivoted if a.pre & ~s == 0]
        rest = s & self.dynamic
        while rest:
            low = rest & -rest
            bucket = self.buckets.get(low.bit_length() - 1)
            if bucket:
                out.extend(a for a in bucket if a.pre & ~s == 0)
            rest ^= low
        out.sort(key=lambda a: a.id)
        return out


@dataclass(frozen=True)
class OracleResult:
    """Outcome of bfs_oracle: a provably optimal plan, or why there is none."""

    plan: Plan | None
    status: str                   # "optimal" | "unsolvable" | "unknown"
    nodes_expanded: int

    @property
    def length(self) -> int | None:
        return len(self.plan) if self.plan is not None else None


def bfs_oracle(task: GroundedTask, node_budget: int = 500_000,
               index: SearchIndex | None = None) -> OracleResult:
    """Breadth-first search from the initial state; optimal by unit depth.

    Returns status "unknown" when the budget runs out before the goal or
    exhaustion, and "unsolvable" when the whole reachable space was covered.
    """
    goal = task.goal
    init = task.init
    if goal & ~init == 0:
        return OracleResult(Plan((), task.problem_name), "optimal", 0)
    index = index or SearchIndex(task)
    parent: dict[State, tuple[State, int]] = {init: (init, -1)}
    frontier = [init]
    expanded = 0
    while frontier:
        next_frontier = []
        for s in frontier:
            if expanded >= node_budget:
                return OracleResult(None, "unknown", expanded)
            expanded += 1
            for a in index.applicable_actions(s):
                s2 = (s & ~a.delete) | a.add
                if s2 in parent:
                    continue
                parent[s2] = (s, a.id)
                if goal & ~s2 == 0:
                    return OracleResult(_backtrack(parent, s2, task),
                                        "optimal", expanded)
                next_frontier.append(s2)
        frontier = next_frontier
    return OracleResult(None, "unsolvable", expanded)


def gbfs_solve(task: GroundedTask, node_budget: int = 100_000,
               index: SearchIndex | None = None) -> Plan | None:
    """Greedy best-first search on hamming distance to the goal mask.

    Satisficing only; returns None when the budget is exhausted or the
    reachable space contains no goal state.
    """
    goal = task.goal
    init = task.init
    if goal & ~init == 0:
        return Plan((), task.problem_name)
    index = index or SearchIndex(task)
    parent: dict[State, tuple[State, int]] = {init: (init, -1)}
    tie = 0
    heap = [((goal & ~init).bit_count(), tie, init)]
    expanded = 0
    while heap and expanded < node_budget:
        _, _, s = heapq.heappop(heap)
        expanded += 1
        for a in index.applicable_actions(s):
            s2 = (s & ~a.delete) | a.add
            if s2 in parent:
                continue
            parent[s2] = (s, a.id)
            missing = goal & ~s2
            if missing == 0:
                return _backtrack(parent, s2, task)
            tie += 1
            heapq.heappush(heap, (missing.bit_count(), tie, s2))
    return None


def _backtrack(parent: dict[State, tuple[State, int]], s: State,
               task: GroundedTask) -> Plan:
    actions = []
    while True:
        prev, aid = parent[s]
        if aid < 0:
            break
        actions.append(aid)
        s = prev
    return Plan(tuple(reversed(actions)), task.problem_name)
