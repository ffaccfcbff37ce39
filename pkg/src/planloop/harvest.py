"""Plan harvesting: state graphs from candidate plans, BFS extraction, cache.

Valid candidate plans for one problem are merged into a directed graph of
unique states with action-labeled edges. The shortest init-to-goal path in
that graph is a training label at least as short as the best candidate, and
strictly shorter whenever plans cross over through a shared state. A global
cache keeps the best plan ever seen per problem so labels never regress.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .pddl import GroundedTask
from .world import CompiledPlan, Plan, State, validate


@dataclass
class StateGraph:
    """Vertices are unique states; edges unique (from, action, to) triples."""

    vertex_ids: dict[State, int] = field(default_factory=dict)
    states: list[State] = field(default_factory=list)
    edges: set[tuple[int, int, int]] = field(default_factory=set)
    adjacency: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    init_vertex: int | None = None
    goal_vertices: set[int] = field(default_factory=set)

    @property
    def num_vertices(self) -> int:
        return len(self.states)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def add_vertex(self, s: State, is_init: bool = False,
                   is_goal: bool = False) -> int:
        vid = self.vertex_ids.get(s)
        if vid is None:
            vid = len(self.states)
            self.vertex_ids[s] = vid
            self.states.append(s)
        if is_init:
            self.init_vertex = vid
        if is_goal:
            self.goal_vertices.add(vid)
        return vid

    def add_edge(self, u: int, action_id: int, v: int):
        e = (u, action_id, v)
        if e not in self.edges:
            self.edges.add(e)
            self.adjacency.setdefault(u, []).append((action_id, v))


def compile_and_filter(task: GroundedTask,
                       candidates: list[Plan]) -> list[CompiledPlan]:
    """Keep exactly the candidates that are valid and goal-reaching.

    Order-preserving; duplicates are retained (the graph dedups later).
    """
    out = []
    for plan in candidates:
        compiled = validate(task, plan)
        if compiled.valid and compiled.goal_reached:
            out.append(compiled)
    return out


def build_graph(task: GroundedTask,
                compiled: list[CompiledPlan]) -> StateGraph:
    """Union the state-action-state transitions of valid compiled plans.

    Hash insertion keeps construction linear in the total transition count.
    Any vertex whose state satisfies the goal counts as a goal vertex, not
    just plan endpoints, which can only shorten extracted plans.
    """
    g = StateGraph()
    goal = task.goal
    g.add_vertex(task.init, is_init=True, is_goal=goal & ~task.init == 0)
    for cp in compiled:
        prev = g.add_vertex(cp.states[0])
        for action_id, s in zip(cp.actions, cp.states[1:]):
            cur = g.add_vertex(s, is_goal=goal & ~s == 0)
            g.add_edge(prev, action_id, cur)
            prev = cur
    return g


def shortest_plan(g: StateGraph, problem_id: str = "") -> Plan | None:
    """Minimum-edge path from the initial vertex to any goal vertex.

    Among equal-length paths the lexicographically smallest action-id
    sequence wins, which makes extraction deterministic. Runs in O(V+E):
    one reverse BFS for distances plus a greedy forward walk.
    """
    if g.init_vertex is None:
        return None
    if g.init_vertex in g.goal_vertices:
        return Plan((), problem_id)
    if not g.goal_vertices:
        return None

    reverse: dict[int, list[int]] = {}
    for u, _, v in g.edges:
        reverse.setdefault(v, []).append(u)
    dist = {v: 0 for v in g.goal_vertices}
    frontier = list(g.goal_vertices)
    while frontier:
        nxt = []
        for v in frontier:
            for u in reverse.get(v, ()):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    if g.init_vertex not in dist:
        return None

    actions = []
    cur = g.init_vertex
    while cur not in g.goal_vertices:
        step = None
        for action_id, v in sorted(g.adjacency.get(cur, ())):
            if dist.get(v, -1) == dist[cur] - 1:
                step = (action_id, v)
                break
        assert step is not None, "distance map inconsistent"
        actions.append(step[0])
        cur = step[1]
    return Plan(tuple(actions), problem_id)


# ── Best-solution cache ──────────────────────────────────────────────────────

@dataclass
class CacheEntry:
    actions: list[str]              # textual actions, task-independent
    length: int
    source_iteration: int


class SolutionCache:
    """Per-problem best plan across iterations; only strict improvements land.

    Every accepted update is appended to an event log so monotonicity over a
    whole run can be audited from disk.
    """

    def __init__(self):
        self.entries: dict[str, CacheEntry] = {}
        self.events: list[tuple[str, int, int]] = []   # (problem, iter, length)

    def get(self, problem_id: str) -> CacheEntry | None:
        return self.entries.get(problem_id)

    def offer(self, problem_id: str, actions: list[str], length: int,
              iteration: int) -> bool:
        """Record a plan if strictly shorter than the cached one."""
        assert length == len(actions)
        cur = self.entries.get(problem_id)
        if cur is not None and cur.length <= length:
            return False
        self.entries[problem_id] = CacheEntry(list(actions), length, iteration)
        self.events.append((problem_id, iteration, length))
        return True

    def mean_length(self) -> float | None:
        if not self.entries:
            return None
        return sum(e.length for e in self.entries.values()) / len(self.entries)

    def save(self, path: str | Path):
        with open(path, "w") as fh:
            for pid in sorted(self.entries):
                e = self.entries[pid]
                fh.write(json.dumps(
                    {"problem_id": pid, "plan": e.actions, "length": e.length,
                     "source_iteration": e.source_iteration},
                    sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SolutionCache":
        cache = cls()
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                cache.entries[d["problem_id"]] = CacheEntry(
                    d["plan"], d["length"], d["source_iteration"])
        return cache

    def flush_events(self, path: str | Path):
        """Write events accumulated since the last flush, then clear them."""
        with open(path, "w") as fh:
            for pid, iteration, length in self.events:
                fh.write(json.dumps(
                    {"problem_id": pid, "iteration": iteration,
                     "length": length},
                    sort_keys=True, separators=(",", ":")) + "\n")
        self.events.clear()


@dataclass(frozen=True)
class HarvestItem:
    """One finetuning label: a problem id plus its best known plan."""

    problem_id: str
    actions: tuple[str, ...]
    source: str                     # "harvest-iter-<i>" or "cache"


def harvest(tasks: dict[str, GroundedTask], cache: SolutionCache,
            candidates: dict[str, list[Plan]],
            iteration: int) -> list[HarvestItem]:
    """Compile, filter, graph, and extract per problem; merge with the cache.

    Problems with no valid candidate are excluded outright. Otherwise the
    shorter of (harvested, cached) becomes the label and the cache is updated
    only on strict improvement; ties keep the cached plan for label
    stability. Harvested plans are re-validated before emission.
    """
    items: list[HarvestItem] = []
    for pid in sorted(candidates):
        task = tasks[pid]
        plans = [c for c in candidates[pid] if isinstance(c, Plan)]
        compiled = compile_and_filter(task, plans)
        if not compiled:
            continue
        graph = build_graph(task, compiled)
        best = shortest_plan(graph, pid)
        assert best is not None, "goal-reaching plans imply a goal vertex"
        check = validate(task, best)
        if not (check.valid and check.goal_reached):
            raise RuntimeError(f"harvested plan fails revalidation on {pid}")
        cached = cache.get(pid)
        if cached is not None and cached.length <= len(best):
            items.append(HarvestItem(pid, tuple(cached.actions), "cache"))
        else:
            actions = best.action_names(task)
            cache.offer(pid, actions, len(best), iteration)
            items.append(HarvestItem(pid, tuple(actions),
                                     f"harvest-iter-{iteration}"))
    return items
