"""Instance sampling across domains, baseline solving, and dataset files.

Dataset files are JSON lines with keys: id, domain, problem (PDDL text),
plan (list of action strings or null), plan_source, optimal_length.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..pddl import GroundedTask, ProblemDef, ground, parse_problem, render_problem
from ..util import rng_stream
from ..world import Plan, resolve_plan, validate
from .registry import registry
from .search import OracleResult, SearchIndex, bfs_oracle, gbfs_solve


class GenerationError(Exception):
    """Could not produce the requested number of unique, solvable instances."""


class BaselineError(Exception):
    """An external planner invocation failed."""


# appendix-stated parameter bounds, checked unless explicitly overridden
_BOUNDS = {
    "blocksworld": {"blocks": (3, 25)},
    "logistics": {"cities": (1, 50), "city_size": (1, 5),
                  "packages": (1, 50), "airplanes": (1, 10)},
    "labyrinth": {"grid": (3, 4)},
    "sokoban": {"grid": (5, 14), "boxes": (1, 10), "walls": (0, 10)},
}


@dataclass(frozen=True)
class GeneratorConfig:
    domain: str
    count: int
    seed: int
    # blocksworld
    blocks_min: int = 3
    blocks_max: int = 6
    goal_omit_prob: float = 0.3
    log_block_distribution: bool = False
    # logistics
    cities_min: int = 1
    cities_max: int = 3
    city_size_min: int = 1
    city_size_max: int = 2
    packages_min: int = 1
    packages_max: int = 3
    airplanes_min: int = 1
    airplanes_max: int = 2
    # labyrinth
    grid_min: int = 3
    grid_max: int = 3
    # sokoban
    soko_grid_min: int = 5
    soko_grid_max: int = 6
    boxes_min: int = 1
    boxes_max: int = 2
    walls_min: int = 0
    walls_max: int = 4
    allow_out_of_range: bool = False

    def __post_init__(self):
        if self.domain not in registry():
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if not self.allow_out_of_range:
            self._check_bounds()

    def _check_bounds(self):
        b = _BOUNDS[self.domain]
        checks = {
            "blocksworld": [("blocks", self.blocks_min, self.blocks_max)],
            "logistics": [("cities", self.cities_min, self.cities_max),
                          ("city_size", self.city_size_min, self.city_size_max),
                          ("packages", self.packages_min, self.packages_max),
                          ("airplanes", self.airplanes_min, self.airplanes_max)],
            "labyrinth": [("grid", self.grid_min, self.grid_max)],
            "sokoban": [("grid", self.soko_grid_min, self.soko_grid_max),
                        ("boxes", self.boxes_min, self.boxes_max),
                        ("walls", self.walls_min, self.walls_max)],
        }[self.domain]
        for label, lo, hi in checks:
            blo, bhi = b[label]
            if lo > hi or lo < blo or hi > bhi:
                raise ValueError(
                    f"{self.domain} {label} range [{lo}, {hi}] outside "
                    f"[{blo}, {bhi}]; set allow_out_of_range to override")


@dataclass(frozen=True)
class ProblemRecord:
    id: str
    domain_name: str
    problem: ProblemDef


@dataclass(frozen=True)
class ProblemSet:
    problems: tuple[ProblemRecord, ...]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.problems)

    def hashes(self) -> set[str]:
        return {rec.problem.structural_hash() for rec in self.problems}


def _sample_one(config: GeneratorConfig, rng: np.random.Generator,
                name: str) -> ProblemDef:
    dom = config.domain
    if dom == "blocksworld":
        lo, hi = config.blocks_min, config.blocks_max
        if config.log_block_distribution:
            weights = np.log(np.arange(lo, hi + 1) + 1.0)
            n = int(rng.choice(np.arange(lo, hi + 1),
                               p=weights / weights.sum()))
        else:
            n = int(rng.integers(lo, hi + 1))
        return registry()[dom].sample(rng, name, n,
                                      goal_omit_prob=config.goal_omit_prob)
    if dom == "logistics":
        return registry()[dom].sample(
            rng, name,
            int(rng.integers(config.cities_min, config.cities_max + 1)),
            int(rng.integers(config.city_size_min, config.city_size_max + 1)),
            int(rng.integers(config.packages_min, config.packages_max + 1)),
            int(rng.integers(config.airplanes_min, config.airplanes_max + 1)))
    if dom == "labyrinth":
        return registry()[dom].sample(
            rng, name, int(rng.integers(config.grid_min, config.grid_max + 1)))
    if dom == "sokoban":
        size = int(rng.integers(config.soko_grid_min, config.soko_grid_max + 1))
        return registry()[dom].sample(
            rng, name, size, size,
            int(rng.integers(config.boxes_min, config.boxes_max + 1)),
            int(rng.integers(config.walls_min, config.walls_max + 1)))
    raise ValueError(dom)


def generate(config: GeneratorConfig, split: str = "train",
             exclude_hashes: frozenset[str] | set[str] = frozenset(),
             retry_factor: int = 30) -> ProblemSet:
    """Sample `count` structurally unique instances, deterministically.

    Uniqueness is enforced by the structural hash of (init, goal), both
    within the set and against `exclude_hashes` (for disjoint splits).
    """
    seen: set[str] = set(exclude_hashes)
    records: list[ProblemRecord] = []
    budget = retry_factor * (config.count + 10)
    tries = 0
    while len(records) < config.count:
        if tries >= budget:
            raise GenerationError(
                f"only {len(records)}/{config.count} unique {config.domain} "
                f"instances after {tries} attempts")
        rng = rng_stream(config.seed, config.domain, split, tries)
        tries += 1
        pid = f"{config.domain}-{split}-{config.seed}-{len(records):05d}"
        prob = _sample_one(config, rng, pid)
        h = prob.structural_hash()
        if h in seen:
            continue
        seen.add(h)
        records.append(ProblemRecord(pid, config.domain, prob))
    return ProblemSet(tuple(records), split)


def generate_splits(config: GeneratorConfig,
                    counts: dict[str, int]) -> dict[str, ProblemSet]:
    """Disjoint train/valid/test sets sharing one generator config."""
    out: dict[str, ProblemSet] = {}
    taken: set[str] = set()
    for split, count in counts.items():
        ps = generate(replace(config, count=count), split,
                      exclude_hashes=frozenset(taken))
        taken |= ps.hashes()
        out[split] = ps
    return out


# ── Baseline solving ─────────────────────────────────────────────────────────

def baseline_solve(task: GroundedTask, strategy: str = "domain-naive",
                   node_budget: int = 100_000,
                   command_template: str | None = None,
                   index: SearchIndex | None = None) -> Plan | None:
    """Produce a valid (generally suboptimal) plan, or None on budget exhaustion.

    Strategies: "domain-naive" uses the built-in per-domain solver (greedy
    best-first for labyrinth/sokoban); "external" shells out to a planner
    command with {domain}, {problem}, {plan-out} placeholders.
    """
    if strategy == "external":
        if not command_template:
            raise BaselineError("external strategy needs a command template")
        return _external_solve(task, command_template)
    if strategy != "domain-naive":
        raise ValueError(f"unknown strategy {strategy!r}")

    name = task.domain_name
    if task.goal & ~task.init == 0:
        return Plan((), task.problem_name)
    if name in ("blocksworld", "logistics"):
        actions = registry()[name].naive(task.problem)
        plan = resolve_plan(task, actions, task.problem_name)
    else:
        plan = gbfs_solve(task, node_budget, index=index)
        if plan is None:
            return None
    compiled = validate(task, plan)
    if not compiled.goal_reached:
        raise RuntimeError(f"baseline produced an invalid plan for "
                           f"{task.problem_name}")
    return plan


def _external_solve(task: GroundedTask, command_template: str) -> Plan:
    spec = registry()[task.domain_name]
    with tempfile.TemporaryDirectory(prefix="planloop-ext-") as tmp:
        dom_path = Path(tmp, "domain.pddl")
        prob_path = Path(tmp, "problem.pddl")
        plan_path = Path(tmp, "plan.txt")
        dom_path.write_text(spec.pddl_text)
        prob_path.write_text(render_problem(task.problem))
        cmd = command_template.format(domain=dom_path, problem=prob_path,
                                      **{"plan-out": plan_path})
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  text=True, timeout=1200)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise BaselineError(f"external planner failed: {exc}") from exc
        if proc.returncode != 0:
            raise BaselineError(
                f"external planner exited {proc.returncode}: "
                f"{proc.stderr.strip()[:500]}")
        if not plan_path.exists():
            raise BaselineError("external planner wrote no plan file")
        lines = [ln.strip() for ln in plan_path.read_text().splitlines()
                 if ln.strip() and not ln.startswith(";")]
        try:
            plan = resolve_plan(task, lines, task.problem_name)
        except KeyError as exc:
            raise BaselineError(str(exc)) from exc
    compiled = validate(task, plan)
    if not compiled.goal_reached:
        raise BaselineError("external planner produced an invalid plan")
    return plan


def oracle_solve(task: GroundedTask, node_budget: int = 500_000,
                 index: SearchIndex | None = None) -> OracleResult:
    """Length-optimal plan via exhaustive breadth-first search."""
    return bfs_oracle(task, node_budget, index=index)


# ── Dataset records ──────────────────────────────────────────────────────────

@dataclass
class DatasetRecord:
    id: str
    domain: str
    problem_pddl: str
    plan: list[str] | None
    plan_source: str
    optimal_length: int | None = None

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id, "domain": self.domain,
            "problem": self.problem_pddl, "plan": self.plan,
            "plan_source": self.plan_source,
            "optimal_length": self.optimal_length,
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        d = json.loads(line)
        return cls(d["id"], d["domain"], d["problem"], d.get("plan"),
                   d.get("plan_source", ""), d.get("optimal_length"))

    def problem_def(self) -> ProblemDef:
        spec = registry()[self.domain]
        return parse_problem(self.problem_pddl, spec.domain_def(),
                             f"{self.id}.pddl")


def build_dataset(config: GeneratorConfig, split: str = "train",
                  solve: str | None = "domain-naive",
                  with_oracle: bool = False,
                  exclude_hashes: frozenset[str] | set[str] = frozenset(),
                  node_budget: int = 100_000,
                  oracle_budget: int = 500_000,
                  command_template: str | None = None) -> list[DatasetRecord]:
    """Generate instances and attach baseline plans (and oracle lengths).

    Instances the baseline cannot solve within budget are dropped and
    regenerated, so the returned dataset always has `count` solved entries.
    """
    records: list[DatasetRecord] = []
    taken = set(exclude_hashes)
    round_idx = 0
    remaining = config.count
    while remaining > 0:
        if round_idx > 20:
            raise GenerationError(
                f"baseline kept failing; produced {len(records)}/{config.count}")
        ps = generate(replace(config, count=remaining,
                              seed=config.seed + round_idx * 1_000_003),
                      split, exclude_hashes=frozenset(taken))
        taken |= ps.hashes()
        round_idx += 1
        for rec in ps.problems:
            spec = registry()[rec.domain_name]
            task = ground(spec.domain_def(), rec.problem)
            plan = None
            if solve:
                plan = baseline_solve(task, solve, node_budget,
                                      command_template)
                if plan is None:
                    continue    # unsolved within budget: drop and regenerate
            optimal = None
            if with_oracle:
                result = oracle_solve(task, oracle_budget)
                if result.status == "optimal":
                    optimal = result.length
            records.append(DatasetRecord(
                rec.id, rec.domain_name, render_problem(rec.problem),
                plan.action_names(task) if plan else None,
                solve or "none", optimal))
        remaining = config.count - len(records)
    return records


def write_dataset(records: list[DatasetRecord], path: str | Path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    with open(path) as fh:
        return [DatasetRecord.from_json(line) for line in fh if line.strip()]
