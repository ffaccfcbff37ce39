"""STRIPS execution semantics over bitmask states.

A state is a plain ``int`` whose bit i says whether atom i of the task's
universe is true. An action applies when ``pre & ~s == 0`` and transitions
via ``(s & ~delete) | add``; deletes are cleared before adds land, and the
grounder guarantees the two masks never overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pddl import GroundAction, GroundedTask

State = int


class InapplicableActionError(Exception):
    """Raised by step() when an action's preconditions do not hold."""


@dataclass(frozen=True)
class Plan:
    """A sequence of action indices into a grounded task."""

    actions: tuple[int, ...]
    problem_id: str = ""

    def __len__(self) -> int:
        return len(self.actions)

    def action_names(self, task: GroundedTask) -> list[str]:
        return [task.actions[i].name for i in self.actions]


@dataclass(frozen=True)
class CompiledPlan:
    """A plan interleaved with the states it visits.

    ``states`` has length len(actions)+1 when the plan is valid; on the first
    inapplicable action, compilation stops and ``states`` is truncated at the
    failure point (the state in which the action could not apply).
    """

    states: tuple[State, ...]
    actions: tuple[int, ...]
    valid: bool
    goal_reached: bool

    @property
    def fail_step(self) -> int | None:
        """Index of the first inapplicable action, or None if valid."""
        return None if self.valid else len(self.states) - 1


def applicable(s: State, a: GroundAction) -> bool:
    """True iff every precondition atom of `a` is true in `s`."""
    return a.pre & ~s == 0


def step(s: State, a: GroundAction) -> State:
    """Apply `a` to `s`; raises InapplicableActionError if preconditions fail."""
    if a.pre & ~s:
        raise InapplicableActionError(a.name)
    return (s & ~a.delete) | a.add


def satisfies(s: State, goal: int) -> bool:
    """True iff the goal atoms are a subset of the state."""
    return goal & ~s == 0


def validate(task: GroundedTask, plan: Plan) -> CompiledPlan:
    """Compile a plan into its state sequence, checking each precondition.

    Invalidity is data, not an error: the result carries valid/goal flags.
    Runs in time linear in the plan length (each step is a constant number
    of mask operations for a fixed task).
    """
    actions = task.actions
    n = len(actions)
    for i in plan.actions:
        if not 0 <= i < n:
            raise IndexError(f"action index {i} out of range for task with "
                             f"{n} actions")
    s = task.init
    states = [s]
    valid = True
    for i in plan.actions:
        a = actions[i]
        if a.pre & ~s:
            valid = False
            break
        s = (s & ~a.delete) | a.add
        states.append(s)
    goal_reached = valid and task.goal & ~s == 0
    return CompiledPlan(tuple(states), tuple(plan.actions), valid, goal_reached)


def resolve_plan(task: GroundedTask, action_names: list[str],
                 problem_id: str = "") -> Plan:
    """Turn textual actions "(schema arg ...)" into a Plan of action indices."""
    ids = []
    for name in action_names:
        idx = task.action_index.get(name.strip().lower())
        if idx is None:
            raise KeyError(f"no grounded action {name!r} in task "
                           f"{task.problem_name!r}")
        ids.append(idx)
    return Plan(tuple(ids), problem_id)
