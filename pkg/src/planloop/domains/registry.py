"""Registry mapping domain names to their PDDL text, sampler, and solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..pddl import DomainDef
from . import blocksworld, labyrinth, logistics, sokoban


@dataclass(frozen=True)
class DomainSpec:
    name: str
    pddl_text: str
    domain_def: Callable[[], DomainDef]
    default_limits: dict[str, int]
    sample: Callable[..., object]            # (rng, name, *size params)
    naive: Callable[..., list[str]] | None   # structural solver, if any


_REGISTRY: dict[str, DomainSpec] | None = None


def registry() -> dict[str, DomainSpec]:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = {
            "blocksworld": DomainSpec(
                "blocksworld", blocksworld.DOMAIN_PDDL,
                blocksworld.domain_def, blocksworld.DEFAULT_LIMITS,
                blocksworld.sample_problem, blocksworld.naive_plan),
            "logistics": DomainSpec(
                "logistics", logistics.DOMAIN_PDDL,
                logistics.domain_def, logistics.DEFAULT_LIMITS,
                logistics.sample_problem, logistics.naive_plan),
            "labyrinth": DomainSpec(
                "labyrinth", labyrinth.DOMAIN_PDDL,
                labyrinth.domain_def, labyrinth.DEFAULT_LIMITS,
                labyrinth.sample_problem, None),
            "sokoban": DomainSpec(
                "sokoban", sokoban.DOMAIN_PDDL,
                sokoban.domain_def, sokoban.DEFAULT_LIMITS,
                sokoban.sample_problem, None),
        }
    return _REGISTRY
