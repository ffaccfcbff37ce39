"""Sample instances in all four domains, solve them, and compare to optimal.

Run: python3 demos/03_generate_and_solve.py
"""

from planloop.domains import (GeneratorConfig, baseline_solve, generate,
                              oracle_solve, registry)
from planloop.pddl import ground

CONFIGS = {
    "blocksworld": dict(blocks_min=3, blocks_max=5),
    "logistics": dict(cities_min=1, cities_max=2, packages_min=1,
                      packages_max=2),
    "labyrinth": dict(grid_min=3, grid_max=3),
    "sokoban": dict(soko_grid_min=5, soko_grid_max=5, boxes_min=1,
                    boxes_max=1, walls_min=2, walls_max=4),
}

for domain, kwargs in CONFIGS.items():
    cfg = GeneratorConfig(domain=domain, count=2, seed=42, **kwargs)
    problems = generate(cfg)
    spec = registry()[domain]
    print(f"\n== {domain}")
    for rec in problems.problems:
        task = ground(spec.domain_def(), rec.problem)
        plan = baseline_solve(task)
        oracle = oracle_solve(task, node_budget=200_000)
        opt = oracle.length if oracle.status == "optimal" else "?"
        print(f"  {rec.id}: {task.num_atoms} atoms, {len(task.actions)} "
              f"actions; baseline {len(plan)} vs optimal {opt}")
        print(f"    plan: {' '.join(plan.action_names(task)[:5])}"
              f"{' ...' if len(plan) > 5 else ''}")
