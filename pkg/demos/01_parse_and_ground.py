"""Parse a PDDL pair and inspect the grounded task.

Run: python3 demos/01_parse_and_ground.py
"""

from planloop.domains import registry
from planloop.pddl import ground, parse_problem, render_problem

PROBLEM = """
(define (problem tower-of-three)
  (:domain blocksworld)
  (:objects block-1 block-2 block-3 - block)
  (:init (ontable block-1) (on block-2 block-1) (on block-3 block-2)
         (clear block-3) (handempty))
  (:goal (and (on block-1 block-3))))
"""

spec = registry()["blocksworld"]
dom = spec.domain_def()
prob = parse_problem(PROBLEM, dom)
print(f"domain {dom.name!r}: {len(dom.predicates)} predicates, "
      f"{len(dom.operators)} operators")
print(f"problem {prob.name!r}: {len(prob.objects)} objects, "
      f"{len(prob.init)} init atoms, {len(prob.goal)} goal atoms")

task = ground(dom, prob)
print(f"\ngrounded: {task.num_atoms} atoms, {len(task.actions)} actions")
print("first atoms:", ", ".join(a.render() for a in task.atoms[:6]), "...")
print("a few actions:", ", ".join(a.name for a in task.actions[:4]), "...")

# rendering and re-parsing is the identity on canonical problems
assert parse_problem(render_problem(prob), dom) == prob
print("\nprint-parse round trip holds")
