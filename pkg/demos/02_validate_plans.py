"""Execute STRIPS semantics: applicability, stepping, plan validation.

Run: python3 demos/02_validate_plans.py
"""

from planloop.domains import registry
from planloop.pddl import ground, parse_problem
from planloop.world import resolve_plan, validate

PROBLEM = """
(define (problem swap)
  (:domain blocksworld)
  (:objects block-1 block-2 - block)
  (:init (ontable block-2) (on block-1 block-2) (clear block-1) (handempty))
  (:goal (and (on block-2 block-1))))
"""

dom = registry()["blocksworld"].domain_def()
task = ground(dom, parse_problem(PROBLEM, dom))

good = resolve_plan(task, [
    "(unstack block-1 block-2)", "(putdown block-1)",
    "(pickup block-2)", "(stack block-2 block-1)"])
out = validate(task, good)
print(f"good plan: valid={out.valid} goal={out.goal_reached} "
      f"states visited={len(out.states)}")
for i, s in enumerate(out.states):
    atoms = " ".join(a.render() for a in task.mask_to_atoms(s))
    print(f"  s{i}: {atoms}")

bad = resolve_plan(task, ["(unstack block-1 block-2)",
                          "(unstack block-1 block-2)"])
out = validate(task, bad)
print(f"\nbad plan: valid={out.valid} failed at step {out.fail_step}")
print("invalidity is data, not an exception: candidates get filtered, "
      "never crash the pipeline")
