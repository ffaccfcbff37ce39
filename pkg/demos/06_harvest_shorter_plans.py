"""How crossing two wasteful plans over a shared state shortens both.

Run: python3 demos/06_harvest_shorter_plans.py
"""

from planloop.domains import registry
from planloop.domains.labyrinth import make_problem
from planloop.harvest import build_graph, compile_and_filter, shortest_plan
from planloop.pddl import ground
from planloop.world import resolve_plan

# fully open 3x3 board, free slot bottom-left, start top-left,
# goal: stand on the card at the bottom-middle cell
prob = make_problem("cross", 3, [frozenset("nesw")] * 8, free_cell=6,
                    robot_card=0, goal_card=6)
task = ground(registry()["labyrinth"].domain_def(), prob)

route_a = resolve_plan(task, [
    "(move-e card-1 card-2 pos-1 pos-2)",
    "(move-e card-2 card-3 pos-2 pos-3)",
    "(move-s card-3 card-6 pos-3 pos-6)",
    "(move-w card-6 card-5 pos-6 pos-5)",
    "(move-s card-5 card-7 pos-5 pos-8)"])
route_b = resolve_plan(task, [
    "(move-s card-1 card-4 pos-1 pos-4)",
    "(move-e card-4 card-5 pos-4 pos-5)",
    "(move-e card-5 card-6 pos-5 pos-6)",
    "(move-s card-6 card-8 pos-6 pos-9)",
    "(move-w card-8 card-7 pos-9 pos-8)"])

for name, route in (("A", route_a), ("B", route_b)):
    solo = build_graph(task, compile_and_filter(task, [route]))
    print(f"route {name}: {len(route)} moves, alone harvests "
          f"{len(shortest_plan(solo))}")

union = build_graph(task, compile_and_filter(task, [route_a, route_b]))
best = shortest_plan(union)
print(f"\nunion graph: {union.num_vertices} states, {union.num_edges} edges")
print(f"harvested: {len(best)} moves: {' '.join(best.action_names(task))}")
print("neither plan alone can be shortened; together they cross at the "
      "center and hand the search a shortcut")
