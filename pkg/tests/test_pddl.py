import pytest

from planloop.domains import registry
from planloop.pddl import (Atom, GroundingError, PddlError, ground,
                           parse_domain, parse_problem, render_domain,
                           render_problem)

TINY_DOMAIN = """
(define (domain tiny)
  (:requirements :strips :typing)
  (:types thing)
  (:predicates (wet ?x - thing) (dry ?x - thing))
  (:action soak
    :parameters (?x - thing)
    :precondition (and (dry ?x))
    :effect (and (wet ?x) (not (dry ?x))))
)
"""


class TestParseDomain:
    def test_blocksworld_has_four_operators(self, bw_dom):
        assert [op.name for op in bw_dom.operators] == \
            ["pickup", "putdown", "stack", "unstack"]
        assert len(bw_dom.predicates) == 5
        assert bw_dom.types == (("block", "object"),)

    def test_zero_operator_domain_is_valid(self):
        dom = parse_domain("(define (domain empty) (:requirements :strips))")
        assert dom.operators == ()
        assert dom.name == "empty"

    def test_undeclared_predicate_is_named_in_error(self):
        text = TINY_DOMAIN.replace("(wet ?x)", "(soggy ?x)")
        with pytest.raises(PddlError, match="soggy"):
            parse_domain(text)

    def test_unknown_requirement_rejected(self):
        with pytest.raises(PddlError, match=":adl"):
            parse_domain("(define (domain x) (:requirements :adl))")

    def test_negative_precondition_rejected(self):
        text = TINY_DOMAIN.replace(
            ":precondition (and (dry ?x))",
            ":precondition (and (not (wet ?x)))")
        with pytest.raises(PddlError, match="negation"):
            parse_domain(text)

    def test_error_carries_line_and_column(self):
        try:
            parse_domain("(define (domain x)\n  (:requirements :adl))")
        except PddlError as err:
            assert err.line == 2
            assert err.col is not None
        else:
            pytest.fail("expected PddlError")

    def test_action_costs_blocks_are_discarded(self):
        dom = registry()["labyrinth"].domain_def()
        assert ":action-costs" in dom.requirements
        for op in dom.operators:
            for atom in op.add + op.delete + op.pre:
                assert atom.pred != "total-cost"

    def test_type_cycle_rejected(self):
        with pytest.raises(PddlError, match="cycle"):
            parse_domain("(define (domain x) (:requirements :typing)"
                         " (:types a - b b - a))")


class TestParseProblem:
    def test_three_block_fixture(self, bw_dom, three_block_problem):
        text = render_problem(three_block_problem)
        prob = parse_problem(text, bw_dom)
        assert prob == three_block_problem
        assert len(prob.objects) == 3

    def test_empty_goal_section(self, bw_dom):
        text = """(define (problem p) (:domain blocksworld)
            (:objects block-1 - block)
            (:init (ontable block-1) (clear block-1) (handempty))
            (:goal (and)))"""
        prob = parse_problem(text, bw_dom)
        assert prob.goal == ()

    def test_arity_mismatch(self, bw_dom):
        text = """(define (problem p) (:domain blocksworld)
            (:objects block-1 - block)
            (:init (on block-1))
            (:goal (and)))"""
        with pytest.raises(PddlError, match="on"):
            parse_problem(text, bw_dom)

    def test_duplicate_object(self, bw_dom):
        text = """(define (problem p) (:domain blocksworld)
            (:objects block-1 block-1 - block)
            (:init) (:goal (and)))"""
        with pytest.raises(PddlError, match="duplicate"):
            parse_problem(text, bw_dom)

    def test_unknown_type(self, bw_dom):
        text = """(define (problem p) (:domain blocksworld)
            (:objects thing-1 - widget)
            (:init) (:goal (and)))"""
        with pytest.raises(PddlError, match="widget"):
            parse_problem(text, bw_dom)

    def test_wrong_domain_name(self, bw_dom):
        text = "(define (problem p) (:domain sokoban) (:init) (:goal (and)))"
        with pytest.raises(PddlError, match="sokoban"):
            parse_problem(text, bw_dom)


class TestRoundTrip:
    @pytest.mark.parametrize("name", sorted(registry()))
    def test_domain_print_parse(self, name):
        dom = registry()[name].domain_def()
        assert parse_domain(render_domain(dom)) == dom

    def test_problem_print_parse(self, bw_dom, three_block_problem, swap_problem):
        for prob in (three_block_problem, swap_problem):
            assert parse_problem(render_problem(prob), bw_dom) == prob


class TestGround:
    def test_two_block_action_count(self, bw_dom, swap_problem):
        task = ground(bw_dom, swap_problem)
        by_schema = {}
        for a in task.actions:
            by_schema.setdefault(a.schema, []).append(a)
        # stack/unstack self-pairs are degenerate (add and delete collide)
        assert len(by_schema["pickup"]) == 2
        assert len(by_schema["putdown"]) == 2
        assert len(by_schema["stack"]) == 2
        assert len(by_schema["unstack"]) == 2
        for a in task.actions:
            assert a.add & a.delete == 0

    def test_atom_universe_size(self, bw_dom, swap_problem):
        # brute force: per predicate, all typed tuples over two blocks
        task = ground(bw_dom, swap_problem)
        assert task.num_atoms == 4 + 2 + 1 + 2 + 2   # on,clear,handempty,holding,ontable

    def test_atom_order_is_sorted(self, three_block_task):
        rendered = [a.render() for a in three_block_task.atoms]
        keyed = sorted(rendered, key=lambda s: (s[1:-1].split()[0],
                                                s[1:-1].split()[1:]))
        assert rendered == keyed

    def test_zero_objects_of_required_type(self):
        dom = parse_domain(TINY_DOMAIN)
        prob = parse_problem(
            "(define (problem p) (:domain tiny) (:init) (:goal (and)))", dom)
        task = ground(dom, prob)
        assert task.actions == ()
        assert task.num_atoms == 0

    def test_grounding_is_deterministic(self, bw_dom, three_block_problem):
        t1 = ground(bw_dom, three_block_problem)
        t2 = ground(bw_dom, three_block_problem)
        assert [a.render() for a in t1.atoms] == [a.render() for a in t2.atoms]
        assert [(a.name, a.pre, a.add, a.delete) for a in t1.actions] == \
            [(a.name, a.pre, a.add, a.delete) for a in t2.actions]
        assert (t1.init, t1.goal) == (t2.init, t2.goal)

    def test_budget_exceeded(self, bw_dom, three_block_problem):
        with pytest.raises(GroundingError, match="budget"):
            ground(bw_dom, three_block_problem, max_atoms=4)
        with pytest.raises(GroundingError, match="budget"):
            ground(bw_dom, three_block_problem, max_actions=4)

    def test_masks_reference_universe(self, three_block_task):
        universe = (1 << three_block_task.num_atoms) - 1
        for a in three_block_task.actions:
            assert a.pre | a.add | a.delete <= universe

    def test_hand_counted_small_instances(self):
        # logistics: 2 cities, size 1 (airport + 1 location each), 1 package,
        # 1 airplane, 1 truck per city; self-moves (from == to) are degenerate
        spec = registry()["logistics"]
        import numpy as np
        prob = spec.sample(np.random.Generator(np.random.PCG64(0)), "l2",
                           2, 1, 1, 1)
        task = ground(spec.domain_def(), prob)
        counts = {}
        for a in task.actions:
            counts[a.schema] = counts.get(a.schema, 0) + 1
        assert counts["drive-truck"] == 2 * (4 * 4 - 4) * 2
        assert counts["fly-airplane"] == 1 * (2 * 2 - 2)
        assert counts["load-truck"] == 1 * 2 * 4
        assert counts["unload-truck"] == 1 * 2 * 4
        assert counts["load-airplane"] == 1 * 1 * 2
        assert counts["unload-airplane"] == 1 * 1 * 2

    def test_goal_mask_subset_of_universe(self, swap_task):
        assert swap_task.goal & ~((1 << swap_task.num_atoms) - 1) == 0
        assert swap_task.goal != 0
