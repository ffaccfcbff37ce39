import numpy as np
import pytest

from planloop.domains import registry
from planloop.pddl import Atom, ProblemDef, ground

# acceptance tests print one verdict line per criterion via this registry
ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(f"{ACCEPTANCE_RESULTS[name]}  {name}")


@pytest.fixture(scope="session")
def bw_dom():
    return registry()["blocksworld"].domain_def()


@pytest.fixture(scope="session")
def three_block_problem(bw_dom):
    """Tower block-3 on block-2 on block-1; goal flips the top two."""
    blocks = [("block-1", "block"), ("block-2", "block"), ("block-3", "block")]
    init = sorted([
        Atom("handempty", ()),
        Atom("ontable", ("block-1",)),
        Atom("on", ("block-2", "block-1")),
        Atom("on", ("block-3", "block-2")),
        Atom("clear", ("block-3",)),
    ])
    goal = sorted([Atom("on", ("block-2", "block-3"))])
    return ProblemDef("three-tower", "blocksworld", tuple(blocks),
                      tuple(init), tuple(goal))


@pytest.fixture(scope="session")
def three_block_task(bw_dom, three_block_problem):
    return ground(bw_dom, three_block_problem)


@pytest.fixture(scope="session")
def swap_problem(bw_dom):
    """Two blocks: on(block-1, block-2) must become on(block-2, block-1)."""
    blocks = [("block-1", "block"), ("block-2", "block")]
    init = sorted([
        Atom("handempty", ()),
        Atom("ontable", ("block-2",)),
        Atom("on", ("block-1", "block-2")),
        Atom("clear", ("block-1",)),
    ])
    goal = (Atom("on", ("block-2", "block-1")),)
    return ProblemDef("swap", "blocksworld", tuple(blocks), tuple(init), goal)


@pytest.fixture(scope="session")
def swap_task(bw_dom, swap_problem):
    return ground(bw_dom, swap_problem)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(12345))
