"""planloop: STRIPS planning with a self-improving autoregressive plan generator."""

from . import bench, domains, harvest, loop, pddl, policy, tokenizer, world

__version__ = "0.1.0"

__all__ = ["bench", "domains", "harvest", "loop", "pddl", "policy",
           "tokenizer", "world", "__version__"]
