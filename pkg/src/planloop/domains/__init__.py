"""Problem generators, baseline solvers, and the exhaustive BFS oracle."""

from .generate import (BaselineError, DatasetRecord, GenerationError,
                       GeneratorConfig, ProblemRecord, ProblemSet,
                       baseline_solve, build_dataset, generate,
                       generate_splits, oracle_solve, read_dataset,
                       write_dataset)
from .registry import DomainSpec, registry
from .search import OracleResult, SearchIndex, bfs_oracle, gbfs_solve

__all__ = [
    "BaselineError", "DatasetRecord", "DomainSpec", "GenerationError",
    "GeneratorConfig", "OracleResult", "ProblemRecord", "ProblemSet",
    "SearchIndex", "baseline_solve", "bfs_oracle", "build_dataset",
    "generate", "generate_splits", "gbfs_solve", "oracle_solve",
    "read_dataset", "registry", "write_dataset",
]
