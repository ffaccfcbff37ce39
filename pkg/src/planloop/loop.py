"""Self-improvement orchestration: pretrain, iterate, evaluate, resume.

Run directory layout:

    run_dir/
      vocab.json
      iter-000/{checkpoint.ckpt, report.json, train.csv}     # pretraining
      iter-001/{checkpoint.ckpt, finetune.jsonl, report.json, train.csv,
                cache.jsonl, cache-events.jsonl}
      ...
      cache.jsonl          # copy of the latest per-iteration snapshot
      eval-<tag>.csv, timing-<tag>.csv

An iteration counts as complete once its report.json exists; resuming skips
complete iterations and replays nothing, which keeps resumed runs
bit-identical to uninterrupted ones (all randomness is derived from
(seed, iteration, phase) streams).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .domains import DatasetRecord, ProblemRecord, ProblemSet, registry
from .harvest import SolutionCache, build_graph, compile_and_filter, harvest, shortest_plan
from .pddl import DomainDef, GroundedTask, ground, render_problem
from .policy import (Checkpoint, ModelConfig, SamplerConfig, TrainSchedule,
                     load_checkpoint, new_checkpoint, sample_plans,
                     save_checkpoint, train)
from .tokenizer import TokenSeq, Vocabulary, build_vocab, encode_plan, encode_problem
from .util import rng_stream, stable_hash64
from .world import Plan, validate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopConfig:
    n_loop: int = 15
    m: int = 200
    n: int = 32
    seed: int = 0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    pretrain_schedule: TrainSchedule = field(default_factory=TrainSchedule)
    finetune_schedule: TrainSchedule | None = None   # default: lr/10, 30 epochs

    def __post_init__(self):
        if self.n_loop < 0 or self.m <= 0 or self.n <= 0:
            raise ValueError("n_loop must be >= 0; m and n positive")

    def finetune(self) -> TrainSchedule:
        if self.finetune_schedule is not None:
            return self.finetune_schedule
        return self.pretrain_schedule.scaled(0.1, 30)


@dataclass
class IterationReport:
    iteration: int
    problems_sampled: int
    valid_candidate_rate: float
    problems_harvested: int
    mean_harvested_length: float | None
    mean_cache_length: float | None
    finetune_final_loss: float | None
    wall_times: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IterationReport":
        return cls(**json.loads(text))


def parse_action_text(text: str) -> tuple[str, tuple[str, ...]]:
    parts = text.strip().lstrip("(").rstrip(")").split()
    return parts[0], tuple(parts[1:])


def tokenize_pair(problem, actions: list[str] | tuple[str, ...],
                  vocab: Vocabulary) -> TokenSeq:
    """Problem prefix + plan tokens + [endofplan]; boundary marks the split."""
    prompt = encode_problem(problem, vocab)
    plan_ids = encode_plan([parse_action_text(a) for a in actions], vocab)
    return TokenSeq(prompt.ids + tuple(plan_ids), prompt.boundary)


def records_to_problems(records: list[DatasetRecord]) -> ProblemSet:
    out = []
    for rec in records:
        out.append(ProblemRecord(rec.id, rec.domain, rec.problem_def()))
    return ProblemSet(tuple(out))


def _iter_dir(run_dir: Path, k: int) -> Path:
    return run_dir / f"iter-{k:03d}"


def _checkpoint_path(run_dir: Path, k: int) -> Path:
    return _iter_dir(run_dir, k) / "checkpoint.ckpt"


def _tokenize_dataset(records: list[DatasetRecord], vocab: Vocabulary,
                      dom: DomainDef) -> list[TokenSeq]:
    seqs = []
    for rec in records:
        if rec.plan is None:
            raise ValueError(f"record {rec.id} has no plan")
        seqs.append(tokenize_pair(rec.problem_def(), rec.plan, vocab))
    return seqs


def pretrain(records: list[DatasetRecord], run_dir: str | Path,
             model_config: ModelConfig | None = None,
             schedule: TrainSchedule = TrainSchedule(),
             validation: list[DatasetRecord] | None = None,
             limits: dict[str, int] | None = None,
             seed: int = 0) -> tuple[Checkpoint, Vocabulary]:
    """Train the initial policy on (problem, plan) records and seed the cache.

    Selects the lowest-validation-loss checkpoint when a validation set is
    given, otherwise the final one. Writes iter-000 plus vocab.json.
    """
    if not records:
        raise ValueError("empty pretraining dataset")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    domain_name = records[0].domain
    spec = registry()[domain_name]
    dom = spec.domain_def()
    vocab = build_vocab(dom, limits or spec.default_limits)
    (run_dir / "vocab.json").write_text(vocab.to_json())

    seqs = _tokenize_dataset(records, vocab, dom)
    val_seqs = _tokenize_dataset(validation, vocab, dom) if validation else None
    longest = max(len(s.ids) for s in seqs + (val_seqs or []))
    if model_config is None:
        model_config = ModelConfig(vocab_size=vocab.size)
    if longest > model_config.context_len:
        raise ValueError(f"longest sequence ({longest}) exceeds context "
                         f"({model_config.context_len})")

    ckpt = new_checkpoint(model_config, vocab, seed)
    out_dir = _iter_dir(run_dir, 0)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = train(ckpt, seqs, schedule, vocab.pad_id, validation=val_seqs,
                   log_path=out_dir / "train.csv")
    pretrain_seconds = time.perf_counter() - t0
    chosen = result.best if result.best is not None else result.final

    cache = SolutionCache()
    for rec in records:
        cache.offer(rec.id, list(rec.plan), len(rec.plan), 0)
    cache.save(out_dir / "cache.jsonl")
    cache.save(run_dir / "cache.jsonl")
    cache.flush_events(out_dir / "cache-events.jsonl")

    save_checkpoint(chosen, _checkpoint_path(run_dir, 0))
    report = IterationReport(
        0, len(records), 1.0, len(records),
        sum(len(r.plan) for r in records) / len(records),
        cache.mean_length(), result.history[-1][1] if result.history else None,
        {"pretrain": pretrain_seconds})
    (_iter_dir(run_dir, 0) / "report.json").write_text(report.to_json())
    return chosen, vocab


def _completed_iterations(run_dir: Path) -> int:
    """Highest k such that iterations 0..k all have report.json."""
    k = -1
    while (_iter_dir(run_dir, k + 1) / "report.json").exists() and \
            _checkpoint_path(run_dir, k + 1).exists():
        k += 1
    return k


def run(cfg: LoopConfig, problems: ProblemSet, run_dir: str | Path,
        resume: bool = False) -> tuple[Checkpoint, list[IterationReport]]:
    """Execute the self-improvement loop starting from the iter-000 policy.

    Each iteration samples m problems uniformly without replacement, draws n
    candidate plans each from the current policy, harvests shortest graph
    plans merged against the cache, and finetunes. Zero-harvest iterations
    skip finetuning with a warning. With resume=True, completed iterations
    found in run_dir are kept as-is.
    """
    run_dir = Path(run_dir)
    if cfg.m > len(problems):
        raise ValueError(f"m={cfg.m} exceeds problem pool size {len(problems)}")
    vocab = Vocabulary.from_json((run_dir / "vocab.json").read_text())
    spec = registry()[problems.problems[0].domain_name]
    dom = spec.domain_def()

    done = _completed_iterations(run_dir)
    if done < 0:
        raise FileNotFoundError(f"no pretrained checkpoint under {run_dir}; "
                                f"run pretrain first")
    if not resume:
        done = 0
    start = done + 1

    ckpt = load_checkpoint(_checkpoint_path(run_dir, done))
    if ckpt.vocab_fingerprint != vocab.fingerprint():
        raise ValueError("checkpoint vocabulary does not match run vocabulary")
    # the cache snapshot of the iteration we start from, so a non-resume
    # rerun over an existing directory replays identically
    cache_path = _iter_dir(run_dir, done) / "cache.jsonl"
    cache = SolutionCache.load(cache_path) if cache_path.exists() \
        else SolutionCache()

    tasks: dict[str, GroundedTask] = {}
    reports = [IterationReport.from_json(
        (_iter_dir(run_dir, k) / "report.json").read_text())
        for k in range(1, start)]

    for i in range(start, cfg.n_loop + 1):
        times: dict[str, float] = {}
        rng = rng_stream(cfg.seed, "select-problems", i)
        picks = rng.choice(len(problems), size=cfg.m, replace=False)
        subset = [problems.problems[int(j)] for j in sorted(picks)]
        for rec in subset:
            if rec.id not in tasks:
                tasks[rec.id] = ground(dom, rec.problem)

        t0 = time.perf_counter()
        sampler = replace(cfg.sampler,
                          seed=stable_hash64(cfg.seed, "sample", i))
        candidate_lists = sample_plans(
            ckpt, subset, sampler, cfg.n, vocab, dom,
            tasks=[tasks[rec.id] for rec in subset])
        times["sample"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        candidates = {rec.id: cands
                      for rec, cands in zip(subset, candidate_lists)}
        n_valid = 0
        for rec, cands in zip(subset, candidate_lists):
            task = tasks[rec.id]
            for c in cands:
                if isinstance(c, Plan):
                    compiled = validate(task, c)
                    if compiled.valid and compiled.goal_reached:
                        n_valid += 1
        items = harvest({rec.id: tasks[rec.id] for rec in subset},
                        cache, candidates, i)
        times["harvest"] = time.perf_counter() - t0

        it_dir = _iter_dir(run_dir, i)
        it_dir.mkdir(parents=True, exist_ok=True)
        by_id = {rec.id: rec for rec in subset}
        with open(it_dir / "finetune.jsonl", "w") as fh:
            for item in items:
                rec = by_id[item.problem_id]
                fh.write(DatasetRecord(
                    rec.id, rec.domain_name,
                    _render_problem_cached(rec), list(item.actions),
                    item.source).to_json() + "\n")

        t0 = time.perf_counter()
        final_loss = None
        if items:
            seqs = [tokenize_pair(by_id[item.problem_id].problem,
                                  item.actions, vocab) for item in items]
            schedule = replace(cfg.finetune(),
                               seed=stable_hash64(cfg.seed, "finetune", i))
            result = train(ckpt, seqs, schedule, vocab.pad_id,
                           log_path=it_dir / "train.csv")
            ckpt = result.final
            final_loss = result.history[-1][1] if result.history else None
        else:
            log.warning("iteration %d harvested nothing; finetune skipped", i)
        times["finetune"] = time.perf_counter() - t0

        save_checkpoint(ckpt, _checkpoint_path(run_dir, i))
        cache.save(it_dir / "cache.jsonl")
        cache.save(run_dir / "cache.jsonl")
        cache.flush_events(it_dir / "cache-events.jsonl")

        harvested = [len(item.actions) for item in items]
        report = IterationReport(
            i, len(subset),
            n_valid / (len(subset) * cfg.n) if subset else 0.0,
            len(items),
            sum(harvested) / len(harvested) if harvested else None,
            cache.mean_length(), final_loss, times)
        (it_dir / "report.json").write_text(report.to_json())
        reports.append(report)
        log.info("iteration %d: %d/%d harvested, cache mean %.2f", i,
                 len(items), len(subset), cache.mean_length() or float("nan"))
    return ckpt, reports


_RENDERED: dict[str, str] = {}


def _render_problem_cached(rec: ProblemRecord) -> str:
    text = _RENDERED.get(rec.id)
    if text is None:
        text = render_problem(rec.problem)
        _RENDERED[rec.id] = text
    return text


# ── Evaluation ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EvalOutcome:
    problem_id: str
    completed: bool
    length: int | None
    bfs_length: int | None
    latency: float
    n_valid: int


def evaluate(ckpt: Checkpoint, test: ProblemSet, n_candidates: int,
             sampler: SamplerConfig, vocab: Vocabulary, dom: DomainDef,
             with_bfs: bool = False,
             train_hashes: set[str] | None = None,
             tasks: dict[str, GroundedTask] | None = None) -> list[EvalOutcome]:
    """Best-of-N evaluation; optionally also the BFS-over-candidates length.

    Latency covers sampling, decoding, validation, and selection per problem
    (model load excluded). When train_hashes is given, any overlap with the
    test set is an error.
    """
    if train_hashes:
        overlap = test.hashes() & set(train_hashes)
        if overlap:
            raise ValueError(f"test set overlaps training hashes: "
                             f"{sorted(overlap)[:3]}")
    outcomes = []
    for rec in test.problems:
        task = (tasks or {}).get(rec.id) or ground(dom, rec.problem)
        t0 = time.perf_counter()
        cands = sample_plans(ckpt, [rec], sampler, n_candidates, vocab, dom,
                             tasks=[task])[0]
        plans = [c for c in cands if isinstance(c, Plan)]
        compiled = compile_and_filter(task, plans)
        best = min((len(c.actions) for c in compiled), default=None)
        bfs_length = None
        if with_bfs and compiled:
            graph = build_graph(task, compiled)
            bfs_plan = shortest_plan(graph, rec.id)
            bfs_length = len(bfs_plan) if bfs_plan is not None else None
        latency = time.perf_counter() - t0
        outcomes.append(EvalOutcome(rec.id, best is not None, best,
                                    bfs_length, latency, len(compiled)))
    return outcomes
