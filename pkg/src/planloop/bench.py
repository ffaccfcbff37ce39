"""Metrics, paired statistics, and CSV reporting.

Plan-quality metrics follow the conventions used throughout the evaluation:
regret is the percentage length increase over the optimum (0% when the
optimum is 0), normalized length is (cost+1)/(cost_opt+1)*100 so trivial
problems do not divide by zero, and aggregate length statistics cover only
problems the method completed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


class MetricError(Exception):
    """Inconsistent metric inputs, e.g. a cost below the trusted optimum."""


@dataclass(frozen=True)
class MetricRow:
    problem_id: str
    method: str
    completed: bool
    length: int | None = None
    optimal_length: int | None = None
    latency: float | None = None

    def __post_init__(self):
        if self.completed != (self.length is not None):
            raise MetricError("length must be present iff completed")


@dataclass(frozen=True)
class StatResult:
    test_name: str
    statistic: float
    p_value: float
    bonferroni_corrected_p: float
    n: int
    comparison: str
    degenerate: bool = False
    note: str = ""


def regret(cost: float, cost_opt: float) -> float:
    """Percentage length increase over the optimal solution."""
    if cost < 0 or cost_opt < 0:
        raise MetricError("costs must be non-negative")
    if cost < cost_opt:
        raise MetricError(f"cost {cost} below trusted optimum {cost_opt}")
    if cost_opt == 0:
        return 0.0
    return (cost - cost_opt) / cost_opt * 100.0


def normalized_length(cost: float, cost_opt: float) -> float:
    """Plan length as a percentage of optimal; +1 on both sides avoids /0."""
    if cost < 0 or cost_opt < 0:
        raise MetricError("costs must be non-negative")
    return (cost + 1.0) / (cost_opt + 1.0) * 100.0


def _mean_se(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


@dataclass(frozen=True)
class Summary:
    method: str
    n_problems: int
    completion_pct: float
    n_completed: int
    mean_length: float | None
    se_length: float | None
    optimality_ratio: float | None    # over completed rows with known optimum
    n_optimal_known: int
    mean_latency: float | None
    se_latency: float | None


def aggregate(rows: list[MetricRow], intersection: bool = False) -> list[Summary]:
    """Per-method summaries; length stats over completed problems only.

    In intersection mode, all statistics are restricted to problems every
    method completed (the order of methods does not matter).
    """
    methods = sorted({r.method for r in rows})
    by_method: dict[str, dict[str, MetricRow]] = {m: {} for m in methods}
    for r in rows:
        by_method[r.method][r.problem_id] = r

    keep: set[str] | None = None
    if intersection:
        keep = None
        for m in methods:
            done = {pid for pid, r in by_method[m].items() if r.completed}
            keep = done if keep is None else keep & done

    out = []
    for m in methods:
        rows_m = [r for pid, r in sorted(by_method[m].items())
                  if keep is None or pid in keep]
        done = [r for r in rows_m if r.completed]
        lengths = [float(r.length) for r in done]
        mean_len, se_len = _mean_se(lengths) if lengths else (None, None)
        with_opt = [r for r in done if r.optimal_length is not None]
        for r in with_opt:
            if r.length < r.optimal_length:
                raise MetricError(
                    f"{m} solved {r.problem_id} below the trusted optimum")
        opt_ratio = (sum(1 for r in with_opt if r.length == r.optimal_length)
                     / len(with_opt)) if with_opt else None
        lats = [r.latency for r in rows_m if r.latency is not None]
        mean_lat, se_lat = _mean_se(lats) if lats else (None, None)
        out.append(Summary(
            m, len(rows_m),
            100.0 * len(done) / len(rows_m) if rows_m else 0.0,
            len(done), mean_len, se_len, opt_ratio, len(with_opt),
            mean_lat, se_lat))
    return out


# ── Wilcoxon signed-rank test ────────────────────────────────────────────────

def _midranks(values: list[float]) -> tuple[list[float], list[int]]:
    """Average ranks of sorted absolute values; also returns tie-group sizes."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_sizes = []
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and values[order[j]] == values[order[i]]:
            j += 1
        avg = (i + 1 + j) / 2.0
        for k in range(i, j):
            ranks[order[k]] = avg
        tie_sizes.append(j - i)
        i = j
    return ranks, tie_sizes


def _exact_wilcoxon_p(ranks2: list[int], w2: int) -> float:
    """Two-sided exact p for doubled ranks via the sum-polynomial DP."""
    total = sum(ranks2)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in ranks2:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    lo, hi = min(w2, total - w2), max(w2, total - w2)
    n_all = 2 ** len(ranks2)
    p = (sum(counts[:lo + 1]) + sum(counts[hi:])) / n_all
    return min(1.0, p)


def wilcoxon_signed_rank(a: list[float], b: list[float], comparison: str = "",
                         mode: str = "auto", exact_cutoff: int = 25,
                         bonferroni: int = 1) -> StatResult:
    """Paired two-sided Wilcoxon signed-rank test on a versus b.

    Zero differences are dropped (flagged in the note when they exceed 20%
    of pairs). Exact enumeration of the signed-rank distribution for small
    n, normal approximation with tie correction otherwise.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if not a:
        raise ValueError("empty samples")
    diffs = [x - y for x, y in zip(a, b)]
    nonzero = [d for d in diffs if d != 0]
    dropped = len(diffs) - len(nonzero)
    note = ""
    if dropped > 0.2 * len(diffs):
        note = f"dropped {dropped}/{len(diffs)} zero differences"
    if not nonzero:
        return StatResult("wilcoxon-signed-rank", 0.0, 1.0,
                          min(1.0, bonferroni * 1.0), 0, comparison,
                          degenerate=True, note="all differences zero")
    n = len(nonzero)
    ranks, tie_sizes = _midranks([abs(d) for d in nonzero])
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)

    if mode == "exact" or (mode == "auto" and n <= exact_cutoff):
        ranks2 = [int(round(2 * r)) for r in ranks]
        w2 = int(round(2 * w_plus))
        p = _exact_wilcoxon_p(ranks2, w2)
        name = "wilcoxon-signed-rank-exact"
    elif mode in ("approx", "auto"):
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        var -= sum(t ** 3 - t for t in tie_sizes) / 48.0
        if var <= 0:
            return StatResult("wilcoxon-signed-rank-approx", w_plus, 1.0,
                              min(1.0, bonferroni * 1.0), n, comparison,
                              degenerate=True, note="zero variance (all tied)")
        z = (w_plus - mean) / math.sqrt(var)
        p = math.erfc(abs(z) / math.sqrt(2.0))
        name = "wilcoxon-signed-rank-approx"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return StatResult(name, w_plus, p, min(1.0, bonferroni * p), n,
                      comparison, note=note)


# ── McNemar test ─────────────────────────────────────────────────────────────

def mcnemar(a: list[bool], b: list[bool], comparison: str = "",
            exact: bool = True, bonferroni: int = 1) -> StatResult:
    """Paired test on completion flags via the discordant pairs.

    Exact mode is the two-sided binomial test on (b_only, c_only) at p=0.5;
    the alternative is the continuity-corrected chi-square.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    b_only = sum(1 for x, y in zip(a, b) if x and not y)
    c_only = sum(1 for x, y in zip(a, b) if y and not x)
    n_disc = b_only + c_only
    if n_disc == 0:
        return StatResult("mcnemar-exact" if exact else "mcnemar-chi2",
                          0.0, 1.0, min(1.0, bonferroni * 1.0), 0, comparison,
                          degenerate=True, note="no discordant pairs")
    if exact:
        k = min(b_only, c_only)
        tail = sum(math.comb(n_disc, i) for i in range(k + 1)) * 0.5 ** n_disc
        p = min(1.0, 2.0 * tail)
        return StatResult("mcnemar-exact", float(k), p,
                          min(1.0, bonferroni * p), n_disc, comparison)
    stat = (abs(b_only - c_only) - 1.0) ** 2 / n_disc
    p = math.erfc(math.sqrt(stat / 2.0))       # chi-square, 1 dof
    return StatResult("mcnemar-chi2", stat, p, min(1.0, bonferroni * p),
                      n_disc, comparison)


def bonferroni_correct(p: float, comparisons: int) -> float:
    return min(1.0, p * comparisons)


# ── CSV interchange and reports ──────────────────────────────────────────────

EVAL_HEADER = ["problem_id", "method", "completed", "length", "optimal_length"]
TIMING_HEADER = ["problem_id", "method", "latency_s"]
METHODS_HEADER = ["method", "n_problems", "completion_pct", "n_completed",
                  "mean_length", "se_length", "optimality_pct",
                  "n_optimal_known", "mean_latency_s", "se_latency_s"]
CONVERGENCE_HEADER = ["iteration", "problems_sampled", "valid_candidate_rate",
                      "problems_harvested", "mean_harvested_length",
                      "mean_cache_length", "finetune_final_loss",
                      "seconds_sample", "seconds_harvest", "seconds_finetune"]


def write_eval_csv(rows: list[MetricRow], path: str | Path):
    """Deterministic per-problem results; latency goes to the timing CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_HEADER)
        for r in sorted(rows, key=lambda r: (r.method, r.problem_id)):
            w.writerow([r.problem_id, r.method, int(r.completed),
                        "" if r.length is None else r.length,
                        "" if r.optimal_length is None else r.optimal_length])


def write_timing_csv(rows: list[MetricRow], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMING_HEADER)
        for r in sorted(rows, key=lambda r: (r.method, r.problem_id)):
            if r.latency is not None:
                w.writerow([r.problem_id, r.method, f"{r.latency:.6f}"])


def read_eval_csv(path: str | Path,
                  timing_path: str | Path | None = None) -> list[MetricRow]:
    latency: dict[tuple[str, str], float] = {}
    if timing_path and Path(timing_path).exists():
        with open(timing_path, newline="") as fh:
            for row in csv.DictReader(fh):
                latency[(row["problem_id"], row["method"])] = \
                    float(row["latency_s"])
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["problem_id"], row["method"])
            rows.append(MetricRow(
                row["problem_id"], row["method"], row["completed"] == "1",
                int(row["length"]) if row["length"] else None,
                int(row["optimal_length"]) if row["optimal_length"] else None,
                latency.get(key)))
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def write_methods_csv(summaries: list[Summary], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METHODS_HEADER)
        for s in summaries:
            w.writerow([s.method, s.n_problems, _fmt(s.completion_pct),
                        s.n_completed, _fmt(s.mean_length), _fmt(s.se_length),
                        _fmt(None if s.optimality_ratio is None
                             else 100.0 * s.optimality_ratio),
                        s.n_optimal_known, _fmt(s.mean_latency),
                        _fmt(s.se_latency)])


def report(run_dir: str | Path, out_dir: str | Path | None = None,
           intersection: bool = False) -> dict[str, Path]:
    """Build methods and convergence tables from a run directory.

    Expects eval-*.csv files (plus optional timing-*.csv) and
    iter-*/report.json as written by the loop module.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    eval_files = sorted(run_dir.glob("eval-*.csv"))
    iter_reports = sorted(run_dir.glob("iter-*/report.json"))
    if not eval_files and not iter_reports:
        raise FileNotFoundError(
            f"nothing to report in {run_dir}: no eval-*.csv and no "
            f"iter-*/report.json")

    written: dict[str, Path] = {}
    if eval_files:
        rows: list[MetricRow] = []
        for f in eval_files:
            timing = f.with_name(f.name.replace("eval-", "timing-"))
            rows.extend(read_eval_csv(f, timing))
        path = out_dir / "methods.csv"
        write_methods_csv(aggregate(rows, intersection=intersection), path)
        written["methods"] = path

    if iter_reports:
        path = out_dir / "convergence.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CONVERGENCE_HEADER)
            for f in iter_reports:
                d = json.loads(f.read_text())
                w.writerow([
                    d["iteration"], d["problems_sampled"],
                    _fmt(d["valid_candidate_rate"]), d["problems_harvested"],
                    _fmt(d.get("mean_harvested_length")),
                    _fmt(d.get("mean_cache_length")),
                    _fmt(d.get("finetune_final_loss")),
                    _fmt(d["wall_times"].get("sample")),
                    _fmt(d["wall_times"].get("harvest")),
                    _fmt(d["wall_times"].get("finetune")),
                ])
        written["convergence"] = path
    return written
