"""Command-line interface: generate, pretrain, improve, evaluate, validate,
stats, and report subcommands over the library."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import bench, loop
from .domains import (GeneratorConfig, build_dataset, read_dataset, registry,
                      write_dataset)
from .pddl import ground, parse_domain, parse_problem
from .policy import ModelConfig, SamplerConfig, TrainSchedule, load_checkpoint
from .tokenizer import Vocabulary, build_vocab
from .world import resolve_plan, validate


def _add_generate(sub):
    p = sub.add_parser("generate", help="sample problem instances to JSONL")
    p.add_argument("--domain", required=True, choices=sorted(registry()))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--solve", default="domain-naive",
                   choices=["domain-naive", "external", "none"])
    p.add_argument("--oracle", action="store_true",
                   help="attach BFS-optimal lengths")
    p.add_argument("--external-command", default=None,
                   help="planner template with {domain} {problem} {plan-out}")
    p.add_argument("--allow-out-of-range", action="store_true")
    p.add_argument("--exclude", default=None,
                   help="dataset whose instances must not reappear")
    for name, default in [("blocks-min", 3), ("blocks-max", 6),
                          ("cities-min", 1), ("cities-max", 3),
                          ("city-size-min", 1), ("city-size-max", 2),
                          ("packages-min", 1), ("packages-max", 3),
                          ("airplanes-min", 1), ("airplanes-max", 2),
                          ("grid-min", 3), ("grid-max", 3),
                          ("soko-grid-min", 5), ("soko-grid-max", 6),
                          ("boxes-min", 1), ("boxes-max", 2),
                          ("walls-min", 0), ("walls-max", 4)]:
        p.add_argument(f"--{name}", type=int, default=default)
    p.add_argument("--goal-omit-prob", type=float, default=0.3)
    p.add_argument("--log-block-distribution", action="store_true")
    p.set_defaults(func=_cmd_generate)


def _cmd_generate(args) -> int:
    fields = {f.name for f in dataclasses.fields(GeneratorConfig)}
    kwargs = {k.replace("-", "_"): v for k, v in vars(args).items()
              if k.replace("-", "_") in fields}
    config = GeneratorConfig(domain=args.domain, count=args.count,
                             seed=args.seed, **{
                                 k: v for k, v in kwargs.items()
                                 if k not in ("domain", "count", "seed")})
    exclude = set()
    if args.exclude:
        for rec in read_dataset(args.exclude):
            exclude.add(rec.problem_def().structural_hash())
    solve = None if args.solve == "none" else args.solve
    records = build_dataset(config, args.split, solve=solve,
                            with_oracle=args.oracle,
                            exclude_hashes=frozenset(exclude),
                            command_template=args.external_command)
    write_dataset(records, args.out)
    print(f"wrote {len(records)} instances to {args.out}")
    return 0


def _add_pretrain(sub):
    p = sub.add_parser("pretrain", help="train the initial policy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--valid-dataset", default=None)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--ff-dim", type=int, default=256)
    p.add_argument("--context", type=int, default=512)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_pretrain)


def _cmd_pretrain(args) -> int:
    records = read_dataset(args.dataset)
    validation = read_dataset(args.valid_dataset) if args.valid_dataset else None
    spec = registry()[records[0].domain]
    schedule = TrainSchedule(lr=args.lr, epochs=args.epochs,
                             batch_size=args.batch_size,
                             warmup_steps=args.warmup, seed=args.seed)
    vocab = build_vocab(spec.domain_def(), spec.default_limits)
    config = ModelConfig(vocab_size=vocab.size, layers=args.layers,
                         heads=args.heads, embed_dim=args.embed_dim,
                         ff_dim=args.ff_dim, context_len=args.context,
                         dropout=args.dropout)
    ckpt, _ = loop.pretrain(records, args.run_dir, config, schedule,
                            validation=validation, seed=args.seed)
    print(f"pretrained policy written to {args.run_dir}/iter-000 "
          f"(step {ckpt.step})")
    return 0


def _add_improve(sub):
    p = sub.add_parser("improve", help="run self-improvement iterations")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--dataset", required=True,
                   help="problem pool JSONL (plans optional)")
    p.add_argument("--iterations", type=int, default=15)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-new-tokens", type=int, default=256)
    p.add_argument("--finetune-epochs", type=int, default=30)
    p.add_argument("--finetune-lr", type=float, default=None,
                   help="default: pretrain lr / 10")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_cmd_improve)


def _cmd_improve(args) -> int:
    records = read_dataset(args.dataset)
    problems = loop.records_to_problems(records)
    base = TrainSchedule(lr=args.lr, epochs=args.finetune_epochs,
                         warmup_steps=0, seed=args.seed)
    finetune = dataclasses.replace(
        base, lr=args.finetune_lr if args.finetune_lr else args.lr / 10)
    cfg = loop.LoopConfig(
        n_loop=args.iterations, m=args.m, n=args.n, seed=args.seed,
        sampler=SamplerConfig(temperature=args.temperature,
                              max_new_tokens=args.max_new_tokens),
        pretrain_schedule=base, finetune_schedule=finetune)
    ckpt, reports = loop.run(cfg, problems, args.run_dir, resume=args.resume)
    print(f"finished {len(reports)} iterations; final checkpoint step "
          f"{ckpt.step}")
    return 0


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="best-of-N evaluation of a checkpoint")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--dataset", required=True, help="test problems JSONL")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--bfs", action="store_true")
    p.add_argument("--iteration", type=int, default=None,
                   help="checkpoint iteration (default: latest)")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-new-tokens", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tag", default=None, help="output file suffix")
    p.set_defaults(func=_cmd_evaluate)


def _cmd_evaluate(args) -> int:
    run_dir = Path(args.run_dir)
    records = read_dataset(args.dataset)
    problems = loop.records_to_problems(records)
    it = args.iteration
    if it is None:
        it = loop._completed_iterations(run_dir)
    ckpt = load_checkpoint(run_dir / f"iter-{it:03d}" / "checkpoint.ckpt")
    vocab = Vocabulary.from_json((run_dir / "vocab.json").read_text())
    spec = registry()[records[0].domain]
    sampler = SamplerConfig(temperature=args.temperature,
                            max_new_tokens=args.max_new_tokens,
                            seed=args.seed)
    outcomes = loop.evaluate(ckpt, problems, args.n, sampler, vocab,
                             spec.domain_def(), with_bfs=args.bfs)
    optimal = {rec.id: rec.optimal_length for rec in records}
    method = f"iter{it}-n{args.n}"
    rows = [bench.MetricRow(o.problem_id, method, o.completed, o.length,
                            optimal.get(o.problem_id), o.latency)
            for o in outcomes]
    if args.bfs:
        rows += [bench.MetricRow(o.problem_id, method + "+bfs", o.completed,
                                 o.bfs_length if o.completed else None,
                                 optimal.get(o.problem_id), o.latency)
                 for o in outcomes]
    tag = args.tag or method
    bench.write_eval_csv(rows, run_dir / f"eval-{tag}.csv")
    bench.write_timing_csv(rows, run_dir / f"timing-{tag}.csv")
    done = [o for o in outcomes if o.completed]
    mean = sum(o.length for o in done) / len(done) if done else float("nan")
    print(f"{method}: completion {100 * len(done) / len(outcomes):.1f}% "
          f"mean length {mean:.2f} -> eval-{tag}.csv")
    return 0


def _add_validate(sub):
    p = sub.add_parser("validate", help="check plans against a problem")
    p.add_argument("--domain", default=None, choices=sorted(registry()))
    p.add_argument("--domain-file", default=None)
    p.add_argument("--problem", required=True)
    p.add_argument("plans", nargs="+", help="plan files, one action per line")
    p.set_defaults(func=_cmd_validate)


def _cmd_validate(args) -> int:
    if args.domain_file:
        dom = parse_domain(Path(args.domain_file).read_text(),
                           args.domain_file)
    elif args.domain:
        dom = registry()[args.domain].domain_def()
    else:
        print("error: need --domain or --domain-file", file=sys.stderr)
        return 2
    prob = parse_problem(Path(args.problem).read_text(), dom, args.problem)
    task = ground(dom, prob)
    all_valid = True
    for plan_file in args.plans:
        lines = [ln.strip() for ln in Path(plan_file).read_text().splitlines()
                 if ln.strip() and not ln.strip().startswith(";")]
        print(f"Checking plan: {plan_file}")
        try:
            plan = resolve_plan(task, lines)
        except KeyError as err:
            print(f"Plan failed to execute: {err}")
            print("Plan invalid")
            all_valid = False
            continue
        compiled = validate(task, plan)
        if not compiled.valid:
            k = compiled.fail_step
            print("Plan failed to execute")
            print(f"Bad plan description: unsatisfied precondition at "
                  f"step {k + 1} ({lines[k]})")
            print("Plan invalid")
            all_valid = False
        elif not compiled.goal_reached:
            print("Plan executed successfully - checking goal")
            print("Goal not satisfied")
            print("Plan invalid")
            all_valid = False
        else:
            print("Plan executed successfully - checking goal")
            print("Plan valid")
            print(f"Final value: {len(plan)}")
    return 0 if all_valid else 1


def _add_stats(sub):
    p = sub.add_parser("stats", help="paired tests between two eval CSVs")
    p.add_argument("--a", required=True, help="first eval CSV")
    p.add_argument("--b", required=True, help="second eval CSV")
    p.add_argument("--bonferroni", type=int, default=1,
                   help="number of comparisons to correct for")
    p.add_argument("--mode", default="auto",
                   choices=["auto", "exact", "approx"])
    p.set_defaults(func=_cmd_stats)


def _cmd_stats(args) -> int:
    rows_a = bench.read_eval_csv(args.a)
    rows_b = bench.read_eval_csv(args.b)
    a_by = {r.problem_id: r for r in rows_a}
    b_by = {r.problem_id: r for r in rows_b}
    common = sorted(set(a_by) & set(b_by))
    if not common:
        print("error: no common problems", file=sys.stderr)
        return 2
    both = [pid for pid in common
            if a_by[pid].completed and b_by[pid].completed]
    label = f"{Path(args.a).stem} vs {Path(args.b).stem}"
    results = []
    if both:
        results.append(bench.wilcoxon_signed_rank(
            [float(a_by[p].length) for p in both],
            [float(b_by[p].length) for p in both],
            comparison=f"{label} (plan length, n={len(both)})",
            mode=args.mode, bonferroni=args.bonferroni))
    results.append(bench.mcnemar(
        [a_by[p].completed for p in common],
        [b_by[p].completed for p in common],
        comparison=f"{label} (completion, n={len(common)})",
        bonferroni=args.bonferroni))
    for r in results:
        print(json.dumps(dataclasses.asdict(r), sort_keys=True))
    return 0


def _add_report(sub):
    p = sub.add_parser("report", help="tables from a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--intersection", action="store_true",
                   help="restrict to problems every method completed")
    p.set_defaults(func=_cmd_report)


def _cmd_report(args) -> int:
    written = bench.report(args.run_dir, args.out_dir,
                           intersection=args.intersection)
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="planloop",
        description="STRIPS planning with a self-improving plan generator")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_pretrain(sub)
    _add_improve(sub)
    _add_evaluate(sub)
    _add_validate(sub)
    _add_stats(sub)
    _add_report(sub)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
