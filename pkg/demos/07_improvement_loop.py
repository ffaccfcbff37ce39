"""A miniature end-to-end self-improvement run.

Pretrains on naive plans, runs three improvement iterations, and evaluates
before/after. Takes several minutes on a laptop CPU.
Run: python3 demos/07_improvement_loop.py
"""

import tempfile
from pathlib import Path

import numpy as np

from planloop.domains import GeneratorConfig, build_dataset, registry
from planloop.loop import (LoopConfig, evaluate, pretrain, records_to_problems,
                           run)
from planloop.policy import ModelConfig, SamplerConfig, TrainSchedule

records = build_dataset(GeneratorConfig(domain="blocksworld", count=400,
                                        seed=5, blocks_min=3, blocks_max=5))
train_hashes = {r.problem_def().structural_hash() for r in records}
test_records = build_dataset(
    GeneratorConfig(domain="blocksworld", count=30, seed=99,
                    blocks_min=3, blocks_max=5),
    with_oracle=True, exclude_hashes=train_hashes)

model = ModelConfig(vocab_size=42, layers=2, heads=2, embed_dim=48,
                    ff_dim=192, context_len=224, dropout=0.1)
schedule = TrainSchedule(lr=3e-3, epochs=30, batch_size=16, warmup_steps=100)

run_dir = Path(tempfile.mkdtemp(prefix="planloop-demo-"))
pi0, vocab = pretrain(records, run_dir, model, schedule)
print(f"pretrained pi0 ({pi0.step} steps) in {run_dir}")

cfg = LoopConfig(n_loop=3, m=100, n=16, seed=0,
                 sampler=SamplerConfig(temperature=2.0, max_new_tokens=64),
                 pretrain_schedule=schedule)
pi3, reports = run(cfg, records_to_problems(records), run_dir)
for r in reports:
    print(f"iter {r.iteration}: harvested {r.problems_harvested}/"
          f"{r.problems_sampled}, cache mean {r.mean_cache_length:.2f}")

dom = registry()["blocksworld"].domain_def()
test = records_to_problems(test_records)
optimal = {r.id: r.optimal_length for r in test_records}
sampler = SamplerConfig(temperature=2.0, max_new_tokens=64, seed=7)
for label, ckpt in (("pi0", pi0), ("pi3", pi3)):
    out = evaluate(ckpt, test, 8, sampler, vocab, dom, with_bfs=True)
    done = [o for o in out if o.completed]
    mean = np.mean([o.length for o in done]) if done else float("nan")
    opt = np.mean([o.length == optimal[o.problem_id] for o in done]) \
        if done else float("nan")
    print(f"{label}: completion {len(done)}/{len(out)}, mean best-of-8 "
          f"length {mean:.2f}, optimal rate {opt:.0%}")
