"""Train a small policy on naive plans and sample candidate plans from it.

Takes a couple of minutes on a laptop CPU.
Run: python3 demos/05_train_policy.py
"""

import tempfile

from planloop.domains import GeneratorConfig, build_dataset, registry
from planloop.loop import pretrain, records_to_problems
from planloop.policy import ModelConfig, SamplerConfig, TrainSchedule, sample_plans
from planloop.tokenizer import DecodeFailure
from planloop.pddl import ground
from planloop.world import validate

records = build_dataset(GeneratorConfig(domain="blocksworld", count=300,
                                        seed=5, blocks_min=3, blocks_max=4))
print(f"{len(records)} training pairs, "
      f"mean plan length {sum(len(r.plan) for r in records) / len(records):.2f}")

model = ModelConfig(vocab_size=42, layers=2, heads=2, embed_dim=48,
                    ff_dim=192, context_len=192, dropout=0.0)
with tempfile.TemporaryDirectory() as run_dir:
    ckpt, vocab = pretrain(
        records, run_dir, model,
        TrainSchedule(lr=3e-3, epochs=40, batch_size=8, warmup_steps=30))
print(f"trained {ckpt.step} steps")

spec = registry()["blocksworld"]
problems = records_to_problems(records[:5])
results = sample_plans(ckpt, problems.problems,
                       SamplerConfig(temperature=2.0, max_new_tokens=48,
                                     seed=1),
                       8, vocab, spec.domain_def())
for rec, cands in zip(problems.problems, results):
    task = ground(spec.domain_def(), rec.problem)
    lengths = []
    failures = 0
    for c in cands:
        if isinstance(c, DecodeFailure):
            failures += 1
            continue
        out = validate(task, c)
        if out.goal_reached:
            lengths.append(len(c))
    print(f"{rec.id}: {len(lengths)}/8 candidates solve it "
          f"(lengths {sorted(lengths)}, {failures} undecodable)")
