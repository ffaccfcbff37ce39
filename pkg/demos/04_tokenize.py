"""The fixed-vocabulary token format for problems and plans.

Run: python3 demos/04_tokenize.py
"""

from planloop.domains import GeneratorConfig, generate, registry
from planloop.tokenizer import (build_vocab, decode_plan, decode_problem,
                                encode_plan, encode_problem)

spec = registry()["blocksworld"]
dom = spec.domain_def()
vocab = build_vocab(dom, spec.default_limits)
print(f"vocabulary: {vocab.size} tokens "
      f"(7 specials + 5 predicates + 4 operators + 1 type + 25 objects)")
print("first 20:", " ".join(vocab.tokens[:20]))

prob = generate(GeneratorConfig(domain="blocksworld", count=1, seed=3,
                                blocks_min=3, blocks_max=3)).problems[0].problem
seq = encode_problem(prob, vocab)
print(f"\nproblem encodes to {len(seq.ids)} tokens "
      f"(boundary at {seq.boundary}):")
print(" ".join(vocab.token(i) for i in seq.ids))

assert decode_problem(seq, vocab, dom).structurally_equal(prob)

plan = [("pickup", ("block-1",)), ("stack", ("block-1", "block-2"))]
plan_ids = encode_plan(plan, vocab)
print("\nplan tokens:", " ".join(vocab.token(i) for i in plan_ids))
assert decode_plan(plan_ids, vocab, dom) == plan
print("round trips hold for both problem and plan")
