"""Plan-quality metrics and the paired significance tests.

Run: python3 demos/08_metrics_and_stats.py
"""

import numpy as np

from planloop.bench import (MetricRow, aggregate, mcnemar, normalized_length,
                            regret, wilcoxon_signed_rank)

print("regret(33, 30)          =", regret(33, 30), "%")
print("regret(0, 0)            =", regret(0, 0), "% (zero-optimum convention)")
print("normalized(10, 0)       =", normalized_length(10, 0),
      "% (the +1 keeps trivial problems finite)")

rng = np.random.default_rng(0)
rows = []
for i in range(40):
    opt = int(rng.integers(2, 12))
    rows.append(MetricRow(f"p{i}", "before", True, opt + int(rng.integers(0, 5)),
                          opt, float(rng.uniform(0.3, 0.6))))
    rows.append(MetricRow(f"p{i}", "after", True, opt + int(rng.integers(0, 2)),
                          opt, float(rng.uniform(0.2, 0.5))))
for s in aggregate(rows, intersection=True):
    print(f"\n{s.method}: completion {s.completion_pct:.0f}%, "
          f"length {s.mean_length:.2f} ± {s.se_length:.2f}, "
          f"optimal {100 * s.optimality_ratio:.0f}%")

before = [float(r.length) for r in rows if r.method == "before"]
after = [float(r.length) for r in rows if r.method == "after"]
w = wilcoxon_signed_rank(before, after, comparison="before vs after",
                         bonferroni=6)
print(f"\n{w.test_name}: W={w.statistic} p={w.p_value:.2e} "
      f"(Bonferroni x6: {w.bonferroni_corrected_p:.2e})")

m = mcnemar([True] * 35 + [False] * 5, [True] * 38 + [False] * 2,
            comparison="completion")
print(f"{m.test_name}: p={m.p_value:.3f} on {m.n} discordant pairs")
