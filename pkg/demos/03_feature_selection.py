"""
Where feature selection sits relative to adaptation
===================================================

Compare the four placements of the k-best + PCA reduction, then sweep the
size of the n-gram screen.
"""

from rfa import FoldPlan, ModelConfig, SyntheticSpec, generate_synthetic
from rfa.experiments import compare_fs_strategies, sweep_kbest

d = generate_synthetic(SyntheticSpec(n_instances=400, n_language_features=200, seed=5))
plan = FoldPlan.make(d.instance_ids, 10, seed=5)
base = ModelConfig("rfa", n_components=40)

# %%
# NoFS keeps every raw and adapted column, SeparatedFS reduces each of the
# four groups on its own, CombinedFS reduces their union once, and EarlyFS
# reduces the language first and adapts the reduced columns.
rep = compare_fs_strategies(d, families=("rfa",), base=base, plan=plan)
for row in rep.curves:
    print(f"{row['point']:<12} R2 {row['pooled_r2']:.3f}")

# %%
# The k-best screen trades recall of weak features against noise.
rep = sweep_kbest(d, [40, 80, 120, 160, 200], base=base, plan=plan)
for row in rep.curves:
    print(f"k={row['point']:<4} {row['family']:<4} R2 {row['pooled_r2']:.3f}")
