"""
How many factors does adaptation need?
======================================

Sweep the number of factors chosen by PCA and by recursive feature
elimination, then repeat RFE over the pool widened with pairwise
interaction factors.
"""

from rfa import FoldPlan, ModelConfig, SyntheticSpec, generate_synthetic
from rfa.experiments import sweep_factors

d = generate_synthetic(SyntheticSpec(n_instances=400, n_language_features=100, seed=9))
plan = FoldPlan.make(d.instance_ids, 10, seed=9)
base = ModelConfig("rfa", n_components=25)


def show(rep):
    best = max(r["pooled_r2"] for r in rep.curves)
    for r in rep.curves:
        bar = "#" * int(40 * max(r["pooled_r2"], 0) / best)
        print(f"{r['point']:>3} {r['pooled_r2']:.3f} {bar}")


# %%
# The factors here come from four latent dimensions, so a handful of
# principal components carries nearly everything.
print("PCA factors")
show(sweep_factors(d, "pca", families=("rfa",), base=base, plan=plan))

# %%
print("RFE factors")
show(sweep_factors(d, "rfe", families=("rfa",), base=base, plan=plan))

# %%
# Eleven factors yield 55 pairwise products: a pool of 66.
print("RFE over the interaction pool")
show(sweep_factors(d, "rfe", counts=[2, 5, 11, 22, 44, 66], families=("rfa",),
                   use_interactions=True, base=base, plan=plan))
