"""
Inside a residualized factor adaptation model
=============================================

Fit RFA on all rows and take it apart: the controls stage, the residual
stage over language and adapted language, and the frozen transforms that
make predictions on new rows.
"""

import numpy as np

from rfa import SyntheticSpec, fit_rc, fit_rfa, generate_synthetic
from rfa.numerics import r_squared

d = generate_synthetic(SyntheticSpec(n_instances=300, n_language_features=80, seed=3))
m = fit_rfa(d, n_components=20, factor_policy="pca:4")

# %%
# Stage 1 is ridge on z-scored factors. Stage 2 models what stage 1 missed.
s1, s2 = m.stage1_predict(d), m.stage2_predict(d)
print("stage 1 R2 ", round(r_squared(d.y, s1), 3))
print("stage 1+2 R2", round(r_squared(d.y, s1 + s2), 3))
assert np.array_equal(m.predict(d), s1 + s2)

# %%
# Factor selection kept four PCA scores; each language group and each
# adapted copy was screened and reduced separately.
print("factors:", list(zip(m.factor_set.names, m.factor_set.provenance)))
for b in m.design.blocks:
    print(f"{b.role:<8} {b.group:<7} -> {len(b.transform.output_names)} columns "
          f"({' > '.join(s.kind for s in b.transform.steps)})")

# %%
# With no factors to adapt to, RFA collapses to residualized controls.
rc = fit_rc(d, n_components=20)
bare = fit_rfa(d, n_components=20, factor_policy="none", controls_factors="all")
print("rfa without factors equals rc:", np.array_equal(bare.predict(d), rc.predict(d)))

# %%
# Everything learned fits in one JSON document.
doc = m.to_dict()
print(doc["schema"], "with", len(doc["design"]["blocks"]), "blocks")
