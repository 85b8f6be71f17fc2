"""Rank candidate group counts by information criteria.

Three planted AR(1) populations with distinct coefficients; the report
lists AIC and BIC for G = 1..5 and the argmin of each.
"""

import numpy as np

from armm.em import WmmConfig
from armm.features import panel_features
from armm.selection import select_G
from armm.simulate import ArmaSpec, simulate_panel

specs = [
    ArmaSpec(phi=(0.8,), theta=(), sigma2=1.0, n=250, count=25, group=1),
    ArmaSpec(phi=(0.0,), theta=(), sigma2=1.0, n=250, count=25, group=2),
    ArmaSpec(phi=(-0.8,), theta=(), sigma2=1.0, n=250, count=25, group=3),
]
panel, _ = simulate_panel(specs, np.random.default_rng(3))
feats = panel_features(panel, window=3)

config = WmmConfig(n_groups=1, window=3, variant="em1", n_restarts=5, seed=0)
report = select_G(feats, range(1, 6), config)

print("G    AIC         BIC")
for entry in report.entries:
    print(f"{entry.n_groups}    {entry.aic:10.1f}  {entry.bic:10.1f}")
print(f"\nAIC picks G={report.best_aic}, BIC picks G={report.best_bic}")
