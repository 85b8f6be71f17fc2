"""Group AR coefficients with standard errors from a fitted mixture.

After clustering, each group's scale matrix is solved for autoregressive
coefficients; the sandwich covariance gives their standard errors and each
series gets its own innovation variance.
"""

import numpy as np

from armm.em import WmmConfig, fit
from armm.features import panel_features
from armm.simulate import ArmaSpec, simulate_panel
from armm.yule_walker import assemble_armm

specs = [
    ArmaSpec(phi=(0.6, -0.05), theta=(), sigma2=1.0, n=300, count=30, group=1),
    ArmaSpec(phi=(0.3, 0.1), theta=(), sigma2=4.0, n=300, count=30, group=2),
]
panel, truth = simulate_panel(specs, np.random.default_rng(21))
feats = panel_features(panel, window=3)

out = fit(feats, WmmConfig(n_groups=2, window=3, variant="em2", seed=0))
model = assemble_armm(out, feats)

for grp in model.groups:
    coef = ", ".join(
        f"{p:+.3f} ({se:.3f})" for p, se in zip(grp.phi, grp.phi_se)
    )
    s2 = np.array(list(grp.sigma2.values()))
    print(f"group {grp.g}: weight {grp.weight:.2f}  phi {coef}  "
          f"median sigma2 {np.median(s2):.2f}")
