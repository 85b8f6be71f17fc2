"""From a raw series to the Toeplitz scatter summary.

Simulates one AR(2) series, extracts the lag-window autocovariances, and
shows the scatter matrix alongside its variance-free counterpart.
"""

import numpy as np

from armm.features import TimeSeries, center, normalized_scatter, scatter_matrix
from armm.simulate import simulate_arma

rng = np.random.default_rng(0)
y = simulate_arma((0.6, -0.05), (), 2.0, 400, rng)
series = center(TimeSeries("demo", y))

feat = scatter_matrix(series, window=3)
print("autocovariances (lags 0..2):", np.round(feat.gamma, 4))
print("scatter matrix S = n * toeplitz(gamma):")
print(np.round(feat.scatter, 2))

# same object on the correlation scale; the leading entry becomes n
norm = normalized_scatter(series, window=3)
print("\nautocorrelations:", np.round(norm.gamma, 4))
print("normalized scatter:")
print(np.round(norm.scatter, 2))
