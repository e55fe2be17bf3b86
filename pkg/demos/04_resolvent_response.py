"""Resolvent response of the OU observable f(x) = x.

f is an eigenfunction with eigenvalue -1, so the exact response is
||f|| / |mu + 2 pi i theta + 1|. The chaotic Duffing version of this
experiment is bundled as a config:

    toeplitz-spectra run duffing_chaotic_response

    python demos/04_resolvent_response.py
"""
import numpy as np

from toeplitz_spectra import (Dictionary, EstimatorConfig, Observable, builtin_symbol,
                              evaluate_dictionary, resolvent_response, simulate_ou)

DT, MU = 0.1, 0.5
ds = simulate_ou([[-1.0]], [[np.sqrt(2.0)]], [0.0], DT, 20_000, burn_in=10.0, seed=0)
Z = evaluate_dictionary(Dictionary(1, max_degree=3, basis="hermite"), ds.points)
theta = np.linspace(-0.5, 0.5, 11)
curve = resolvent_response(Z, EstimatorConfig(1e-8, 3, builtin_symbol("identity", DT)),
                           Observable.feature(3, 0), MU, theta, DT, 400)
exact = Z[0].std() / np.abs(MU + 2j * np.pi * theta + 1.0)
for th, v, e in zip(theta, curve.values, exact):
    print(f"theta={th:+.2f}  estimate={v:.4f}  exact={e:.4f}")
