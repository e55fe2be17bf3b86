"""Generator eigenvalues of a 1-d Ornstein-Uhlenbeck process.

dX = -X dt + sqrt(2) dW has generator eigenvalues -k with Hermite
eigenfunctions He_k. A degree-5 Hermite dictionary with the identity
symbol should recover -1, ..., -5.

    python demos/02_ou_spectrum.py
"""
import numpy as np

from toeplitz_spectra import (Dictionary, EstimatorConfig, builtin_symbol, evaluate_dictionary,
                              fit_primal, generator_eigenvalues, simulate_ou)

DT = 0.1
ds = simulate_ou([[-1.0]], [[np.sqrt(2.0)]], [0.0], DT, 50_000, burn_in=10.0, seed=0)
Z = evaluate_dictionary(Dictionary(1, max_degree=5, basis="hermite"), ds.points)
dec = fit_primal(Z, EstimatorConfig(1e-8, 5, builtin_symbol("identity", DT)))
lam = np.sort(generator_eigenvalues(dec).real)[::-1]
for k, v in enumerate(lam, 1):
    print(f"lambda_{k}: {v:+.3f}  (exact {-k:+d})")
