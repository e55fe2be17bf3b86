"""Grid lower bound of the Kreiss constant for an OU process.

For a normal contraction the value stays just below 1 on any finite grid.

    python demos/05_kreiss.py
"""
import numpy as np

from toeplitz_spectra import (Dictionary, EstimatorConfig, builtin_symbol, evaluate_dictionary,
                              simulate_ou)
from toeplitz_spectra.analysis import kreiss_profile

DT = 0.1
ds = simulate_ou([[-1.0]], [[np.sqrt(2.0)]], [0.0], DT, 20_000, burn_in=10.0, seed=0)
Z = evaluate_dictionary(Dictionary(1, max_degree=3, basis="hermite"), ds.points)
grid = np.array([re + 1j * im for re in (0.05, 0.2, 1.0, 3.0) for im in (0.0, 0.5)])
prof = kreiss_profile(Z, EstimatorConfig(1e-6, 3, builtin_symbol("identity", DT)), grid, 400)
for mu, v in zip(grid, prof):
    print(f"mu={mu.real:.2f}{mu.imag:+.2f}i  {v:.4f}")
print(f"Kreiss lower bound: {prof.max():.4f}")
