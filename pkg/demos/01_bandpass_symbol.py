"""Band-pass inverse symbol: raw partial sum versus Jackson damping.

The symbol is purely imaginary on the circle, with Im T(e^{iw}) ~ -1/w
inside the band and 0 outside. Prints the overshoot at the band edges
and the sup error away from the jumps for a few truncation orders.

    python demos/01_bandpass_symbol.py
"""
import numpy as np

from toeplitz_spectra import bandpass_inverse_symbol, eval_symbol

LO, HI = 0.5, 2.5
w = np.linspace(1e-3, np.pi, 20001)
target = np.where((w >= LO) & (w <= HI), -1.0 / w, 0.0)
away = (np.abs(w - LO) > 0.25) & (np.abs(w - HI) > 0.25)


def values(sym):
    return eval_symbol(sym, np.exp(1j * w)).imag


def edge_overshoot(v, ell):
    # largest excursion past the target near each jump, relative to the jump height
    worst = 0.0
    for edge in (LO, HI):
        jump = 1.0 / edge
        near = np.abs(w - edge) < 20 * np.pi / ell
        inside = near & (w >= LO) & (w <= HI)
        outside = near & ~((w >= LO) & (w <= HI))
        worst = max(worst, np.max(target[inside] - v[inside]) / jump,  # below -1/w
                    np.max(v[outside] - target[outside]) / jump)
    return worst


print(f"{'ell':>5} {'raw overshoot':>14} {'jackson overshoot':>18} {'jackson away err':>17}")
for ell in (64, 128, 256, 512):
    raw = values(bandpass_inverse_symbol(LO, HI, ell, jackson=False))
    jac = values(bandpass_inverse_symbol(LO, HI, ell, jackson=True))
    err = np.abs(jac - target)[away].max()
    print(f"{ell:>5} {edge_overshoot(raw, ell):>14.2%} {edge_overshoot(jac, ell):>18.2%} {err:>17.2e}")
