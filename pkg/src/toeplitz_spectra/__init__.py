"""Spectral estimation of evolution operators with Toeplitz-filtered reduced-rank regression."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    Observable,
    ResponseCurve,
    filter_power,
    forecast,
    generator_eigenvalues,
    kreiss_estimate,
    mode_amplitudes,
    predict_expectation,
    resolvent_response,
)
from .dynamics import (  # noqa: E402
    TrajectoryDataset,
    add_observation_noise,
    simulate_duffing,
    simulate_langevin,
    simulate_ou,
    solve_lyapunov,
)
from .estimators import (  # noqa: E402
    EstimatorConfig,
    SpectralDecomposition,
    eig_small,
    fit_dual,
    fit_primal,
    solve_spd_gep,
)
from .features import Dictionary, KernelSpec, delay_embed, evaluate_dictionary, gram  # noqa: E402
from .special import sine_integral  # noqa: E402
from .symbols import (  # noqa: E402
    ToeplitzSymbol,
    bandpass_inverse_symbol,
    builtin_symbol,
    chebyshev_symbol,
    eval_symbol,
    generator_resolvent_symbol,
    inverse_spectral_map,
    symmetrize,
    transfer_resolvent_symbol,
    trig_symbol,
)
from .toeplitz import BandedToeplitz, apply_right, build_banded  # noqa: E402
