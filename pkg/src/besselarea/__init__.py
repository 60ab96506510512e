"""Area under Bessel excursions: spectrum, distribution, moments and a Monte Carlo oracle."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    AcceptanceStarvationError,
    BesselAreaError,
    CancellationError,
    ContourError,
    ConvergenceError,
    CoverageError,
    DomainError,
    InsufficientSpectrumError,
    ModeError,
    PoleError,
    TailFitError,
)
from .params import BoundaryMode, ExcursionParams
from .spectrum import SpectralData, dk_asymptotic, lambda_asymptotic, solve_spectrum
from .distribution import (
    DistributionTable,
    LevyForm,
    Method,
    laplace_pdf,
    levy23,
    pdf,
    pdf_airy,
    pdf_hyp,
    pdf_talbot,
    tabulate,
)
from .moments import MomentSet, m1_closed, m2_linear, m2_series, m_nu_closed, moment_set
from .mcsim import McConfig, McEnsemble, mc_vs_analytic, sample_excursions

__all__ = [
    "AcceptanceStarvationError", "BesselAreaError", "BoundaryMode", "CancellationError",
    "ContourError", "ConvergenceError", "CoverageError", "DistributionTable", "DomainError",
    "ExcursionParams", "InsufficientSpectrumError", "LevyForm", "McConfig", "McEnsemble",
    "Method", "ModeError", "MomentSet", "PoleError", "SpectralData", "TailFitError",
    "dk_asymptotic", "lambda_asymptotic", "laplace_pdf", "levy23", "m1_closed", "m2_linear",
    "m2_series", "m_nu_closed", "mc_vs_analytic", "moment_set", "pdf", "pdf_airy", "pdf_hyp",
    "pdf_talbot", "sample_excursions", "solve_spectrum", "tabulate",
]
