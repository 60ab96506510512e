"""Physical parameters of a Bessel excursion and the derived exponents."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ModeError


class BoundaryMode(str, enum.Enum):
    """Small-x boundary selection.

    ``ABSORBING`` keeps the ``x**(1/2 + |alpha|)`` mode, the physical excursion.
    ``CONTINUED`` keeps ``x**(1/2 + alpha)`` with the signed exponent, which is the
    analytic continuation of the ``U0 > -1`` formulas into ``-3 < U0 < -1``.
    """

    ABSORBING = "absorbing"
    CONTINUED = "continued"


@dataclass(frozen=True)
class ExcursionParams:
    """Drift strength ``U0``, diffusion constant ``D`` and duration ``T``.

    The defaults ``D = 1/2, T = 1`` follow the usual random-walk convention,
    giving an area scale ``A0 = 1/sqrt(2)``.
    """

    U0: float
    D: float = 0.5
    T: float = 1.0
    mode: BoundaryMode = BoundaryMode.ABSORBING

    def __post_init__(self):
        if not (self.D > 0 and self.T > 0):
            raise ValueError("D and T must be positive")
        if not math.isfinite(self.U0):
            raise ValueError("U0 must be finite")
        object.__setattr__(self, "mode", BoundaryMode(self.mode))
        if self.mode is BoundaryMode.CONTINUED and not (-3.0 < self.U0 < -1.0):
            raise ModeError(
                f"continued mode is defined only for -3 < U0 < -1, got U0={self.U0}"
            )

    @property
    def alpha(self) -> float:
        """Signed ``(U0 + 1) / 2``."""
        return 0.5 * (self.U0 + 1.0)

    @property
    def nu(self) -> float:
        """Signed ``(U0 + 1) / 3``."""
        return (self.U0 + 1.0) / 3.0

    @property
    def a(self) -> float:
        """Exponent entering every formula: ``|alpha|`` when absorbing, ``alpha`` when continued."""
        if self.mode is BoundaryMode.CONTINUED:
            return self.alpha
        # rounded so that U0 and -2 - U0 typed as decimals give the same value
        return float(f"{abs(self.alpha):.15g}")

    @property
    def v(self) -> float:
        """``2 a / 3``, the matching ``|nu|`` or signed ``nu``."""
        return 2.0 * self.a / 3.0

    @property
    def A0(self) -> float:
        """Area scale ``sqrt(D) * T**1.5``."""
        return math.sqrt(self.D) * self.T ** 1.5

    def mirrored(self) -> ExcursionParams:
        """Partner drift ``-2 - U0`` with the same ``|alpha|``."""
        return ExcursionParams(-2.0 - self.U0, self.D, self.T, self.mode)

    def with_scale(self, D: float, T: float) -> ExcursionParams:
        return ExcursionParams(self.U0, D, T, self.mode)

    def to_dict(self) -> dict:
        return {
            "U0": self.U0,
            "D": self.D,
            "T": self.T,
            "mode": self.mode.value,
            "alpha": self.alpha,
            "nu": self.nu,
            "A0": self.A0,
        }
