"""Laser parameters and the deterministic steady state of the two-level laser.

Time is measured in units of the inverse laser gain, so the stimulated
emission probability per unit time is ``(m + 1)`` per excited atom.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

__all__ = [
    "ParameterError",
    "LaserParams",
    "SteadyState",
    "validate_params",
    "steady_state",
    "balance_residuals",
    "params_from_dict",
    "load_params",
]

PARAM_KEYS = ("N", "alpha", "gamma", "J", "xi")


class ParameterError(ValueError):
    """Raised for physically invalid laser parameters."""


@dataclass(frozen=True)
class LaserParams:
    """Physical inputs of the two-level laser.

    N      number of active atoms
    alpha  photon loss/detection rate per photon
    gamma  spontaneous decay rate of the upper level out of the lasing mode
    J      mean pump rate
    xi     pump noise parameter, 1 for a Poissonian pump and 0 for a quiet one
    """

    N: int
    alpha: float
    gamma: float
    J: float
    xi: float = 1.0

    def replace(self, **changes) -> "LaserParams":
        d = asdict(self)
        d.update(changes)
        return LaserParams(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SteadyState:
    m: float
    n2: float
    n0: float
    J_hat: float
    m_hat: float


def validate_params(raw: LaserParams) -> LaserParams:
    """Return `raw` unchanged if every parameter is admissible, else raise."""
    for name in PARAM_KEYS:
        value = getattr(raw, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterError(f"{name} must be a number, got {value!r}")
        if not math.isfinite(value):
            raise ParameterError(f"{name} must be finite, got {value!r}")
    if raw.N < 1:
        raise ParameterError("N must be ≥ 1")
    if float(raw.N) != int(raw.N):
        raise ParameterError(f"N must be an integer count, got {raw.N!r}")
    if raw.alpha <= 0:
        raise ParameterError("alpha must be positive")
    if raw.gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if raw.J < 0:
        raise ParameterError("J must be non-negative")
    if not 0.0 <= raw.xi <= 1.0:
        raise ParameterError("xi must lie in [0, 1]")
    return raw


def _photon_number(J_hat: float, gamma: float) -> float:
    # non-negative root of m^2 + (gamma + 1 - J_hat) m - J_hat = 0,
    # picking the branch free of cancellation
    b = gamma + 1.0 - J_hat
    disc = math.sqrt(b * b + 4.0 * J_hat)
    if b >= 0.0:
        return 2.0 * J_hat / (b + disc)
    return 0.5 * (disc - b)


def steady_state(params: LaserParams) -> SteadyState:
    """Mean photon number and level populations.

    Eliminating ``n2`` from the pump balance ``J = (m + 1 + gamma) n2`` and
    the photon balance ``alpha m = (m + 1) n2`` gives a quadratic in ``m``
    whose non-negative root is returned.
    """
    J_hat = params.J / params.alpha
    m = _photon_number(J_hat, params.gamma)
    n2 = params.alpha * m / (m + 1.0)
    n0 = params.N - n2
    if n2 > 0.99 * params.N:
        warnings.warn(
            f"upper-level population {n2:.4g} exceeds 99% of N={params.N}; "
            "the ground-state reservoir is depleted",
            RuntimeWarning,
            stacklevel=2,
        )
    return SteadyState(m=m, n2=n2, n0=n0, J_hat=J_hat, m_hat=m + params.gamma + 1.0)


def balance_residuals(params: LaserParams, ss: SteadyState) -> tuple[float, float]:
    """Residuals ``(J - R - S, Q - R)`` of the pump and photon rate balances."""
    R = (ss.m + 1.0) * ss.n2
    S = params.gamma * ss.n2
    Q = params.alpha * ss.m
    return params.J - R - S, Q - R


def params_from_dict(d: dict) -> LaserParams:
    unknown = set(d) - set(PARAM_KEYS)
    if unknown:
        raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
    missing = [k for k in ("N", "alpha", "gamma", "J") if k not in d]
    if missing:
        raise ParameterError(f"missing parameter keys: {missing}")
    N = d["N"]
    if isinstance(N, float) and N.is_integer():
        N = int(N)
    return validate_params(
        LaserParams(N=N, alpha=d["alpha"], gamma=d["gamma"], J=d["J"], xi=d.get("xi", 1.0))
    )


def load_params(path: str | Path) -> LaserParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))
