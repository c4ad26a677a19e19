"""Linearized fluctuation analysis: photocurrent and intracavity spectra, Fano factor.

Rates split into mean values plus first-order population terms and white
Langevin forces ``j, q, r, s`` (pump, detection, stimulated, spontaneous),
each with a spectral density equal to its mean rate. At a Fourier angular
frequency ``omega`` the fluctuations ``(dm, dn2)`` obey

    (i omega + alpha - n2) dm - (m + 1) dn2 = r - q
    n2 dm + (i omega + m_hat) dn2           = j - r - s

with ``m_hat = m + gamma + 1``; the detected-rate fluctuation is
``dQ = alpha dm + q``. Spectra are built from this 2x2 solve. The
rational closed forms are kept as independent cross-checks.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from .steady import LaserParams, SteadyState, steady_state

__all__ = [
    "Target",
    "SpectrumKind",
    "LangevinDensities",
    "TransferCoeffs",
    "SpectrumSeries",
    "DarkLaserError",
    "SingularSystemError",
    "QuadratureError",
    "langevin_densities",
    "transfer_coefficients",
    "photocurrent_psd",
    "photocurrent_psd_closed_form",
    "intracavity_psd",
    "intracavity_psd_closed_form",
    "fano_quadrature",
    "fano_closed_form",
    "relaxation_rates",
    "rational_spectrum_integral",
    "psd_peak",
    "spectrum_sweep",
]

FORCES = ("j", "q", "r", "s")


class Target(enum.Enum):
    DeltaQ = "DeltaQ"
    DeltaM = "DeltaM"


class SpectrumKind(enum.Enum):
    Photocurrent = "photocurrent"
    Intracavity = "intracavity"


class DarkLaserError(ValueError):
    """Spectra and Fano factor are normalized by the mean photon number."""


class SingularSystemError(ArithmeticError):
    pass


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LangevinDensities:
    sigma_j: float
    sigma_q: float
    sigma_r: float
    sigma_s: float

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma_j, self.sigma_q, self.sigma_r, self.sigma_s])


@dataclass(frozen=True)
class TransferCoeffs:
    target: Target
    omega: float
    c_j: complex
    c_q: complex
    c_r: complex
    c_s: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.c_j, self.c_q, self.c_r, self.c_s])


@dataclass(frozen=True)
class SpectrumSeries:
    omega: np.ndarray
    value: np.ndarray
    kind: SpectrumKind

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.omega.tolist(), self.value.tolist()))

    def __len__(self) -> int:
        return len(self.omega)


def langevin_densities(params: LaserParams, ss: SteadyState) -> LangevinDensities:
    return LangevinDensities(
        sigma_j=params.xi * params.J,
        sigma_q=params.alpha * ss.m,
        sigma_r=(ss.m + 1.0) * ss.n2,
        sigma_s=params.gamma * ss.n2,
    )


# unit forcing by j, q, r, s on the right-hand side (rows: dm eq, dn2 eq)
_FORCING = np.array([[0.0, -1.0, 1.0, 0.0], [1.0, 0.0, -1.0, -1.0]])


def _coefficients(params: LaserParams, ss: SteadyState, omega, target: Target) -> np.ndarray:
    """Transfer coefficients with shape ``omega.shape + (4,)``."""
    omega = np.asarray(omega, dtype=float)
    iw = 1j * omega
    A = np.empty(omega.shape + (2, 2), dtype=complex)
    A[..., 0, 0] = iw + params.alpha - ss.n2
    A[..., 0, 1] = -(ss.m + 1.0)
    A[..., 1, 0] = ss.n2
    A[..., 1, 1] = iw + ss.m_hat
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    scale = np.abs(A).max(axis=(-2, -1)) ** 2
    if np.any(np.abs(det) <= 1e-300 + 1e-14 * scale):
        raise SingularSystemError(
            "fluctuation system is singular; steady state inconsistent with parameters"
        )
    # Cramer's rule for the dm component: LU pivoting loses digits when m >> alpha
    X = (_FORCING[0] * A[..., 1, 1, None] - A[..., 0, 1, None] * _FORCING[1]) / det[..., None]
    c = X
    if target is Target.DeltaQ:
        c = params.alpha * c
        c[..., 1] += 1.0
    return c


def transfer_coefficients(
    params: LaserParams, ss: SteadyState, omega: float, target: Target = Target.DeltaQ
) -> TransferCoeffs:
    """Coefficients mapping each Langevin force onto ``dQ`` or ``dm`` at `omega`."""
    c = _coefficients(params, ss, float(omega), Target(target))
    return TransferCoeffs(Target(target), float(omega), *(complex(x) for x in c))


def _require_light(params: LaserParams, what: str) -> SteadyState:
    if params.J <= 0:
        raise DarkLaserError(f"{what} undefined for dark laser (J = 0)")
    ss = steady_state(params)
    if ss.m <= 0:
        raise DarkLaserError(f"{what} undefined for dark laser (m = 0)")
    return ss


def _scalar_or_array(omega, values):
    return float(values) if np.ndim(omega) == 0 else values


def photocurrent_psd(params: LaserParams, omega):
    """Photocurrent spectral density normalized to the shot-noise level.

    Accepts a scalar or an array of angular frequencies.
    """
    ss = _require_light(params, "spectrum")
    c = _coefficients(params, ss, omega, Target.DeltaQ)
    sig = langevin_densities(params, ss).as_array()
    S = (np.abs(c) ** 2 @ sig) / (params.alpha * ss.m)
    return _scalar_or_array(omega, S)


def intracavity_psd(params: LaserParams, omega):
    """Spectral density of the photon-number fluctuation, divided by ``m``."""
    ss = _require_light(params, "intracavity spectrum")
    c = _coefficients(params, ss, omega, Target.DeltaM)
    sig = langevin_densities(params, ss).as_array()
    S = (np.abs(c) ** 2 @ sig) / ss.m
    return _scalar_or_array(omega, S)


def _denominator_terms(params: LaserParams, ss: SteadyState) -> tuple[float, float]:
    """``(B, C)`` with ``D(w) = w**4 + B w**2 + C``."""
    k = params.gamma * ss.n2 - params.alpha * ss.m_hat
    B = (ss.m_hat + params.alpha - ss.n2) ** 2 + 2.0 * k
    return B, k * k


def _numerator_U(params: LaserParams, ss: SteadyState) -> tuple[float, float]:
    a, m, n2, mh = params.alpha, ss.m, ss.n2, ss.m_hat
    u2 = n2 * (3 * m + 1) - a * m
    u0 = n2 * (3 * m + 1) * params.gamma * mh - a * m * mh**2 + params.J * (m + 1) ** 2 * params.xi
    return u2, u0


def _numerator_V(params: LaserParams, ss: SteadyState) -> tuple[float, float]:
    a, m, n2, mh = params.alpha, ss.m, ss.n2, ss.m_hat
    v2 = n2 * (m + 1) + a * m
    v0 = n2 * (m + 1) * params.gamma * mh + a * m * mh**2 + params.J * (m + 1) ** 2 * params.xi
    return v2, v0


def photocurrent_psd_closed_form(params: LaserParams, omega):
    """``S = 1 + (alpha/m) U/D`` from the rational closed form.

    Evaluated in exact rational arithmetic on the floating-point inputs:
    where the spectrum dips far below shot noise ``1 + U/D`` cancels almost
    completely and double precision would keep only a few digits.
    """
    ss = _require_light(params, "spectrum")
    a, g, m, n2, J, xi = (Fraction(x) for x in (params.alpha, params.gamma, ss.m, ss.n2, params.J, params.xi))
    mh = m + g + 1
    k = g * n2 - a * mh
    B = (mh + a - n2) ** 2 + 2 * k
    C = k * k
    u2 = n2 * (3 * m + 1) - a * m
    u0 = n2 * (3 * m + 1) * g * mh - a * m * mh**2 + J * (m + 1) ** 2 * xi

    def S(w: float) -> float:
        w2 = Fraction(w) ** 2
        return float(1 + a / m * (u2 * w2 + u0) / (w2 * w2 + B * w2 + C))

    if np.ndim(omega) == 0:
        return S(float(omega))
    w = np.asarray(omega, dtype=float)
    return np.array([S(x) for x in w.ravel().tolist()]).reshape(w.shape)


def intracavity_psd_closed_form(params: LaserParams, omega):
    ss = _require_light(params, "intracavity spectrum")
    w2 = np.asarray(omega, dtype=float) ** 2
    B, C = _denominator_terms(params, ss)
    v2, v0 = _numerator_V(params, ss)
    D = w2 * w2 + B * w2 + C
    return _scalar_or_array(omega, (v2 * w2 + v0) / (ss.m * D))


def relaxation_rates(params: LaserParams, ss: SteadyState | None = None) -> tuple[complex, complex]:
    """Poles ``p, q`` of the fluctuation response, ``D(w) = (w^2 + p^2)(w^2 + q^2)``.

    Both have positive real part; they are complex conjugates when the
    relaxation oscillation is underdamped.
    """
    ss = ss or steady_state(params)
    total = ss.m_hat + params.alpha - ss.n2  # p + q
    prod = params.alpha * ss.m_hat - params.gamma * ss.n2  # p q
    disc = complex(total * total - 4.0 * prod) ** 0.5
    return 0.5 * (total + disc), 0.5 * (total - disc)


def rational_spectrum_integral(a: float, b: float, total: float, prod: float) -> float:
    """``int (a w^2 + b) / ((w^2 + p^2)(w^2 + q^2)) dw / 2 pi`` over the real line.

    Takes ``total = p + q`` and ``prod = p q`` (both positive), which are real
    even when ``p, q`` form a conjugate pair.
    """
    return (a + b / prod) / (2.0 * total)


def fano_closed_form(params: LaserParams) -> float:
    """Intracavity Fano factor from the exact integral of ``V/D``.

    With ``D = (w^2 + p^2)(w^2 + q^2)`` one has ``p + q = m_hat + alpha - n2``
    and ``p q = alpha m_hat - gamma n2`` for either pole configuration
    (real pair or conjugate pair), so the integral stays in real arithmetic.
    """
    ss = _require_light(params, "Fano factor")
    v2, v0 = _numerator_V(params, ss)
    total = ss.m_hat + params.alpha - ss.n2
    prod = params.alpha * ss.m_hat - params.gamma * ss.n2
    if total <= 0 or prod <= 0:
        raise SingularSystemError("fluctuation poles are not in the stable half-plane")
    return rational_spectrum_integral(v2, v0, total, prod) / ss.m


def fano_quadrature(params: LaserParams, rtol: float = 1e-8) -> float:
    """Fano factor as the numerical integral of the intracavity spectrum.

    The integrand is evaluated through the linear-system path, integrated on
    ``[0, omega_cut]`` over geometrically growing panels and completed by the
    asymptotic ``w**-2`` and ``w**-4`` tail terms.
    """
    ss = _require_light(params, "Fano factor")
    p, q = relaxation_rates(params, ss)
    scale = max(params.alpha, ss.m_hat, abs(p), abs(q))
    omega_cut = 1e3 * scale
    low = min(abs(p), abs(q), params.alpha, ss.m_hat) / 10.0

    def f(w):
        return intracavity_psd(params, w)

    edges = [0.0, low]
    while edges[-1] < omega_cut:
        edges.append(min(edges[-1] * 2.0, omega_cut))
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, abserr = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
        total += val
        err += abserr

    v2, v0 = _numerator_V(params, ss)
    B, _ = _denominator_terms(params, ss)
    tail = (v2 / omega_cut + (v0 - v2 * B) / (3.0 * omega_cut**3)) / ss.m
    F = (total + tail) / math.pi  # 2 * (1 / 2 pi) for the even integrand
    achieved = err / math.pi / abs(F)
    if not math.isfinite(F) or achieved > rtol:
        raise QuadratureError(f"Fano quadrature did not converge: achieved rtol {achieved:.3g}")
    return F


def psd_peak(params: LaserParams) -> tuple[float, float]:
    """Location and height of the photocurrent spectrum maximum over ``omega >= 0``.

    ``S - 1`` is ``(u2 x + u0) / (x^2 + B x + C)`` in ``x = omega^2``; its
    stationary points solve ``u2 x^2 + 2 u0 x + (u0 B - u2 C) = 0``.
    """
    ss = _require_light(params, "spectrum")
    B, C = _denominator_terms(params, ss)
    u2, u0 = _numerator_U(params, ss)

    candidates = [0.0]
    if u2 != 0.0:
        disc = u0 * u0 - u2 * (u0 * B - u2 * C)
        if disc >= 0.0:
            r = math.sqrt(disc)
            candidates += [x for x in ((-u0 + r) / u2, (-u0 - r) / u2) if x > 0.0]
    elif u0 != 0.0:
        x = (u2 * C - u0 * B) / (2.0 * u0)
        if x > 0.0:
            candidates.append(x)

    omegas = np.sqrt(np.array(candidates))
    values = np.asarray(photocurrent_psd(params, omegas))
    if len(candidates) == 1:
        # no interior stationary point from the quadratic: bounded search as fallback
        from scipy.optimize import minimize_scalar

        hi = 1e3 * max(params.alpha, ss.m_hat)
        res = minimize_scalar(
            lambda w: -photocurrent_psd(params, w), bounds=(0.0, hi), method="bounded"
        )
        omegas = np.append(omegas, res.x)
        values = np.append(values, -res.fun)

    best = int(np.argmax(values))
    if values[best] - min(float(values.min()), 1.0) < 1e-12:
        # flat spectrum: deterministic tie-break at zero frequency
        return 0.0, float(values[0])
    return float(omegas[best]), float(values[best])


def spectrum_sweep(
    params: LaserParams, omega_grid, kind: SpectrumKind = SpectrumKind.Photocurrent
) -> SpectrumSeries:
    grid = np.asarray(omega_grid, dtype=float).reshape(-1)
    kind = SpectrumKind(kind)
    if grid.size == 0:
        return SpectrumSeries(grid, grid.copy(), kind)
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("omega grid must be non-negative and strictly increasing")
    fn = photocurrent_psd if kind is SpectrumKind.Photocurrent else intracavity_psd
    return SpectrumSeries(grid, np.asarray(fn(params, grid), dtype=float), kind)
