"""Gamma and two-parameter Mittag-Leffler functions.

The Mittag-Leffler function

.. math::

    E_{\\alpha,\\beta}(z) = \\sum_{k \\ge 0} \\frac{z^k}{\\Gamma(\\alpha k + \\beta)}

is evaluated on the real line with a region-dependent strategy:

* ``|z| <= 1``: plain Taylor series;
* ``1 < |z| <= 8``: Kahan-compensated Taylor series with a cancellation guard;
* ``z < -8`` (or a tripped guard): inversion of the Laplace transform
  ``s**(alpha - beta) / (s**alpha - z)`` on an optimally placed parabolic
  contour, with residues added for the poles left outside the contour.

For ``alpha == 1`` the poles sit on the branch cut, so that case is handled by
the Euler integral of the incomplete gamma function instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AccuracyError",
    "MLParams",
    "PoleError",
    "gamma",
    "mittag_leffler",
    "rgamma",
]

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

EPS = np.finfo(np.float64).eps

SERIES_RADIUS = 1.0
COMPENSATED_RADIUS = 8.0
SERIES_MAX_TERMS = 200
# max|term| / |sum| above which the compensated series is abandoned
CANCELLATION_LIMIT = 1.0e4
CONTOUR_NODES = 64


class PoleError(ValueError):
    """Raised when the Gamma function is asked for a value at a pole."""


class AccuracyError(ArithmeticError):
    """Raised when an internal error estimate exceeds the requested tolerance."""

    def __init__(self, message: str, estimate: float = math.nan) -> None:
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(
                f"Mittag-Leffler parameters must be positive: "
                f"alpha={self.alpha}, beta={self.beta}"
            )


# {{{ gamma


def _gamma_lanczos(x: float) -> float:
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _gamma_lanczos(1.0 - x))

    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    # split the power to avoid overflow for x near 170
    half = t ** (0.5 * (x + 0.5))
    return math.sqrt(2.0 * math.pi) * half * (half * math.exp(-t)) * acc


def gamma(x: float) -> float:
    """Gamma function via the Lanczos approximation (``g = 7``, 9 terms).

    Arguments below 1/2 use the reflection formula.

    :raises PoleError: if *x* is zero or a negative integer.
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"gamma has a pole at x = {x}")
    return _gamma_lanczos(x)


def rgamma(x: float) -> float:
    """Reciprocal Gamma function, zero at the poles of :func:`gamma`."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        return 0.0
    if x > 171.0:
        return math.exp(-math.lgamma(x))
    return 1.0 / _gamma_lanczos(x)


# }}}


# {{{ series


def _ml_series(z: float, alpha: float, beta: float) -> tuple[float, float]:
    """Compensated Taylor sum. Returns the sum and ``max|term| / |sum|``."""
    total = 0.0
    comp = 0.0
    max_term = 0.0
    prev = math.inf
    zk = 1.0
    for k in range(SERIES_MAX_TERMS):
        term = zk * rgamma(alpha * k + beta)
        max_term = max(max_term, abs(term))

        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t

        # terms decrease monotonically once past the peak
        if abs(term) <= prev and abs(term) <= 0.1 * EPS * abs(total):
            break
        prev = abs(term)
        zk *= z
    else:
        raise AccuracyError(
            f"Mittag-Leffler series did not converge in {SERIES_MAX_TERMS} terms "
            f"(z={z}, alpha={alpha}, beta={beta})"
        )

    ratio = max_term / abs(total) if total != 0.0 else math.inf
    return total, ratio


# }}}


# {{{ Laplace transform inversion


@dataclass(frozen=True)
class _Contour:
    mu: float
    h: float
    error: float


def _pole_locations(z: float, alpha: float) -> list[complex]:
    """Poles of ``1 / (s**alpha - z)`` on the principal sheet."""
    theta = math.atan2(0.0, z) if z != 0 else 0.0
    if z < 0:
        theta = math.pi

    kmin = math.ceil(-alpha / 2.0 - theta / (2.0 * math.pi))
    kmax = math.floor(alpha / 2.0 - theta / (2.0 * math.pi))
    r = abs(z) ** (1.0 / alpha)

    poles = []
    for k in range(kmin, kmax + 1):
        phi = (theta + 2.0 * math.pi * k) / alpha
        if abs(phi) < math.pi:
            poles.append(r * complex(math.cos(phi), math.sin(phi)))
    return poles


def _parabola_level(s: complex) -> float:
    """Parameter ``mu`` of the parabola ``mu * (1 + i u)**2`` passing through *s*."""
    return 0.5 * (abs(s) + s.real)


def _log_error(mu, h, nodes: int, lower: float, upper: float):
    """Natural log of the modelled quadrature error on a parabolic contour.

    *lower* and *upper* are the parabola levels of the nearest singularities
    enclosed by and excluded from the contour (``upper`` may be infinite).
    Broadcasts over arrays of *mu* and *h*.
    """
    # strip half-widths toward the inner and outer singularities
    d_in = 0.95 * (1.0 - np.sqrt(lower / mu))
    if math.isinf(upper):
        d_out = np.maximum(np.pi / (mu * h) - 1.0, 1.0e-3)
    else:
        d_out = np.sqrt(upper / mu) - 1.0
    d_out = 0.95 * d_out

    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.maximum.reduce([
            mu * (1.0 - d_in) ** 2 - 2.0 * np.pi * d_in / h,
            mu * (1.0 + d_out) ** 2 - 2.0 * np.pi * d_out / h,
            mu * (1.0 - (nodes * h) ** 2),
            mu + np.log(EPS),
        ]) + np.log(4.0 * mu * (1.0 + nodes * h))

    return np.where((d_in > 0.0) & (d_out > 0.0), err, np.inf)


def _choose_contour(lower: float, upper: float, nodes: int) -> _Contour | None:
    if math.isinf(upper):
        mu_grid = np.geomspace(max(lower, 1.0e-3) * 1.01 + 0.05, 60.0, 120)
    else:
        if upper <= lower * 1.0001:
            return None
        mu_grid = np.geomspace(
            max(lower, 1.0e-6 * upper) * 1.0001, upper / 1.0001, 120
        )
    h_grid = np.linspace(0.2, 6.0, 120) / nodes

    mu, h = np.meshgrid(mu_grid, h_grid, indexing="ij")
    err = _log_error(mu, h, nodes, lower, upper)
    i = np.unravel_index(np.argmin(err), err.shape)
    return _Contour(float(mu[i]), float(h[i]), float(err[i]))


def _ml_contour(z: float, alpha: float, beta: float) -> tuple[float, float]:
    """Laplace-inversion evaluation. Returns the value and an error estimate."""
    poles = _pole_locations(z, alpha)
    levels = sorted({0.0, *(_parabola_level(p) for p in poles)})

    # the contour sits between two consecutive singularity levels, or above all
    best: tuple[_Contour, float] | None = None
    for i, lower in enumerate(levels):
        upper = levels[i + 1] if i + 1 < len(levels) else math.inf
        c = _choose_contour(lower, upper, CONTOUR_NODES)
        if c is not None and (best is None or c.error < best[0].error):
            best = (c, lower)

    assert best is not None
    contour, _ = best
    mu, h = contour.mu, contour.h

    u = h * np.arange(0, CONTOUR_NODES + 1)
    s = mu * (1.0 + 1j * u) ** 2
    ds = 1.0 + 1j * u
    g = np.exp(s) * s ** (alpha - beta) / (s**alpha - z) * ds
    # real z: the integrand on -u is the conjugate of the one on +u
    integral = 2.0 * mu * h / math.pi * (0.5 * g[0].real + np.sum(g[1:].real))

    residues = 0.0
    for p in poles:
        if _parabola_level(p) > mu:
            residues += (p ** (1.0 - beta) * np.exp(p) / alpha).real

    return float(integral + residues), math.exp(contour.error)


def _ml_alpha_one(z: float, beta: float) -> float:
    """``E_{1, beta}(z)`` through the Euler integral of the incomplete gamma.

    For ``beta > 1``, ``E_{1,beta}(z) = int_0^1 exp(z s) (1 - s)**(beta - 2) ds
    / Gamma(beta - 1)``; the integrand is positive, so relative accuracy is
    kept even when the result is exponentially small.
    """
    if beta == 1.0:
        return math.exp(z)
    if beta < 1.0:
        return z * _ml_alpha_one(z, beta + 1.0) + rgamma(beta)

    from scipy.special import roots_jacobi

    # weight (1 - x)**(beta - 2) on [-1, 1], mapped to s = (1 + x) / 2
    x, w = roots_jacobi(64, beta - 2.0, 0.0)
    s = 0.5 * (1.0 + x)
    value = 0.5 ** (beta - 1.0) * np.sum(w * np.exp(z * s))
    return float(value * rgamma(beta - 1.0))


# }}}


def _ml_scalar(z: float, alpha: float, beta: float, tol: float) -> float:
    if z == 0.0:
        return rgamma(beta)

    if abs(z) <= SERIES_RADIUS or z > 0.0:
        value, _ = _ml_series(z, alpha, beta)
        return value

    if abs(z) <= COMPENSATED_RADIUS:
        value, ratio = _ml_series(z, alpha, beta)
        if ratio <= CANCELLATION_LIMIT:
            return value

    if alpha == 1.0:
        return _ml_alpha_one(z, beta)

    value, error = _ml_contour(z, alpha, beta)
    if error > tol * max(1.0, abs(value)):
        raise AccuracyError(
            f"Mittag-Leffler contour error estimate {error:.3e} exceeds tolerance "
            f"(z={z}, alpha={alpha}, beta={beta})",
            estimate=value,
        )
    return value


def mittag_leffler(z, alpha: float, beta: float = 1.0, *, tol: float = 1.0e-10):
    """Evaluate the two-parameter Mittag-Leffler function at real *z*.

    :arg z: scalar or array of real arguments.
    :arg tol: admissible (scaled) error estimate of the contour evaluation.
    :raises AccuracyError: if the contour error estimate exceeds *tol*.
    """
    p = MLParams(float(alpha), float(beta))

    z_arr = np.asarray(z, dtype=np.float64)
    if z_arr.ndim == 0:
        return _ml_scalar(float(z_arr), p.alpha, p.beta, tol)

    out = np.empty_like(z_arr)
    for idx, zi in np.ndenumerate(z_arr):
        out[idx] = _ml_scalar(float(zi), p.alpha, p.beta, tol)
    return out
