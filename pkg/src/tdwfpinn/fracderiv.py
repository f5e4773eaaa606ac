r"""Mesh-free estimators of the Caputo derivative.

For :math:`\alpha \in (1, 2)` two equivalent integral representations are
used. The *direct* (Type I) form integrates first derivatives,

.. math::

    \partial_t^\alpha f(t) = \frac{1}{\Gamma(2 - \alpha)} \left\{
        \frac{f'(t) - f'(0)}{t^{\alpha - 1}}
        + (\alpha - 1) t^{2 - \alpha} \int_0^1
            \frac{f'(t) - f'(t - t\tau)}{t\tau} \tau^{1 - \alpha} d\tau
    \right\},

while the *transformed* (Type II) form only needs values at shifted times,

.. math::

    \partial_t^\alpha f(t) = \frac{1}{\Gamma(2 - \alpha)} \left\{
        \frac{f'(t) - f'(0)}{t^{\alpha - 1}}
        - (\alpha - 1) \frac{f(t) - f(0) - t f'(t)}{t^\alpha}
        - \alpha (\alpha - 1) t^{2 - \alpha} \int_0^1
            \frac{f(t) - f(t - t\tau) - t\tau f'(t)}{(t\tau)^2}
            \tau^{1 - \alpha} d\tau
    \right\}.

The integrals are discretised either with Gauss-Jacobi rules for the weight
:math:`\tau^{1 - \alpha}` or with Monte Carlo samples of
:math:`\mathrm{Beta}(2 - \alpha, 1)`. The :math:`\alpha \in (0, 1)` baselines
use the analogous first-order representation with values only.

All estimators are linear in the field. :meth:`CaputoEstimator.combine` only
uses arithmetic, broadcasting and row sums, so it runs unchanged on the
autodiff arrays of :mod:`tdwfpinn.autodiff`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Protocol

import numpy as np

from tdwfpinn.quadrature import gauss_jacobi_rule, make_rng
from tdwfpinn.specfun import AccuracyError, gamma, mittag_leffler

__all__ = [
    "DEFAULT_EPSILON",
    "CaputoEstimator",
    "CountingField",
    "EstimatorConfig",
    "ExponentialField",
    "FunctionField",
    "PolynomialField",
    "Scheme",
    "SineField",
    "TemporalField",
    "caputo_base",
    "caputo_gj1",
    "caputo_gj2",
    "caputo_mc1",
    "caputo_mc2",
    "caputo_reference",
    "estimate",
    "exponential_caputo",
]


class Scheme(enum.Enum):
    MC_I = "mc1"
    GJ_I = "gj1"
    MC_II = "mc2"
    GJ_II = "gj2"
    MC_Base = "mc-base"
    GJ_Base = "gj-base"

    @property
    def is_monte_carlo(self) -> bool:
        return self in (Scheme.MC_I, Scheme.MC_II, Scheme.MC_Base)

    @property
    def is_baseline(self) -> bool:
        return self in (Scheme.MC_Base, Scheme.GJ_Base)

    @property
    def is_transformed(self) -> bool:
        return self in (Scheme.MC_II, Scheme.GJ_II)

    @property
    def shifted_quantity(self) -> str:
        """Which field quantity is queried at the shifted times."""
        return "derivative" if self in (Scheme.MC_I, Scheme.GJ_I) else "value"

    @classmethod
    def parse(cls, name: str | Scheme) -> Scheme:
        if isinstance(name, Scheme):
            return name
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "mc-i": "mc1", "gj-i": "gj1", "mc-ii": "mc2", "gj-ii": "gj2",
            "mcbase": "mc-base", "gjbase": "gj-base",
        }
        key = aliases.get(key, key)
        for s in cls:
            if s.value == key or s.name.lower().replace("_", "-") == key:
                return s
        raise ValueError(f"unknown scheme: {name!r}")


DEFAULT_EPSILON = {
    Scheme.MC_I: 1.0e-10,
    Scheme.MC_II: 1.0e-7,
    Scheme.MC_Base: 1.0e-10,
}


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters of a Caputo-derivative estimator.

    ``epsilon_clip`` defaults per scheme (1e-10 for MC-I, 1e-7 for MC-II) and
    is ignored by the Gauss-Jacobi schemes.
    """

    alpha: float
    scheme: Scheme
    m_points: int
    epsilon_clip: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.scheme.is_baseline:
            if not 0.0 < self.alpha < 1.0:
                raise ValueError(f"{self.scheme.name} needs alpha in (0, 1), got {self.alpha}")
        elif not 1.0 < self.alpha < 2.0:
            raise ValueError(f"{self.scheme.name} needs alpha in (1, 2), got {self.alpha}")
        if self.m_points < 1:
            raise ValueError(f"m_points must be positive, got {self.m_points}")
        if self.epsilon_clip is None:
            object.__setattr__(self, "epsilon_clip", DEFAULT_EPSILON.get(self.scheme, 0.0))
        if self.epsilon_clip < 0:
            raise ValueError(f"epsilon_clip must be non-negative, got {self.epsilon_clip}")

    @property
    def n(self) -> int:
        return 1 if self.scheme.is_baseline else 2


# {{{ temporal fields


class TemporalField(Protocol):
    """A function of time with its first derivative.

    Times may be passed with shape ``(N,)`` or ``(N, M)``; row ``i`` belongs
    to query point ``i``, which lets a field carry per-row data (such as the
    spatial coordinate of a network section).
    """

    def value(self, t: np.ndarray) -> np.ndarray: ...

    def first_derivative(self, t: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ExponentialField:
    """``f(t) = scale * exp(lam * t)``."""

    lam: float
    scale: float = 1.0

    def value(self, t):
        return self.scale * np.exp(self.lam * np.asarray(t, dtype=np.float64))

    def first_derivative(self, t):
        return self.lam * self.value(t)


@dataclass(frozen=True)
class SineField:
    """``f(t) = sin(omega * t + phase)``."""

    omega: float
    phase: float = 0.0

    def value(self, t):
        return np.sin(self.omega * np.asarray(t, dtype=np.float64) + self.phase)

    def first_derivative(self, t):
        return self.omega * np.cos(self.omega * np.asarray(t, dtype=np.float64) + self.phase)


@dataclass(frozen=True)
class PolynomialField:
    """``f(t) = sum_k coeffs[k] * t**k``."""

    coeffs: tuple[float, ...]

    def value(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=np.float64), self.coeffs)

    def first_derivative(self, t):
        dc = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=np.float64), dc)


class FunctionField:
    def __init__(self, value, first_derivative) -> None:
        self._value = value
        self._derivative = first_derivative

    def value(self, t):
        return np.asarray(self._value(np.asarray(t, dtype=np.float64)), dtype=np.float64)

    def first_derivative(self, t):
        return np.asarray(self._derivative(np.asarray(t, dtype=np.float64)), dtype=np.float64)


class CountingField:
    """Wraps a field and records the size of every value/derivative query."""

    def __init__(self, field: TemporalField) -> None:
        self.field = field
        self.value_calls: list[int] = []
        self.derivative_calls: list[int] = []

    @property
    def value_queries(self) -> int:
        return sum(self.value_calls)

    @property
    def derivative_queries(self) -> int:
        return sum(self.derivative_calls)

    def reset(self) -> None:
        self.value_calls.clear()
        self.derivative_calls.clear()

    def value(self, t):
        self.value_calls.append(np.size(t))
        return self.field.value(t)

    def first_derivative(self, t):
        self.derivative_calls.append(np.size(t))
        return self.field.first_derivative(t)


# }}}


# {{{ estimators


def _col(a):
    return a[:, None]


class CaputoEstimator:
    """Batched Caputo-derivative estimator for a fixed configuration.

    Monte Carlo nodes are drawn per query point from a stream keyed by
    ``(seed, *key)``: row ``i`` of a batch of ``N`` queries always receives the
    ``i``-th block of ``M`` draws, independent of how batches are split.
    """

    def __init__(self, cfg: EstimatorConfig) -> None:
        self.cfg = cfg
        self.alpha = cfg.alpha
        self.scheme = cfg.scheme

    @cached_property
    def rule(self):
        if self.scheme.is_monte_carlo:
            return None
        return gauss_jacobi_rule(self.cfg.m_points, self.alpha, n=self.cfg.n)

    @property
    def shifted_quantity(self) -> str:
        return self.scheme.shifted_quantity

    def nodes(self, n_queries: int, key: tuple[int, ...] = ()) -> np.ndarray:
        """Quadrature nodes with shape ``(n_queries, M)``."""
        m = self.cfg.m_points
        if self.rule is not None:
            return np.broadcast_to(self.rule.nodes, (n_queries, m))

        a = self.cfg.n - self.alpha
        u = make_rng(self.cfg.seed, *key).random((n_queries, m))
        return np.sort(u ** (1.0 / a), axis=1)

    def weights(self) -> np.ndarray:
        if self.rule is not None:
            return np.asarray(self.rule.weights)
        return np.full(self.cfg.m_points, 1.0 / self.cfg.m_points)

    def shifted_times(self, t: np.ndarray, tau: np.ndarray) -> np.ndarray:
        return _col(t) * (1.0 - tau)

    def combine(self, t, tau, f_t, df_t, f_0, df_0, shifted):
        """Assemble the estimate from field samples.

        :arg t: query times, shape ``(N,)``.
        :arg tau: nodes from :meth:`nodes`, shape ``(N, M)``.
        :arg f_t, df_t, f_0, df_0: ``f(t)``, ``f'(t)``, ``f(0)``, ``f'(0)``,
            each of shape ``(N,)`` (``df_*`` unused by the baselines).
        :arg shifted: ``f`` or ``f'`` at :meth:`shifted_times` (as given by
            :attr:`shifted_quantity`), shape ``(N, M)``.
        """
        alpha = self.alpha
        scheme = self.scheme
        t = np.asarray(t, dtype=np.float64)
        w = self.weights()
        tt = _col(t)

        # the realised shift t - fl(t (1 - tau)) is exact, so the brackets
        # below carry no rounding error from the shifted times themselves
        s = tt - self.shifted_times(t, tau)
        if scheme.is_monte_carlo:
            s_eps = tt * np.maximum(tau, self.cfg.epsilon_clip / tt)
            # Beta(n - alpha, 1) has density (n - alpha) tau**(n - 1 - alpha)
            norm = 1.0 / (self.cfg.n - alpha)
        else:
            s_eps = s
            norm = 1.0

        if scheme.is_baseline:
            g = (_col(f_t) - shifted) / s_eps
            integral = (g * w).sum(axis=1)
            out = (alpha * norm) * t ** (1.0 - alpha) * integral + (f_t - f_0) / t**alpha
            return out / gamma(1.0 - alpha)

        head = (df_t - df_0) * t ** (1.0 - alpha)
        if scheme.is_transformed:
            g = (_col(f_t) - shifted - s * _col(df_t)) / s_eps**2
            integral = (g * w).sum(axis=1)
            out = (
                head
                - (alpha - 1.0) * (f_t - f_0 - t * df_t) / t**alpha
                - (alpha * (alpha - 1.0) * norm) * t ** (2.0 - alpha) * integral
            )
        else:
            g = (_col(df_t) - shifted) / s_eps
            integral = (g * w).sum(axis=1)
            out = head + ((alpha - 1.0) * norm) * t ** (2.0 - alpha) * integral

        return out / gamma(2.0 - alpha)

    def rounding_bound(self, t, scale: float, key: tuple[int, ...] = ()) -> np.ndarray:
        """First-order estimate of the rounding error of the quadrature sum.

        Each bracket is a difference of field samples of size about *scale*
        (``|f|`` for the transformed schemes, ``|f'|`` otherwise, ``|f|`` for
        the baselines) and so carries an absolute error of about
        ``eps * scale``, which the sum divides by ``s`` or ``s**2``. Near
        ``alpha = 2`` the smallest Gauss-Jacobi nodes make this the dominant
        error of the transformed schemes.
        """
        alpha, scheme = self.alpha, self.scheme
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        tau = self.nodes(t.size, key)
        s = _col(t) - self.shifted_times(t, tau)
        if scheme.is_monte_carlo:
            s = np.maximum(s, self.cfg.epsilon_clip)
            norm = 1.0 / (self.cfg.n - alpha)
        else:
            norm = 1.0
        w = self.weights()
        eps = np.finfo(np.float64).eps

        if scheme.is_baseline:
            pref = alpha * norm * t ** (1.0 - alpha) / abs(gamma(1.0 - alpha))
            return eps * scale * pref * (w / s).sum(axis=1)
        if scheme.is_transformed:
            pref = alpha * (alpha - 1.0) * norm * t ** (2.0 - alpha) / gamma(2.0 - alpha)
            return eps * scale * pref * (w / s**2).sum(axis=1)
        pref = (alpha - 1.0) * norm * t ** (2.0 - alpha) / gamma(2.0 - alpha)
        return eps * scale * pref * (w / s).sum(axis=1)

    def __call__(self, field: TemporalField, t, key: tuple[int, ...] = ()):
        """Estimate the Caputo derivative of *field* at time(s) *t* > 0."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if t_arr.ndim != 1:
            raise ValueError("query times must be a scalar or a 1-d array")
        if np.any(t_arr <= 0.0):
            raise ValueError("Caputo estimators are defined for t > 0 only")

        n = t_arr.size
        tau = self.nodes(n, key)
        shifted_t = self.shifted_times(t_arr, tau)
        zeros = np.zeros_like(t_arr)

        f_t = field.value(t_arr)
        f_0 = field.value(zeros)
        if self.scheme.is_baseline:
            df_t = df_0 = None
        else:
            df_t = field.first_derivative(t_arr)
            df_0 = field.first_derivative(zeros)

        if self.shifted_quantity == "value":
            shifted = field.value(shifted_t)
        else:
            shifted = field.first_derivative(shifted_t)

        out = self.combine(t_arr, tau, f_t, df_t, f_0, df_0, shifted)
        return float(out[0]) if np.ndim(t) == 0 else out


def _checked(cfg: EstimatorConfig, allowed: tuple[Scheme, ...]) -> CaputoEstimator:
    if cfg.scheme not in allowed:
        names = ", ".join(s.name for s in allowed)
        raise ValueError(f"expected scheme in {{{names}}}, got {cfg.scheme.name}")
    return CaputoEstimator(cfg)


def estimate(cfg: EstimatorConfig, f: TemporalField, t, key: tuple[int, ...] = ()):
    """Dispatch to the estimator selected by ``cfg.scheme``."""
    return CaputoEstimator(cfg)(f, t, key)


def caputo_mc1(cfg: EstimatorConfig, f: TemporalField, t, key=()):
    """Direct-form Monte Carlo estimate (shifted first derivatives)."""
    return _checked(cfg, (Scheme.MC_I,))(f, t, key)


def caputo_gj1(cfg: EstimatorConfig, f: TemporalField, t, key=()):
    """Direct-form Gauss-Jacobi estimate (shifted first derivatives)."""
    return _checked(cfg, (Scheme.GJ_I,))(f, t, key)


def caputo_mc2(cfg: EstimatorConfig, f: TemporalField, t, key=()):
    """Transformed-form Monte Carlo estimate (shifted values only)."""
    return _checked(cfg, (Scheme.MC_II,))(f, t, key)


def caputo_gj2(cfg: EstimatorConfig, f: TemporalField, t, key=()):
    """Transformed-form Gauss-Jacobi estimate (shifted values only)."""
    return _checked(cfg, (Scheme.GJ_II,))(f, t, key)


def caputo_base(cfg: EstimatorConfig, f: TemporalField, t, key=()):
    """First-order (``0 < alpha < 1``) Monte Carlo or Gauss-Jacobi estimate."""
    return _checked(cfg, (Scheme.MC_Base, Scheme.GJ_Base))(f, t, key)


# }}}


# {{{ reference


# dyadic panels on [TAU_SPLIT, 1] for the values-only integrand
OUTER_PANELS = 4
TAU_SPLIT = 0.5**OUTER_PANELS


def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _reference_one(alpha: float, f: TemporalField, t: float, order: int) -> float:
    tt = np.array([t])
    f_t = float(f.value(tt)[0])
    f_0 = float(f.value(np.zeros(1))[0])
    df_t = float(f.first_derivative(tt)[0])
    df_0 = float(f.first_derivative(np.zeros(1))[0])

    # outer piece: values-only integrand, composite Gauss-Legendre in tau
    x, w = _gauss_legendre(order)
    lo = TAU_SPLIT * 2.0 ** np.arange(OUTER_PANELS)
    tau = lo[:, None] * (1.0 + x[None, :])
    s = t * tau
    g = (f_t - f.value(t - s) - s * df_t) / s**2
    outer = float(np.sum(lo[:, None] * w[None, :] * g * tau ** (1.0 - alpha)))

    # inner piece: integrate by parts onto H(s) = (f'(t) - f'(t - s)) / s,
    # which loses far fewer digits as s -> 0, then replace H by its Chebyshev
    # interpolant so no samples are taken where cancellation is worst
    big_s = t * TAU_SPLIT
    b_split = f_t - float(f.value(np.array([t - big_s]))[0]) - big_s * df_t

    cheb_u = 0.5 * (1.0 - np.cos(np.pi * (np.arange(order) + 0.5) / order))
    h = (df_t - f.first_derivative(t - big_s * cheb_u)) / (big_s * cheb_u)
    interp = np.polynomial.Chebyshev.fit(cheb_u, h, order - 1, domain=[0.0, 1.0])

    from scipy.special import roots_jacobi

    # weight u**(1 - alpha) on [0, 1] from (1 + y)**(1 - alpha) on [-1, 1]
    y, wy = roots_jacobi(order, 0.0, 1.0 - alpha)
    u = 0.5 * (1.0 + y)
    h_moment = float(np.sum(wy * interp(u))) / 2.0 ** (2.0 - alpha)

    inner_s = -b_split * big_s ** (-alpha) / alpha - big_s ** (2.0 - alpha) * h_moment / alpha
    integral = outer + t ** (alpha - 2.0) * inner_s

    return (
        (df_t - df_0) * t ** (1.0 - alpha)
        - (alpha - 1.0) * (f_t - f_0 - t * df_t) / t**alpha
        - alpha * (alpha - 1.0) * t ** (2.0 - alpha) * integral
    ) / gamma(2.0 - alpha)


def caputo_reference(alpha: float, f: TemporalField, t, tol: float = 1.0e-9):
    """High-accuracy Caputo derivative of order ``1 < alpha < 2``.

    Evaluates the transformed representation independently of the estimator
    rules. Away from ``tau = 0`` the values-only integrand is integrated with
    composite Gauss-Legendre on dyadic panels. Near the singular endpoint it
    is integrated by parts onto the first-derivative difference quotient,
    which is sampled at Chebyshev points and integrated against the weight by
    a SciPy Gauss-Jacobi rule. The error is estimated by comparing 16- and
    24-point versions.

    :raises AccuracyError: if the estimated absolute error exceeds *tol*; the
        best estimate is attached as ``exc.estimate``.
    """
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    if tol < 1.0e-12:
        raise ValueError(f"tolerance below 1e-12 is not supported, got {tol}")

    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t_arr <= 0.0):
        raise ValueError("the Caputo derivative is evaluated for t > 0 only")

    out = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        v16 = _reference_one(alpha, f, float(ti), 16)
        v24 = _reference_one(alpha, f, float(ti), 24)
        err = abs(v24 - v16)
        if err > tol:
            raise AccuracyError(
                f"reference Caputo derivative error estimate {err:.3e} exceeds {tol:.1e} "
                f"(alpha={alpha}, t={ti})",
                estimate=v24,
            )
        out[i] = v24

    return float(out[0]) if np.ndim(t) == 0 else out


# }}}


def exponential_caputo(lam: float, alpha: float, t):
    r"""Exact Caputo derivative of :math:`e^{\lambda t}`.

    ``lam**n * t**(n - alpha) * E_{1, n + 1 - alpha}(lam * t)`` with
    ``n = ceil(alpha)``.
    """
    n = math.ceil(alpha)
    t = np.asarray(t, dtype=np.float64)
    return lam**n * t ** (n - alpha) * mittag_leffler(lam * t, 1.0, n + 1.0 - alpha)
