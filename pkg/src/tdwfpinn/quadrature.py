"""Quadrature rules for the singular weight ``tau**(n - 1 - alpha)`` on (0, 1).

Two kinds of rules are provided:

* Gauss-Jacobi rules built with the Golub-Welsch procedure. The Jacobi matrix
  for the weight ``(1 + x)**b`` on [-1, 1] is diagonalised and the rule is
  mapped affinely to (0, 1).
* Monte Carlo rules whose nodes are draws from the ``Beta(a, 1)`` law with
  equal weights, so that ``sum(w * g(tau))`` estimates ``E[g(tau)]``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "MAX_GJ_POINTS",
    "QuadratureRule",
    "RuleKind",
    "beta_nodes_from_uniform",
    "gauss_jacobi_rule",
    "make_rng",
    "sample_beta_nodes",
]

MAX_GJ_POINTS = 512
# the Golub-Welsch rule degrades slowly past this size
GJ_WARN_POINTS = 128


class RuleKind(enum.Enum):
    GaussJacobi = "gauss-jacobi"
    MonteCarlo = "monte-carlo"


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    alpha: float
    kind: RuleKind

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, g) -> float:
        """Apply the rule to a callable or to precomputed samples of it."""
        values = g(self.nodes) if callable(g) else np.asarray(g)
        return float(self.weights @ values)


# {{{ Gauss-Jacobi


def _jacobi_recurrence(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Monic recurrence coefficients for the weight ``(1 - x)**a (1 + x)**b``.

    Returns the diagonal ``alpha_k`` and the squared off-diagonal ``beta_k``
    (``beta_0`` holds the total mass).
    """
    k = np.arange(m, dtype=np.float64)
    ab = a + b
    nab = 2.0 * k + ab

    diag = np.empty(m)
    diag[0] = (b - a) / (ab + 2.0)
    if m > 1:
        diag[1:] = (b * b - a * a) / (nab[1:] * (nab[1:] + 2.0))

    offsq = np.empty(m)
    offsq[0] = 2.0 ** (ab + 1.0) * math.exp(
        math.lgamma(a + 1.0) + math.lgamma(b + 1.0) - math.lgamma(ab + 2.0)
    )
    if m > 1:
        kk = k[1:]
        n = nab[1:]
        offsq[1:] = (
            4.0 * kk * (kk + a) * (kk + b) * (kk + ab) / (n * n * (n + 1.0) * (n - 1.0))
        )
    return diag, offsq


def gauss_jacobi_rule(m: int, alpha: float, n: int = 2) -> QuadratureRule:
    """Gauss rule for ``int_0^1 g(tau) tau**(n - 1 - alpha) dtau``.

    The rule is exact for polynomials *g* of degree at most ``2 m - 1``.

    :arg m: number of nodes, ``1 <= m <= 512``.
    :arg alpha: fractional order with ``n - 1 < alpha < n``.
    :arg n: integer ceiling of *alpha*, 1 or 2.
    """
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    if not (n - 1 < alpha < n):
        raise ValueError(f"alpha must lie in ({n - 1}, {n}) for n={n}, got {alpha}")
    if not (1 <= m <= MAX_GJ_POINTS):
        raise ValueError(f"number of points must be in [1, {MAX_GJ_POINTS}], got {m}")
    if m > GJ_WARN_POINTS:
        warnings.warn(
            f"Gauss-Jacobi rule with {m} > {GJ_WARN_POINTS} points may lose accuracy",
            RuntimeWarning,
            stacklevel=2,
        )

    bw = n - 1.0 - alpha
    diag, offsq = _jacobi_recurrence(m, 0.0, bw)
    mass = offsq[0]

    if m == 1:
        x = diag.copy()
        v0 = np.ones(1)
    else:
        x, vecs = eigh_tridiagonal(diag, np.sqrt(offsq[1:]))
        v0 = vecs[0, :]

    order = np.argsort(x)
    x = x[order]
    w = mass * v0[order] ** 2

    # (1 + x)**b dx = 2**(1 + b) tau**b dtau under x = 2 tau - 1
    nodes = 0.5 * (1.0 + x)
    weights = w / 2.0 ** (1.0 + bw)

    return QuadratureRule(nodes, weights, float(alpha), RuleKind.GaussJacobi)


# }}}


# {{{ Monte Carlo


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``.

    Distinct keys give independent streams, so results do not depend on how
    work is partitioned.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


def beta_nodes_from_uniform(u, a: float) -> np.ndarray:
    """Inverse CDF of ``Beta(a, 1)``: ``tau = u**(1 / a)``."""
    if not (0.0 < a <= 1.0):
        raise ValueError(f"Beta parameter must lie in (0, 1], got {a}")
    return np.asarray(u, dtype=np.float64) ** (1.0 / a)


def sample_beta_nodes(
    m: int, a: float, seed: int, stream: int = 0, *, n: int = 2
) -> QuadratureRule:
    """Equal-weight Monte Carlo rule with ``m`` sorted ``Beta(a, 1)`` nodes.

    ``a = n - alpha``; the returned rule estimates ``E[g(tau)]`` and callers
    supply the normalisation back to the weight ``tau**(a - 1)``.
    """
    if m < 1:
        raise ValueError(f"number of samples must be positive, got {m}")
    u = make_rng(seed, stream).random(m)
    nodes = np.sort(beta_nodes_from_uniform(u, a))
    weights = np.full(m, 1.0 / m)
    return QuadratureRule(nodes, weights, float(n - a), RuleKind.MonteCarlo)


# }}}
