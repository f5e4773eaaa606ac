"""Finite-difference reference solutions for problems without a closed form.

Time is discretised with the L1-type scheme for orders ``1 < alpha < 2``
(the L1 rule applied to ``v = u_t``, collocated at half steps):

.. math::

    \\partial_t^\\alpha u(t_{n-1/2}) \\approx
    \\frac{\\tau^{1-\\alpha}}{\\Gamma(3-\\alpha)} \\Big[
        b_0 \\delta u^{n-1/2}
        - \\sum_{k=1}^{n-1} (b_{n-k-1} - b_{n-k}) \\delta u^{k-1/2}
        - b_{n-1} \\psi \\Big],
    \\quad b_j = (j+1)^{2-\\alpha} - j^{2-\\alpha},

where ``delta u^{k-1/2} = (u^k - u^{k-1}) / tau`` and ``psi = u_t(0)``. The
spatial operator uses second-order central differences at the averaged
state ``(u^n + u^{n-1}) / 2``, and each step is solved by Newton's method
with a tridiagonal Jacobian.

This is only used to score trained networks on the Burgers problem; the
linear catalog problems double as its test cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from tdwfpinn.problems import Burgers, LinearDiffusion, ProblemSpec
from tdwfpinn.specfun import gamma

__all__ = ["ReferenceSolution", "solve_reference"]

NEWTON_TOL = 1.0e-12
NEWTON_MAX_ITER = 30


@dataclass
class ReferenceSolution:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray  # shape (len(t), len(x))

    def __call__(self, t, x) -> np.ndarray:
        """Bilinear interpolation at broadcastable *t*, *x*."""
        interp = RegularGridInterpolator((self.t, self.x), self.u)
        t, x = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(x, dtype=np.float64))
        return interp(np.column_stack([t.ravel(), x.ravel()])).reshape(t.shape)


def _operator(problem: ProblemSpec, v: np.ndarray, h: float):
    """Interior values of ``N(v)`` and its tridiagonal Jacobian (banded form)."""
    op = problem.operator
    if isinstance(op, LinearDiffusion):
        nu, adv = op.coef, False
    elif isinstance(op, Burgers):
        nu, adv = op.visc, True
    else:
        raise TypeError(f"unsupported operator {op!r}")

    # v includes the two Dirichlet boundary values
    vm, vc, vp = v[:-2], v[1:-1], v[2:]
    lap = (vp - 2.0 * vc + vm) / h**2
    val = -nu * lap
    n = vc.size
    band = np.zeros((3, n))
    band[0, 1:] = -nu / h**2
    band[1, :] = 2.0 * nu / h**2
    band[2, :-1] = -nu / h**2
    if adv:
        grad = (vp - vm) / (2.0 * h)
        val = val + vc * grad
        band[1, :] += grad
        band[0, 1:] += vc[:-1] / (2.0 * h)
        band[2, :-1] -= vc[1:] / (2.0 * h)
    return val, band


def solve_reference(problem: ProblemSpec, nx: int = 2048, nt: int = 1000) -> ReferenceSolution:
    """Solve *problem* on ``nt`` uniform time steps and ``nx`` space intervals."""
    if nx < 4 or nt < 1:
        raise ValueError("need at least 4 space intervals and 1 time step")
    alpha = problem.alpha
    x = np.linspace(problem.x_lo, problem.x_hi, nx + 1)
    t = np.linspace(0.0, problem.T, nt + 1)
    h = x[1] - x[0]
    tau = t[1] - t[0]

    j = np.arange(nt + 1, dtype=np.float64)
    b = (j + 1.0) ** (2.0 - alpha) - j ** (2.0 - alpha)
    scale = tau ** (1.0 - alpha) / gamma(3.0 - alpha)

    u = np.zeros((nt + 1, nx + 1))
    u[0] = problem.initial_value(x)
    u[0, [0, -1]] = 0.0
    psi = problem.initial_velocity(x)[1:-1]
    deltas = np.zeros((nt, nx - 1))  # (u^k - u^{k-1}) / tau at interior nodes

    for n in range(1, nt + 1):
        # memory term from earlier steps; coefficients b_{n-k-1} - b_{n-k}
        if n > 1:
            k = np.arange(1, n)
            coef = b[n - k - 1] - b[n - k]
            memory = coef @ deltas[: n - 1]
        else:
            memory = 0.0
        rhs_const = scale * (-memory - b[n - 1] * psi)

        prev = u[n - 1]
        guess = prev.copy()
        for _ in range(NEWTON_MAX_ITER):
            mid = 0.5 * (guess + prev)
            val, band = _operator(problem, mid, h)
            res = scale * b[0] * (guess[1:-1] - prev[1:-1]) / tau + rhs_const + val
            band = 0.5 * band
            band[1] += scale * b[0] / tau
            step = solve_banded((1, 1), band, -res)
            guess[1:-1] += step
            if np.max(np.abs(step)) <= NEWTON_TOL * max(1.0, np.max(np.abs(guess))):
                break
        else:
            raise ArithmeticError(f"Newton iteration did not converge at step {n}")

        u[n] = guess
        deltas[n - 1] = (guess[1:-1] - prev[1:-1]) / tau

    return ReferenceSolution(t, x, u)
