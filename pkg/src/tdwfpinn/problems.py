"""Catalog of time-fractional diffusion-wave test problems in one space dimension.

Every problem has the form

.. math::

    \\partial_t^\\alpha u + N(u) = 0 \\text{ in } (0, T] \\times \\Omega,
    \\quad u = 0 \\text{ on } \\partial\\Omega,
    \\quad u(0, x) = a(x), \\quad \\partial_t u(0, x) = b(x),

with either the linear diffusion operator ``N(u) = -coef * u_xx`` or the
viscous Burgers operator ``N(u) = u u_x - visc * u_xx``. Initial data are
sine modes described by numbers, not callables, so problems serialise into
config files.

The linear problems have the separable exact solution

.. math::

    u(t, x) = (A E_{\\alpha,1}(-\\lambda t^\\alpha)
               + B t E_{\\alpha,2}(-\\lambda t^\\alpha)) \\sin(k \\pi x)

whenever ``coef = lambda / (k pi)**2``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from tdwfpinn.specfun import mittag_leffler

__all__ = [
    "BURGERS_VISCOSITY",
    "Burgers",
    "ExactSolution",
    "LinearDiffusion",
    "NoExactSolutionError",
    "ProblemSpec",
    "SineMode",
    "burgers_eq26",
    "dw_eq19",
    "dw_eq24",
    "exact_solution_eval",
    "make_problem",
    "spatial_operator_apply",
]

BURGERS_VISCOSITY = 0.01 / math.pi


class NoExactSolutionError(LookupError):
    pass


@dataclass(frozen=True)
class SineMode:
    """``amplitude * sin(k * pi * x)``."""

    amplitude: float
    k: int = 1

    def __call__(self, x):
        return self.amplitude * np.sin(self.k * np.pi * np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class LinearDiffusion:
    coef: float


@dataclass(frozen=True)
class Burgers:
    visc: float = BURGERS_VISCOSITY


@dataclass(frozen=True)
class ExactSolution:
    lam: float
    k: int
    amp_value: float
    amp_velocity: float


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    alpha: float
    T: float
    x_lo: float
    x_hi: float
    operator: LinearDiffusion | Burgers
    initial_value: SineMode
    initial_velocity: SineMode
    exact: ExactSolution | None = None

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got {self.T}")
        if not self.x_lo < self.x_hi:
            raise ValueError(f"empty spatial interval ({self.x_lo}, {self.x_hi})")
        if self.exact is not None and not isinstance(self.operator, LinearDiffusion):
            raise ValueError("exact solutions are only available for linear problems")

    def replace(self, **changes) -> ProblemSpec:
        return dataclasses.replace(self, **changes)

    @property
    def source(self) -> float:
        # every catalog problem is homogeneous
        return 0.0


def dw_eq19(alpha: float = 1.5) -> ProblemSpec:
    """Unit-diffusivity problem on (0, 1) x (0, 1] with data (2 sin, -sin)."""
    return ProblemSpec(
        name="dw_eq19",
        alpha=alpha,
        T=1.0,
        x_lo=0.0,
        x_hi=1.0,
        operator=LinearDiffusion(1.0),
        initial_value=SineMode(2.0, 1),
        initial_velocity=SineMode(-1.0, 1),
        exact=ExactSolution(math.pi**2, 1, 2.0, -1.0),
    )


def dw_eq24(alpha: float = 1.75, k: int = 1, lam: float = 1.0, T: float = 2.0) -> ProblemSpec:
    """Mode-``k`` problem with diffusion coefficient ``lam / (k pi)**2``."""
    return ProblemSpec(
        name="dw_eq24",
        alpha=alpha,
        T=T,
        x_lo=0.0,
        x_hi=1.0,
        operator=LinearDiffusion(lam / (k * math.pi) ** 2),
        initial_value=SineMode(1.0, k),
        initial_velocity=SineMode(-0.5, k),
        exact=ExactSolution(lam, k, 1.0, -0.5),
    )


def burgers_eq26(alpha: float = 1.8) -> ProblemSpec:
    """Viscous Burgers problem on (-1, 1) x (0, 1]; no closed-form solution."""
    return ProblemSpec(
        name="burgers_eq26",
        alpha=alpha,
        T=1.0,
        x_lo=-1.0,
        x_hi=1.0,
        operator=Burgers(BURGERS_VISCOSITY),
        initial_value=SineMode(-1.0, 1),
        initial_velocity=SineMode(1.0, 1),
    )


CATALOG = {"dw_eq19": dw_eq19, "dw_eq24": dw_eq24, "burgers_eq26": burgers_eq26}


def make_problem(name: str, **overrides) -> ProblemSpec:
    """Build a catalog problem; *overrides* go to the factory (alpha, k, lam, T)."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(CATALOG)}") from None
    return factory(**{k: v for k, v in overrides.items() if v is not None})


def _time_factor(spec: ProblemSpec, t: np.ndarray) -> np.ndarray:
    ex = spec.exact
    z = -ex.lam * t**spec.alpha
    return ex.amp_value * mittag_leffler(z, spec.alpha, 1.0) + ex.amp_velocity * t * mittag_leffler(
        z, spec.alpha, 2.0
    )


def exact_solution_eval(spec: ProblemSpec, t, x):
    """Exact solution at broadcastable arrays *t*, *x*.

    The Mittag-Leffler factors are evaluated once per distinct time.

    :raises NoExactSolutionError: for problems without a closed form.
    """
    if spec.exact is None:
        raise NoExactSolutionError(f"problem {spec.name!r} has no exact solution")

    t, x = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(x, dtype=np.float64))
    uniq, inverse = np.unique(t, return_inverse=True)
    factor = _time_factor(spec, uniq)[inverse].reshape(t.shape)
    out = factor * np.sin(spec.exact.k * np.pi * x)
    return float(out) if out.ndim == 0 else out


def spatial_operator_apply(spec: ProblemSpec, u, u_x, u_xx, f_val=0.0):
    """``N(u, f)`` so that the residual is ``D^alpha u + N(u, f)``.

    Works on numpy arrays and on autodiff variables alike.
    """
    op = spec.operator
    if isinstance(op, LinearDiffusion):
        return -op.coef * u_xx - f_val
    return u * u_x - op.visc * u_xx
