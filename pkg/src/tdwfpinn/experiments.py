"""Experiment drivers: derivative sweeps, cost measurements and training presets."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from tdwfpinn.fracderiv import (
    CaputoEstimator,
    EstimatorConfig,
    ExponentialField,
    Scheme,
    exponential_caputo,
)
from tdwfpinn.neuralfield import DEFAULT_WIDTHS, init_network, loss_gradient
from tdwfpinn.pinn import QueryLog, TrainConfig, composite_loss, predict
from tdwfpinn.problems import ProblemSpec, make_problem
from tdwfpinn.sampling import RadConfig, uniform_collocation

__all__ = [
    "DerivativeRow",
    "PRESETS",
    "Preset",
    "alpha_sweep",
    "band_fraction",
    "derivative_row",
    "fit_loglog_slope",
    "get_preset",
    "loss_evaluation_seconds",
    "m_sweep",
    "max_abs_error",
    "mc_rms_errors",
    "preset_with_seed",
    "shifted_query_counts",
]


# {{{ derivative validation


@dataclass(frozen=True)
class DerivativeRow:
    scheme: str
    alpha: float
    m: int
    t: float
    estimate: float
    reference: float

    @property
    def rel_error(self) -> float:
        return abs(self.estimate - self.reference) / abs(self.reference)

    def as_list(self) -> list:
        return [self.scheme, self.alpha, self.m, self.t, self.estimate, self.reference, self.rel_error]


def derivative_row(
    scheme, alpha: float, m: int, t: float, lam: float, seed: int = 0, epsilon=None
) -> DerivativeRow:
    """Estimate the Caputo derivative of ``exp(lam t)`` and its exact value."""
    cfg = EstimatorConfig(alpha, Scheme.parse(scheme), m, epsilon, seed)
    est = CaputoEstimator(cfg)(ExponentialField(lam), t)
    return DerivativeRow(cfg.scheme.value, alpha, m, t, float(est), float(exponential_caputo(lam, alpha, t)))


def m_sweep(scheme, alpha: float, ms: Iterable[int], t: float, lam: float, seed: int = 0):
    return [derivative_row(scheme, alpha, m, t, lam, seed) for m in ms]


def alpha_sweep(scheme, alphas: Iterable[float], m: int, t: float, lam: float, seed: int = 0):
    return [derivative_row(scheme, float(a), m, t, lam, seed) for a in alphas]


def mc_rms_errors(
    scheme, alpha: float, ms: Sequence[int], t: float, lam: float, seeds: Iterable[int]
) -> np.ndarray:
    """Root-mean-square relative error over *seeds* for each ``M`` in *ms*."""
    seeds = list(seeds)
    ref = float(exponential_caputo(lam, alpha, t))
    out = []
    for m in ms:
        err = [
            CaputoEstimator(EstimatorConfig(alpha, Scheme.parse(scheme), m, None, s))(
                ExponentialField(lam), t
            ) - ref
            for s in seeds
        ]
        out.append(math.sqrt(np.mean(np.square(err))) / abs(ref))
    return np.array(out)


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)


# }}}


# {{{ cost measurements


def shifted_query_counts(
    problem: ProblemSpec, est_cfg: EstimatorConfig, counts=(64, 16, 16), seed: int = 0,
    widths=(2, 20, 20, 1),
) -> QueryLog:
    """Network queries issued by one loss-and-gradient evaluation."""
    net = init_network(widths, seed)
    colloc = uniform_collocation(problem, counts, seed)
    est = CaputoEstimator(est_cfg)
    log = QueryLog()
    loss_gradient(net, lambda th: composite_loss(th, net.layer_widths, problem, colloc, est, log=log)[0])
    return log


def loss_evaluation_seconds(
    problem: ProblemSpec,
    est_cfg: EstimatorConfig,
    counts=(1000, 200, 200),
    repeats: int = 5,
    seed: int = 0,
    widths=None,
) -> float:
    """Best-of-*repeats* wall time of one loss-and-gradient evaluation."""
    net = init_network(widths or DEFAULT_WIDTHS, seed)
    colloc = uniform_collocation(problem, counts, seed)
    est = CaputoEstimator(est_cfg)

    def fn(th):
        return composite_loss(th, net.layer_widths, problem, colloc, est)[0]

    loss_gradient(net, fn)
    best = math.inf
    for _ in range(repeats):
        tic = time.perf_counter()
        loss_gradient(net, fn)
        best = min(best, time.perf_counter() - tic)
    return best


def max_abs_error(net, reference, nt: int = 101, nx: int = 201) -> float:
    """Max-abs difference between a network and a reference solution on a grid."""
    t = np.linspace(reference.t[0], reference.t[-1], nt)
    x = np.linspace(reference.x[0], reference.x[-1], nx)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return float(np.max(np.abs(predict(net, tt, xx) - reference(tt, xx))))


def band_fraction(points: np.ndarray, half_width: float = 0.2) -> float:
    """Fraction of ``(t, x)`` rows with ``|x| <= half_width``."""
    return float(np.mean(np.abs(np.asarray(points)[:, 1]) <= half_width))


# }}}


# {{{ presets


@dataclass(frozen=True)
class Preset:
    name: str
    problem: str
    problem_args: dict
    train: TrainConfig
    note: str = ""

    def make_problem(self) -> ProblemSpec:
        return make_problem(self.problem, **self.problem_args)


SMALL = (5000, 1000, 1000)
LARGE = (10000, 2000, 2000)


def _table1() -> dict[str, Preset]:
    out = {}
    grids = {"mc1": (80, 160, 320, 640, 1280), "mc2": (80, 160, 320, 640, 1280),
             "gj1": (16, 32, 48, 64, 80), "gj2": (16, 32, 48, 64, 80)}
    for batch, counts in (("small", SMALL), ("large", LARGE)):
        for scheme, ms in grids.items():
            for m in ms:
                name = f"table1-{batch}-{scheme}-m{m}"
                cfg = TrainConfig(
                    EstimatorConfig(1.5, scheme, m), iterations=10, epochs_per_iter=5000,
                    lr=1.0e-3, counts=counts,
                )
                out[name] = Preset(name, "dw_eq19", {"alpha": 1.5}, cfg)
    base = out["table1-small-gj2-m16"]
    out["table1-small-gj2-m16-reduced"] = replace(
        base, name="table1-small-gj2-m16-reduced",
        train=replace(base.train, iterations=4, epochs_per_iter=2500),
        note="desk-scale reduction: L=4 x 2500 epochs",
    )
    return out


def _table2() -> dict[str, Preset]:
    out = {}
    grids = {"mc1": (80, 640), "mc2": (80, 640), "gj1": (16, 80), "gj2": (16, 80)}
    for alpha in (1.25, 1.5, 1.75):
        for k, lam in ((1, 1.0), (2, 4.0), (4, 4.0), (6, 6.0)):
            for scheme, ms in grids.items():
                for m in ms:
                    name = f"table2-a{alpha}-k{k}-l{lam:g}-{scheme}-m{m}"
                    cfg = TrainConfig(
                        EstimatorConfig(alpha, scheme, m), iterations=3, epochs_per_iter=5000,
                        lr=1.0e-3, counts=SMALL,
                    )
                    out[name] = Preset(
                        name, "dw_eq24", {"alpha": alpha, "k": k, "lam": lam, "T": 2.0}, cfg
                    )
    return out


def _table3() -> dict[str, Preset]:
    out = {}
    for alpha in (1.25, 1.5, 1.75):
        for k, lam in ((1, 1.0), (2, 4.0), (4, 4.0), (6, 6.0)):
            for scheme in ("mc2", "gj2"):
                name = f"table3-a{alpha}-k{k}-l{lam:g}-{scheme}-m80"
                cfg = TrainConfig(
                    EstimatorConfig(alpha, scheme, 80), iterations=50, epochs_per_iter=5000,
                    lr=1.0e-5, counts=SMALL,
                )
                out[name] = Preset(name, "dw_eq24", {"alpha": alpha, "k": k, "lam": lam, "T": 2.0}, cfg)
    return out


BURGERS_COUNTS = (1500, 500, 500)
BURGERS_DESK_COUNTS = (500, 100, 100)


def burgers_config(
    alpha: float, scheme: str, resample: str, *, desk: bool = False, seed: int = 0
) -> TrainConfig:
    """Burgers settings; ``desk=True`` shrinks them to single-CPU scale."""
    if desk:
        return TrainConfig(
            EstimatorConfig(alpha, scheme, 32, seed=seed), iterations=10, epochs_per_iter=500,
            lr=1.0e-3, weight_init=100.0, counts=BURGERS_DESK_COUNTS, resample=resample,
            rad=RadConfig(replace_fraction=0.3), seed=seed,
        )
    return TrainConfig(
        EstimatorConfig(alpha, scheme, 80, seed=seed), iterations=20, epochs_per_iter=10000,
        lr=1.0e-4, weight_init=100.0, counts=BURGERS_COUNTS, resample=resample,
        rad=RadConfig(replace_fraction=0.3), seed=seed,
    )


def _burgers() -> dict[str, Preset]:
    out = {}
    for alpha in (1.1, 1.8):
        for scheme in ("mc2", "gj2"):
            for resample in ("rad", "uniform"):
                for desk in (False, True):
                    name = f"burgers-a{alpha}-{scheme}-{resample}" + ("-desk" if desk else "")
                    out[name] = Preset(
                        name, "burgers_eq26", {"alpha": alpha},
                        burgers_config(alpha, scheme, resample, desk=desk),
                        "desk-scale reduction" if desk else "",
                    )
    return out


PRESETS: dict[str, Preset] = {**_table1(), **_table2(), **_table3(), **_burgers()}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}") from None


def preset_with_seed(name: str, seed: int) -> Preset:
    """Preset *name* with both the training and the estimator seed set to *seed*."""
    p = get_preset(name)
    train = replace(p.train, seed=seed, estimator=replace(p.train.estimator, seed=seed))
    return replace(p, train=train)


# }}}
