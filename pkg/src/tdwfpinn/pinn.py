"""PINN residuals, the composite loss and the resampling training loop.

For each interior point ``(t_i, x_i)`` the time section ``s -> u(s, x_i)`` of
the network is handed to a Caputo estimator as a temporal field. All shifted
times of a batch are evaluated in one flattened network call of size
``N_in * M``; transformed (Type II) schemes only ask for values there, direct
(Type I) schemes ask for time derivatives.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from tdwfpinn.autodiff import value_of
from tdwfpinn.fracderiv import CaputoEstimator, EstimatorConfig
from tdwfpinn.neuralfield import (
    DEFAULT_WIDTHS,
    AdamState,
    NetworkParams,
    NonFiniteLossError,
    adam_step,
    forward_jet,
    init_network,
    loss_gradient,
)
from tdwfpinn.problems import ProblemSpec, exact_solution_eval, spatial_operator_apply
from tdwfpinn.sampling import (
    CollocationSet,
    RadConfig,
    l2_relative_error,
    rad_resample,
    uniform_collocation,
)

__all__ = [
    "DIVERGENCE_FACTOR",
    "IterationRecord",
    "NetworkSection",
    "QueryLog",
    "TrainConfig",
    "TrainReport",
    "TrainingDiverged",
    "composite_loss",
    "evaluation_grid",
    "pde_residual",
    "predict",
    "train",
    "write_history_csv",
    "write_points_csv",
]

DIVERGENCE_FACTOR = 1.0e6
TEST_GRID_SIZE = 201
# interior points per chunk when residuals are evaluated without a tape
RESIDUAL_CHUNK = 4096


@dataclass
class QueryLog:
    """Counts of network evaluations made on behalf of the estimator."""

    shifted_value: int = 0
    shifted_derivative: int = 0
    anchor_points: int = 0

    def reset(self) -> None:
        self.shifted_value = self.shifted_derivative = self.anchor_points = 0


class NetworkSection:
    """Time sections ``s -> u(s, x_i; theta)`` of a network, one per row.

    Implements the temporal-field protocol for time arrays of shape ``(N,)``
    or ``(N, M)``, where row ``i`` is evaluated at ``x_i``.
    """

    def __init__(self, theta, widths, xs: np.ndarray, log: QueryLog | None = None) -> None:
        self.theta = theta
        self.widths = tuple(widths)
        self.xs = np.asarray(xs, dtype=np.float64)
        self.log = log

    def _points(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=np.float64)
        if times.shape[0] != self.xs.size:
            raise ValueError("time array rows must match the number of sections")
        xs = np.broadcast_to(self.xs.reshape((-1,) + (1,) * (times.ndim - 1)), times.shape)
        return np.column_stack([times.ravel(), xs.ravel()])

    def value(self, times):
        if self.log is not None:
            self.log.shifted_value += np.size(times)
        jet = forward_jet(self.theta, self.widths, self._points(times), ("u",))
        return jet.u.reshape(np.shape(times))

    def first_derivative(self, times):
        if self.log is not None:
            self.log.shifted_derivative += np.size(times)
        jet = forward_jet(self.theta, self.widths, self._points(times), ("u", "u_t"))
        return jet.u_t.reshape(np.shape(times))


def pde_residual(
    theta,
    widths,
    estimator: CaputoEstimator,
    problem: ProblemSpec,
    points,
    key: tuple[int, ...] = (),
    log: QueryLog | None = None,
):
    """Residual ``D^alpha u + N(u)`` at interior points ``(t_i, x_i)``.

    *theta* may be a numpy array (plain evaluation) or a
    :class:`~tdwfpinn.autodiff.Var` (recorded for gradients).
    """
    if estimator.scheme.is_baseline:
        raise ValueError("diffusion-wave residuals need an order in (1, 2)")
    if abs(estimator.alpha - problem.alpha) > 0.0:
        raise ValueError(
            f"estimator order {estimator.alpha} does not match problem order {problem.alpha}"
        )

    pts = np.asarray(points, dtype=np.float64)
    t, x = pts[:, 0], pts[:, 1]
    if np.any(t <= 0.0):
        raise ValueError("interior collocation times must be positive")

    channels = ("u", "u_t", "u_x", "u_xx")
    here = forward_jet(theta, widths, pts, channels)
    start = forward_jet(theta, widths, np.column_stack([np.zeros_like(x), x]), ("u", "u_t"))
    if log is not None:
        log.anchor_points += 2 * len(pts)

    section = NetworkSection(theta, widths, x, log)
    tau = estimator.nodes(len(pts), key)
    shifted_t = estimator.shifted_times(t, tau)
    if estimator.shifted_quantity == "value":
        shifted = section.value(shifted_t)
    else:
        shifted = section.first_derivative(shifted_t)

    frac = estimator.combine(t, tau, here.u, here.u_t, start.u, start.u_t, shifted)
    return frac + spatial_operator_apply(problem, here.u, here.u_x, here.u_xx, problem.source)


def composite_loss(
    theta,
    widths,
    problem: ProblemSpec,
    colloc: CollocationSet,
    estimator: CaputoEstimator,
    weight_bd: float = 1.0,
    weight_init: float = 1.0,
    key: tuple[int, ...] = (),
    log: QueryLog | None = None,
):
    """Interior + weighted boundary + weighted initial loss.

    :returns: ``(loss, parts)`` where *parts* maps ``in``, ``bd``, ``init`` to
        floats (unweighted).
    """
    r = pde_residual(theta, widths, estimator, problem, colloc.interior, key, log)
    loss_in = (r * r).mean()

    bd = forward_jet(theta, widths, colloc.boundary, ("u",)).u
    loss_bd = (bd * bd).mean()

    x0 = colloc.initial
    init = forward_jet(theta, widths, np.column_stack([np.zeros_like(x0), x0]), ("u", "u_t"))
    du = init.u - problem.initial_value(x0)
    dv = init.u_t - problem.initial_velocity(x0)
    loss_init = (du * du).mean() + (dv * dv).mean()

    loss = loss_in + weight_bd * loss_bd + weight_init * loss_init
    parts = {
        "in": float(value_of(loss_in)),
        "bd": float(value_of(loss_bd)),
        "init": float(value_of(loss_init)),
    }
    return loss, parts


# {{{ training


@dataclass(frozen=True)
class TrainConfig:
    """Settings of one training run.

    MC quadrature nodes are redrawn once per iteration, keyed by
    ``(estimator.seed, iteration)`` and the point index.
    """

    estimator: EstimatorConfig
    iterations: int = 10
    epochs_per_iter: int = 5000
    lr: float = 1.0e-3
    weight_bd: float = 1.0
    weight_init: float = 1.0
    counts: tuple[int, int, int] = (5000, 1000, 1000)
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    resample: str = "uniform"
    rad: RadConfig = field(default_factory=RadConfig)
    seed: int = 0
    test_grid: int = TEST_GRID_SIZE

    def __post_init__(self) -> None:
        if self.iterations < 0 or self.epochs_per_iter < 1:
            raise ValueError("iterations must be >= 0 and epochs per iteration >= 1")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not (math.isfinite(self.weight_bd) and math.isfinite(self.weight_init)):
            raise ValueError("loss weights must be finite")
        if self.weight_bd < 0 or self.weight_init < 0:
            raise ValueError("loss weights must be non-negative")
        if self.resample not in ("uniform", "rad"):
            raise ValueError(f"resample must be 'uniform' or 'rad', got {self.resample!r}")


@dataclass
class IterationRecord:
    iteration: int
    loss_in: float
    loss_bd: float
    loss_init: float
    loss: float
    e_r: float
    seconds: float


@dataclass
class TrainReport:
    history: list[IterationRecord]
    net: NetworkParams
    initial_loss: float
    point_clouds: list[tuple[int, np.ndarray]] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    diverged: bool = False

    @property
    def final_error(self) -> float:
        return self.history[-1].e_r if self.history else math.nan


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, report: TrainReport) -> None:
        super().__init__(message)
        self.report = report


def evaluation_grid(problem: ProblemSpec, n: int = TEST_GRID_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ``n x n`` grid over ``[0, T] x [x_lo, x_hi]`` as (t, x) meshes."""
    t = np.linspace(0.0, problem.T, n)
    x = np.linspace(problem.x_lo, problem.x_hi, n)
    return np.meshgrid(t, x, indexing="ij")


def predict(net: NetworkParams, t, x) -> np.ndarray:
    t, x = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(x, dtype=np.float64))
    pts = np.column_stack([t.ravel(), x.ravel()])
    return forward_jet(net.params, net.layer_widths, pts, ("u",)).u.reshape(t.shape)


def _grid_error(net: NetworkParams, problem: ProblemSpec, n: int, exact_cache: dict) -> float:
    if problem.exact is None:
        return math.nan
    if "grid" not in exact_cache:
        tt, xx = evaluation_grid(problem, n)
        exact_cache["grid"] = (tt, xx, exact_solution_eval(problem, tt, xx))
    tt, xx, exact = exact_cache["grid"]
    return l2_relative_error(predict(net, tt, xx), exact)


def residual_values(
    net: NetworkParams,
    estimator: CaputoEstimator,
    problem: ProblemSpec,
    points: np.ndarray,
    key: tuple[int, ...] = (),
) -> np.ndarray:
    """Plain-array residuals, chunked to bound memory."""
    out = []
    for start in range(0, len(points), RESIDUAL_CHUNK):
        chunk = points[start:start + RESIDUAL_CHUNK]
        # distinct MC streams per chunk keep draws independent of chunking
        r = pde_residual(net.params, net.layer_widths, estimator, problem, chunk, key + (start,))
        out.append(np.asarray(r))
    return np.concatenate(out) if out else np.empty(0)


def train(
    problem: ProblemSpec,
    cfg: TrainConfig,
    *,
    net: NetworkParams | None = None,
    on_iteration: Callable[[IterationRecord], None] | None = None,
    record_epochs: bool = False,
) -> TrainReport:
    """Run ``cfg.iterations`` cycles of full-batch Adam plus resampling.

    :raises TrainingDiverged: if the loss becomes non-finite or exceeds
        ``DIVERGENCE_FACTOR`` times its initial value; the partial report is
        attached.
    """
    if cfg.estimator.alpha != problem.alpha:
        raise ValueError("estimator order must match the problem order")
    if net is None:
        net = init_network(cfg.widths, cfg.seed)
    net = net.copy()
    estimator = CaputoEstimator(cfg.estimator)
    widths = net.layer_widths

    colloc = uniform_collocation(problem, cfg.counts, seed=[cfg.seed, 0])
    state = AdamState.zeros(net.params.size)
    exact_cache: dict = {}

    _, parts0 = composite_loss(
        net.params, widths, problem, colloc, estimator, cfg.weight_bd, cfg.weight_init, (0,)
    )
    initial = parts0["in"] + cfg.weight_bd * parts0["bd"] + cfg.weight_init * parts0["init"]
    report = TrainReport([], net, initial)
    if cfg.iterations == 0:
        report.history.append(IterationRecord(
            0, parts0["in"], parts0["bd"], parts0["init"], initial,
            _grid_error(net, problem, cfg.test_grid, exact_cache), 0.0,
        ))
        return report

    for it in range(cfg.iterations):
        tic = time.perf_counter()
        sums = np.zeros(4)
        for _ in range(cfg.epochs_per_iter):
            parts: dict = {}

            def loss_fn(theta, it=it, parts=parts):
                loss, p = composite_loss(
                    theta, widths, problem, colloc, estimator,
                    cfg.weight_bd, cfg.weight_init, (it,),
                )
                parts.update(p)
                return loss

            try:
                value, grad = loss_gradient(net, loss_fn)
            except NonFiniteLossError as exc:
                report.diverged = True
                raise TrainingDiverged(str(exc), report) from exc
            if value > DIVERGENCE_FACTOR * initial:
                report.diverged = True
                raise TrainingDiverged(
                    f"loss {value:.3e} exceeds {DIVERGENCE_FACTOR:g} x initial {initial:.3e}",
                    report,
                )
            if record_epochs:
                report.epoch_losses.append(value)
            sums += (parts["in"], parts["bd"], parts["init"], value)
            net.params = adam_step(net.params, state, grad, cfg.lr)

        means = sums / cfg.epochs_per_iter
        rec = IterationRecord(
            it + 1, *(float(v) for v in means), _grid_error(net, problem, cfg.test_grid, exact_cache),
            time.perf_counter() - tic,
        )
        report.history.append(rec)
        if on_iteration is not None:
            on_iteration(rec)

        if it + 1 < cfg.iterations:
            colloc = _resample(net, problem, cfg, estimator, colloc, it + 1)
        report.point_clouds.append((it + 1, colloc.interior.copy()))

    report.net = net
    return report


def _resample(net, problem, cfg: TrainConfig, estimator, colloc, it: int) -> CollocationSet:
    """Refresh collocation points after iteration *it*.

    Uniform refresh redraws all three sets. Under RAD, boundary and initial
    points are redrawn and a fraction of the current interior points is
    replaced by residual-weighted draws.
    """
    fresh = uniform_collocation(problem, cfg.counts, seed=[cfg.seed, it])
    if cfg.resample == "uniform":
        return fresh

    def residual(pool):
        return residual_values(net, estimator, problem, pool, key=(it, 1))

    kept = CollocationSet(colloc.interior, fresh.boundary, fresh.initial)
    out, _ = rad_resample(residual, problem, cfg.rad, kept, seed=[cfg.seed, it, 2])
    return out


# }}}


# {{{ output


def write_history_csv(path, history: Sequence[IterationRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss_in", "loss_bd", "loss_init", "e_r", "seconds"])
        for r in history:
            w.writerow([r.iteration] + [f"{v:.17e}" for v in
                       (r.loss_in, r.loss_bd, r.loss_init, r.e_r, r.seconds)])


def write_points_csv(path, clouds) -> None:
    """Interior point clouds as ``(iteration, t, x)`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "t", "x"])
        for it, pts in clouds:
            for t, x in pts:
                w.writerow([it, f"{t:.17e}", f"{x:.17e}"])


# }}}
