"""Dense tanh networks ``u(t, x; theta)`` with exact input derivatives.

The forward pass carries a truncated jet through every layer: the value and,
on request, the first derivatives in ``t`` and ``x`` and the second
derivative in ``x``. For a hidden layer ``h = tanh(z)`` with ``s = 1 - h**2``,

.. code::

    h_t  = s * z_t
    h_x  = s * z_x
    h_xx = s * z_xx - 2 * h * s * z_x**2

When the parameters are a :class:`~tdwfpinn.autodiff.Var`, the same pass is
recorded on the tape, so gradients of losses that contain ``u_xx`` (or any
other channel) with respect to the parameters come out of one reverse sweep.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from tdwfpinn.autodiff import Var, affine, tanh, value_of

__all__ = [
    "CHANNELS",
    "AdamState",
    "Jet",
    "NetworkParams",
    "NonFiniteLossError",
    "adam_step",
    "eval_with_input_derivs",
    "forward_jet",
    "init_network",
    "load_checkpoint",
    "loss_gradient",
    "param_count",
    "save_checkpoint",
]

CHANNELS = ("u", "u_t", "u_x", "u_xx")
DEFAULT_WIDTHS = (2, 20, 20, 20, 20, 20, 20, 20, 1)


class NonFiniteLossError(FloatingPointError):
    """Raised when a loss evaluates to NaN or infinity."""


@dataclass
class NetworkParams:
    layer_widths: tuple[int, ...]
    params: np.ndarray
    activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self) -> None:
        self.layer_widths = tuple(int(w) for w in self.layer_widths)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation: {self.activation!r}")
        _check_widths(self.layer_widths)
        if self.params.shape != (param_count(self.layer_widths),):
            raise ValueError(
                f"expected {param_count(self.layer_widths)} parameters, "
                f"got shape {self.params.shape}"
            )

    def copy(self) -> NetworkParams:
        return NetworkParams(self.layer_widths, self.params.copy(), self.activation, self.init_seed)


def _check_widths(widths: tuple[int, ...]) -> None:
    if len(widths) < 2 or widths[0] != 2 or widths[-1] != 1:
        raise ValueError(f"layer widths must start with 2 and end with 1, got {widths}")
    if any(w < 1 for w in widths):
        raise ValueError(f"layer widths must be positive, got {widths}")


def param_count(widths: Iterable[int]) -> int:
    w = list(widths)
    return sum(a * b + b for a, b in zip(w[:-1], w[1:]))


def init_network(widths: Iterable[int] = DEFAULT_WIDTHS, seed: int = 0) -> NetworkParams:
    """Glorot-uniform weights and zero biases, deterministic in *seed*."""
    widths = tuple(int(w) for w in widths)
    _check_widths(widths)
    rng = np.random.default_rng(seed)

    chunks = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return NetworkParams(widths, np.concatenate(chunks), "tanh", seed)


def _layers(theta, widths: tuple[int, ...]):
    """Split a flat parameter vector (array or Var) into ``(W, b)`` pairs."""
    out = []
    off = 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        n = fan_in * fan_out
        w = theta[off:off + n].reshape(fan_in, fan_out)
        off += n
        b = theta[off:off + fan_out].reshape(1, fan_out)
        off += fan_out
        out.append((w, b))
    return out


# {{{ forward pass


@dataclass
class Jet:
    """Network output and input derivatives; channels not requested are None."""

    u: object
    u_t: object = None
    u_x: object = None
    u_xx: object = None

    def numpy(self) -> dict[str, np.ndarray]:
        return {
            name: value_of(getattr(self, name))
            for name in CHANNELS
            if getattr(self, name) is not None
        }


def forward_jet(theta, widths, points, channels: Iterable[str] = CHANNELS) -> Jet:
    """Evaluate the network and the requested input-derivative channels.

    :arg theta: flat parameters, a numpy array or a :class:`Var`.
    :arg points: array of shape ``(N, 2)`` holding ``(t, x)`` rows.
    :arg channels: subset of ``("u", "u_t", "u_x", "u_xx")``; ``u`` is always
        computed.
    """
    channels = set(channels)
    unknown = channels - set(CHANNELS)
    if unknown:
        raise ValueError(f"unknown channels: {sorted(unknown)}")
    want_t = "u_t" in channels
    want_xx = "u_xx" in channels
    want_x = "u_x" in channels or want_xx

    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (N, 2), got {pts.shape}")

    layers = _layers(theta, tuple(widths))
    a = pts
    a_t = a_x = a_xx = None
    for i, (w, b) in enumerate(layers):
        z = affine(a, w, b)
        if i == 0:
            # d(points)/dt = e_0 and d(points)/dx = e_1 for every row
            z_t = w[0:1, :] if want_t else None
            z_x = w[1:2, :] if want_x else None
            z_xx = None
        else:
            z_t = a_t @ w if want_t else None
            z_x = a_x @ w if want_x else None
            z_xx = a_xx @ w if want_xx else None

        if i == len(layers) - 1:
            if i == 0 and want_t:
                # a purely affine network has input derivatives constant in the batch
                z_t = z_t * np.ones((len(pts), 1))
            if i == 0 and "u_x" in channels:
                z_x = z_x * np.ones((len(pts), 1))
            if i == 0 and want_xx:
                z_xx = np.zeros((len(pts), 1))
            return Jet(
                u=z[:, 0],
                u_t=z_t[:, 0] if want_t else None,
                u_x=z_x[:, 0] if "u_x" in channels else None,
                u_xx=z_xx[:, 0] if want_xx else None,
            )

        h = tanh(z)
        a = h
        if not (want_t or want_x):
            continue
        s = 1.0 - h * h
        a_t = s * z_t if want_t else None
        if want_x:
            a_x = s * z_x
        if want_xx:
            curv = -2.0 * (h * s) * (z_x * z_x)
            a_xx = curv if z_xx is None else s * z_xx + curv

    raise AssertionError("unreachable")


def eval_with_input_derivs(net: NetworkParams, points) -> dict[str, np.ndarray]:
    """``{u, u_t, u_x, u_xx}`` at each ``(t, x)`` row of *points*."""
    jet = forward_jet(net.params, net.layer_widths, points)
    return jet.numpy()


# }}}


# {{{ gradients


def loss_gradient(net: NetworkParams, loss: Callable[[Var], Var]) -> tuple[float, np.ndarray]:
    """Value and parameter gradient of ``loss(theta)``.

    *loss* receives the parameters as a :class:`Var` and must return a scalar
    :class:`Var` built from :func:`forward_jet` outputs.

    :raises NonFiniteLossError: if the loss is NaN or infinite.
    """
    theta = Var(net.params, requires_grad=True)
    out = loss(theta)
    value = float(value_of(out))
    if not math.isfinite(value):
        raise NonFiniteLossError(f"loss is not finite: {value}")
    if isinstance(out, Var) and out.requires_grad:
        out.backward()
    grad = theta.grad if theta.grad is not None else np.zeros_like(net.params)
    return value, grad


# }}}


# {{{ Adam


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.0e-8

    @classmethod
    def zeros(cls, n: int, **kwargs) -> AdamState:
        return cls(np.zeros(n), np.zeros(n), **kwargs)


def adam_step(params: np.ndarray, state: AdamState, grad: np.ndarray, lr: float) -> np.ndarray:
    """One bias-corrected Adam update; returns new parameters, mutates *state*."""
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


# }}}


# {{{ checkpoints

_MAGIC = "# tdwfpinn checkpoint v1"


def save_checkpoint(path, net: NetworkParams, iteration: int = 0) -> None:
    """Text checkpoint: a key/value header, then one parameter per line.

    ``repr`` of a float round-trips exactly, so load/save is bit-exact.
    """
    lines = [
        _MAGIC,
        f"# widths: {','.join(map(str, net.layer_widths))}",
        f"# activation: {net.activation}",
        f"# seed: {net.init_seed}",
        f"# iteration: {iteration}",
    ]
    lines.extend(repr(float(p)) for p in net.params)
    _atomic_write(path, "\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[NetworkParams, int]:
    header: dict[str, str] = {}
    values = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            elif line:
                values.append(float(line))

    widths = tuple(int(w) for w in header["widths"].split(","))
    net = NetworkParams(widths, np.array(values), header["activation"], int(header["seed"]))
    return net, int(header.get("iteration", 0))


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    dirname = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# }}}
