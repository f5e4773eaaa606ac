"""Run configuration files and run manifests.

A run is described by an INI file with the sections ``[problem]``,
``[network]``, ``[estimator]``, ``[training]``, ``[sampling]`` and
``[output]``. Every key is optional; missing keys take the defaults of
:class:`~tdwfpinn.pinn.TrainConfig`. Example::

    [problem]
    name = dw_eq24
    alpha = 1.75
    k_mode = 1
    lambda = 1.0

    [estimator]
    scheme = gj2
    m = 16

    [training]
    iterations = 3
    epochs = 5000
"""

from __future__ import annotations

import configparser
import datetime as _dt
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from tdwfpinn.fracderiv import EstimatorConfig
from tdwfpinn.neuralfield import DEFAULT_WIDTHS
from tdwfpinn.pinn import TrainConfig
from tdwfpinn.problems import ProblemSpec, make_problem
from tdwfpinn.sampling import RadConfig

__all__ = [
    "OUTPUT_ROOT_ENV",
    "ConfigError",
    "RunConfig",
    "RunManifest",
    "load_run_config",
    "output_root",
    "parse_run_config",
    "write_json_atomic",
]

OUTPUT_ROOT_ENV = "TDWFPINN_OUTPUT_ROOT"

SECTIONS = {
    "problem": ("name", "alpha", "t_final", "k_mode", "lambda"),
    "network": ("widths", "activation"),
    "estimator": ("scheme", "m", "epsilon", "seed"),
    "training": (
        "iterations", "epochs", "lr", "weight_bd", "weight_init",
        "n_interior", "n_boundary", "n_initial", "seed", "test_grid",
    ),
    "sampling": ("resample", "rad_k", "rad_c", "rad_pool_factor", "rad_fraction"),
    "output": ("dir", "points"),
}


class ConfigError(ValueError):
    """Invalid configuration; names the offending section, key and line."""


@dataclass(frozen=True)
class RunConfig:
    problem_name: str
    problem_args: dict
    train: TrainConfig
    output_dir: str = ""
    write_points: bool = True

    def make_problem(self) -> ProblemSpec:
        return make_problem(self.problem_name, **self.problem_args)

    def to_ini(self) -> str:
        """Serialise to INI text that :func:`parse_run_config` reads back."""
        tc, est = self.train, self.train.estimator
        names = {"alpha": "alpha", "T": "t_final", "k": "k_mode", "lam": "lambda"}
        cp = configparser.ConfigParser()
        cp["problem"] = {"name": self.problem_name}
        for key, name in names.items():
            if key in self.problem_args:
                cp["problem"][name] = repr(self.problem_args[key])
        cp["network"] = {"widths": ",".join(str(w) for w in tc.widths), "activation": "tanh"}
        cp["estimator"] = {"scheme": est.scheme.value, "m": str(est.m_points), "seed": str(est.seed)}
        if est.epsilon_clip is not None:
            cp["estimator"]["epsilon"] = repr(est.epsilon_clip)
        cp["training"] = {
            "iterations": str(tc.iterations), "epochs": str(tc.epochs_per_iter),
            "lr": repr(tc.lr), "weight_bd": repr(tc.weight_bd), "weight_init": repr(tc.weight_init),
            "n_interior": str(tc.counts[0]), "n_boundary": str(tc.counts[1]),
            "n_initial": str(tc.counts[2]), "seed": str(tc.seed), "test_grid": str(tc.test_grid),
        }
        cp["sampling"] = {
            "resample": tc.resample, "rad_k": repr(tc.rad.power_k), "rad_c": repr(tc.rad.offset_c),
            "rad_pool_factor": str(tc.rad.pool_factor), "rad_fraction": repr(tc.rad.replace_fraction),
        }
        cp["output"] = {"points": "yes" if self.write_points else "no"}
        if self.output_dir:
            cp["output"]["dir"] = self.output_dir
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
        elif current == section and "=" in line and line.split("=", 1)[0].strip().lower() == key:
            return lineno
    return None


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, text: str, source: str) -> None:
        self.cp, self.text, self.source = cp, text, source

    def error(self, section: str, key: str, msg: str) -> ConfigError:
        line = _line_of(self.text, section, key)
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: [{section}] {key}: {msg}")

    def get(self, section: str, key: str, conv, default):
        if not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key).strip()
        try:
            return conv(raw)
        except ValueError as exc:
            raise self.error(section, key, f"cannot parse {raw!r} ({exc})") from None


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected yes/no")


def _widths(raw: str) -> tuple[int, ...]:
    return tuple(int(w) for w in raw.replace(" ", "").split(","))


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse INI *text* into a :class:`RunConfig`.

    :raises ConfigError: with ``source:line: [section] key: message``.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None

    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SECTIONS[section]:
                raise _Reader(cp, text, source).error(section, key, "unknown key")

    r = _Reader(cp, text, source)
    name = r.get("problem", "name", str, None)
    if name is None:
        raise ConfigError(f"{source}: [problem] name: required")
    problem_args = {
        "alpha": r.get("problem", "alpha", float, None),
        "T": r.get("problem", "t_final", float, None),
        "k": r.get("problem", "k_mode", int, None),
        "lam": r.get("problem", "lambda", float, None),
    }
    problem_args = {k: v for k, v in problem_args.items() if v is not None}
    try:
        problem = make_problem(name, **problem_args)
    except (TypeError, ValueError) as exc:
        raise r.error("problem", "name", str(exc)) from None

    activation = r.get("network", "activation", str, "tanh")
    if activation != "tanh":
        raise r.error("network", "activation", "only tanh is supported")
    widths = r.get("network", "widths", _widths, DEFAULT_WIDTHS)

    scheme = r.get("estimator", "scheme", str, "gj2")
    est_args = (
        r.get("estimator", "m", int, 16),
        r.get("estimator", "epsilon", float, None),
        r.get("estimator", "seed", int, 0),
    )
    try:
        est = EstimatorConfig(problem.alpha, scheme, *est_args)
    except ValueError as exc:
        raise r.error("estimator", "scheme", str(exc)) from None

    rad_args = (
        r.get("sampling", "rad_k", float, 1.0),
        r.get("sampling", "rad_c", float, 1.0),
        r.get("sampling", "rad_pool_factor", int, 10),
        r.get("sampling", "rad_fraction", float, 0.3),
    )
    try:
        rad = RadConfig(*rad_args)
    except ValueError as exc:
        raise r.error("sampling", "rad_fraction", str(exc)) from None

    train_args = dict(
        iterations=r.get("training", "iterations", int, 10),
        epochs_per_iter=r.get("training", "epochs", int, 5000),
        lr=r.get("training", "lr", float, 1.0e-3),
        weight_bd=r.get("training", "weight_bd", float, 1.0),
        weight_init=r.get("training", "weight_init", float, 1.0),
        counts=(
            r.get("training", "n_interior", int, 5000),
            r.get("training", "n_boundary", int, 1000),
            r.get("training", "n_initial", int, 1000),
        ),
        widths=widths,
        resample=r.get("sampling", "resample", str, "uniform"),
        rad=rad,
        seed=r.get("training", "seed", int, 0),
        test_grid=r.get("training", "test_grid", int, 201),
    )
    try:
        train = TrainConfig(est, **train_args)
    except ValueError as exc:
        raise ConfigError(f"{source}: [training] {exc}") from None

    return RunConfig(
        name, problem_args, train,
        output_dir=r.get("output", "dir", str, ""),
        write_points=r.get("output", "points", _bool, True),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_run_config(text, str(path))


def output_root() -> Path:
    """Directory that relative output paths are resolved against."""
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


# {{{ manifest


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Record of one run; output paths are relative to the run directory."""

    command: str
    config: str
    seeds: dict
    outputs: list[str] = field(default_factory=list)
    version: str = ""
    serial: bool = False
    started: str = field(default_factory=_now)
    finished: str = ""
    status: str = "running"

    def finish(self, status: str = "ok") -> None:
        self.finished = _now()
        self.status = status

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        write_json_atomic(path, asdict(self))
        return path


def write_json_atomic(path, obj) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# }}}
