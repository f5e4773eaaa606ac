"""Command-line entry point.

Subcommands::

    gj-table             Gauss-Jacobi nodes and weights
    validate-derivative  estimator vs exact Caputo derivative of exp(lambda t)
    sweep                the same over an equispaced range of alpha or M
    train                train a PINN from a config file or a preset
    evaluate             grid CSV of a trained checkpoint against the solution

CSV goes to stdout unless ``--output`` is given. Failures print one line
``error: kind=... module=... op=... message=...`` on stderr and exit
nonzero (2 for bad input, 3 for numerical failures).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path

import numpy as np

from tdwfpinn import experiments
from tdwfpinn.config import (
    ConfigError,
    RunConfig,
    RunManifest,
    load_run_config,
    output_root,
)
from tdwfpinn.neuralfield import load_checkpoint, save_checkpoint
from tdwfpinn.pinn import (
    TrainingDiverged,
    predict,
    evaluation_grid,
    train,
    write_history_csv,
    write_points_csv,
)
from tdwfpinn.problems import exact_solution_eval, make_problem
from tdwfpinn.quadrature import gauss_jacobi_rule
from tdwfpinn.specfun import AccuracyError

__all__ = ["main", "run_subcommand"]

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
SERIAL_ENV = "TDWFPINN_SERIAL"
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

DERIVATIVE_HEADER = ["scheme", "alpha", "M", "t", "estimate", "reference", "rel_error"]


class CommandError(Exception):
    def __init__(self, kind: str, module: str, op: str, message: str) -> None:
        super().__init__(message)
        self.kind, self.module, self.op = kind, module, op


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_rows(path, header, rows) -> None:
    with _sink(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# {{{ subcommands


def cmd_gj_table(args) -> None:
    rule = gauss_jacobi_rule(args.m, args.alpha, args.n)
    _write_rows(
        args.output, ["index", "node", "weight"],
        ([i, float(x), float(w)] for i, (x, w) in enumerate(zip(rule.nodes, rule.weights))),
    )


def _default_ms(scheme: str) -> list[int]:
    if scheme.startswith("mc"):
        return [10, 30, 100, 300, 1000, 3000, 10000]
    return [2, 4, 8, 16, 32, 64, 100]


def cmd_validate(args) -> None:
    if args.sweep == "m":
        ms = args.m_values or _default_ms(args.scheme)
        rows = experiments.m_sweep(args.scheme, args.alpha, ms, args.t, args.lam, args.seed)
    elif args.sweep == "alpha":
        alphas = np.linspace(1.01, 1.99, 100)
        rows = experiments.alpha_sweep(args.scheme, alphas, args.m, args.t, args.lam, args.seed)
    else:
        rows = [experiments.derivative_row(
            args.scheme, args.alpha, args.m, args.t, args.lam, args.seed, args.epsilon
        )]
    _write_rows(args.output, DERIVATIVE_HEADER, (r.as_list() for r in rows))


def cmd_sweep(args) -> None:
    if args.points < 1:
        raise CommandError("input", "cli", "sweep", "--points must be positive")
    if args.axis == "alpha":
        values = np.linspace(args.start, args.stop, args.points)
        rows = experiments.alpha_sweep(args.scheme, values, args.m, args.t, args.lam, args.seed)
    else:
        ms = np.unique(np.rint(np.geomspace(args.start, args.stop, args.points)).astype(int))
        rows = experiments.m_sweep(args.scheme, args.alpha, ms.tolist(), args.t, args.lam, args.seed)
    _write_rows(args.output, DERIVATIVE_HEADER, (r.as_list() for r in rows))


def _run_config(args) -> tuple[str, RunConfig]:
    if (args.config is None) == (args.preset is None):
        raise CommandError("input", "cli", "train", "give exactly one of --config or --preset")
    if args.preset is not None:
        try:
            p = experiments.get_preset(args.preset)
        except KeyError as exc:
            raise CommandError("input", "experiments", "get_preset", exc.args[0]) from None
        name, rc = p.name, RunConfig(p.problem, dict(p.problem_args), p.train)
    else:
        rc = load_run_config(args.config)
        name = Path(args.config).stem

    changes = {}
    if args.iterations is not None:
        changes["iterations"] = args.iterations
    if args.epochs is not None:
        changes["epochs_per_iter"] = args.epochs
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["estimator"] = dataclasses.replace(rc.train.estimator, seed=args.seed)
    if changes:
        try:
            rc = dataclasses.replace(rc, train=dataclasses.replace(rc.train, **changes))
        except ValueError as exc:
            raise CommandError("input", "pinn", "TrainConfig", str(exc)) from None
    return name, rc


def cmd_train(args) -> None:
    if args.list_presets:
        for name, p in experiments.PRESETS.items():
            print(name + (f"  ({p.note})" if p.note else ""))
        return

    name, rc = _run_config(args)
    outdir = Path(args.output or rc.output_dir or name)
    if not outdir.is_absolute():
        outdir = output_root() / outdir
    outdir.mkdir(parents=True, exist_ok=True)

    problem = rc.make_problem()
    tc = rc.train
    manifest = RunManifest(
        command="train", config=rc.to_ini(),
        seeds={"training": tc.seed, "estimator": tc.estimator.seed},
        version=_version(), serial=os.environ.get(SERIAL_ENV) == "1" or args.serial,
    )
    (outdir / "config.ini").write_text(manifest.config)
    manifest.outputs.append("config.ini")

    def progress(rec):
        if not args.quiet:
            print(
                f"iteration {rec.iteration}: loss={rec.loss:.3e} e_r={rec.e_r:.3e} "
                f"({rec.seconds:.1f}s)", file=sys.stderr, flush=True,
            )

    try:
        report = train(problem, tc, on_iteration=progress)
        status = "ok"
    except TrainingDiverged as exc:
        report, status = exc.report, "diverged"
        failure = str(exc)

    write_history_csv(outdir / "history.csv", report.history)
    manifest.outputs.append("history.csv")
    save_checkpoint(outdir / "checkpoint.txt", report.net, len(report.history))
    manifest.outputs.append("checkpoint.txt")
    if rc.write_points and report.point_clouds:
        write_points_csv(outdir / "points.csv", report.point_clouds)
        manifest.outputs.append("points.csv")
    manifest.finish(status)
    manifest.write(outdir)
    if status != "ok":
        raise CommandError("numerical", "pinn", "train", failure)
    print(outdir)


def cmd_evaluate(args) -> None:
    try:
        net, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise CommandError("input", "neuralfield", "load_checkpoint", str(exc)) from None
    if args.config is not None:
        problem = load_run_config(args.config).make_problem()
    else:
        overrides = {"alpha": args.alpha, "k": args.k_mode, "lam": args.lam, "T": args.t_final}
        try:
            problem = make_problem(args.problem, **overrides)
        except (TypeError, ValueError) as exc:
            raise CommandError("input", "problems", "make_problem", str(exc)) from None

    tt, xx = evaluation_grid(problem, args.grid)
    pred = predict(net, tt, xx)
    if problem.exact is not None:
        exact = exact_solution_eval(problem, tt, xx)
    else:
        from tdwfpinn.reference import solve_reference

        exact = solve_reference(problem, args.ref_nx, args.ref_nt)(tt, xx)
    rows = zip(tt.ravel(), xx.ravel(), pred.ravel(), exact.ravel(), np.abs(pred - exact).ravel())
    _write_rows(args.output, ["t", "x", "u_pred", "u_exact", "abs_err"], rows)


# }}}


# {{{ parser


def _schemes(p) -> None:
    p.add_argument("--scheme", default="gj2", help="mc1, gj1, mc2, gj2, mc-base or gj-base")
    p.add_argument("--t", type=float, default=0.75, help="evaluation time (default 0.75)")
    p.add_argument("--lambda", dest="lam", type=float, default=-1.0,
                   help="rate of the test function exp(lambda t) (default -1)")
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdwfpinn", description=__doc__.split("\n\n")[0])
    parser.add_argument("--serial", action="store_true",
                        help="force single-threaded BLAS for bit-exact reruns")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gj-table", help="print a Gauss-Jacobi rule as CSV")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--m", type=int, required=True, help="number of nodes")
    p.add_argument("--n", type=int, default=2, help="ceil(alpha): 1 or 2 (default 2)")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_gj_table)

    p = sub.add_parser("validate-derivative", help="estimator vs exact derivative of exp(lambda t)")
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--m", type=int, default=16, help="quadrature points")
    p.add_argument("--epsilon", type=float, help="MC clipping threshold (default per scheme)")
    p.add_argument("--sweep", choices=("m", "alpha"),
                   help="m: vary M at fixed alpha; alpha: 100 orders in [1.01, 1.99]")
    p.add_argument("--m-values", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated M values for --sweep m")
    p.add_argument("--output", help="CSV path (default stdout)")
    _schemes(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="derivative errors over a range of alpha or M")
    p.add_argument("--axis", choices=("alpha", "m"), required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True,
                   help="equispaced alpha values, or geometric M values (duplicates dropped)")
    p.add_argument("--alpha", type=float, default=1.5, help="order for --axis m")
    p.add_argument("--m", type=int, default=100, help="quadrature points for --axis alpha")
    p.add_argument("--output", help="CSV path (default stdout)")
    _schemes(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="train a PINN from a config file or preset")
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--preset", help="named preset, see --list-presets")
    p.add_argument("--list-presets", action="store_true")
    p.add_argument("--output", help="run directory, relative to $TDWFPINN_OUTPUT_ROOT (default ./runs)")
    p.add_argument("--iterations", type=int, help="override the number of iterations")
    p.add_argument("--epochs", type=int, help="override epochs per iteration")
    p.add_argument("--seed", type=int, help="override the training and estimator seeds")
    p.add_argument("--quiet", action="store_true", help="no per-iteration progress on stderr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="grid CSV of a checkpoint against the solution")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", help="take the problem from this run configuration")
    p.add_argument("--problem", default="dw_eq19", help="dw_eq19, dw_eq24 or burgers_eq26")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k-mode", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--t-final", type=float)
    p.add_argument("--grid", type=int, default=101, help="points per axis (default 101)")
    p.add_argument("--ref-nx", type=int, default=2048, help="reference solver space intervals")
    p.add_argument("--ref-nt", type=int, default=1000, help="reference solver time steps")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_evaluate)
    return parser


# }}}


def _error_line(kind: str, module: str, op: str, message: str) -> str:
    message = " ".join(str(message).split())
    return f"error: kind={kind} module={module} op={op} message={message}"


def run_subcommand(argv) -> int:
    """Parse *argv*, run the subcommand and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    op = args.command
    try:
        args.func(args)
    except CommandError as exc:
        code = EXIT_NUMERICAL if exc.kind == "numerical" else EXIT_INPUT
        print(_error_line(exc.kind, exc.module, exc.op, exc), file=sys.stderr)
        return code
    except ConfigError as exc:
        print(_error_line("config", "config", "parse", exc), file=sys.stderr)
        return EXIT_INPUT
    except (AccuracyError, ArithmeticError, FloatingPointError) as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(_error_line("numerical", module, op, exc), file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, OSError) as exc:
        print(_error_line("input", "cli", op, exc), file=sys.stderr)
        return EXIT_INPUT
    return 0


def _reexec_serial(argv) -> None:
    """Restart the interpreter with single-threaded BLAS settings.

    Thread counts are read when numpy loads its BLAS, so they cannot be
    changed in-process.
    """
    env = dict(os.environ)
    env.update({v: "1" for v in THREAD_VARS})
    env[SERIAL_ENV] = "1"
    sys.stdout.flush()
    os.execve(sys.executable, [sys.executable, "-m", "tdwfpinn", *argv], env)


def main(argv=None) -> int:
    from_process = argv is None
    argv = list(sys.argv[1:] if argv is None else argv)
    if from_process and "--serial" in argv and os.environ.get(SERIAL_ENV) != "1":
        _reexec_serial(argv)
    return run_subcommand(argv)


if __name__ == "__main__":
    sys.exit(main())
