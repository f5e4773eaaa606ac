"""Where do RAD collocation points go on the Burgers problem?

Reads the ``points.csv`` files of the ``alpha=1.1`` desk runs written by
``demos/acceptance_runs.sh`` and prints, for each iteration, the share of
interior points inside the shock band ``|x| <= 0.2`` together with a coarse
histogram of the final cloud.

    python demos/burgers_points.py [RUNS_DIR]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from tdwfpinn.experiments import band_fraction


def load(path: Path) -> dict[int, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return {int(it): data[data[:, 0] == it, 1:] for it in np.unique(data[:, 0])}


def main(root: str = "acceptance_runs") -> None:
    clouds = {}
    for rs in ("rad", "uniform"):
        path = Path(root) / f"burgers-a1.1-mc2-{rs}-desk-s0" / "points.csv"
        if not path.exists():
            sys.exit(f"missing {path}; run demos/acceptance_runs.sh first")
        clouds[rs] = load(path)

    print("iteration   RAD share |x|<=0.2   uniform share")
    for it in sorted(clouds["rad"]):
        print(f"{it:9d}   {band_fraction(clouds['rad'][it]):18.3f}   "
              f"{band_fraction(clouds['uniform'][it]):13.3f}")

    edges = np.linspace(-1, 1, 11)
    last = max(clouds["rad"])
    print(f"\nfinal RAD cloud, points per x bin (iteration {last}):")
    counts, _ = np.histogram(clouds["rad"][last][:, 1], edges)
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        print(f"  [{lo:+.1f}, {hi:+.1f})  {'#' * (c // 10)} {c}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
