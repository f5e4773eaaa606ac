"""Train a small PINN on the unit diffusion-wave problem in about a minute.

Uses a 2x20 network and a few hundred collocation points, so the accuracy
is far from the full presets: the relative error on the test grid ends
around 1e-1 instead of a few 1e-2. Compare GJ-II with MC-II by passing the
scheme name:

    python demos/train_small.py gj2
    python demos/train_small.py mc2
"""

from __future__ import annotations

import sys

from tdwfpinn.fracderiv import EstimatorConfig
from tdwfpinn.pinn import TrainConfig, train
from tdwfpinn.problems import dw_eq19


def main(scheme: str = "gj2") -> None:
    m = 16 if scheme.startswith("gj") else 80
    cfg = TrainConfig(
        EstimatorConfig(1.5, scheme, m), iterations=4, epochs_per_iter=500, lr=3e-3,
        counts=(400, 100, 100), widths=(2, 20, 20, 1), test_grid=101,
    )
    report = train(dw_eq19(1.5), cfg, on_iteration=lambda r: print(
        f"iteration {r.iteration}: loss {r.loss:.3e}  e_r {r.e_r:.3e}  ({r.seconds:.1f}s)"
    ))
    print(f"final relative L2 error: {report.final_error:.3e}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
