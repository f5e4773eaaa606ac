"""Compare the four Caputo estimators on ``f(t) = exp(-t)``.

The exact derivative of order ``alpha`` is ``t**(2 - alpha) E_{1,3-alpha}(-t)``
(times ``lambda**2``), so every estimate can be scored directly. The script
prints

* relative error against ``M`` at ``alpha = 1.5``, ``t = 0.75``;
* relative error along ``alpha`` at ``t = 1.5``, including the float64 floor
  that Gauss-Jacobi Type II runs into as ``alpha`` approaches 2.

Run with ``python demos/derivative_accuracy.py``.
"""

from __future__ import annotations

import numpy as np

from tdwfpinn.experiments import alpha_sweep, fit_loglog_slope, m_sweep, mc_rms_errors


def m_table() -> None:
    print("relative error vs M (alpha=1.5, t=0.75)")
    gj_ms = [2, 4, 8, 16, 32, 80]
    mc_ms = [20, 80, 320, 1280, 5120]
    for scheme in ("gj1", "gj2"):
        rows = m_sweep(scheme, 1.5, gj_ms, 0.75, -1.0)
        print(f"  {scheme}: " + "  ".join(f"M={r.m}:{r.rel_error:.1e}" for r in rows))
    for scheme in ("mc1", "mc2"):
        rms = mc_rms_errors(scheme, 1.5, mc_ms, 0.75, -1.0, range(32))
        slope = fit_loglog_slope(mc_ms, rms)
        print(f"  {scheme} (RMS of 32 seeds): "
              + "  ".join(f"M={m}:{e:.1e}" for m, e in zip(mc_ms, rms))
              + f"  slope {slope:.2f}")


def alpha_table() -> None:
    print("\nrelative error vs alpha (t=1.5)")
    alphas = np.array([1.1, 1.3, 1.5, 1.7, 1.9, 1.95, 1.99])
    print("  alpha      " + "".join(f"{a:>9.2f}" for a in alphas))
    for scheme, m in (("gj2", 16), ("gj2", 100), ("gj1", 100), ("mc2", 10000)):
        rows = alpha_sweep(scheme, alphas, m, 1.5, -1.0)
        print(f"  {scheme} M={m:<5}" + "".join(f"{r.rel_error:9.1e}" for r in rows))


if __name__ == "__main__":
    m_table()
    alpha_table()
