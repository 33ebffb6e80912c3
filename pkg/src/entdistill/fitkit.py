"""Least-squares fit of finite-copy rate curves.

The model is ``c1 + c2 / sqrt(n) + c3 * log2(n) / n + c4 / n`` with uniform
weights.  The log is base 2; a fit done with natural logs gives the same
curve with ``c3`` scaled by ``ln 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RateCurve", "design_matrix", "fit_rate_curve", "read_sweep_csv", "write_fit_csv", "N_COEFFS"]

N_COEFFS = 4
MIN_POINTS = 5


def design_matrix(ns) -> np.ndarray:
    """Columns ``1, n^{-1/2}, log2(n)/n, 1/n``."""
    n = np.asarray(ns, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be at least 1")
    return np.column_stack([np.ones_like(n), n ** -0.5, np.log2(n) / n, 1.0 / n])


@dataclass
class RateCurve:
    points: list
    coefficients: tuple = ()
    residual_norm: float = math.nan
    residuals: list = field(default_factory=list)

    def __call__(self, n):
        """Model value at ``n`` (scalar or array)."""
        x = design_matrix(np.atleast_1d(n)) @ np.asarray(self.coefficients)
        return float(x[0]) if np.ndim(n) == 0 else x


def fit_rate_curve(points) -> RateCurve:
    """Fit ``points``, a sequence of ``(n, rate_per_copy_bits)`` pairs.

    Needs at least five distinct ``n``.  Solved by a reduced QR of the design
    matrix followed by a triangular solve.

    Raises
    ------
    ValueError
        Too few distinct ``n`` or a numerically rank-deficient design.
    """
    pts = [(int(n), float(r)) for n, r in points]
    if len({n for n, _ in pts}) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points with distinct n")
    if any(not math.isfinite(r) for _, r in pts):
        raise ValueError("rates must be finite")
    A = design_matrix([n for n, _ in pts])
    y = np.array([r for _, r in pts])
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * diag.max():
        raise ValueError("design matrix is rank deficient")
    coef = np.linalg.solve(R, Q.T @ y)
    res = y - A @ coef
    return RateCurve(pts, tuple(float(c) for c in coef), float(np.sqrt(res @ res)), [float(r) for r in res])


def read_sweep_csv(path) -> list:
    """``(n, rate_per_copy_bits)`` pairs from an isotropic sweep CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "n" not in rows[0] or "rate_per_copy_bits" not in rows[0]:
        raise ValueError("sweep CSV needs 'n' and 'rate_per_copy_bits' columns")
    return [(int(r["n"]), float(r["rate_per_copy_bits"])) for r in rows]


def write_fit_csv(curve: RateCurve, path_or_file):
    """Coefficients and residual norm first, then one line per point."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "n", "value"])
        for i, c in enumerate(curve.coefficients, 1):
            w.writerow([f"c{i}", "", repr(float(c))])
        w.writerow(["residual_norm", "", repr(float(curve.residual_norm))])
        for (n, _), r in zip(curve.points, curve.residuals):
            w.writerow(["residual", n, repr(float(r))])
    finally:
        if own:
            fh.close()
