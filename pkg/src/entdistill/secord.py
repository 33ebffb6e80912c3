"""Second-order expansions of n-copy distillation rates, in bits.

Both bounds have the form ``n * a + sqrt(n) * b`` with the ``O(log n)``
remainder dropped.  The upper expansion uses the Rains bound and the relative
entropy variance at the minimizer found by :func:`rains.rains_bound`; the
lower one uses coherent information and its variance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .qmat import (
    ConvergenceError,
    HermOp,
    coherent_info,
    coherent_info_variance,
    inv_normal_cdf,
    relative_entropy,
    relative_entropy_variance,
)
from .rains import RainsResult, rains_bound

__all__ = [
    "SecondOrderBound",
    "CAVEAT",
    "VAR_FLOOR",
    "SWEEP_COLUMNS",
    "upper_bound",
    "lower_bound",
    "tightness_check",
    "sweep",
    "write_sweep_csv",
]

CAVEAT = "O(log n) omitted"
SWEEP_COLUMNS = ["n", "upper_pc", "lower_pc", "rains", "hashing"]
# variances (bits^2) below this are float noise or minimizer error and are
# reported as exactly 0; sqrt(1e-10) * |Phi^{-1}(eps)| stays far below 1e-4
VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class SecondOrderBound:
    first_order_bits: float
    second_order_bits: float
    n: int
    eps: float
    kind: str
    caveat: str = CAVEAT
    note: str = ""

    @property
    def value_bits(self) -> float:
        return self.n * self.first_order_bits + math.sqrt(self.n) * self.second_order_bits

    @property
    def per_copy_bits(self) -> float:
        return self.value_bits / self.n


def _check(n, eps):
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")


def _floor(v: float) -> float:
    return 0.0 if v < VAR_FLOOR else v


def _rains(rho: HermOp, rains: RainsResult | None) -> RainsResult:
    res = rains_bound(rho) if rains is None else rains
    if not res.converged:
        raise ConvergenceError(
            f"Rains bound did not converge (bracket {res.lower_nats:.3e}..{res.upper_nats:.3e} nats)")
    return res


def upper_bound(rho: HermOp, n: int, eps: float, rains: RainsResult | None = None) -> SecondOrderBound:
    """``n R(rho) + sqrt(n V(rho||sigma*)) Phi^{-1}(eps)``.

    ``sigma*`` is the single minimizer returned by the cutting-plane run, so
    the variance is not optimized over the full set of minimizers.  Pass a
    precomputed ``rains`` result to reuse it across ``n``.
    """
    _check(n, eps)
    res = _rains(rho, rains)
    sigma = res.minimizer.entries
    if res.upper_nats == 0 and res.iterations == 0:
        # PPT' input: sigma* = rho, both terms vanish
        return SecondOrderBound(0.0, 0.0, int(n), eps, "upper", note="single-minimizer evaluation")
    first = relative_entropy(rho.entries, sigma)
    v = _floor(relative_entropy_variance(rho.entries, sigma))
    return SecondOrderBound(first, math.sqrt(v) * inv_normal_cdf(eps), int(n), eps, "upper",
                            note="single-minimizer evaluation")


def lower_bound(rho: HermOp, n: int, eps: float) -> SecondOrderBound:
    """``n I(A>B) + sqrt(n V(A>B)) Phi^{-1}(eps)``; negative coherent information is kept."""
    _check(n, eps)
    first = coherent_info(rho)
    v = _floor(coherent_info_variance(rho))
    return SecondOrderBound(first, math.sqrt(v) * inv_normal_cdf(eps), int(n), eps, "lower")


def tightness_check(rho: HermOp, eps: float, rains: RainsResult | None = None):
    """Whether the two expansions coincide.

    Returns ``(tight, report)`` where ``report`` holds the first- and
    second-order gaps.  Tight means gaps of at most ``1e-6`` and ``1e-4``.
    """
    up = upper_bound(rho, 1, eps, rains)
    lo = lower_bound(rho, 1, eps)
    g1 = up.first_order_bits - lo.first_order_bits
    g2 = up.second_order_bits - lo.second_order_bits
    tight = abs(g1) <= 1e-6 and abs(g2) <= 1e-4
    return tight, {"first_gap": g1, "second_gap": g2, "upper": up, "lower": lo}


def sweep(rho: HermOp, eps: float, n_list, rains: RainsResult | None = None) -> list[dict]:
    """Per-copy expansions for each ``n``, one Rains run shared by all rows."""
    n_list = list(n_list)
    if not n_list:
        raise ValueError("n_list is empty")
    res = _rains(rho, rains)
    rows = []
    for n in n_list:
        up = upper_bound(rho, n, eps, res)
        lo = lower_bound(rho, n, eps)
        rows.append({
            "n": int(n),
            "upper_pc": up.per_copy_bits,
            "lower_pc": lo.per_copy_bits,
            "rains": up.first_order_bits,
            "hashing": lo.first_order_bits,
        })
    return rows


def write_sweep_csv(rows, path_or_file):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if own:
            fh.close()
