"""Isotropic states and the exact linear program for their n-copy one-shot rate.

The n-copy program over ``(A^n : B^n)`` is invariant under ``U (x) conj(U)``
twirls and copy permutations, so the optimal test is a combination
``sum_i m_i P_i`` of the projectors ``P_i`` onto the span of tensor products
with exactly ``i`` factors of ``Phi`` and ``n - i`` factors of ``1 - Phi``.
The partial transposes of those projectors are diagonal in a common basis
with eigenvalues ``x[i, k]`` for ``k = 0..n``, which turns the program into an
LP in ``n + 2`` variables.  Everything here runs in exact rational
arithmetic; only the final ``-log2`` is a float.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .conic import IncrementalLp, RationalLp, solve_lp_exact
from .qmat import HermOp, binary_entropy, coherent_info, max_entangled, tensor_product

__all__ = [
    "IsoParams",
    "IsoLpResult",
    "as_fraction",
    "iso_state",
    "x_coeff",
    "symmetrized_sum",
    "symmetrized_projector",
    "iso_lp",
    "iso_rains_closed",
    "iso_hashing",
    "iso_sweep",
    "write_sweep_csv",
    "N_MAX",
    "SWEEP_COLUMNS",
]

N_MAX = 120
SWEEP_COLUMNS = ["n", "eta_num", "eta_den", "rate_bits", "rate_per_copy_bits", "rains_bits", "hashing_bits"]


def as_fraction(v) -> Fraction:
    """Exact rational from an int, Fraction, ``"p/q"`` string or decimal string.

    Floats are expanded by their shortest decimal representation, so ``0.9``
    becomes ``9/10`` rather than the nearest binary double.
    """
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(str(v).strip())


@dataclass(frozen=True)
class IsoParams:
    d: int
    F: Fraction
    n: int
    eps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "F", as_fraction(self.F))
        object.__setattr__(self, "eps", as_fraction(self.eps))
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not 0 <= self.F <= 1:
            raise ValueError("F must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @property
    def distillable_regime(self) -> bool:
        """True when ``F > 1/d``, the range where the state is entangled."""
        return self.F * self.d > 1


@dataclass
class IsoLpResult:
    eta: Fraction
    rate_bits: float
    m: list
    t: list
    params: IsoParams | None = None

    @property
    def rate_per_copy_bits(self) -> float:
        return self.rate_bits / self.params.n if self.params else math.nan


def iso_state(d: int, F) -> HermOp:
    """``F Phi(d) + (1 - F)(1 - Phi(d)) / (d^2 - 1)``."""
    F = float(F)
    phi = max_entangled(d).entries.real
    comp = np.eye(d * d) - phi
    return HermOp(d, d, F * phi + (1 - F) * comp / (d * d - 1))


@lru_cache(maxsize=None)
def _x_int(i: int, k: int, n: int, d: int) -> int:
    total = 0
    for m in range(max(0, i + k - n), min(i, k) + 1):
        total += (
            math.comb(k, m)
            * math.comb(n - k, i - m)
            * (-1) ** (i - m)
            * (d - 1) ** (k - m)
            * (d + 1) ** (n - k + m - i)
        )
    return total


def x_coeff(i: int, k: int, n: int, d: int) -> Fraction:
    """Eigenvalue of the partially transposed ``P_i`` on its ``k``-th eigenspace.

    The ``k``-th eigenspace is the span of products with ``k`` symmetric and
    ``n - k`` antisymmetric factors.
    """
    if not (0 <= i <= n and 0 <= k <= n):
        raise ValueError("need 0 <= i, k <= n")
    if d < 2:
        raise ValueError("d must be at least 2")
    return Fraction(_x_int(i, k, n, d), d ** n)


def symmetrized_sum(i: int, n: int, one: HermOp, zero: HermOp) -> HermOp:
    """Sum over positions of all n-fold products with ``i`` copies of ``one``, rest ``zero``."""
    if one.dims != zero.dims:
        raise ValueError("factors must act on the same space")
    da, db = one.dims
    out = None
    for pos in itertools.combinations(range(n), i):
        term = None
        for j in range(n):
            f = one if j in pos else zero
            term = f if term is None else tensor_product(term, f)
        out = term if out is None else out + term
    return out


def symmetrized_projector(i: int, n: int, d: int) -> HermOp:
    """Projector ``P_i`` on ``(C^d (x) C^d)^{(x) n}``, bipartite across ``(A^n : B^n)``.

    Dense and exponential in ``n``; meant for validating the LP at small scale.
    """
    if (d * d) ** n > 2 ** 14:
        raise ValueError("symmetrized_projector is limited to d^(2n) <= 2^14")
    phi = max_entangled(d)
    comp = HermOp(d, d, np.eye(d * d) - phi.entries)
    return symmetrized_sum(i, n, phi, comp)


def _lcm(values) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _iso_rows_lp(p: IsoParams, rows) -> RationalLp:
    """The isotropic LP restricted to some of its ``t_k`` rows.

    ``rows`` holds pairs ``(k, s)``: ``s = +1`` stands for ``t_k <= eta`` and
    ``s = -1`` for ``t_k >= -eta``.
    """
    n, d, F, eps = p.n, p.d, p.F, p.eps
    eta_j = n + 1
    lp = RationalLp(n + 2, objective=[0] * (n + 1) + [1])
    for i in range(n + 1):
        lp.set_bounds(i, 0, 1)
    # m = 1 is feasible, so its value bounds eta; starting eta at that bound
    # keeps every |t_k| <= eta row slack at the first vertex
    eta_cap = max(abs(sum(_x_int(i, k, n, d) for i in range(n + 1))) for k in range(n + 1))
    lp.set_bounds(eta_j, 0, Fraction(eta_cap, d ** n))
    lp.start_at_upper = {eta_j}
    weights = [math.comb(n, i) * F ** i * (1 - F) ** (n - i) for i in range(n + 1)]
    rhs = 1 - eps
    scale = _lcm([w.denominator for w in weights] + [rhs.denominator])
    lp.add_constraint({i: int(w * scale) for i, w in enumerate(weights) if w}, ">=", int(rhs * scale))
    for k, sgn in sorted(rows):
        lp.add_constraint(*_t_row(p, k, sgn))
    return lp


def _t_row(p: IsoParams, k: int, sgn: int):
    """Row ``t_k <= eta`` (``sgn = 1``) or ``t_k >= -eta`` (``sgn = -1``)."""
    n, d = p.n, p.d
    row = {i: _x_int(i, k, n, d) for i in range(n + 1) if _x_int(i, k, n, d)}
    # x[i,k] * d^n is an integer; eta is scaled by the same d^n
    if sgn > 0:
        return {**row, n + 1: -(d ** n)}, "<=", 0
    return {**row, n + 1: d ** n}, ">=", 0


def iso_lp(p: IsoParams, generate: bool = True) -> IsoLpResult:
    """Solve the n-copy isotropic program exactly.

    Minimizes ``eta`` over ``0 <= m_i <= 1`` with
    ``sum_i C(n,i) F^i (1-F)^(n-i) m_i >= 1 - eps`` and
    ``-eta <= sum_i x[i,k] m_i <= eta`` for every ``k``.
    Rows are scaled to integer coefficients before the exact simplex.

    With ``generate`` (the default) the ``k`` rows are added lazily: the LP
    is solved on a subset, every row the exact solution violates is added,
    and the loop stops once none is violated.  A relaxation optimum that
    satisfies every row is optimal for the full LP, so the answer is the
    same exact rational.  Each round warm-starts from the previous optimal
    tableau with a dual simplex.
    """
    if p.n > N_MAX:
        raise ValueError(f"n is capped at {N_MAX}")
    n, d = p.n, p.d
    if generate:
        rows = {(0, 1), (0, -1), (n, 1)}
        inc = IncrementalLp(_iso_rows_lp(p, rows))
        sol = inc.solution
    else:
        rows = {(k, s) for k in range(n + 1) for s in (1, -1)}
        sol = solve_lp_exact(_iso_rows_lp(p, rows))
    while True:
        if sol.status != "optimal":
            raise RuntimeError(f"isotropic LP reported {sol.status}; it is always feasible and bounded")
        m = sol.assignment[: n + 1]
        eta = sol.assignment[n + 1]
        t = [sum((x_coeff(i, k, n, d) * m[i] for i in range(n + 1)), Fraction(0)) for k in range(n + 1)]
        bad = {(k, 1) for k in range(n + 1) if t[k] > eta}
        bad |= {(k, -1) for k in range(n + 1) if t[k] < -eta}
        if not bad:
            return IsoLpResult(eta, _neg_log2(eta), m, t, p)
        if bad <= rows:
            raise AssertionError("exact LP solution violates one of its own rows")
        sol = inc.add_constraints([_t_row(p, k, sg) for k, sg in sorted(bad - rows)])
        rows |= bad


def _neg_log2(q: Fraction) -> float:
    """``-log2(q)`` accurate even when numerator and denominator overflow a float."""
    return math.log2(q.denominator) - math.log2(q.numerator)


def iso_rains_closed(d: int, F) -> float:
    """Rains bound of the isotropic state in bits, ``log d - (1-F) log(d-1) - h(F)``."""
    F = float(F)
    if not F * d > 1:
        raise ValueError("closed form holds for F > 1/d")
    return math.log2(d) - (1 - F) * math.log2(d - 1) - binary_entropy(F)


def iso_hashing(d: int, F) -> float:
    """Coherent information of the isotropic state in bits (may be negative)."""
    return coherent_info(iso_state(d, F))


def iso_sweep(d: int, F, eps, n_max: int, progress=None) -> list[dict]:
    """One row per ``n = 1..n_max`` with the exact eta and the per-copy rate."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    F = as_fraction(F)
    eps = as_fraction(eps)
    rains = iso_rains_closed(d, F) if F * d > 1 else math.nan
    hashing = iso_hashing(d, F)
    rows = []
    for n in range(1, n_max + 1):
        res = iso_lp(IsoParams(d, F, n, eps))
        rows.append({
            "n": n,
            "eta_num": res.eta.numerator,
            "eta_den": res.eta.denominator,
            "rate_bits": res.rate_bits,
            "rate_per_copy_bits": res.rate_bits / n,
            "rains_bits": rains,
            "hashing_bits": hashing,
        })
        if progress is not None:
            progress(rows[-1])
    return rows


def write_sweep_csv(rows, path_or_file):
    """Write sweep rows with the fixed column order and a header."""
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
