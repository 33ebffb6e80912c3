"""Exact linear programming over the rationals.

Bounded-variable primal simplex on a dense tableau whose entries are
``gmpy2.mpq`` big rationals.  Phase one minimizes the sum of artificial
variables; phase two the user objective.  Entering variables are priced by
the largest reduced cost; after a long run of degenerate pivots the method
switches to Bland's smallest-index rule until the objective strictly
improves again, which rules out cycling.

``IncrementalLp`` keeps the optimal tableau and re-optimizes with a dual
simplex after inequality rows are appended.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

__all__ = ["RationalLp", "LpSolution", "IncrementalLp", "solve_lp_exact", "to_fraction"]

# consecutive degenerate pivots tolerated under largest-coefficient pricing
# before switching to Bland's rule; a cycle would need an endless streak
DEGENERATE_STREAK = 50

_ZERO = gmpy2.mpq(0)
_ONE = gmpy2.mpq(1)


def _q(v) -> gmpy2.mpq:
    if isinstance(v, Fraction):
        return gmpy2.mpq(v.numerator, v.denominator)
    if isinstance(v, float):
        raise TypeError("floats are not accepted in exact LPs; pass Fraction, int or a 'p/q' string")
    return gmpy2.mpq(v)


def to_fraction(v) -> Fraction:
    v = gmpy2.mpq(v)
    return Fraction(int(v.numerator), int(v.denominator))


@dataclass
class RationalLp:
    """``minimize c.x`` subject to rows ``a.x (<=|=|>=) b`` and ``lo <= x <= hi``.

    Bounds default to ``0 <= x`` with no upper bound; ``None`` means infinite.
    """

    nvars: int
    objective: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    sense: str = "min"
    # variables with two finite bounds that start nonbasic at their upper
    # bound instead of the lower one; only the starting vertex changes
    start_at_upper: set = field(default_factory=set)

    def __post_init__(self):
        if not self.objective:
            self.objective = [0] * self.nvars
        if not self.lower:
            self.lower = [0] * self.nvars
        if not self.upper:
            self.upper = [None] * self.nvars
        if not (len(self.objective) == len(self.lower) == len(self.upper) == self.nvars):
            raise ValueError("objective and bounds must have one entry per variable")

    def add_constraint(self, coeffs, sense: str, rhs):
        """``coeffs`` is a dense sequence or a ``{index: value}`` mapping."""
        if sense not in ("<=", "=", ">="):
            raise ValueError("sense must be one of '<=', '=', '>='")
        if isinstance(coeffs, dict):
            row = dict(coeffs)
        else:
            if len(coeffs) != self.nvars:
                raise ValueError("constraint row has the wrong length")
            row = {j: v for j, v in enumerate(coeffs) if v != 0}
        self.rows.append((row, sense, rhs))

    def set_bounds(self, j: int, lo=0, hi=None):
        self.lower[j] = lo
        self.upper[j] = hi

    def check(self, x) -> bool:
        """Exact feasibility of the assignment ``x``."""
        xq = [_q(v) for v in x]
        for j in range(self.nvars):
            if self.lower[j] is not None and xq[j] < _q(self.lower[j]):
                return False
            if self.upper[j] is not None and xq[j] > _q(self.upper[j]):
                return False
        for row, sense, rhs in self.rows:
            lhs = sum((_q(v) * xq[j] for j, v in row.items()), _ZERO)
            b = _q(rhs)
            if (sense == "<=" and lhs > b) or (sense == ">=" and lhs < b) or (sense == "=" and lhs != b):
                return False
        return True


@dataclass
class LpSolution:
    status: str
    optimum: Fraction | None
    assignment: list | None
    pivots: int = 0


class _Tableau:
    """Dense bounded-variable simplex tableau ``B^{-1} A`` with explicit basic values."""

    def __init__(self, T, beta, upper, basis):
        self.T = T
        self.beta = beta
        self.upper = upper
        self.basis = basis
        self.at_upper = np.zeros(T.shape[1], dtype=bool)
        self.pivots = 0

    def reduced_costs(self, c):
        cb = c[self.basis]
        return c - cb.dot(self.T)

    def run(self, c, allowed):
        """Minimize ``c`` over the current tableau; returns ``'optimal'`` or ``'unbounded'``."""
        T = self.T
        m, ncol = T.shape
        d = self.reduced_costs(c)
        in_basis = np.zeros(ncol, dtype=bool)
        in_basis[self.basis] = True
        streak = 0
        while True:
            bland = streak >= DEGENERATE_STREAK
            cand = allowed & ~in_basis & np.array(
                [(dj < 0 and not up) or (dj > 0 and up) for dj, up in zip(d, self.at_upper)], dtype=bool
            )
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal"
            if bland:
                j = int(idx[0])
            else:
                j = int(idx[np.argmax([abs(d[k]) for k in idx])])
            col = T[:, j]
            sgn = -1 if self.at_upper[j] else 1
            theta = self.upper[j]
            leave = -1
            leave_to_upper = False
            for i in range(m):
                a = col[i] * sgn
                if a > 0:
                    r = self.beta[i] / a
                    to_up = False
                elif a < 0 and self.upper[self.basis[i]] is not None:
                    r = (self.upper[self.basis[i]] - self.beta[i]) / (-a)
                    to_up = True
                else:
                    continue
                if theta is None or r < theta or (
                    r == theta and leave >= 0 and self.basis[i] < self.basis[leave]
                ):
                    theta, leave, leave_to_upper = r, i, to_up
            if theta is None:
                return "unbounded"
            streak = streak + 1 if theta == 0 else 0
            step = theta * sgn
            if step != 0:
                nz = np.flatnonzero(col != 0)
                self.beta[nz] = self.beta[nz] - col[nz] * step
            if leave < 0:
                self.at_upper[j] = not self.at_upper[j]
                continue
            # basis change: entering j replaces basis[leave]
            out = self.basis[leave]
            enter_val = (self.upper[j] - theta) if self.at_upper[j] else theta
            self.at_upper[j] = False
            self.at_upper[out] = leave_to_upper
            self._pivot(leave, j)
            self.beta[leave] = enter_val
            in_basis[out] = False
            in_basis[j] = True
            d = d - d[j] * T[leave]
            self.pivots += 1

    def run_dual(self, c, max_pivots: int):
        """Dual simplex from a dual feasible tableau.

        Returns ``'optimal'``, ``'infeasible'`` or ``'stalled'`` when
        ``max_pivots`` is reached.  Fixed columns (upper bound 0) never enter.
        """
        T = self.T
        m, ncol = T.shape
        d = self.reduced_costs(c)
        in_basis = np.zeros(ncol, dtype=bool)
        in_basis[self.basis] = True
        for _ in range(max_pivots):
            # leaving row: the basic variable furthest outside its bounds
            worst, r, to_up = _ZERO, -1, False
            for i in range(m):
                b = self.beta[i]
                u = self.upper[self.basis[i]]
                if b < 0 and -b > worst:
                    worst, r, to_up = -b, i, False
                elif u is not None and b > u and b - u > worst:
                    worst, r, to_up = b - u, i, True
            if r < 0:
                return "optimal"
            row = T[r]
            j, best = -1, None
            for k in np.flatnonzero(row != 0):
                if in_basis[k] or self.upper[k] == 0:
                    continue
                s = -1 if self.at_upper[k] else 1
                # moving k in its feasible direction must push row r back
                if (row[k] * s > 0) != to_up:
                    continue
                ratio = abs(d[k] / row[k])
                if best is None or ratio < best:
                    j, best = int(k), ratio
            if j < 0:
                return "infeasible"
            target = self.upper[self.basis[r]] if to_up else _ZERO
            delta = (self.beta[r] - target) / row[j]
            col = T[:, j]
            nz = np.flatnonzero(col != 0)
            self.beta[nz] = self.beta[nz] - col[nz] * delta
            enter_val = (self.upper[j] if self.at_upper[j] else _ZERO) + delta
            out = self.basis[r]
            self._pivot(r, j)
            self.beta[r] = enter_val
            self.at_upper[j] = False
            self.at_upper[out] = to_up
            in_basis[out] = False
            in_basis[j] = True
            d = d - d[j] * T[r]
            self.pivots += 1
        return "stalled"

    def _pivot(self, r, j):
        T = self.T
        piv = T[r, j]
        T[r] = T[r] / piv
        col = T[:, j].copy()
        col[r] = _ZERO
        nz = np.flatnonzero(col != 0)
        cz = np.flatnonzero(T[r] != 0)
        if nz.size:
            # zero entries of the pivot row leave their columns unchanged
            blk = np.ix_(nz, cz)
            T[blk] = T[blk] - np.outer(col[nz], T[r, cz])
        self.basis[r] = j

    def values(self, ncol):
        x = np.array([_ZERO] * ncol, dtype=object)
        for j in range(ncol):
            if self.at_upper[j]:
                x[j] = self.upper[j]
        x[self.basis] = self.beta
        return x


def _ub_of(maps, ub, j):
    """Shifted upper bound of original variable ``j`` when it maps to one column."""
    cols = maps[j][1]
    if len(cols) != 1 or cols[0][1] != 1:
        return None
    return ub[cols[0][0]]


def solve_lp_exact(lp: RationalLp) -> LpSolution:
    """Solve ``lp`` exactly; status is 'optimal', 'infeasible' or 'unbounded'."""
    return _solve(lp)[0]


@dataclass
class _Context:
    tab: _Tableau
    maps: list
    nstruct: int
    c2: np.ndarray


def _solve(lp: RationalLp):
    n = lp.nvars
    # column layout after shifting/splitting: each original variable maps to
    # (offset, [(column, sign)]) with x_j = offset + sum(sign * y_col)
    maps = []
    ub = []
    ncol = 0
    for j in range(n):
        lo = None if lp.lower[j] is None else _q(lp.lower[j])
        hi = None if lp.upper[j] is None else _q(lp.upper[j])
        if lo is not None and hi is not None and hi < lo:
            return LpSolution("infeasible", None, None), None
        if lo is not None:
            maps.append((lo, [(ncol, 1)]))
            ub.append(None if hi is None else hi - lo)
            ncol += 1
        elif hi is not None:
            maps.append((hi, [(ncol, -1)]))
            ub.append(None)
            ncol += 1
        else:
            maps.append((_ZERO, [(ncol, 1), (ncol + 1, -1)]))
            ub.extend([None, None])
            ncol += 2
    nstruct = ncol
    start_up = [maps[j][1][0][0] for j in sorted(lp.start_at_upper) if _ub_of(maps, ub, j) is not None]
    m = len(lp.rows)
    rows = []
    rhs = []
    slack_sign = []
    for row, sense, b in lp.rows:
        dense = [_ZERO] * nstruct
        bq = _q(b)
        for j, v in row.items():
            vq = _q(v)
            off, cols = maps[j]
            bq -= vq * off
            for col, s in cols:
                dense[col] += vq * s
        for col in start_up:
            bq -= dense[col] * ub[col]
        rows.append(dense)
        rhs.append(bq)
        slack_sign.append({"<=": 1, ">=": -1, "=": 0}[sense])
    nslack = sum(1 for s in slack_sign if s != 0)
    width = nstruct + nslack + m
    T = np.array([[_ZERO] * width for _ in range(m)], dtype=object).reshape(m, width)
    beta = np.array([_ZERO] * m, dtype=object)
    basis = np.zeros(m, dtype=int)
    upper = ub + [None] * (nslack + m)
    k = nstruct
    art = []
    for i in range(m):
        # negate rows so the right side is >= 0 and, where possible, so the
        # slack enters with +1 and can start basic without an artificial
        flip = -1 if rhs[i] < 0 or (rhs[i] == 0 and slack_sign[i] < 0) else 1
        T[i, :nstruct] = [v * flip for v in rows[i]]
        beta[i] = rhs[i] * flip
        s = slack_sign[i]
        if s:
            T[i, k] = _q(s * flip)
            if s * flip > 0:
                basis[i] = k
            k += 1
        if not s or s * flip < 0:
            col = nstruct + nslack + len(art)
            T[i, col] = _ONE
            basis[i] = col
            art.append(col)
    used = nstruct + nslack + len(art)
    T = T[:, :used]
    upper = upper[:used]
    tab = _Tableau(T, beta, upper, basis)
    tab.at_upper[start_up] = True
    allowed = np.ones(used, dtype=bool)

    if art:
        c1 = np.array([_ZERO] * used, dtype=object)
        c1[art] = _ONE
        tab.run(c1, allowed)
        if sum(tab.beta[i] for i in range(m) if tab.basis[i] in art) != 0:
            return LpSolution("infeasible", None, None, tab.pivots), None
        art_set = set(art)
        keep = []
        stuck = []
        for i in range(m):
            if tab.basis[i] in art_set:
                cand = [
                    j for j in range(nstruct + nslack) if tab.T[i, j] != 0 and not tab.at_upper[j]
                ]
                if cand:
                    tab._pivot(i, cand[0])
                    tab.beta[i] = _ZERO
                    keep.append(i)
                elif any(tab.T[i, j] != 0 for j in range(nstruct + nslack)):
                    # only bound-saturated columns touch this row: pin the
                    # artificial at zero instead of pivoting it out
                    stuck.append(int(tab.basis[i]))
                    keep.append(i)
                # else: redundant row, dropped
            else:
                keep.append(i)
        cols = np.concatenate([np.arange(nstruct + nslack), np.array(stuck, dtype=int)])
        remap = {int(c): k for k, c in enumerate(cols)}
        tab.T = tab.T[np.ix_(keep, cols)]
        tab.beta = tab.beta[keep]
        tab.basis = np.array([remap[int(b)] for b in tab.basis[keep]], dtype=int)
        tab.upper = list(tab.upper[: nstruct + nslack]) + [_ZERO] * len(stuck)
        tab.at_upper = np.concatenate([tab.at_upper[: nstruct + nslack], np.zeros(len(stuck), bool)])
        used = len(cols)
        allowed = np.ones(used, dtype=bool)

    sign = -1 if lp.sense == "max" else 1
    c2 = np.array([_ZERO] * used, dtype=object)
    for j in range(n):
        cj = _q(lp.objective[j]) * sign
        for col, s in maps[j][1]:
            c2[col] += cj * s
    status = tab.run(c2, allowed)
    if status == "unbounded":
        return LpSolution("unbounded", None, None, tab.pivots), None
    ctx = _Context(tab, maps, nstruct, c2)
    return _extract(lp, ctx), ctx


def _extract(lp: RationalLp, ctx: _Context) -> LpSolution:
    n = lp.nvars
    y = ctx.tab.values(ctx.tab.T.shape[1])[: ctx.nstruct]
    x = []
    for j in range(n):
        off, cols = ctx.maps[j]
        x.append(off + sum((y[col] * s for col, s in cols), _ZERO))
    opt = sum((_q(lp.objective[j]) * x[j] for j in range(n)), _ZERO)
    if not lp.check(x):
        raise AssertionError("exact simplex returned an infeasible point")
    return LpSolution("optimal", to_fraction(opt), [to_fraction(v) for v in x], ctx.tab.pivots)


class IncrementalLp:
    """Exact LP that keeps its optimal tableau so inequality rows can be added.

    The previous optimal basis stays dual feasible when rows are appended,
    so a dual simplex restores primal feasibility, usually in far fewer
    pivots than a fresh solve.  If the warm start stalls, or the LP has no
    kept tableau (it was infeasible or unbounded), the enlarged LP is solved
    from scratch.
    """

    def __init__(self, lp: RationalLp):
        self.lp = RationalLp(lp.nvars, list(lp.objective), list(lp.lower), list(lp.upper), list(lp.rows),
                             lp.sense, set(lp.start_at_upper))
        self.solution, self._ctx = _solve(self.lp)

    def add_constraints(self, rows) -> LpSolution:
        """Append ``(coeffs, sense, rhs)`` rows (senses ``<=`` or ``>=``) and re-solve."""
        rows = list(rows)
        for coeffs, sense, rhs in rows:
            if sense not in ("<=", ">="):
                raise ValueError("only inequality rows can be added incrementally")
            self.lp.add_constraint(coeffs, sense, rhs)
        ctx = self._ctx
        if ctx is None:
            self.solution, self._ctx = _solve(self.lp)
            return self.solution
        tab = ctx.tab
        x = tab.values(tab.T.shape[1])
        for row in rows:
            self._append_row(ctx, x, row)
        cap = 20 * (tab.T.shape[0] + tab.T.shape[1])
        status = tab.run_dual(ctx.c2, cap)
        if status == "stalled":
            self.solution, self._ctx = _solve(self.lp)
            return self.solution
        if status == "infeasible":
            self.solution, self._ctx = LpSolution("infeasible", None, None, tab.pivots), None
            return self.solution
        # primal pass as a safety net; it finds nothing to do at an optimum
        tab.run(ctx.c2, np.ones(tab.T.shape[1], dtype=bool))
        self.solution = _extract(self.lp, ctx)
        return self.solution

    @staticmethod
    def _append_row(ctx: _Context, x, row):
        coeffs, sense, rhs = row
        tab = ctx.tab
        m, width = tab.T.shape
        full = np.array([_ZERO] * (width + 1), dtype=object)
        b = _q(rhs)
        for j, v in (coeffs.items() if isinstance(coeffs, dict) else enumerate(coeffs)):
            vq = _q(v)
            if vq == 0:
                continue
            off, cols = ctx.maps[j]
            b -= vq * off
            for col, sg in cols:
                full[col] += vq * sg
        # slack enters with +1: a.y + s = b for <=, -a.y + s = -b for >=
        if sense == ">=":
            full = -full
            b = -b
        full[width] = _ONE
        value = b - sum((full[k] * x[k] for k in np.flatnonzero(full[:width] != 0)), _ZERO)
        # eliminate the basic columns so the row is in tableau form
        for i in range(m):
            a = full[tab.basis[i]]
            if a != 0:
                full[:width] = full[:width] - a * tab.T[i]
        tab.T = np.vstack([np.hstack([tab.T, np.array([[_ZERO]] * m, dtype=object)]), full[None, :]])
        tab.beta = np.append(tab.beta, np.array([value], dtype=object))
        tab.basis = np.append(tab.basis, width)
        tab.upper = list(tab.upper) + [None]
        tab.at_upper = np.append(tab.at_upper, False)
        ctx.c2 = np.append(ctx.c2, np.array([_ZERO], dtype=object))
