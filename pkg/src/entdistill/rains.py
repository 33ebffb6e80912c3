"""Rains bound by a cutting-plane method with a certified bracket.

The Rains bound is ``min D(rho||sigma)`` over the set of operators
``sigma >= 0`` with ``||sigma^{T_B}||_1 <= 1``.  Writing
``f(sigma) = -tr rho ln sigma`` it equals ``min f - S(rho)``.  Tangent planes
of the convex function ``f`` at interior points give an outer approximation
of its epigraph; minimizing over that approximation (an SDP) gives a lower
bound, and any point of the set gives an upper bound.  New tangent points are
found by a line search between the SDP minimizer and the maximally mixed
state, supplemented by points from a log-barrier central path that home in on
the minimizer.  Work is in nats internally; results carry both units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import SdpProblem, SolverError, solve_sdp
from .qmat import HermOp, is_ppt_prime, partial_transpose, tensor_product, trace_norm

__all__ = [
    "RainsResult",
    "TangentData",
    "d_matrix",
    "frechet_log",
    "neg_log_overlap",
    "tangent_cut",
    "line_search",
    "rains_bound",
    "two_copy_gap",
    "TRACE_COLUMNS",
]

LN2 = math.log(2)
MAX_ITER = 500
ALPHA_MIN = 1e-9
EIG_FLOOR = 1e-12
NUDGE = 1e-6
REFINE_T = 1e12
TRACE_COLUMNS = ["iter", "lower_nats", "upper_nats", "tangents"]


@dataclass
class TangentData:
    points: list = field(default_factory=list)
    cuts: list = field(default_factory=list)
    offsets: list = field(default_factory=list)


@dataclass
class RainsResult:
    """Bracket ``lower <= R(rho) <= upper`` on the Rains bound.

    ``minimizer`` is the point of the Rains set attaining ``upper``;
    ``trace`` holds one ``(iter, lower_nats, upper_nats, tangents)`` row per
    iteration, starting with the initial bracket at iteration 0.
    """

    lower_nats: float
    upper_nats: float
    minimizer: HermOp
    iterations: int
    tangent_count: int
    converged: bool
    trace: list = field(default_factory=list)
    tangents: TangentData | None = None

    @property
    def lower_bits(self) -> float:
        return self.lower_nats / LN2

    @property
    def upper_bits(self) -> float:
        return self.upper_nats / LN2

    @property
    def mid_bits(self) -> float:
        return 0.5 * (self.lower_bits + self.upper_bits)


def d_matrix(lam) -> np.ndarray:
    """First divided differences of ``ln`` on the eigenvalues ``lam``.

    ``D[i, j] = (ln l_i - ln l_j) / (l_i - l_j)``, replaced by ``1 / l_i`` when
    the two eigenvalues agree to within ``1e-12`` relative.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("d_matrix needs strictly positive eigenvalues")
    li = lam[:, None]
    lj = lam[None, :]
    diff = li - lj
    close = np.abs(diff) <= 1e-12 * np.maximum(li, lj)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(close, 0.0, (np.log(li) - np.log(lj)) / np.where(close, 1.0, diff))
    # the equal-eigenvalue branch uses the mean so the result stays symmetric
    eq = 2.0 / (li + lj)
    return np.where(close, eq, out)


def frechet_log(lam, u, delta) -> np.ndarray:
    """Directional derivative of ``ln`` at ``u diag(lam) u^dag`` along ``delta``."""
    uh = u.conj().T
    return u @ (d_matrix(lam) * (uh @ delta @ u)) @ uh


def _eig(mat):
    w, u = np.linalg.eigh(mat)
    return w, u


def neg_log_overlap(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``-tr rho ln sigma`` for positive definite ``sigma`` (nats)."""
    w, u = _eig(sigma)
    if w[0] <= 0:
        return math.inf
    r = u.conj().T @ rho @ u
    return float(-np.real(np.sum(np.diag(r) * np.log(w))))


def tangent_cut(rho: np.ndarray, sigma: np.ndarray):
    """Cut data at ``sigma``: ``E`` and ``c`` with ``f(X) >= c - tr E X`` for all ``X > 0``."""
    w, u = _eig(sigma)
    if w[0] < EIG_FLOOR:
        raise ValueError("tangent points must be positive definite")
    uh = u.conj().T
    e = u @ (d_matrix(w) * (uh @ rho @ u)) @ uh
    e = 0.5 * (e + e.conj().T)
    f = float(-np.real(np.sum(np.diag(uh @ rho @ u) * np.log(w))))
    c = f + float(np.real(np.trace(e @ sigma)))
    return e, c, f


def line_search(rho, sigma_lower, z, alpha_min: float = ALPHA_MIN):
    """Minimize ``f(alpha z + (1 - alpha) sigma_lower)`` over ``alpha in [alpha_min, 1]``.

    ``f`` is convex along the segment, so bisection on the sign of the
    derivative ``-tr{rho Dln[sigma_alpha](z - sigma_lower)}`` converges to the
    minimizer.  Returns ``(sigma, alpha)``.
    """
    r = _as_array(rho)
    lo_pt = _as_array(sigma_lower)
    zz = _as_array(z)
    direction = zz - lo_pt

    def point(a):
        return a * zz + (1 - a) * lo_pt

    def slope(a):
        w, u = _eig(point(a))
        if w[0] <= 0:
            return math.inf
        return float(-np.real(np.trace(r @ frechet_log(w, u, direction))))

    if np.max(np.abs(direction)) == 0:
        return point(1.0), 1.0
    g_lo = slope(alpha_min)
    if g_lo >= 0:
        return point(alpha_min), alpha_min
    if slope(1.0) <= 0:
        return point(1.0), 1.0
    lo, hi = alpha_min, 1.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        g = slope(mid)
        if abs(g) <= 1e-12:
            lo = hi = mid
            break
        if g < 0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    return point(a), a


def _ln_second_diff(lam) -> np.ndarray:
    """Second divided differences ``ln[l_i, l_j, l_k]`` as an ``n x n x n`` array."""
    lam = np.asarray(lam, dtype=float)
    d1 = d_matrix(lam)
    li = lam[:, None, None]
    lj = lam[None, :, None]
    lk = lam[None, None, :]
    thr = 1e-6 * np.maximum(np.maximum(li, lj), lk)
    ik = np.abs(li - lk) > thr
    ij = np.abs(li - lj) > thr
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (d1[:, :, None] - d1[None, :, :]) / (li - lk)
        # ln[i,j,k] = ln[i,k,j], so the (i, j) pair serves when l_i ~ l_k
        b = (d1[:, None, :] - d1.T[None, :, :]) / (li - lj)
    flat = -0.5 / (li * lk)
    return np.where(ik, a, np.where(ij, b, flat))


def _herm_basis(n: int, real: bool) -> np.ndarray:
    """Orthonormal basis of real symmetric (or Hermitian) matrices, ``(m, n, n)``."""
    out = []
    s = 1 / math.sqrt(2)
    for i in range(n):
        e = np.zeros((n, n), dtype=float if real else complex)
        e[i, i] = 1
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=float if real else complex)
            e[i, j] = e[j, i] = s
            out.append(e)
            if not real:
                e = np.zeros((n, n), dtype=complex)
                e[i, j] = -1j * s
                e[j, i] = 1j * s
                out.append(e)
    return np.array(out)


def _logdet_terms(x, dirs):
    """Gradient and Hessian of ``-ln det X`` along the direction matrices ``dirs``.

    Returns None when ``X`` is not positive definite.
    """
    try:
        c = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return None
    ci = np.linalg.inv(c)
    # C^{-1} D C^{-H} has the same trace and Gram matrix as X^{-1/2} D X^{-1/2}
    y = ci[None, :, :] @ dirs @ ci.conj().T[None, :, :]
    grad = -np.real(np.trace(y, axis1=1, axis2=2))
    flat = y.reshape(len(dirs), -1)
    hess = np.real(flat.conj() @ flat.T)
    return grad, hess, -2 * float(np.sum(np.log(np.real(np.diag(c)))))


class _BarrierPath:
    """Central path of ``min f(sigma)`` over the lifted Rains set.

    Variables are ``sigma`` and ``sigma+`` in an orthonormal basis.  The
    barrier is ``-ln det sigma - ln det sigma+ - ln det(sigma+ - sigma^{T_B})
    - ln(1 - 2 tr sigma+ + tr sigma)``, with parameter ``nu = 3 n + 1``.  A
    centered point for weight ``t`` is within ``nu / t`` of the optimum, so the
    tangent cut there is nearly tight.  Used only to supply tangent points.
    """

    def __init__(self, rho: np.ndarray, dims, real: bool):
        self.rho = rho
        self.dims = dims
        n = rho.shape[0]
        self.n = n
        self.basis = _herm_basis(n, real)
        m = len(self.basis)
        self.m = m
        zero = np.zeros_like(self.basis)
        pt = np.array([partial_transpose(HermOp(dims[0], dims[1], b)).entries for b in self.basis])
        self.dirs = [
            np.concatenate([self.basis, zero]),
            np.concatenate([zero, self.basis]),
            np.concatenate([-pt, self.basis]),
        ]
        tr = np.real(np.trace(self.basis, axis1=1, axis2=2))
        self.lin = np.concatenate([tr, -2 * tr])
        self.nu = 3 * n + 1
        # strictly feasible start: sigma = 1/(2n), sigma+ = 0.6/n
        eye = np.eye(n)
        self.v = np.concatenate([self._coords(eye / (2 * n)), self._coords(0.6 * eye / n)])
        self.t = 1.0

    def _coords(self, mat):
        return np.real(np.einsum("aij,ji->a", self.basis, mat))

    def sigma(self, v=None):
        v = self.v if v is None else v
        return np.einsum("a,aij->ij", v[: self.m], self.basis)

    def _mats(self, v):
        s = self.sigma(v)
        sp_ = np.einsum("a,aij->ij", v[self.m:], self.basis)
        st = partial_transpose(HermOp(self.dims[0], self.dims[1], s)).entries
        return [s, sp_, sp_ - st], 1 + float(self.lin @ v)

    def _value(self, v):
        mats, s = self._mats(v)
        if s <= 0:
            return math.inf
        total = -math.log(s)
        for x in mats:
            try:
                c = np.linalg.cholesky(x)
            except np.linalg.LinAlgError:
                return math.inf
            total -= 2 * float(np.sum(np.log(np.real(np.diag(c)))))
        f = neg_log_overlap(self.rho, self.sigma(v))
        return self.t * f + total

    def _newton(self):
        v = self.v
        mats, s = self._mats(v)
        g = self.lin / s
        h = np.outer(self.lin, self.lin) / s**2
        for x, dirs in zip(mats, self.dirs):
            gg, hh, _ = _logdet_terms(x, dirs)
            g = g + gg
            h = h + hh
        w, u = _eig(self.sigma(v))
        uh = u.conj().T
        rt = uh @ self.rho @ u
        bt = uh[None, :, :] @ self.basis @ u[None, :, :]
        e = u @ (d_matrix(w) * rt) @ uh
        gf = -np.real(np.einsum("aij,ji->a", self.basis, e))
        k = np.einsum("ijk,ki,aij->ajk", _ln_second_diff(w), rt, bt)
        h1 = k.reshape(self.m, -1) @ bt.reshape(self.m, -1).T
        hf = -np.real(h1 + h1.T)
        g[: self.m] += self.t * gf
        h[: self.m, : self.m] += self.t * hf
        h = 0.5 * (h + h.T)
        try:
            step = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(h, g, rcond=None)[0]
        return step, float(-g @ step)

    def center(self, max_steps: int = 60):
        """Damped Newton on ``t f + barrier`` from the current point."""
        cur = self._value(self.v)
        for _ in range(max_steps):
            step, dec = self._newton()
            if not dec > 1e-12:
                break
            a = 1.0
            while a > 1e-12:
                trial = self.v + a * step
                val = self._value(trial)
                if val <= cur - 0.25 * a * dec:
                    break
                a *= 0.5
            else:
                break
            self.v, cur = trial, val
            if dec < 1e-10:
                break

    def advance(self, factor: float = 10.0) -> np.ndarray:
        self.t *= factor
        self.center()
        return self.sigma()


def _as_array(m) -> np.ndarray:
    return np.asarray(m.entries if isinstance(m, HermOp) else m)


def _sanitize(sigma: np.ndarray, dims) -> np.ndarray:
    """Project a solver output back into the Rains set.

    Negative eigenvalues from solver round-off are clipped and the result is
    scaled so that ``||sigma^{T_B}||_1 <= 1``.
    """
    sigma = 0.5 * (sigma + sigma.conj().T)
    w, u = _eig(sigma)
    sigma = (u * np.clip(w, 0, None)) @ u.conj().T
    tn = trace_norm(partial_transpose(HermOp(dims[0], dims[1], sigma)))
    if tn > 1:
        sigma = sigma / tn
    return sigma


def _cut_problem(dims, real: bool, cuts, offsets, t_floor: float):
    n = dims[0] * dims[1]
    p = SdpProblem()
    t = p.scalar_var("t")
    sig = p.sym_var("sigma", n, hermitian=not real)
    sp_ = p.sym_var("sigma+", n, hermitian=not real)
    # sigma- = sigma+ - sigma^{T_B} is eliminated
    p.add_psd("sigma", sig)
    p.add_psd("sigma+", sp_)
    p.add_psd("sigma-", sp_ - sig.partial_transpose(dims))
    p.add_ineq(2.0 * sp_.trace() - sig.trace(), "<=", 1.0)
    p.add_ineq(t, ">=", t_floor)
    for e, c in zip(cuts, offsets):
        mat = e.real if real else e
        p.add_ineq(t + sig.inner(mat), ">=", c)
    p.minimize(t)
    return p, sig


def rains_bound(rho: HermOp, tol: float = 1e-6, max_iter: int = MAX_ITER, sdp_tol: float = 1e-9,
                polish: bool = True) -> RainsResult:
    """Bracket the Rains bound of ``rho`` to within ``tol`` nats.

    Parameters
    ----------
    rho : HermOp
        Bipartite state.
    tol : float
        Target bracket width in nats.
    max_iter : int
        Iteration cap; on reaching it ``converged`` is False and the current
        bracket is returned.
    polish : bool
        Also take one tangent point per iteration from a log-barrier central
        path (weight growing tenfold per iteration).  Without it the cut model
        stalls around ``1e-5`` nats on typical states.

    Notes
    -----
    The lower end is the dual objective of each cut SDP minus its dual
    residual times the largest feasible variable norm, so it stays valid
    even when the solver stops slightly short of optimality.  The upper end is
    ``D(rho||sigma*)`` at an explicit member of the Rains set.
    """
    r = np.array(rho.entries)
    dims = rho.dims
    n = rho.dim
    if abs(rho.trace() - 1) > 1e-6 or rho.eigvalsh()[0] < -1e-9:
        raise ValueError("rains_bound needs a density matrix")
    if is_ppt_prime(rho):
        return RainsResult(0.0, 0.0, rho, 0, 0, True, [(0, 0.0, 0.0, 0)], TangentData())
    real = rho.is_real
    if real:
        r = r.real
    w = np.linalg.eigvalsh(r)
    w = w[w > 1e-15]
    entropy = float(-np.sum(w * np.log(w)))
    z = np.eye(n) / n
    tangents = TangentData()
    best = z
    e, c, f_best = tangent_cut(r, z)
    tangents.points.append(z)
    tangents.cuts.append(e)
    tangents.offsets.append(c)
    f_lower = entropy
    trace = [(0, f_lower - entropy, f_best - entropy, 1)]
    converged = False
    it = 0
    path = _BarrierPath(r, dims, real) if polish else None
    while it < max_iter:
        it += 1
        p, sig = _cut_problem(dims, real, tangents.cuts, tangents.offsets, f_lower)
        try:
            sol = solve_sdp(p, tol=sdp_tol)
        except SolverError:
            break
        if sol.status == "infeasible":
            raise SolverError("cut SDP reported infeasibility")
        if sol.status == "optimal":
            # weak duality charged for the dual residual: on the feasible set
            # sigma and sigma+ have trace at most 1 and |t| stays below bound
            bound = max(abs(f_lower), abs(f_best))
            slack = float(sol.residuals[1]) * math.sqrt(bound * bound + 2.0)
            f_lower = max(f_lower, float(sol.dual_value) - slack)
        sigma_lower = _sanitize(np.asarray(sol.value(sig)), dims)
        if f_best - f_lower < tol:
            trace.append((it, f_lower - entropy, f_best - entropy, len(tangents.cuts)))
            converged = True
            break
        new, _ = line_search(r, sigma_lower, z)
        candidates = [new]
        if path is not None:
            candidates.append(path.advance())
        for new in candidates:
            if np.linalg.eigvalsh(new)[0] < EIG_FLOOR:
                new = (1 - NUDGE) * new + NUDGE * z
            e, c, f_new = tangent_cut(r, new)
            tangents.points.append(new)
            tangents.cuts.append(e)
            tangents.offsets.append(c)
            if f_new <= f_best:
                best, f_best = new, f_new
        trace.append((it, f_lower - entropy, f_best - entropy, len(tangents.cuts)))
        if f_best - f_lower < tol:
            converged = True
            break
    if converged and path is not None:
        # more centering is cheap and sharpens sigma*, which second-order
        # terms evaluated at sigma* are sensitive to; R-bar can only drop
        while path.t < REFINE_T:
            cand = path.advance()
            if np.linalg.eigvalsh(cand)[0] < EIG_FLOOR:
                break
            f_new = neg_log_overlap(r, cand)
            if f_new <= f_best:
                best, f_best = cand, f_new
        trace.append((it, f_lower - entropy, f_best - entropy, len(tangents.cuts)))
    lower = max(f_lower - entropy, 0.0)
    upper = f_best - entropy
    return RainsResult(lower, upper, HermOp.from_matrix(best, dims, tol=1e-9), it, len(tangents.cuts),
                       converged, trace, tangents)


def two_copy_gap(rho: HermOp, tol: float = 1e-6, **kwargs):
    """``(2 * lower(rho), upper(rho (x) rho))`` in nats, two copies grouped as ``(AA' : BB')``.

    A strictly positive ``2 * lower - upper`` certifies that the Rains bound is
    not additive on ``rho``.
    """
    if rho.dim > 9:
        raise ValueError("two_copy_gap is limited to d_A * d_B <= 9")
    one = rains_bound(rho, tol, **kwargs)
    two = rains_bound(tensor_product(rho, rho), tol, **kwargs)
    return 2 * one.lower_nats, two.upper_nats
