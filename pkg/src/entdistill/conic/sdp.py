"""Small dense semidefinite programs.

A problem is a vector of real decision variables ``x`` together with

* linear matrix inequalities ``F0 + sum_i x_i F_i >= 0`` (the *blocks*),
* scalar equalities and inequalities, and
* a linear objective.

Matrix-valued decision variables are just groups of scalars: :meth:`SdpProblem.sym_var`
returns an :class:`Affine` expression parametrizing a real symmetric or complex
Hermitian matrix.  Complex Hermitian blocks are embedded as real symmetric
blocks of twice the side, ``[[Re X, -Im X], [Im X, Re X]]``.

The interior-point iterations (Nesterov-Todd scaling, Mehrotra
predictor-corrector, infeasible start) are delegated to
:func:`cvxopt.solvers.conelp`.  The linear systems it needs are solved here
through a dense Schur complement assembled block by block, which keeps the
cost at ``O(m^2 n^2)`` memory-free of the ``n^2 x m`` coefficient matrices.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = ["Affine", "SdpProblem", "SdpSolution", "solve_sdp", "SolverError"]

DEFAULT_MAXITER = 200
STATUS_TOL = 1e-7
# iteration cap for attempts with a target tighter than STATUS_TOL
TIGHT_MAXITER = 60
# use the QR route when W^{-T} G has at most this many entries
QR_MAX_ENTRIES = 4_000_000


class SolverError(RuntimeError):
    """The conic solver could not produce a usable answer."""


def _pad(coef: sp.csr_matrix, ncols: int) -> sp.csr_matrix:
    if coef.shape[1] == ncols:
        return coef
    coef = coef.tocsr(copy=True)
    coef.resize((coef.shape[0], ncols))
    return coef


class Affine:
    """Affine matrix expression ``mat(const + coef @ x)`` of shape ``side x side``.

    ``coef`` has one row per entry of the row-major vectorized matrix.  Scalars
    are expressions with ``side == 1``.
    """

    __slots__ = ("side", "coef", "const")
    # make ``ndarray - expr`` defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, side: int, coef, const):
        self.side = side
        self.coef = sp.csr_matrix(coef)
        self.const = np.asarray(const).ravel()
        if self.coef.shape[0] != side * side or self.const.size != side * side:
            raise ValueError("coefficient shape does not match the side length")

    @classmethod
    def constant(cls, mat) -> "Affine":
        mat = np.atleast_2d(np.asarray(mat))
        n = mat.shape[0]
        return cls(n, sp.csr_matrix((n * n, 0)), mat.ravel())

    @classmethod
    def assemble(cls, side: int, entries: dict) -> "Affine":
        """Matrix expression from ``{(i, j): scalar expression or number}``.

        Unlisted entries are zero.  Symmetry is the caller's business.
        """
        nv = max((e.nvars for e in entries.values() if isinstance(e, Affine)), default=0)
        rows, blocks = [], []
        const = np.zeros(side * side, dtype=complex)
        for (i, j), e in entries.items():
            k = i * side + j
            if isinstance(e, Affine):
                blocks.append(_pad(e.coef, nv))
                rows.append(k)
                const[k] += e.const[0]
            else:
                const[k] += e
        if blocks:
            stacked = sp.vstack(blocks).tocoo()
            coef = sp.csr_matrix((stacked.data, (np.asarray(rows)[stacked.row], stacked.col)),
                                 shape=(side * side, nv))
        else:
            coef = sp.csr_matrix((side * side, 0))
        if not np.any(const.imag):
            const = const.real
        return cls(side, coef, const)

    @property
    def nvars(self) -> int:
        return self.coef.shape[1]

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            return other
        arr = np.asarray(other)
        if arr.ndim == 0:
            if self.side != 1:
                raise ValueError("scalar constants combine only with scalar expressions")
            return Affine.constant([[arr]])
        return Affine.constant(arr)

    def __add__(self, other) -> "Affine":
        other = self._coerce(other)
        if other.side != self.side:
            raise ValueError("side mismatch")
        n = max(self.nvars, other.nvars)
        return Affine(self.side, _pad(self.coef, n) + _pad(other.coef, n), self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return Affine(self.side, -self.coef, -self.const)

    def __sub__(self, other) -> "Affine":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Affine":
        return self._coerce(other) + (-self)

    def __mul__(self, c) -> "Affine":
        if isinstance(c, Affine):
            raise TypeError("products of expressions are not affine")
        return Affine(self.side, self.coef * c, self.const * c)

    __rmul__ = __mul__

    def permute_entries(self, perm: np.ndarray) -> "Affine":
        """Expression whose vectorized entries are ``self[perm]``."""
        return Affine(self.side, self.coef[perm], self.const[perm])

    def partial_transpose(self, dims) -> "Affine":
        return self.permute_entries(pt_permutation(*dims))

    def times_identity(self, n: int) -> "Affine":
        """``self * 1_n`` for a scalar expression."""
        if self.side != 1:
            raise ValueError("times_identity needs a scalar expression")
        diag = np.arange(n) * (n + 1)
        rows = self.coef.tocoo()
        coo = sp.coo_matrix(
            (np.tile(rows.data, n), (np.repeat(diag, rows.nnz), np.tile(rows.col, n))),
            shape=(n * n, self.nvars),
        )
        const = np.zeros(n * n, dtype=self.const.dtype)
        const[diag] = self.const[0]
        return Affine(n, coo.tocsr(), const)

    def times_matrix(self, mat) -> "Affine":
        """``self * mat`` for a scalar expression and a constant square matrix."""
        if self.side != 1:
            raise ValueError("times_matrix needs a scalar expression")
        mat = np.asarray(mat)
        data = mat.ravel()
        coef = sp.csr_matrix(data[:, None]) @ self.coef
        return Affine(mat.shape[0], coef, data * self.const[0])

    def inner(self, mat) -> "Affine":
        """Scalar expression ``tr(mat @ self)``."""
        mat = np.asarray(mat)
        w = mat.T.ravel()
        return Affine(1, sp.csr_matrix(w @ self.coef), [w @ self.const])

    def trace(self) -> "Affine":
        return self.inner(np.eye(self.side))

    def value(self, x) -> np.ndarray:
        x = np.asarray(x)[: self.nvars]
        v = self.const + self.coef @ x
        if self.side == 1:
            return v[0]
        return v.reshape(self.side, self.side)


def pt_permutation(da: int, db: int) -> np.ndarray:
    """Index map with ``vec(X^{T_B}) = vec(X)[perm]`` for row-major ``vec``."""
    n = da * db
    idx = np.arange(n * n).reshape(da, db, da, db)
    return idx.transpose(0, 3, 2, 1).ravel()


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    x: np.ndarray
    block_values: dict
    block_duals: dict
    duality_gap: float
    residuals: tuple
    iterations: int
    sense: str = "min"

    def value(self, expr: Affine):
        return expr.value(self.x)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class SdpProblem:
    """Builder and container for an SDP in the form described in the module docstring."""

    free_vars: int = 0
    blocks: list = field(default_factory=list)
    eq_constraints: list = field(default_factory=list)
    ineq_constraints: list = field(default_factory=list)
    objective: Affine | None = None
    sense: str = "min"
    var_names: list = field(default_factory=list)

    def _new_vars(self, k: int, name: str) -> int:
        start = self.free_vars
        self.free_vars += k
        self.var_names.append((name, start, start + k))
        return start

    def scalar_var(self, name: str) -> Affine:
        j = self._new_vars(1, name)
        return Affine(1, sp.csr_matrix(([1.0], ([0], [j])), shape=(1, self.free_vars)), [0.0])

    def sym_var(self, name: str, n: int, hermitian: bool = False) -> Affine:
        """Unconstrained real symmetric (or complex Hermitian) ``n x n`` matrix."""
        iu, ju = np.triu_indices(n)
        nre = iu.size
        start = self._new_vars(nre + (n * (n - 1) // 2 if hermitian else 0), name)
        cols = start + np.arange(nre)
        rows = np.concatenate([iu * n + ju, ju * n + iu])
        cc = np.concatenate([cols, cols])
        vals = np.ones(rows.size, dtype=complex if hermitian else float)
        off = iu != ju
        keep = np.concatenate([np.ones(nre, bool), off])
        rows, cc, vals = rows[keep], cc[keep], vals[keep]
        if hermitian:
            io, jo = iu[off], ju[off]
            icols = start + nre + np.arange(io.size)
            rows = np.concatenate([rows, io * n + jo, jo * n + io])
            cc = np.concatenate([cc, icols, icols])
            vals = np.concatenate([vals, np.full(io.size, 1j), np.full(io.size, -1j)])
        coef = sp.csr_matrix((vals, (rows, cc)), shape=(n * n, self.free_vars))
        return Affine(n, coef, np.zeros(n * n, dtype=coef.dtype))

    def add_psd(self, name: str, expr: Affine):
        self.blocks.append((name, expr))

    def add_eq(self, expr: Affine, rhs: float = 0.0):
        self.eq_constraints.append((_scalar(expr), float(rhs)))

    def add_ineq(self, expr: Affine, sense: str, rhs: float = 0.0):
        if sense not in ("<=", ">="):
            raise ValueError("sense must be '<=' or '>='")
        self.ineq_constraints.append((_scalar(expr), sense, float(rhs)))

    def minimize(self, expr: Affine):
        self.objective, self.sense = _scalar(expr), "min"

    def maximize(self, expr: Affine):
        self.objective, self.sense = _scalar(expr), "max"

    @property
    def block_sides(self) -> list:
        return [(name, e.side) for name, e in self.blocks]


def _scalar(expr) -> Affine:
    if not isinstance(expr, Affine) or expr.side != 1:
        raise ValueError("expected a scalar affine expression")
    return expr


def _real_row(expr: Affine, n: int) -> tuple[np.ndarray, float]:
    row = _pad(expr.coef, n).toarray().ravel()
    if np.max(np.abs(np.imag(row)), initial=0.0) > 1e-9 or abs(np.imag(expr.const[0])) > 1e-9:
        raise ValueError("scalar constraint is not real-valued")
    return np.real(row), float(np.real(expr.const[0]))


def _realify(expr: Affine, n: int):
    """Real symmetric block data ``(side, F, f0)`` with ``mat(f0 + F x) >= 0``."""
    coef = _pad(expr.coef, n)
    const = expr.const
    is_complex = (np.iscomplexobj(coef.data) and np.max(np.abs(coef.data.imag), initial=0.0) > 0) or (
        np.iscomplexobj(const) and np.max(np.abs(const.imag), initial=0.0) > 0
    )
    if not is_complex:
        return expr.side, sp.csr_matrix(coef.real if np.iscomplexobj(coef.data) else coef), np.real(const)
    s = expr.side
    i, j = np.divmod(np.arange(s * s), s)
    big = 2 * s
    re_c, im_c = sp.csr_matrix(coef.real), sp.csr_matrix(coef.imag)
    perm_rows = [i * big + j, i * big + (s + j), (s + i) * big + j, (s + i) * big + (s + j)]
    parts = [re_c, -im_c, im_c, re_c]
    cparts = [const.real, -const.imag, const.imag, const.real]
    order = np.argsort(np.concatenate(perm_rows))
    stacked = sp.vstack(parts).tocsr()[order]
    f0 = np.concatenate(cparts)[order]
    return big, stacked, f0


class _Assembled:
    def __init__(self, p: SdpProblem):
        n = p.free_vars
        if p.objective is None:
            raise ValueError("objective not set")
        c, _ = _real_row(p.objective, n)
        self.c = -c if p.sense == "max" else c
        self.const_obj = float(np.real(p.objective.const[0]))
        gl, hl = [], []
        for expr, sense, rhs in p.ineq_constraints:
            row, k = _real_row(expr, n)
            if sense == "<=":
                gl.append(row)
                hl.append(rhs - k)
            else:
                gl.append(-row)
                hl.append(k - rhs)
        self.Gl = sp.csr_matrix(np.array(gl).reshape(len(gl), n))
        self.hl = np.array(hl, dtype=float)
        self.blocks = []
        for name, expr in p.blocks:
            side, F, f0 = _realify(expr, n)
            self.blocks.append((name, side, expr.side, sp.csr_matrix(F), f0))
        arows, b = [], []
        for expr, rhs in p.eq_constraints:
            row, k = _real_row(expr, n)
            arows.append(row)
            b.append(rhs - k)
        self.A = sp.csr_matrix(np.array(arows).reshape(len(arows), n))
        self.b = np.array(b, dtype=float)
        self.n = n
        self.G = sp.vstack([self.Gl] + [-blk[3] for blk in self.blocks]).tocsr()
        self.h = np.concatenate([self.hl] + [blk[4] for blk in self.blocks])
        self.dims = {"l": self.Gl.shape[0], "q": [], "s": [blk[1] for blk in self.blocks]}


def _to_cvx_sparse(m: sp.spmatrix):
    from cvxopt import spmatrix

    coo = m.tocoo()
    return spmatrix(coo.data.astype(float).tolist(), coo.row.tolist(), coo.col.tolist(), size=m.shape)


def _schur_block(G: sp.csr_matrix, R: np.ndarray) -> np.ndarray:
    """``G^T (R (x) R) G`` without forming the full Kronecker product."""
    s = R.shape[0]
    m = G.shape[1]
    out = np.zeros((m, m))
    chunk = max(1, min(s, int(4e7 // (s ** 3 + s * max(m, 1)))))
    for a0 in range(0, s, chunk):
        a1 = min(s, a0 + chunk)
        rows = slice(a0 * s, a1 * s)
        gsub = G[rows]
        if gsub.nnz == 0:
            continue
        kblk = np.kron(R[a0:a1], R)
        kg = (G.T @ kblk.T).T
        out += gsub.T @ kg
    return 0.5 * (out + out.T)


def _uses_qr(asm: _Assembled) -> bool:
    rows = asm.Gl.shape[0] + sum(side * side for _, side, _, _, _ in asm.blocks)
    return rows * asm.n <= QR_MAX_ENTRIES


def _chol_schur(Gl, d, blocks, Rs, n):
    """Cholesky of ``H = G^T (W^T W)^{-1} G``, formed explicitly."""
    H = np.zeros((n, n))
    if Gl.shape[0]:
        H += (Gl.T @ Gl.multiply(1.0 / (d * d)[:, None])).toarray()
    for (_, side, _, F, _), R in zip(blocks, Rs):
        H += _schur_block(F, R)
    scale = max(1.0, float(np.max(np.abs(np.diag(H)), initial=0.0)))
    for reg in (0.0, 1e-12 * scale, 1e-9 * scale):
        try:
            factor = sla.cho_factor(H + reg * np.eye(n), lower=True, check_finite=False)
            break
        except (np.linalg.LinAlgError, sla.LinAlgError):
            factor = None
    if factor is None:
        raise ValueError("singular Schur complement")
    return lambda rhs: sla.cho_solve(factor, rhs, check_finite=False)


def _qr_schur(Gl, d, blocks, rtis, n):
    """Triangular factor of ``H = K^T K`` from a QR of ``K = W^{-T} G``.

    ``Gl`` and the block matrices ``blocks`` are dense here.

    Never squares the condition number, which matters on degenerate
    problems where the scaling spreads over many orders of magnitude.
    """
    parts = []
    if Gl.shape[0]:
        parts.append(Gl / d[:, None])
    for F, rti in zip(blocks, rtis):
        parts.append(np.kron(rti.T, rti.T) @ F)
    K = np.vstack(parts)
    r = sla.qr(K, mode="r", check_finite=False)[0][:n]
    diag = np.abs(np.diag(r))
    floor = 1e-14 * max(float(diag.max(initial=0.0)), 1.0)
    if np.any(diag <= floor):
        r = r.copy()
        r[np.diag_indices(n)] = np.where(diag <= floor, floor, np.diag(r))

    def solve(rhs):
        y = sla.solve_triangular(r, rhs, trans="T", check_finite=False)
        return sla.solve_triangular(r, y, check_finite=False)

    return solve


def _make_kktsolver(asm: _Assembled):
    from cvxopt import matrix

    Gl = asm.Gl
    A = asm.A
    blocks = asm.blocks
    ml = Gl.shape[0]
    offsets = []
    off = ml
    for _, side, _, _, _ in blocks:
        offsets.append(off)
        off += side * side
    p = A.shape[0]
    n = asm.n
    use_qr = _uses_qr(asm)
    # transposes and dense copies are reused by every solve
    GlT = Gl.T.tocsr()
    FTs = [blk[3].T.tocsr() for blk in blocks]
    if use_qr:
        Gl_dense = Gl.toarray()
        F_dense = [blk[3].toarray() for blk in blocks]

    def kktsolver(W):
        d = np.array(W["d"]).ravel() if ml else np.zeros(0)
        rtis = [np.array(r) for r in W["rti"]]
        Rs = [r @ r.T for r in rtis]
        if use_qr:
            hsolve = _qr_schur(Gl_dense, d, F_dense, rtis, n)
        else:
            hsolve = _chol_schur(Gl, d, blocks, Rs, n)
        if p:
            HiAt = hsolve(A.T.toarray())
            S = A @ HiAt
            S = 0.5 * (S + S.T)
            try:
                sfac = ("chol", sla.cho_factor(S, lower=True, check_finite=False))
            except (np.linalg.LinAlgError, sla.LinAlgError):
                sfac = ("lu", sla.lu_factor(S, check_finite=False))

        def unpack_s(z, k, side):
            o = offsets[k]
            mat = np.array(z[o: o + side * side]).reshape(side, side, order="F")
            low = np.tril(mat)
            return low + low.T - np.diag(np.diag(mat))

        def solve(x, y, z):
            bx = np.array(x).ravel()
            by = np.array(y).ravel() if p else np.zeros(0)
            rhs = bx.copy()
            bzl = np.array(z[:ml]).ravel() if ml else np.zeros(0)
            if ml:
                rhs += GlT @ (bzl / (d * d))
            bzs = []
            for k, ((_, side, _, F, _), R) in enumerate(zip(blocks, Rs)):
                bzk = unpack_s(z, k, side)
                bzs.append(bzk)
                # G = -F for the matrix blocks
                rhs -= FTs[k] @ (R @ bzk @ R).ravel()
            if p:
                w = hsolve(rhs)
                srhs = A @ w - by
                if sfac[0] == "chol":
                    uy = sla.cho_solve(sfac[1], srhs, check_finite=False)
                else:
                    uy = sla.lu_solve(sfac[1], srhs, check_finite=False)
                ux = w - HiAt @ uy
                y[:] = matrix(uy)
            else:
                ux = hsolve(rhs)
            x[:] = matrix(ux)
            if ml:
                z[:ml] = matrix((Gl @ ux - bzl) / d)
            for k, ((_, side, _, F, _), rti, bzk) in enumerate(zip(blocks, rtis, bzs)):
                u = -(F @ ux).reshape(side, side) - bzk
                out = rti.T @ u @ rti
                o = offsets[k]
                z[o: o + side * side] = matrix(out.ravel(order="F"))

        return solve

    return kktsolver


def _max_iter_default() -> int:
    env = os.environ.get("DISTILL_SOLVER_MAXITER")
    return int(env) if env else DEFAULT_MAXITER


def solve_sdp(p: SdpProblem, tol: float = 1e-8, maxiter: int | None = None) -> SdpSolution:
    """Solve ``p`` by a primal-dual interior-point method.

    ``status`` is ``"optimal"`` when the final iterate has relative duality gap
    and residuals at most ``1e-7``; ``"infeasible"`` when a certificate of
    primal or dual infeasibility was found; ``"max_iter"`` otherwise.
    The caller decides what to do with a non-optimal answer.
    """
    from cvxopt import matrix, solvers

    asm = _Assembled(p)
    maxiter = _max_iter_default() if maxiter is None else maxiter
    if not _uses_qr(asm):
        # the explicitly formed Schur complement loses about half the digits
        # near the optimum, so large problems stop at the status threshold
        tol = max(tol, STATUS_TOL)
    opts = {
        "show_progress": False,
        "maxiters": maxiter,
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
        "refinement": 3,
    }
    G = _to_cvx_sparse(asm.G)
    h = matrix(asm.h)
    c = matrix(asm.c)
    kwargs = {}
    if asm.A.shape[0]:
        kwargs["A"] = _to_cvx_sparse(asm.A)
        kwargs["b"] = matrix(asm.b)
    # very tight tolerances can push the scaling update into a breakdown just
    # before convergence; retry with looser targets down to the status threshold
    # on degenerate problems a target below the status threshold can also
    # stall with a drifting dual residual; that run is cut short and redone
    # at the threshold
    err = None
    while True:
        loose = opts["abstol"] >= STATUS_TOL
        opts["maxiters"] = maxiter if loose else min(maxiter, TIGHT_MAXITER)
        try:
            # a breakdown shows up as inf/nan in the KKT solve before cvxopt raises
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                res = solvers.conelp(c, G, h, asm.dims, kktsolver=_make_kktsolver(asm), options=opts, **kwargs)
            sol = _collect(p, asm, res)
            if loose or sol.status != "max_iter":
                return sol
            err = None
        except (ValueError, ArithmeticError) as exc:
            err = exc
            if loose:
                raise SolverError(str(err)) from err
        nxt = STATUS_TOL if err is None else min(opts["abstol"] * 10, STATUS_TOL)
        opts.update(abstol=nxt, reltol=nxt, feastol=nxt)


def _collect(p: SdpProblem, asm: _Assembled, res) -> SdpSolution:
    status = res["status"]
    flip = -1.0 if p.sense == "max" else 1.0
    if status in ("primal infeasible", "dual infeasible"):
        return SdpSolution("infeasible", np.nan, np.nan, np.full(asm.n, np.nan), {}, {},
                           np.nan, (np.nan, np.nan), res["iterations"], p.sense)
    x = np.array(res["x"]).ravel()
    zvec = np.array(res["z"]).ravel()
    pobj = flip * float(res["primal objective"]) + asm.const_obj
    dobj = flip * float(res["dual objective"]) + asm.const_obj
    pres = float(res["primal infeasibility"] or 0.0)
    dres = float(res["dual infeasibility"] or 0.0)
    block_values, block_duals = {}, {}
    off = asm.Gl.shape[0]
    min_eig = np.inf
    for name, side, orig, F, f0 in asm.blocks:
        sval = (f0 + F @ x).reshape(side, side)
        zmat = zvec[off: off + side * side].reshape(side, side, order="F")
        zmat = np.tril(zmat) + np.tril(zmat, -1).T
        off += side * side
        min_eig = min(min_eig, float(np.linalg.eigvalsh(sval)[0]))
        if side != orig:
            sval = sval[:orig, :orig] + 1j * sval[orig:, :orig]
            zmat = zmat[:orig, :orig] + 1j * zmat[orig:, :orig]
        block_values[name] = sval
        block_duals[name] = zmat
    gap = abs(pobj - dobj)
    good = (
        gap <= STATUS_TOL * (1 + abs(pobj))
        and pres <= STATUS_TOL
        and dres <= STATUS_TOL
        and min_eig >= -1e-8
    )
    out_status = "optimal" if good else "max_iter"
    return SdpSolution(out_status, pobj, dobj, x, block_values, block_duals, gap,
                       (pres, dres), int(res["iterations"]), p.sense)
