"""Dense Hermitian operators on a bipartite space and the entropic functionals built on them.

Every operator lives on ``H_A (x) H_B`` in the lexicographic product basis
``|i_A j_B>``.  Public entropic quantities are in bits unless ``base`` says
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HermOp",
    "EigenDecomp",
    "ConvergenceError",
    "max_entangled",
    "partial_transpose",
    "partial_trace",
    "herm_eig",
    "jacobi_eig",
    "trace_norm",
    "operator_norm",
    "relative_entropy",
    "relative_entropy_variance",
    "coherent_info",
    "coherent_info_variance",
    "binary_entropy",
    "normal_cdf",
    "inv_normal_cdf",
    "is_ppt_prime",
    "pure_state",
    "tensor_power",
    "tensor_product",
    "random_state",
    "random_pure_state",
]

HERM_TOL = 1e-12
SUPPORT_CUTOFF = 1e-12
PSD_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of its iteration budget."""


@dataclass(frozen=True, eq=False)
class HermOp:
    """A Hermitian operator on ``C^dim_a (x) C^dim_b``.

    ``entries`` is stored as a read-only complex array of shape
    ``(dim_a*dim_b, dim_a*dim_b)``.
    """

    dim_a: int
    dim_b: int
    entries: np.ndarray

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValueError("subsystem dimensions must be positive")
        mat = np.array(self.entries, dtype=complex)
        n = self.dim_a * self.dim_b
        if mat.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix for dims ({self.dim_a}, {self.dim_b}), got {mat.shape}")
        scale = max(1.0, float(np.max(np.abs(mat), initial=0.0)))
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERM_TOL * scale:
            raise ValueError("matrix is not Hermitian")
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @classmethod
    def from_matrix(cls, mat, dims, tol: float = HERM_TOL) -> "HermOp":
        """Build from an almost-Hermitian matrix, symmetrizing away errors below ``tol``."""
        mat = np.asarray(mat, dtype=complex)
        scale = max(1.0, float(np.max(np.abs(mat), initial=0.0)))
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > tol * scale:
            raise ValueError("matrix is not Hermitian within tolerance")
        return cls(int(dims[0]), int(dims[1]), (mat + mat.conj().T) / 2)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.dim_a, self.dim_b)

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.entries.imag), initial=0.0) <= HERM_TOL)

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def scaled(self, c: float) -> "HermOp":
        return HermOp(self.dim_a, self.dim_b, c * self.entries)

    def __add__(self, other: "HermOp") -> "HermOp":
        _check_same_dims(self, other)
        return HermOp(self.dim_a, self.dim_b, self.entries + other.entries)

    def __sub__(self, other: "HermOp") -> "HermOp":
        _check_same_dims(self, other)
        return HermOp(self.dim_a, self.dim_b, self.entries - other.entries)

    def __repr__(self) -> str:
        return f"HermOp(dims=({self.dim_a}, {self.dim_b}), trace={self.trace():.6g})"


@dataclass(frozen=True)
class EigenDecomp:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _check_same_dims(x: HermOp, y: HermOp):
    if x.dims != y.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {y.dims}")


def _as_matrix(m) -> np.ndarray:
    return m.entries if isinstance(m, HermOp) else np.asarray(m)


def max_entangled(d: int) -> HermOp:
    """The maximally entangled state ``(1/d) sum_ij |ii><jj|`` on ``C^d (x) C^d``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    v = np.zeros(d * d)
    v[:: d + 1] = 1.0
    return HermOp(d, d, np.outer(v, v) / d)


def pure_state(vec, dims) -> HermOp:
    """Projector onto the normalized vector ``vec``."""
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return HermOp.from_matrix(np.outer(v, v.conj()), dims)


def partial_transpose(m: HermOp) -> HermOp:
    """Transpose on the B factor: ``<i j|out|k l> = <i l|M|k j>``."""
    da, db = m.dims
    t = m.entries.reshape(da, db, da, db).transpose(0, 3, 2, 1).reshape(da * db, da * db)
    return HermOp(da, db, t)


def partial_trace(m: HermOp, keep: str = "B") -> np.ndarray:
    """Reduced operator on ``keep`` ('A' or 'B') as a plain matrix."""
    da, db = m.dims
    t = m.entries.reshape(da, db, da, db)
    if keep == "B":
        return np.einsum("ijik->jk", t)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    raise ValueError("keep must be 'A' or 'B'")


def tensor_product(x: HermOp, y: HermOp) -> HermOp:
    """``x (x) y`` regrouped so that the result is bipartite across ``(A A' : B B')``."""
    da, db = x.dims
    ea, eb = y.dims
    t = np.kron(x.entries, y.entries).reshape(da, db, ea, eb, da, db, ea, eb)
    t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(da * db * ea * eb, -1)
    return HermOp(da * ea, db * eb, t)


def tensor_power(x: HermOp, n: int) -> HermOp:
    """``x^{(x) n}`` bipartite across ``(A^n : B^n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = x
    for _ in range(n - 1):
        out = tensor_product(out, x)
    return out


def herm_eig(m, method: str = "lapack") -> EigenDecomp:
    """Eigendecomposition of a Hermitian operator with ascending eigenvalues.

    ``method="lapack"`` calls the LAPACK divide-and-conquer driver;
    ``method="jacobi"`` runs the pure-Python cyclic Jacobi iteration of
    :func:`jacobi_eig` (slow, independent of LAPACK).
    """
    mat = _as_matrix(m)
    if method == "lapack":
        w, u = np.linalg.eigh(mat)
        return EigenDecomp(w, u)
    if method == "jacobi":
        return jacobi_eig(mat)
    raise ValueError(f"unknown method {method!r}")


def jacobi_eig(mat, max_sweeps: int = 100, tol: float = 1e-13) -> EigenDecomp:
    """Cyclic complex Jacobi diagonalization of a Hermitian matrix.

    Raises :class:`ConvergenceError` when the off-diagonal mass has not
    dropped below ``tol * ||M||_F`` within ``max_sweeps`` sweeps.
    """
    a = np.array(mat, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.linalg.norm(a) ** 2 - np.linalg.norm(np.diag(a)) ** 2, 0.0))
        if off <= tol * scale:
            w = np.diag(a).real.copy()
            order = np.argsort(w)
            return EigenDecomp(w[order], v[:, order])
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g <= 1e-300:
                    continue
                phase = apq / g
                tau = (a[q, q].real - a[p, p].real) / (2 * g)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1 + tau * tau))
                c = 1 / math.sqrt(1 + t * t)
                s = t * c
                rot = np.array([[c, s], [-phase.conjugate() * s, phase.conjugate() * c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                a[q, p] = 0.0
                a[p, q] = 0.0
                v[:, idx] = v[:, idx] @ rot
    raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def trace_norm(m) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(_as_matrix(m)))))


def operator_norm(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(_as_matrix(m)))))


def _log_factor(base) -> float:
    if base == 2:
        return math.log(2)
    if base == "e" or base == math.e:
        return 1.0
    if base > 0 and base != 1:
        return math.log(base)
    raise ValueError(f"invalid log base {base!r}")


def _check_psd(w: np.ndarray, name: str):
    if w.size and w[0] < -PSD_TOL:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")


def _log_split(rho: np.ndarray, sigma: np.ndarray):
    """Return ``(sqrt_rho, log_rho, log_sigma, leak)`` in natural log.

    Logs are taken on the supports only.  ``leak`` is the weight of ``rho``
    on the kernel of ``sigma``.
    """
    w, u = np.linalg.eigh(rho)
    _check_psd(w, "rho")
    mu, v = np.linalg.eigh(sigma)
    _check_psd(mu, "sigma")
    w_cut = SUPPORT_CUTOFF * max(abs(w[-1]), 1e-300)
    mu_cut = SUPPORT_CUTOFF * max(abs(mu[-1]), 1e-300)
    on_r = w > w_cut
    on_s = mu > mu_cut
    wr = np.where(on_r, w, 0.0)
    log_w = np.where(on_r, np.log(np.where(on_r, w, 1.0)), 0.0)
    log_mu = np.where(on_s, np.log(np.where(on_s, mu, 1.0)), 0.0)
    sqrt_rho = (u * np.sqrt(wr)) @ u.conj().T
    log_rho = (u * log_w) @ u.conj().T
    log_sigma = (v * log_mu) @ v.conj().T
    rho_in_v = v.conj().T @ rho @ v
    leak = float(np.sum(np.diag(rho_in_v).real[~on_s]))
    return sqrt_rho, log_rho, log_sigma, leak


def relative_entropy(rho, sigma, base=2) -> float:
    """``D(rho||sigma) = tr rho (log rho - log sigma)``; ``inf`` off support."""
    r = _as_matrix(rho)
    s = _as_matrix(sigma)
    if abs(np.trace(r).real - 1) > PSD_TOL:
        raise ValueError("rho must have unit trace")
    sqrt_r, log_r, log_s, leak = _log_split(r, s)
    if leak > SUPPORT_CUTOFF:
        return math.inf
    d = np.trace(sqrt_r @ (log_r - log_s) @ sqrt_r).real
    return float(d / _log_factor(base))


def relative_entropy_variance(rho, sigma, base=2) -> float:
    """``V(rho||sigma) = tr rho (log rho - log sigma)^2 - D(rho||sigma)^2``."""
    r = _as_matrix(rho)
    s = _as_matrix(sigma)
    sqrt_r, log_r, log_s, leak = _log_split(r, s)
    if leak > SUPPORT_CUTOFF:
        raise ValueError("support of rho is not contained in the support of sigma")
    k = (log_r - log_s) @ sqrt_r
    second = float(np.vdot(k, k).real)
    first = float(np.trace(sqrt_r @ k).real)
    return (second - first * first) / _log_factor(base) ** 2


def _id_a_times_rho_b(rho: HermOp) -> np.ndarray:
    return np.kron(np.eye(rho.dim_a), partial_trace(rho, keep="B"))


def coherent_info(rho: HermOp, base=2) -> float:
    """``I(A>B) = D(rho_AB || 1_A (x) rho_B)``."""
    return relative_entropy(rho, _id_a_times_rho_b(rho), base)


def coherent_info_variance(rho: HermOp, base=2) -> float:
    return relative_entropy_variance(rho, _id_a_times_rho_b(rho), base)


def binary_entropy(p: float, base=2) -> float:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    h = 0.0
    for q in (p, 1 - p):
        if q > 0:
            h -= q * math.log(q)
    return h / _log_factor(base)


# Rational approximation of the normal quantile (Acklam), polished below.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2))


def _quantile_seed(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        return num / den
    if p > 1 - _P_LOW:
        return -_quantile_seed(1 - p)
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
    return num / den


def inv_normal_cdf(eps: float) -> float:
    """Quantile of the standard normal distribution.

    A rational seed is refined with Halley steps on ``erfc``; if that ever
    fails to reach ``|cdf(x) - eps| <= 1e-12`` a bracketing bisection takes
    over.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in the open interval (0, 1)")
    if eps > 0.5:
        return -inv_normal_cdf(1 - eps)
    if eps == 0.5:
        return 0.0
    x = _quantile_seed(eps)
    for _ in range(3):
        e = normal_cdf(x) - eps
        u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
        x = x - u / (1 + x * u / 2)
    if abs(normal_cdf(x) - eps) <= 1e-12:
        return x
    lo, hi = x - 1.0, min(x + 1.0, 0.0)
    while normal_cdf(lo) > eps:
        lo -= 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < eps:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(lo)):
            break
    return 0.5 * (lo + hi)


def is_ppt_prime(m: HermOp, tol: float = 1e-9) -> bool:
    """Membership in the Rains set: ``M >= 0`` and ``||M^{T_B}||_1 <= 1``."""
    if np.linalg.eigvalsh(m.entries)[0] < -tol:
        return False
    return trace_norm(partial_transpose(m)) <= 1 + tol


def random_state(dims, rank: int | None = None, rng=None, real: bool = False) -> HermOp:
    """Random density matrix ``G G^dag / tr`` with Gaussian ``G`` of the given rank."""
    rng = np.random.default_rng(rng)
    n = dims[0] * dims[1]
    k = n if rank is None else rank
    g = rng.standard_normal((n, k))
    if not real:
        g = g + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    return HermOp.from_matrix(m / np.trace(m).real, dims)


def random_pure_state(dims, rng=None, real: bool = False) -> HermOp:
    return random_state(dims, rank=1, rng=rng, real=real)
