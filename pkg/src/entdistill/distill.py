"""One-shot distillation quantities under PPT operations, as semidefinite programs.

All rates are in bits.  When the input state has real entries every program
is posed over real symmetric matrices: conjugating a feasible complex point
keeps it feasible with the same value, so averaging with the conjugate loses
nothing and halves the size of the realified blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conic import SdpProblem, SdpSolution, SolverError, solve_sdp
from .qmat import HermOp

__all__ = [
    "OneShotResult",
    "one_shot_ppt_ed",
    "one_shot_problem",
    "hypothesis_testing_re",
    "dh_over_rains_set",
    "sdp1",
    "sdp2",
    "appendix_state",
    "DH_CAP_BITS",
]

DH_CAP_BITS = 30.0
# slack when flooring 1/eta: the solver returns eta to about 1e-8, so an
# exact 1/k optimum may come back a hair above 1/k
_FLOOR_SLACK = 1e-7


@dataclass
class OneShotResult:
    eta: float
    rate_bits: float
    rate_integer_bits: float
    epsilon: float
    solver_report: SdpSolution
    optimizer: np.ndarray | None = None


def _check_eps(eps, allow_zero=False):
    lo_ok = eps >= 0 if allow_zero else eps > 0
    if not (lo_ok and eps < 1):
        raise ValueError(f"epsilon must lie in {'[0' if allow_zero else '(0'}, 1), got {eps}")


def _check_state(rho: HermOp, tol=1e-6):
    if abs(rho.trace() - 1) > tol:
        raise ValueError("input is not normalized to unit trace")
    if rho.eigvalsh()[0] < -1e-9:
        raise ValueError("input is not positive semidefinite")


def _matrix_var(p: SdpProblem, name: str, n: int, real: bool):
    return p.sym_var(name, n, hermitian=not real)


def _data(rho: HermOp, real: bool) -> np.ndarray:
    return rho.entries.real.copy() if real else np.array(rho.entries)


def _require_optimal(sol: SdpSolution, what: str) -> SdpSolution:
    if not sol.optimal:
        raise SolverError(f"{what}: solver finished with status {sol.status}")
    return sol


def one_shot_problem(rho: HermOp, eps: float):
    """Build ``min eta`` over ``0 <= M <= 1, tr rho M >= 1-eps, -eta <= M^{T_B} <= eta``.

    Returns ``(problem, M, eta)`` so callers can read off the optimizer.
    ``eps = 0`` is accepted here for testing.
    """
    _check_eps(eps, allow_zero=True)
    real = rho.is_real
    n = rho.dim
    p = SdpProblem()
    eta = p.scalar_var("eta")
    M = _matrix_var(p, "M", n, real)
    Mt = M.partial_transpose(rho.dims)
    ident = np.eye(n)
    eta_id = eta.times_identity(n)
    p.add_psd("M", M)
    p.add_psd("1-M", ident - M)
    p.add_psd("eta-MT", eta_id - Mt)
    p.add_psd("eta+MT", eta_id + Mt)
    p.add_ineq(M.inner(_data(rho, real)), ">=", 1 - eps)
    p.minimize(eta)
    return p, M, eta


def one_shot_ppt_ed(rho: HermOp, eps: float, tol: float = 1e-9) -> OneShotResult:
    """One-shot PPT-assisted distillable entanglement at infidelity ``eps``.

    Parameters
    ----------
    rho : HermOp
        Bipartite state.
    eps : float
        Infidelity tolerance in (0, 1).

    Returns
    -------
    OneShotResult
        ``rate_bits`` is ``-log2(eta)``, the value with the output dimension
        treated as continuous.  ``rate_integer_bits`` is ``log2 floor(1/eta)``,
        the rate with an integer number of output levels.
    """
    _check_eps(eps)
    _check_state(rho)
    p, M, _ = one_shot_problem(rho, eps)
    sol = _require_optimal(solve_sdp(p, tol=tol), "one-shot SDP")
    eta = float(sol.primal_value)
    eta = min(max(eta, 1e-300), 1.0)
    k = math.floor(1.0 / eta + _FLOOR_SLACK)
    rate_int = math.log2(k) if k >= 1 else 0.0
    rate = max(-math.log2(eta), 0.0)
    return OneShotResult(eta, rate, min(rate_int, rate + 1e-12) if k >= 1 else 0.0, eps, sol, sol.value(M))


def hypothesis_testing_re(rho0: HermOp, rho1: HermOp, eps: float, with_flag: bool = False):
    """Hypothesis-testing relative entropy ``D_H^eps(rho0 || rho1)`` in bits.

    Minimizes the type-II error ``tr M rho1`` over tests ``0 <= M <= 1`` with
    type-I error ``1 - tr M rho0 <= eps``.  When the optimal type-II error is
    at most ``2**-30`` the pair is treated as perfectly distinguishable and
    ``DH_CAP_BITS`` is returned; ``with_flag=True`` also returns that flag.
    """
    _check_eps(eps)
    _check_state(rho0)
    if rho0.dims != rho1.dims:
        raise ValueError("operators live on different spaces")
    if rho1.eigvalsh()[0] < -1e-9:
        raise ValueError("second argument must be positive semidefinite")
    real = rho0.is_real and rho1.is_real
    n = rho0.dim
    p = SdpProblem()
    M = _matrix_var(p, "M", n, real)
    p.add_psd("M", M)
    p.add_psd("1-M", np.eye(n) - M)
    p.add_ineq(M.inner(_data(rho0, real)), ">=", 1 - eps)
    p.minimize(M.inner(_data(rho1, real)))
    sol = _require_optimal(solve_sdp(p, tol=1e-10), "hypothesis test SDP")
    beta = sol.primal_value
    capped = beta <= 2.0 ** -DH_CAP_BITS
    value = DH_CAP_BITS if capped else -math.log2(beta)
    return (value, capped) if with_flag else value


def _sdp12(rho: HermOp, eps: float, positive_c: bool, tol: float = 1e-9) -> SdpSolution:
    _check_eps(eps)
    real = rho.is_real
    n = rho.dim
    p = SdpProblem()
    t = p.scalar_var("t")
    X = _matrix_var(p, "X", n, real)
    Cp = _matrix_var(p, "C+", n, real)
    Cm = _matrix_var(p, "C-", n, real)
    # C^{T_B} = C+ - C-, so C is the partial transpose of the difference
    C = (Cp - Cm).partial_transpose(rho.dims)
    p.add_psd("C+X-t*rho", C + X - t.times_matrix(_data(rho, real)))
    p.add_psd("X", X)
    p.add_psd("C+", Cp)
    p.add_psd("C-", Cm)
    if positive_c:
        p.add_psd("C", C)
    p.add_ineq(t, ">=", 0.0)
    p.add_ineq(Cp.trace() + Cm.trace(), "<=", 1.0)
    p.maximize(-1.0 * X.trace() + (1 - eps) * t)
    return _require_optimal(solve_sdp(p, tol=tol), "SDP 2" if positive_c else "SDP 1")


def sdp1(rho: HermOp, eps: float) -> float:
    """Optimal value of the maximization whose test operator ``C`` ranges over ``||C^{T_B}||_1 <= 1``."""
    return float(_sdp12(rho, eps, positive_c=False).primal_value)


def sdp2(rho: HermOp, eps: float) -> float:
    """Same program as :func:`sdp1` with the extra requirement ``C >= 0``."""
    return float(_sdp12(rho, eps, positive_c=True).primal_value)


def dh_over_rains_set(rho: HermOp, eps: float) -> float:
    """``min D_H^eps(rho || C)`` over ``||C^{T_B}||_1 <= 1`` in bits, from the dual program."""
    return -math.log2(sdp1(rho, eps))


def appendix_state(theta: float) -> HermOp:
    """Two-qubit state ``3/4 |phi1><phi1| + 1/4 |10><10|`` with ``phi1 = cos(theta)|00> + sin(theta)|11>``."""
    phi1 = np.array([math.cos(theta), 0.0, 0.0, math.sin(theta)])
    phi2 = np.array([0.0, 0.0, 1.0, 0.0])
    mat = 0.75 * np.outer(phi1, phi1) + 0.25 * np.outer(phi2, phi2)
    return HermOp(2, 2, mat)
