import math

import numpy as np
import pytest
from scipy.linalg import logm

from entdistill.iso import iso_rains_closed
from entdistill.qmat import (
    HermOp,
    is_ppt_prime,
    max_entangled,
    partial_transpose,
    random_state,
    tensor_product,
    trace_norm,
)
from entdistill.rains import (
    TRACE_COLUMNS,
    d_matrix,
    frechet_log,
    line_search,
    neg_log_overlap,
    rains_bound,
    tangent_cut,
    two_copy_gap,
)

from conftest import bell_mixture, h2, schmidt_state


def random_ppt_prime(rng, dims):
    s = random_state(dims, rng=rng)
    return s.entries / trace_norm(partial_transpose(s))


def test_d_matrix_examples():
    assert np.allclose(d_matrix([1.0, 1.0]), 1.0)
    d = d_matrix([1.0, math.e])
    assert d[0, 1] == pytest.approx(1 / (math.e - 1), rel=1e-14)
    assert d[1, 0] == d[0, 1]
    assert d[0, 0] == 1.0
    assert d[1, 1] == pytest.approx(1 / math.e)
    with pytest.raises(ValueError):
        d_matrix([1.0, 0.0])


def test_d_matrix_near_equal_branch():
    lam = [0.3, 0.3 * (1 + 1e-14)]
    assert np.allclose(d_matrix(lam), 1 / 0.3, rtol=1e-12)


def test_frechet_first_order(rng):
    a = random_state((2, 2), rng=rng).entries
    w, u = np.linalg.eigh(a)
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    g = (g + g.conj().T) / 2
    g /= np.linalg.norm(g)
    errs = []
    for h in (1e-3, 1e-4):
        delta = h * g
        errs.append(np.linalg.norm(logm(a + delta) - logm(a) - frechet_log(w, u, delta)))
    # the remainder is second order: a tenth of the step gives a hundredth of the error
    assert errs[1] / errs[0] == pytest.approx(1e-2, rel=0.2)


def test_tangent_cut_valid(rng):
    rho = random_state((2, 2), rng=rng).entries
    for _ in range(5):
        sig = random_ppt_prime(rng, (2, 2))
        e, c, f = tangent_cut(rho, sig)
        assert f == pytest.approx(neg_log_overlap(rho, sig))
        for _ in range(100):
            x = random_ppt_prime(rng, (2, 2))
            assert neg_log_overlap(rho, x) >= c - np.trace(e @ x).real - 1e-9


def test_line_search_constant_segment(rng):
    rho = random_state((2, 2), rng=rng).entries
    z = np.eye(4) / 4
    sigma, _ = line_search(rho, z, z)
    assert np.allclose(sigma, z)


def test_line_search_grid_oracle():
    rho = max_entangled(2).entries
    z = np.eye(4) / 4
    low = 0.9 * np.diag([0.5, 0, 0, 0.5])
    sigma, alpha = line_search(rho, low, z)
    grid = np.arange(1e-4, 1 + 1e-12, 1e-4)
    vals = [neg_log_overlap(rho, a * z + (1 - a) * low) for a in grid]
    assert alpha == pytest.approx(grid[int(np.argmin(vals))], abs=2e-4)
    f = neg_log_overlap(rho, sigma)
    assert f <= min(neg_log_overlap(rho, 1e-9 * z + (1 - 1e-9) * low), neg_log_overlap(rho, z)) + 1e-12


def test_separable_shortcut():
    res = rains_bound(HermOp(2, 2, np.eye(4) / 4))
    assert (res.lower_nats, res.upper_nats) == (0, 0)
    assert res.converged and res.iterations == 0


@pytest.mark.parametrize("p", [0.1, 0.25, 0.4])
def test_bell_mixture_closed_form(p):
    res = rains_bound(bell_mixture(p))
    assert res.converged
    assert res.upper_nats - res.lower_nats <= 1e-6
    want = 1 - h2(p)
    assert res.lower_bits - 1e-5 <= want <= res.upper_bits + 1e-5
    assert res.mid_bits == pytest.approx(want, abs=1e-5)
    assert is_ppt_prime(res.minimizer)


def test_isotropic_closed_form(iso_rains):
    want = iso_rains_closed(3, 0.9)
    assert iso_rains.lower_bits - 1e-5 <= want <= iso_rains.upper_bits + 1e-5
    assert iso_rains.upper_nats - iso_rains.lower_nats <= 1e-6


def test_bracket_invariants(rng, iso_rains):
    runs = [iso_rains, rains_bound(random_state((2, 2), rng=rng))]
    for res in runs:
        assert res.lower_nats <= res.upper_nats + 1e-12
        lo = [row[1] for row in res.trace]
        up = [row[2] for row in res.trace]
        assert all(b >= a for a, b in zip(lo, lo[1:]))
        assert all(b <= a for a, b in zip(up, up[1:]))
        # the initial lower bound (zero on this scale) is never undercut
        assert lo[0] == 0.0 and res.lower_nats >= 0
        assert len(res.trace[0]) == len(TRACE_COLUMNS)
        sig = res.minimizer.entries
        assert np.linalg.eigvalsh(sig)[0] >= -1e-9
        assert trace_norm(partial_transpose(res.minimizer)) <= 1 + 1e-9


def test_upper_is_objective_at_minimizer(rng):
    rho = random_state((2, 2), rng=rng)
    res = rains_bound(rho)
    w = np.linalg.eigvalsh(rho.entries)
    w = w[w > 1e-15]
    entropy = -np.sum(w * np.log(w))
    assert res.upper_nats == pytest.approx(neg_log_overlap(rho.entries, res.minimizer.entries) - entropy, abs=1e-9)


def test_stored_tangent_points_interior(iso_rains):
    t = iso_rains.tangents
    assert len(t.points) == len(t.cuts) == len(t.offsets) == iso_rains.tangent_count
    for p in t.points[:20]:
        assert np.linalg.eigvalsh(p)[0] >= 1e-12
        assert trace_norm(partial_transpose(HermOp(3, 3, p))) <= 1 + 1e-9


def test_looser_tolerance_fewer_iterations(rng):
    rho = random_state((2, 2), rng=rng)
    assert rains_bound(rho, tol=1e-3).iterations < rains_bound(rho, tol=1e-6).iterations


def test_two_copy_ppt_product():
    rho = HermOp(2, 2, np.eye(4) / 4)
    assert two_copy_gap(rho) == (0, 0)


def test_two_copy_pure_additive():
    tol = 1e-6
    psi = schmidt_state([0.9, 0.1])
    lower2, upper2 = two_copy_gap(psi, tol)
    want = 2 * h2(0.1) * math.log(2)
    assert upper2 <= lower2 + 2 * tol
    assert lower2 - 2 * tol <= want <= upper2 + 2 * tol


def test_two_copy_regrouping_keeps_ppt_prime(rng):
    sig = HermOp.from_matrix(random_ppt_prime(rng, (2, 2)), (2, 2))
    two = tensor_product(sig, sig)
    assert two.trace() == pytest.approx(sig.trace() ** 2)
    assert is_ppt_prime(two)


def test_two_copy_dimension_cap():
    with pytest.raises(ValueError):
        two_copy_gap(HermOp(2, 5, np.eye(10) / 10))
