import io
import math
from fractions import Fraction

import numpy as np
import pytest

from entdistill import distill
from entdistill.iso import (
    SWEEP_COLUMNS,
    IsoParams,
    as_fraction,
    iso_hashing,
    iso_lp,
    iso_rains_closed,
    iso_state,
    iso_sweep,
    symmetrized_projector,
    symmetrized_sum,
    write_sweep_csv,
    x_coeff,
)
from entdistill.qmat import HermOp, coherent_info, max_entangled, partial_transpose, tensor_power, tensor_product


def test_iso_state_examples():
    assert np.allclose(iso_state(3, 1).entries, max_entangled(3).entries)
    assert np.allclose(iso_state(2, 0.25).entries, np.eye(4) / 4)
    w = iso_state(3, 0.9).eigvalsh()
    assert w[0] == pytest.approx(0.0125)
    assert np.allclose(w[:-1], 0.0125)
    assert w[-1] == pytest.approx(0.9)
    assert iso_state(3, 0.9).trace() == pytest.approx(1)


def test_x_coeff_single_copy():
    assert x_coeff(1, 1, 1, 3) == Fraction(1, 3)
    assert x_coeff(1, 0, 1, 3) == Fraction(-1, 3)
    assert x_coeff(0, 1, 1, 3) == Fraction(2, 3)
    assert x_coeff(0, 0, 1, 3) == Fraction(4, 3)
    with pytest.raises(ValueError):
        x_coeff(2, 0, 1, 3)


def _sym_dims(n, k, d):
    return math.comb(n, k) * (d * (d + 1) // 2) ** k * (d * (d - 1) // 2) ** (n - k)


@pytest.mark.parametrize("n,d", [(1, 2), (2, 2), (3, 2), (1, 3), (2, 3)])
def test_x_coeff_trace_identity(n, d):
    for i in range(n + 1):
        lhs = sum(x_coeff(i, k, n, d) * _sym_dims(n, k, d) for k in range(n + 1))
        assert lhs == math.comb(n, i) * (d * d - 1) ** (n - i)
        assert lhs == pytest.approx(symmetrized_projector(i, n, d).trace(), abs=1e-9)


def test_symmetrized_projector_examples():
    phi = max_entangled(2)
    comp = np.eye(4) - phi.entries
    assert np.allclose(symmetrized_projector(0, 1, 2).entries, comp)
    assert np.allclose(symmetrized_projector(3, 3, 2).entries, tensor_power(phi, 3).entries)
    c = HermOp(2, 2, comp)
    three = (tensor_product(tensor_product(c, c), phi) + tensor_product(tensor_product(c, phi), c)
             + tensor_product(tensor_product(phi, c), c))
    assert np.allclose(symmetrized_projector(1, 3, 2).entries, three.entries)


def test_symmetrized_projector_rank():
    for n, d in [(2, 2), (3, 2), (2, 3)]:
        for i in range(n + 1):
            p = symmetrized_projector(i, n, d).entries
            assert np.allclose(p @ p, p, atol=1e-12)
            assert round(np.trace(p).real) == math.comb(n, i) * (d * d - 1) ** (n - i)


def test_symmetrized_projector_cap():
    with pytest.raises(ValueError):
        symmetrized_projector(1, 5, 3)


@pytest.mark.parametrize("n,d", [(2, 2), (3, 2), (2, 3)])
def test_pt_eigenvalues_match_x(rng, n, d):
    m = rng.uniform(0, 1, n + 1)
    op = sum(m[i] * symmetrized_projector(i, n, d).entries for i in range(n + 1))
    da = d ** n
    w = np.sort(np.linalg.eigvalsh(partial_transpose(HermOp(da, da, op)).entries))
    want = []
    for k in range(n + 1):
        t = sum(float(x_coeff(i, k, n, d)) * m[i] for i in range(n + 1))
        want += [t] * _sym_dims(n, k, d)
    assert np.allclose(w, np.sort(want), atol=1e-10)


def test_symmetrized_sum_checks_dims():
    with pytest.raises(ValueError):
        symmetrized_sum(1, 2, max_entangled(2), max_entangled(3))


def test_iso_lp_single_copy():
    res = iso_lp(IsoParams(3, Fraction(9, 10), 1, Fraction(1, 1000)))
    assert res.eta == Fraction(149, 150)
    assert res.rate_bits == pytest.approx(0.009655, abs=5e-6)
    assert res.rate_bits == -math.log2(149 / 150) or abs(res.rate_bits + math.log2(149 / 150)) < 1e-15


def test_iso_lp_bell_limit():
    res = iso_lp(IsoParams(2, 1, 1, Fraction(1, 10 ** 9)))
    assert res.eta == Fraction(1, 2) * (1 - Fraction(1, 10 ** 9))
    assert res.rate_bits == pytest.approx(1, abs=1e-8)


def _check_exact(res):
    p = res.params
    n, d = p.n, p.d
    assert all(0 <= mi <= 1 for mi in res.m)
    fid = sum(math.comb(n, i) * p.F ** i * (1 - p.F) ** (n - i) * res.m[i] for i in range(n + 1))
    assert fid >= 1 - p.eps
    for k in range(n + 1):
        t = sum(x_coeff(i, k, n, d) * res.m[i] for i in range(n + 1))
        assert t == res.t[k]
        assert -res.eta <= t <= res.eta


@pytest.mark.parametrize("n", [2, 5, 12])
def test_iso_lp_exact_residuals(n):
    res = iso_lp(IsoParams(3, Fraction(9, 10), n, Fraction(1, 1000)))
    _check_exact(res)


def test_row_generation_matches_full_lp():
    for n in (3, 9, 16):
        p = IsoParams(3, Fraction(9, 10), n, Fraction(1, 1000))
        assert iso_lp(p).eta == iso_lp(p, generate=False).eta


def test_iso_lp_other_parameters():
    for d, F, eps in [(2, Fraction(4, 5), Fraction(1, 100)), (4, Fraction(7, 10), Fraction(1, 20))]:
        res = iso_lp(IsoParams(d, F, 6, eps))
        _check_exact(res)
        assert res.eta == iso_lp(IsoParams(d, F, 6, eps), generate=False).eta


@pytest.mark.parametrize("n,d,F,eps", [(1, 2, 0.8, 0.01), (1, 3, 0.9, 0.001), (2, 2, 0.8, 0.01), (3, 2, 0.8, 0.05)])
def test_iso_lp_matches_sdp(n, d, F, eps):
    lp = iso_lp(IsoParams(d, as_fraction(F), n, as_fraction(eps)))
    sdp = distill.one_shot_ppt_ed(tensor_power(iso_state(d, F), n), eps)
    assert lp.rate_bits == pytest.approx(sdp.rate_bits, abs=1e-5)


def test_iso_params_validation():
    with pytest.raises(ValueError):
        IsoParams(1, Fraction(1, 2), 1, Fraction(1, 10))
    with pytest.raises(ValueError):
        IsoParams(3, Fraction(3, 2), 1, Fraction(1, 10))
    with pytest.raises(ValueError):
        IsoParams(3, Fraction(1, 2), 0, Fraction(1, 10))
    with pytest.raises(ValueError):
        IsoParams(3, Fraction(1, 2), 1, 0)
    assert IsoParams(3, "9/10", 1, "0.001").distillable_regime
    assert not IsoParams(3, "1/3", 1, "0.001").distillable_regime


def test_as_fraction_literal_decimal():
    assert as_fraction(0.9) == Fraction(9, 10)
    assert as_fraction("0.001") == Fraction(1, 1000)
    assert as_fraction("9/10") == Fraction(9, 10)
    assert as_fraction(3) == Fraction(3)


def test_closed_forms():
    assert iso_rains_closed(3, 0.9) == pytest.approx(1.0160, abs=5e-4)
    assert iso_rains_closed(2, 1) == pytest.approx(1)
    with pytest.raises(ValueError):
        iso_rains_closed(3, 0.3)
    assert iso_hashing(3, 0.9) == pytest.approx(0.8160, abs=5e-5)
    assert iso_hashing(2, 1) == pytest.approx(1)
    assert iso_hashing(3, 1 / 9) < 0
    # eigenvalue formula as an independent route
    F, d = 0.9, 3
    lam = [F] + [(1 - F) / (d * d - 1)] * (d * d - 1)
    assert iso_hashing(d, F) == pytest.approx(math.log2(d) + sum(x * math.log2(x) for x in lam), abs=1e-12)
    assert coherent_info(iso_state(d, F)) == iso_hashing(d, F)


def test_sweep_rows_and_csv():
    rows = iso_sweep(3, "9/10", "1/1000", 6)
    assert [r["n"] for r in rows] == list(range(1, 7))
    assert (rows[0]["eta_num"], rows[0]["eta_den"]) == (149, 150)
    for r in rows:
        assert r["rate_per_copy_bits"] <= iso_rains_closed(3, 0.9) + 0.01
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 7
    with pytest.raises(ValueError):
        iso_sweep(3, "9/10", "1/1000", 0)


def test_n_cap():
    with pytest.raises(ValueError):
        iso_lp(IsoParams(3, Fraction(9, 10), 121, Fraction(1, 1000)))
