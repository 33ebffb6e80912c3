import io

import numpy as np
import pytest

from entdistill.fitkit import RateCurve, design_matrix, fit_rate_curve, read_sweep_csv, write_fit_csv


def model(c, n):
    n = np.asarray(n, dtype=float)
    return c[0] + c[1] / np.sqrt(n) + c[2] * np.log2(n) / n + c[3] / n


def test_exact_recovery():
    c = (1.0, -4.0, 0.5, 3.0)
    ns = np.arange(1, 41)
    curve = fit_rate_curve(zip(ns, model(c, ns)))
    assert np.allclose(curve.coefficients, c, atol=1e-9)
    assert curve.residual_norm <= 1e-10


def test_constant_data():
    curve = fit_rate_curve([(n, 0.7) for n in range(1, 12)])
    assert np.allclose(curve.coefficients, (0.7, 0, 0, 0), atol=1e-9)


def test_against_lstsq(rng):
    ns = np.arange(1, 60)
    y = model((1.02, -4.1, 0.6, 3.3), ns) + 1e-3 * rng.standard_normal(ns.size)
    curve = fit_rate_curve(zip(ns, y))
    ref = np.linalg.lstsq(design_matrix(ns), y, rcond=None)[0]
    assert np.allclose(curve.coefficients, ref, atol=1e-9)


def test_residual_properties(rng):
    ns = np.arange(1, 30)
    y = 0.5 + 0.1 * rng.standard_normal(ns.size)
    curve = fit_rate_curve(zip(ns, y))
    res = np.array(curve.residuals)
    assert curve.residual_norm == pytest.approx(np.sqrt(np.sum(res ** 2)))
    assert np.allclose(res, y - curve(ns))
    assert np.max(np.abs(design_matrix(ns).T @ res)) <= 1e-8


def test_point_on_curve_keeps_fit(rng):
    ns = list(range(1, 25))
    y = list(0.9 + 0.05 * rng.standard_normal(len(ns)))
    curve = fit_rate_curve(zip(ns, y))
    more = fit_rate_curve(list(zip(ns, y)) + [(40, curve(40))])
    assert np.allclose(more.coefficients, curve.coefficients, atol=1e-9)


def test_rejects_bad_designs():
    with pytest.raises(ValueError):
        fit_rate_curve([(5, 0.1)] * 10)
    with pytest.raises(ValueError):
        fit_rate_curve([(n, 0.1) for n in range(1, 5)])
    with pytest.raises(ValueError):
        fit_rate_curve([(n, float("nan")) for n in range(1, 8)])
    with pytest.raises(ValueError):
        design_matrix([0, 1, 2])


def test_csv_roundtrip(tmp_path):
    ns = np.arange(1, 9)
    p = tmp_path / "sweep.csv"
    p.write_text("n,rate_per_copy_bits\n" + "".join(f"{n},{float(v)!r}\n" for n, v in zip(ns, model((1, 2, 3, 4), ns))))
    pts = read_sweep_csv(p)
    assert [n for n, _ in pts] == list(ns)
    curve = fit_rate_curve(pts)
    buf = io.StringIO()
    write_fit_csv(curve, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "name,n,value"
    assert lines[1].startswith("c1,,")
    assert len(lines) == 1 + 4 + 1 + len(ns)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        read_sweep_csv(bad)


def test_scalar_and_vector_eval():
    curve = RateCurve([], (1.0, 0.0, 0.0, 1.0))
    assert curve(2) == pytest.approx(1.5)
    assert np.allclose(curve([1, 2]), [2.0, 1.5])
