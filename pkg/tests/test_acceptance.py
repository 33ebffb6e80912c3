"""The eight acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Criterion 5 fits the n = 1..100 sweep stored in ``data/``; the stored rows
are spot-checked by exact recomputation, and ``ENTDISTILL_FULL_SWEEP=1``
recomputes all of them (about 45 minutes).
"""

import csv
import math
import os
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
from scipy.linalg import logm

from entdistill import distill, secord
from entdistill.fitkit import fit_rate_curve
from entdistill.iso import IsoParams, iso_lp, iso_rains_closed, iso_state, iso_sweep, x_coeff
from entdistill.qmat import (
    inv_normal_cdf,
    max_entangled,
    partial_transpose,
    random_pure_state,
    random_state,
    tensor_power,
    trace_norm,
)
from entdistill.rains import frechet_log, neg_log_overlap, rains_bound, tangent_cut

from conftest import ACCEPTANCE, bell_mixture, h2

SWEEP = Path(__file__).resolve().parent.parent / "data" / "iso_sweep_d3_F9-10_eps1-1000.csv"
F9, EPS3 = Fraction(9, 10), Fraction(1, 1000)

# every Rains run made here, for the monotonicity suite
RAINS_LOG = []
# exact LP results from criteria 3 and 4, for the residual suite
LP_LOG = []


@contextmanager
def criterion(k):
    details = []
    try:
        yield details
    except BaseException:
        ACCEPTANCE[k] = (False, "; ".join(details))
        raise
    ACCEPTANCE[k] = (True, "; ".join(details))


def logged_rains(rho, **kw):
    res = rains_bound(rho, **kw)
    RAINS_LOG.append(res)
    return res


def test_criterion_1_closed_form():
    with criterion(1) as info:
        value = iso_rains_closed(3, 0.9)
        reps = 1000
        t0 = time.perf_counter()
        for _ in range(reps):
            iso_rains_closed(3, 0.9)
        per_call = (time.perf_counter() - t0) / reps
        info.append(f"R = {value:.6f} bits, {per_call * 1e6:.1f} us/call")
        assert abs(value - 1.0160) <= 0.0005
        assert per_call < 1e-3


def test_criterion_2_cutting_plane():
    with criterion(2) as info:
        t0 = time.perf_counter()
        res = logged_rains(iso_state(3, 0.9))
        elapsed = time.perf_counter() - t0
        width = res.upper_nats - res.lower_nats
        target = 1.0160 * math.log(2)
        info.append(f"iso bracket [{res.lower_nats:.9f}, {res.upper_nats:.9f}] nats, width {width:.1e}, "
                    f"{elapsed:.1f} s")
        assert res.converged
        assert width <= 1e-6
        assert elapsed <= 60
        # 1.0160 is quoted to four places: the bracket must meet the interval it rounds
        half_ulp = 0.00005 * math.log(2)
        assert res.lower_nats <= target + half_ulp and res.upper_nats >= target - half_ulp
        exact = iso_rains_closed(3, 0.9) * math.log(2)
        assert res.lower_nats - 1e-9 <= exact <= res.upper_nats + 1e-9
        for p in (0.1, 0.25, 0.4):
            r = logged_rains(bell_mixture(p))
            want = 1 - h2(p)
            info.append(f"p={p}: [{r.lower_bits:.7f}, {r.upper_bits:.7f}] vs {want:.7f}")
            assert r.lower_bits - 1e-5 <= want <= r.upper_bits + 1e-5


def test_criterion_3_lp_vs_sdp():
    with criterion(3) as info:
        t0 = time.perf_counter()
        for n, d, F, eps in [(1, 3, "9/10", "1/1000"), (2, 2, "4/5", "1/100"), (2, 3, "9/10", "1/1000")]:
            lp = iso_lp(IsoParams(d, F, n, eps))
            LP_LOG.append(lp)
            sdp = distill.one_shot_ppt_ed(tensor_power(iso_state(d, float(Fraction(F))), n), float(Fraction(eps)))
            diff = abs(lp.rate_bits - sdp.rate_bits)
            info.append(f"(n={n},d={d}) |diff| {diff:.1e}")
            assert diff <= 1e-5
            if n == 1:
                assert lp.eta == Fraction(149, 150)
                assert abs(lp.rate_bits - math.log2(150 / 149)) <= 1e-15
        elapsed = time.perf_counter() - t0
        info.append(f"{elapsed:.0f} s")
        assert elapsed <= 600


def test_criterion_4_figure2_reduced():
    with criterion(4) as info:
        rows = []
        for n in range(1, 41):
            res = iso_lp(IsoParams(3, F9, n, EPS3))
            LP_LOG.append(res)
            rows.append(res.rate_bits / n)
        rains_value = iso_rains_closed(3, 0.9)
        means = [float(np.mean(rows[i:i + 10])) for i in range(0, 40, 10)]
        slope = np.polyfit(np.log(np.arange(1, 41)), rows, 1)[0]
        info.append(f"decade means {', '.join(f'{m:.4f}' for m in means)}; rate(40) = {rows[-1]:.4f}")
        assert all(b > a for a, b in zip(means, means[1:]))
        assert slope > 0
        assert max(rows) < rains_value
        assert rows[-1] < 0.8160 + 0.25


def _load_sweep():
    with open(SWEEP, newline="") as fh:
        return list(csv.DictReader(fh))


def test_criterion_5_fit():
    with criterion(5) as info:
        full = os.environ.get("ENTDISTILL_FULL_SWEEP") == "1" or not SWEEP.exists()
        if full:
            rows = [{k: str(v) for k, v in r.items()} for r in iso_sweep(3, F9, EPS3, 100)]
            info.append("sweep recomputed")
        else:
            rows = _load_sweep()
            assert [int(r["n"]) for r in rows] == list(range(1, 101))
            # stored etas must be the exact optima this package computes
            for n in list(range(1, 41)) + [50, 60, 75, 90]:
                res = iso_lp(IsoParams(3, F9, n, EPS3))
                r = rows[n - 1]
                assert (int(r["eta_num"]), int(r["eta_den"])) == (res.eta.numerator, res.eta.denominator)
            info.append("stored sweep, n=1..40,50,60,75,90 re-verified exactly")
        pts = []
        for r in rows:
            n = int(r["n"])
            eta = Fraction(int(r["eta_num"]), int(r["eta_den"]))
            pts.append((n, (math.log2(eta.denominator) - math.log2(eta.numerator)) / n))
        curve = fit_rate_curve(pts)
        c = curve.coefficients
        info.append("c = (" + ", ".join(f"{v:.4f}" for v in c) + ")")
        assert abs(c[0] - 1.021) <= 0.05
        assert abs(c[1] + 4.090) <= 0.3
        res = next((r for r in RAINS_LOG if r.minimizer.dims == (3, 3)), None) or logged_rains(iso_state(3, 0.9))
        up = secord.upper_bound(iso_state(3, 0.9), 1, 0.001, res)
        info.append(f"upper ({up.first_order_bits:.5f}, {up.second_order_bits:.4f})")
        assert abs(up.first_order_bits - 1.016) <= 0.001
        assert abs(up.second_order_bits + 3.866) <= 0.05


def test_criterion_6_appendix():
    with criterion(6) as info:
        eps = 1 - math.sqrt(3) / 2
        t0 = time.perf_counter()
        gaps = []
        for th in np.linspace(math.pi / 12, math.pi / 6, 50):
            rho = distill.appendix_state(float(th))
            gaps.append(distill.sdp1(rho, eps) - distill.sdp2(rho, eps))
        elapsed = time.perf_counter() - t0
        info.append(f"max gap {max(gaps):.4e}, min gap {min(gaps):.1e}, {elapsed:.0f} s")
        assert 1.2e-2 <= max(gaps) <= 2.2e-2
        assert min(gaps) >= -1e-8
        assert elapsed <= 300


def test_criterion_7_pure_state_tightness():
    with criterion(7) as info:
        rng = np.random.default_rng(7)
        worst1 = worst2 = 0.0
        for dims in [(2, 2), (3, 3)]:
            for _ in range(20):
                psi = random_pure_state(dims, rng=rng)
                res = logged_rains(psi)
                tight, rep = secord.tightness_check(psi, 0.001, res)
                worst1 = max(worst1, abs(rep["first_gap"]))
                worst2 = max(worst2, abs(rep["second_gap"]))
                assert tight, rep
        info.append(f"40 states, worst gaps {worst1:.1e} / {worst2:.1e}")
        for d in (2, 3):
            phi = max_entangled(d)
            assert secord.upper_bound(phi, 1, 0.001, logged_rains(phi)).second_order_bits == 0.0
            assert secord.lower_bound(phi, 1, 0.001).second_order_bits == 0.0


def _random_ppt_prime(rng, dims):
    s = random_state(dims, rng=rng)
    return s.entries / trace_norm(partial_transpose(s))


def test_criterion_8_property_suites():
    with criterion(8) as info:
        rng = np.random.default_rng(8)
        # tangent cuts: every fifth stored cut of a mixed-state run, 100 points each
        rho = random_state((2, 2), rng=rng)
        res = logged_rains(rho)
        pts = res.tangents.points
        checked = 0
        for sig in pts[::5]:
            e, c, _ = tangent_cut(rho.entries, sig)
            for _ in range(100):
                x = _random_ppt_prime(rng, (2, 2))
                assert neg_log_overlap(rho.entries, x) >= c - np.trace(e @ x).real - 1e-9
                checked += 1
        info.append(f"{checked} cut checks")
        # bracket monotonicity over every run logged in this module
        for r in RAINS_LOG:
            lo = [t[1] for t in r.trace]
            up = [t[2] for t in r.trace]
            assert all(b >= a for a, b in zip(lo, lo[1:]))
            assert all(b <= a for a, b in zip(up, up[1:]))
            assert r.lower_nats <= r.upper_nats + 1e-12
        info.append(f"{len(RAINS_LOG)} Rains runs monotone")
        # exact LP residuals
        lps = LP_LOG or [iso_lp(IsoParams(3, F9, n, EPS3)) for n in (1, 5, 10)]
        for lp in lps:
            p = lp.params
            fid = sum(math.comb(p.n, i) * p.F ** i * (1 - p.F) ** (p.n - i) * m for i, m in enumerate(lp.m))
            assert fid >= 1 - p.eps
            ts = [sum(x_coeff(i, k, p.n, p.d) * m for i, m in enumerate(lp.m)) for k in range(p.n + 1)]
            assert all(-lp.eta <= t <= lp.eta for t in ts)
            # at the optimum eta sits exactly on the largest |t_k|
            assert max(abs(t) for t in ts) - lp.eta == 0
            assert all(0 <= m <= 1 for m in lp.m)
        info.append(f"{len(lps)} LPs exact")
        # first-order expansion of ln: error ratio at two step sizes
        a = random_state((3, 2), rng=rng).entries
        w, u = np.linalg.eigh(a)
        g = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        g = (g + g.conj().T) / np.linalg.norm(g + g.conj().T)
        errs = [np.linalg.norm(logm(a + h * g) - logm(a) - frechet_log(w, u, h * g)) for h in (1e-3, 1e-4)]
        ratio = errs[1] / errs[0]
        info.append(f"expansion ratio {ratio:.4f}")
        assert 0.005 <= ratio <= 0.02
        # inverse normal round trip against an independent CDF
        grid = np.linspace(1e-6, 1 - 1e-6, 1000)
        worst = max(abs(float(mpmath.ncdf(inv_normal_cdf(float(e)))) - e) for e in grid)
        info.append(f"Phi round trip {worst:.1e}")
        assert worst <= 1e-10
