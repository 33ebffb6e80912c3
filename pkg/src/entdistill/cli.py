"""Command-line front end.

Every subcommand writes plain CSV (to ``--out`` or stdout) or a short text
summary.  Exit codes: 0 on success, 2 for malformed input or bad flags, 3
when a solver fails to produce an answer.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import distill, fitkit, iso, rains, secord
from .conic import SolverError
from .qmat import ConvergenceError, HermOp

__all__ = ["main", "read_state_file", "write_state_file", "StateFileError"]

EXIT_INPUT = 2
EXIT_SOLVER = 3
STATE_HERM_TOL = 1e-9
STATE_TRACE_TOL = 1e-6
APPENDIX_COLUMNS = ["theta", "sdp1", "sdp2", "gap"]


class StateFileError(ValueError):
    """The state file is unreadable or violates its format."""


def read_state_file(path, operator: bool = False) -> HermOp:
    """Load a JSON state file ``{"dims": [dA, dB], "matrix": [[[re, im], ...], ...]}``.

    With ``operator`` the unit-trace check is skipped.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise StateFileError(f"cannot read state file: {exc}") from exc
    if not isinstance(data, dict) or "dims" not in data or "matrix" not in data:
        raise StateFileError("state file needs 'dims' and 'matrix' fields")
    dims = data["dims"]
    if (not isinstance(dims, list) or len(dims) != 2
            or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims)):
        raise StateFileError("'dims' must be two positive integers")
    side = dims[0] * dims[1]
    rows = data["matrix"]
    if not isinstance(rows, list) or len(rows) != side:
        raise StateFileError(f"'matrix' must have {side} rows")
    mat = np.zeros((side, side), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != side:
            raise StateFileError(f"row {i} must have {side} entries")
        for j, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in z)):
                raise StateFileError(f"entry ({i}, {j}) must be a [re, im] pair")
            mat[i, j] = complex(z[0], z[1])
    if not np.all(np.isfinite(mat)):
        raise StateFileError("matrix entries must be finite")
    if np.max(np.abs(mat - mat.conj().T)) > STATE_HERM_TOL:
        raise StateFileError("matrix is not Hermitian")
    if not operator and abs(np.trace(mat).real - 1) > STATE_TRACE_TOL:
        raise StateFileError("matrix trace is not 1 (pass --operator to allow this)")
    # exact for Hermitian input, so files round-trip bit for bit
    mat = (mat + mat.conj().T) / 2
    return HermOp(dims[0], dims[1], mat)


def write_state_file(rho: HermOp, path):
    """Write ``rho`` with 17 significant digits per real number."""
    m = rho.entries
    rows = [[[float(f"{z.real:.17g}"), float(f"{z.imag:.17g}")] for z in row] for row in m]
    with open(path, "w") as fh:
        json.dump({"dims": [rho.dim_a, rho.dim_b], "matrix": rows}, fh)
        fh.write("\n")


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_rows(rows, columns, path):
    fh, own = _open_out(path)
    try:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if own:
            fh.close()


def _probability(text: str):
    try:
        v = iso.as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    return v


def _n_list(text: str):
    try:
        out = [int(s) for s in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad n-list: {text!r}") from exc
    if not out or any(n < 1 for n in out):
        raise argparse.ArgumentTypeError("n-list needs positive integers")
    return out


def cmd_oneshot(args):
    rho = read_state_file(args.state, args.operator)
    res = distill.one_shot_ppt_ed(rho, float(args.eps))
    print(f"eta {res.eta!r}")
    print(f"rate_bits {res.rate_bits!r}")
    print(f"rate_integer_bits {res.rate_integer_bits!r}")
    if args.out:
        _write_rows([{"eps": float(args.eps), "eta": res.eta, "rate_bits": res.rate_bits,
                      "rate_integer_bits": res.rate_integer_bits}],
                    ["eps", "eta", "rate_bits", "rate_integer_bits"], args.out)


def cmd_rains(args):
    rho = read_state_file(args.state, args.operator)
    res = rains.rains_bound(rho, tol=args.tol)
    status = "converged" if res.converged else "not converged"
    print(f"{res.lower_bits:.10g} {res.upper_bits:.10g}, {status}, {res.iterations} iterations")
    if args.trace_csv:
        _write_rows([dict(zip(rains.TRACE_COLUMNS, row)) for row in res.trace], rains.TRACE_COLUMNS,
                    args.trace_csv)
    if not res.converged:
        return EXIT_SOLVER
    return 0


def cmd_gap2(args):
    rho = read_state_file(args.state, args.operator)
    lower2, upper2 = rains.two_copy_gap(rho, args.tol)
    gap = lower2 - upper2
    sign = "positive" if gap > 0 else ("negative" if gap < 0 else "zero")
    print(f"2R_lower_1 {lower2 / math.log(2):.10g} bits")
    print(f"R_upper_2 {upper2 / math.log(2):.10g} bits")
    print(f"gap {gap / math.log(2):.3e} bits ({sign}; positive certifies non-additivity)")


def cmd_iso(args):
    if args.n_max < 1:
        raise ValueError("--n-max must be at least 1")
    iso.IsoParams(args.d, args.F, 1, args.eps)
    fh, own = _open_out(args.out)
    try:
        w = csv.DictWriter(fh, fieldnames=iso.SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()

        def emit(r):
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
            fh.flush()

        iso.iso_sweep(args.d, args.F, args.eps, args.n_max, progress=emit)
    finally:
        if own:
            fh.close()


def cmd_secord(args):
    if (args.state is None) == (args.iso is None):
        raise ValueError("give either a state file or --iso d F")
    if args.iso is not None:
        d, F = args.iso
        try:
            rho = iso.iso_state(int(d), float(iso.as_fraction(F)))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad --iso arguments: {exc}") from exc
    else:
        rho = read_state_file(args.state, args.operator)
    rows = secord.sweep(rho, float(args.eps), args.n_list)
    secord.write_sweep_csv(rows, sys.stdout if args.out in (None, "-") else args.out)


def cmd_fit(args):
    curve = fitkit.fit_rate_curve(fitkit.read_sweep_csv(args.inp))
    # published reference coefficients for d=3, F=9/10, eps=1/1000
    ref = (1.021, -4.090, 0.652, 3.330)
    print("coef   fitted      reference")
    for i, (c, r) in enumerate(zip(curve.coefficients, ref), 1):
        print(f"c{i}  {c:11.6f}  {r:9.3f}")
    print(f"residual_norm {curve.residual_norm:.6e}")
    if args.out:
        fitkit.write_fit_csv(curve, args.out)


def cmd_appendix(args):
    if args.steps < 1:
        raise ValueError("--steps must be at least 1")
    eps = float(args.eps)
    if args.steps == 1:
        thetas = [args.theta_min]
    else:
        thetas = np.linspace(args.theta_min, args.theta_max, args.steps)
    rows = []
    for th in thetas:
        rho = distill.appendix_state(float(th))
        a, b = distill.sdp1(rho, eps), distill.sdp2(rho, eps)
        rows.append({"theta": float(th), "sdp1": a, "sdp2": b, "gap": a - b})
    _write_rows(rows, APPENDIX_COLUMNS, args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entdistill", description="Finite-copy entanglement distillation bounds.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def state_cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("state", help="JSON state file")
        p.add_argument("--operator", action="store_true", help="skip the unit-trace check")
        return p

    p = state_cmd("oneshot", "one-shot PPT distillable entanglement")
    p.add_argument("--eps", type=_probability, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oneshot)

    p = state_cmd("rains", "Rains bound bracket by cutting planes")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--trace-csv")
    p.set_defaults(func=cmd_rains)

    p = state_cmd("gap2", "two-copy additivity gap of the Rains bound")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_gap2)

    p = sub.add_parser("iso", help="exact isotropic LP sweep over n")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--F", type=_probability, required=True)
    p.add_argument("--eps", type=_probability, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_iso)

    p = sub.add_parser("secord", help="second-order upper and lower expansions")
    p.add_argument("state", nargs="?")
    p.add_argument("--iso", nargs=2, metavar=("D", "F"))
    p.add_argument("--operator", action="store_true")
    p.add_argument("--eps", type=_probability, required=True)
    p.add_argument("--n-list", type=_n_list, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_secord)

    p = sub.add_parser("fit", help="fit a sweep CSV to the finite-n rate model")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("appendix", help="sdp1 - sdp2 gap over the appendix state family")
    p.add_argument("--theta-min", type=float, default=math.pi / 12)
    p.add_argument("--theta-max", type=float, default=math.pi / 6)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--eps", type=_probability, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_appendix)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "eps", 1) is None:
        args.eps = 1 - math.sqrt(3) / 2
    try:
        code = args.func(args)
    except (StateFileError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, ConvergenceError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
