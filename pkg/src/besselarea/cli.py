"""Command-line front end: ``besselarea <subcommand> ...``.

Every subcommand writes CSV (header row, ``#`` comment lines carrying the
parameter echo and a SHA-256 of the body) to ``--out`` or stdout. With
``--out`` a JSON manifest is written next to it. Densities and moments are in
scaled units unless ``--physical`` is given.

Exit codes: 0 success, 1 numerical failure, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import distribution, levy_limit, mcsim, moments, specfun, spectrum
from .errors import BesselAreaError, DomainError, ModeError
from .params import BoundaryMode, ExcursionParams

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Output helpers

def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return v


def _with_comments(body: str, subcommand: str, echo: dict) -> str:
    digest = hashlib.sha256(body.encode()).hexdigest()
    head = [f"# besselarea {__version__} {subcommand}",
            f"# params: {json.dumps(echo, sort_keys=True)}",
            f"# body-sha256: {digest}"]
    return "\n".join(head) + "\n" + body


class Emitter:
    """Collects output files for one run and writes the manifest."""

    def __init__(self, args, subcommand: str, echo: dict):
        self.out = Path(args.out) if args.out else None
        self.subcommand = subcommand
        self.echo = echo
        self.paths: list[str] = []
        self.started = getattr(args, "started", time.perf_counter())

    def sibling(self, suffix: str) -> Path:
        return self.out.with_name(self.out.stem + suffix)

    def csv(self, body: str, path: Path | None = None) -> None:
        text = _with_comments(body, self.subcommand, self.echo)
        target = path or self.out
        if target is None:
            sys.stdout.write(text)
            return
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
        self.paths.append(str(target))

    def json(self, payload: dict, path: Path | None) -> None:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if path is None:
            sys.stdout.write(text)
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.paths.append(str(path))

    def finish(self) -> None:
        if self.out is None:
            return
        manifest = {
            "subcommand": self.subcommand,
            "params": self.echo,
            "version": __version__,
            "wall_time_s": time.perf_counter() - self.started,
            "outputs": self.paths,
        }
        path = self.sibling(".manifest.json")
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _params(args, U0: float | None = None) -> ExcursionParams:
    return ExcursionParams(args.u0 if U0 is None else U0, args.D, args.T, BoundaryMode(args.mode))


def _note(msg: str) -> None:
    print(f"besselarea: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_spectrum(args) -> int:
    params = _params(args)
    data = spectrum.solve_spectrum(params, args.k, args.tol, threads=args.threads)
    free = [specfun.airy_zero(k) for k in range(args.k)]
    rows = []
    for (k, lam, d, lam_asym, d_asym), lam0 in zip(data.to_rows(), free):
        if params.U0 != 0:
            shift = (lam - lam0) / params.U0
        else:
            shift = math.nan
        rows.append((k, lam, abs(d), lam_asym, d_asym, lam0, shift, math.pi / (4 * math.sqrt(lam0))))
    header = ["k", "lambda", "d", "lambda_asym", "d_asym", "lambda_free", "shift_scaled",
              "shift_pred"]
    em = Emitter(args, "spectrum", {**params.to_dict(), "K": args.k, "tol": args.tol})
    em.csv(_rows_to_csv(header, rows))
    em.finish()
    return EXIT_OK


def _grid(args) -> np.ndarray:
    if args.n_grid < 2 or not 0 < args.lo < args.hi:
        raise UsageError("grid needs --n-grid >= 2 and 0 < --lo < --hi")
    return distribution.default_grid(args.n_grid, args.lo, args.hi)


def cmd_pdf(args) -> int:
    params = _params(args)
    grid = _grid(args)
    method = None if args.method == "auto" else _METHODS[args.method]
    data = spectrum.solve_spectrum(params, args.k, args.tol, threads=args.threads)

    def on_fallback(a_hat, exc):
        _note(f"series cancelled at A_hat={a_hat:.6g} ({exc}); using contour inversion")

    table = distribution.tabulate(params, data, grid, method, on_fallback)
    echo = {"U0": params.U0, "D": params.D, "T": params.T, "mode": params.mode.value,
            "A0": params.A0, "K": args.k, "method": args.method, "physical": args.physical}
    em = Emitter(args, "pdf", echo)
    em.csv(table.to_csv(physical=args.physical))
    em.finish()
    return EXIT_OK


def _u0_values(args) -> list[float]:
    if args.u0_range is None:
        if args.u0 is None:
            raise UsageError("give --u0 or --u0-range")
        return [args.u0]
    parts = args.u0_range.split(":")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) > 2 else 11
    except (ValueError, IndexError):
        raise UsageError("--u0-range expects LO:HI[:N]") from None
    if n < 2 or not lo < hi or len(parts) > 3:
        raise UsageError("--u0-range expects LO < HI and N >= 2")
    return [float(u) for u in np.linspace(lo, hi, n)]


def cmd_moments(args) -> int:
    values = _u0_values(args)
    header = ["U0", "alpha", "a", "m1", "m2", "m2_linear", "nu", "m_nu"]
    rows = []
    failed = 0
    for U0 in values:
        params = _params(args, U0)
        scale1 = params.A0 if args.physical else 1.0
        scale2 = scale1 ** 2
        row = [U0, params.alpha, params.a]
        try:
            row.append(moments.m1_closed(params) / params.A0 * scale1)
        except BesselAreaError as exc:
            _note(f"U0={U0:g}: m1: {exc}")
            row.append(math.nan)
            failed += 1
        try:
            res = moments.m2_series_detail(params, args.tol, threads=args.threads)
            row.append(res.value * scale2)
        except BesselAreaError as exc:
            _note(f"U0={U0:g}: m2: {exc}")
            row.append(math.nan)
            failed += 1
        row.append(moments.m2_linear(params) / params.A0 ** 2 * scale2)
        row.append(params.nu)
        if params.alpha > 0:
            m_nu = moments.m_nu_closed(params) / params.A0 ** params.nu
            row.append(m_nu * (params.A0 ** params.nu if args.physical else 1.0))
        else:
            row.append(math.nan)
        rows.append(row)
    echo = {"D": args.D, "T": args.T, "mode": args.mode, "tol": args.tol,
            "physical": args.physical, "U0": values if len(values) > 1 else values[0]}
    em = Emitter(args, "moments", echo)
    em.csv(_rows_to_csv(header, rows))
    if len(values) == 1 and em.out is not None and not failed:
        mset = moments.moment_set(_params(args, values[0]), args.tol, threads=args.threads)
        em.json(mset.to_dict(), em.sibling(".json"))
    em.finish()
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_mc(args) -> int:
    params = _params(args)
    if args.n < 1:
        raise UsageError("--n must be positive")
    config = mcsim.McConfig.default(params, args.n, args.seed, eps=args.eps,
                                    dt_fraction=args.dt_fraction, window=args.window,
                                    reg_fraction=args.reg_fraction,
                                    return_level=args.return_level)
    ensemble = mcsim.sample_excursions(config, threads=args.threads)
    em = Emitter(args, "mc", config.to_dict())
    em.csv(ensemble.to_csv())
    report = None
    if not args.no_compare:
        x = ensemble.scaled_areas
        lo = min(0.05, 0.8 * float(x[0]) if x.size else 0.05)
        hi = max(6.0, 1.2 * float(np.max(x)))
        data = spectrum.solve_spectrum(params, args.k, threads=args.threads)
        table = distribution.tabulate(params, data, distribution.default_grid(args.n_grid, lo, hi))
        ref = (moments.m1_closed(params) / params.A0, moments.m2_series(params) / params.A0 ** 2)
        report = mcsim.mc_vs_analytic(ensemble, table, ref)
        report["config"] = config.to_dict()
    if em.out is not None:
        em.json(ensemble.sidecar(), em.sibling(".config.json"))
        if report is not None:
            em.csv(mcsim.overlay_csv(report), em.sibling(".overlay.csv"))
            em.json({k: v for k, v in report.items() if k != "overlay"}, em.sibling(".report.json"))
    elif report is not None:
        _note(json.dumps({k: report[k] for k in ("ks_statistic", "ks_critical_1pct", "z1", "z2")}))
    em.finish()
    return EXIT_OK


def cmd_levy_limit(args) -> int:
    U0 = args.u0
    if not levy_limit.within_validity(U0):
        _note(f"U0 + 3 = {U0 + 3:g} exceeds {levy_limit.VALIDITY_THRESHOLD}; "
              "the limit law is only leading order there")
    echo = {"U0": U0, "lambda0_perturbative": levy_limit.lambda0_perturbative(U0),
            "within_validity": levy_limit.within_validity(U0)}
    if args.laplace:
        params = ExcursionParams(U0, args.D, args.T, BoundaryMode.CONTINUED)
        s_grid = np.linspace(0.0, args.s_max, args.n_grid)
        data = spectrum.solve_spectrum(params, args.k, threads=args.threads)
        echo["lambda0"] = float(data.lambdas[0])
        rows = []
        for s in s_grid:
            lim = levy_limit.limit_laplace(U0, float(s))
            full = distribution.laplace_pdf(params, data, float(s), tol=None) if s > 0 else 1.0
            rows.append((float(s), lim, full, lim / full - 1.0))
        body = _rows_to_csv(["s_hat", "limit_laplace", "full_laplace", "rel_diff"], rows)
    else:
        rows = [(float(x), levy_limit.limit_pdf(U0, float(x))) for x in _grid(args)]
        body = _rows_to_csv(["a_hat", "limit_pdf"], rows)
    em = Emitter(args, "levy-limit", echo)
    em.csv(body)
    em.finish()
    return EXIT_OK


_METHODS = {"hyp": distribution.Method.HYP_SERIES, "talbot": distribution.Method.TALBOT,
            "airy": distribution.Method.AIRY_CLOSED}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besselarea",
                                     description="Area distribution of Bessel excursions.")
    parser.add_argument("--version", action="version", version=f"besselarea {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--D", type=float, default=0.5, help="diffusion constant (default 1/2)")
    common.add_argument("--T", type=float, default=1.0, help="excursion duration (default 1)")
    common.add_argument("--mode", choices=[m.value for m in BoundaryMode],
                        default=BoundaryMode.ABSORBING.value)
    common.add_argument("--out", help="output CSV path (default stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--physical", action="store_true",
                        help="emit physical units instead of A0-scaled ones")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues and origin coefficients")
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_spectrum)

    def grid_flags(q, lo=0.05, hi=6.0, n=400):
        q.add_argument("--lo", type=float, default=lo)
        q.add_argument("--hi", type=float, default=hi)
        q.add_argument("--n-grid", type=int, default=n)

    p = sub.add_parser("pdf", parents=[common], help="tabulate the area density")
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--method", choices=["auto", *_METHODS], default="auto")
    p.add_argument("--k", type=int, default=150, help="number of levels")
    p.add_argument("--tol", type=float, default=1e-10)
    grid_flags(p)
    p.set_defaults(func=cmd_pdf)

    p = sub.add_parser("moments", parents=[common], help="closed-form and series moments")
    p.add_argument("--u0", type=float)
    p.add_argument("--u0-range", help="LO:HI[:N] sweep (N defaults to 11)")
    p.add_argument("--tol", type=float, default=1e-7, help="second-moment tolerance")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo excursions and comparison")
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--n", type=int, default=10_000, help="accepted excursions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.02, help="x_start / sqrt(D T)")
    p.add_argument("--dt-fraction", type=float, default=4e-4, help="dt / T")
    p.add_argument("--window", type=float, default=0.5, help="accept durations in [T(1-w), T]")
    p.add_argument("--reg-fraction", type=float, default=0.25, help="x0_reg / x_start")
    p.add_argument("--return-level", choices=["auto", "threshold", "origin"], default="auto")
    p.add_argument("--no-compare", action="store_true", help="skip the analytic comparison")
    p.add_argument("--k", type=int, default=150, help="levels for the comparison table")
    p.add_argument("--n-grid", type=int, default=300, help="comparison table size")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("levy-limit", parents=[common], help="stable-law limit near U0 = -3")
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--laplace", action="store_true",
                   help="compare transforms with the full continued-branch result")
    p.add_argument("--s-max", type=float, default=4.0)
    p.add_argument("--k", type=int, default=150)
    grid_flags(p, 0.01, 3.0, 200)
    p.set_defaults(func=cmd_levy_limit)
    return parser


def _join_negative_values(argv):
    """Let ``--u0-range -3:-2`` through: argparse would read the value as an option."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--u0-range":
            value = next(it, None)
            out.append(tok if value is None else f"{tok}={value}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    args.started = time.perf_counter()
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (UsageError, DomainError, ModeError) as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE
    except BesselAreaError as exc:
        _note(f"numerical failure: {type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
