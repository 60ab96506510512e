"""Monte Carlo excursions of the Langevin dynamics ``dx = -D U0 / x dt + sqrt(2D) dW``.

Excursions are harvested by rejection: a path starts at ``b = x_start``, runs
until its first crossing of the return level, and is kept when its duration
``tau`` falls in ``[T(1 - window), T]``. Every sample is put on the universal
scale with its own duration, ``A_hat = area / (sqrt(D) tau^{3/2})``; in the
``b -> 0`` limit the conditional law of that ratio does not depend on ``tau``.

Return level
    ``threshold``: return to ``b`` itself, area measured above ``b``. The first
    step is the Rayleigh law of an increment conditioned to go up. This is the
    only choice for ``U0 <= -1``, where the origin is never reached, and it is
    exact at any ``b`` when ``|alpha| = 1/2``. ``origin``: start at ``b`` and
    stop on hitting 0; the error is of order ``b^2 / (D T)``. ``auto`` picks
    the threshold for ``U0 <= -1`` or ``|alpha| = 1/2`` and the origin otherwise.

Stepping
    Euler-Maruyama with the regularized drift ``-D U0 x / (x0_reg^2 + x^2)``,
    and Brownian-bridge detection of crossings between grid points. Close to
    an absorbing origin with ``-1 < U0 <= 1`` the steps are exact instead: the
    squared process is a squared Bessel process of dimension ``1 - U0``
    (Poisson-mixed gamma increments) and the chance that the step touched 0 is
    ``1 - I_alpha(z) / I_{-alpha}(z)`` with ``z = x y / (2 D dt)``.

Conditioned climb
    Long excursions first climb to ``H = 0.2 sqrt(D T)``. When that climb has a
    closed-form conditioned law (a Bessel process of dimension ``3 + U0`` in
    ``x`` for origin return, dimension 3 in ``x - b`` for ``U0 = 0``), every
    attempt starts with it, which removes the many attempts that die at once.
    All kept paths carry equal weight.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from .distribution import DistributionTable
from .errors import AcceptanceStarvationError, CoverageError, DomainError
from .params import BoundaryMode, ExcursionParams

try:
    from numba import njit
    _jit = njit(cache=True, nogil=True)
    _jit_inline = njit(cache=True, nogil=True, inline="always")
except ImportError:  # pragma: no cover - exercised only without numba
    def _jit(f):
        return f
    _jit_inline = _jit

BLOCK_ATTEMPTS = 20_000
SPLIT_HEIGHT = 0.2
PROBE_ATTEMPTS = 1_000_000
MIN_ACCEPTANCE = 1e-6
_PRUNE_SIGMAS = 8.0  # Gaussian tail e^-32
_BRIDGE_CUTOFF = 40.0  # skip the bridge test when the crossing probability is below e^-40
_EXACT_ZONE = 50.0  # exact Bessel steps while x^2 < 50 * 2 D dt
_KILL_Z_MIN = 1e-12
_KILL_Z_MAX = 20.0
_KILL_GRID = 4001


@_jit_inline
def _kill_probability(z, table, u_lo, du):
    """Interpolated exact bridge hitting probability, tabulated in ``log z``."""
    if z >= _KILL_Z_MAX:
        return 0.0
    if z <= 0.0:
        return table[0]
    u = (math.log(z) - u_lo) / du
    if u <= 0.0:
        return table[0]
    i = int(u)
    if i >= table.size - 1:
        return table[table.size - 1]
    w = u - i
    return (1.0 - w) * table[i] + w * table[i + 1]


@_jit_inline
def _advance(rng, x, drift_dt, level, reg2, var, sigma, exact, delta, table, u_lo, du):
    """One step from ``x``; ``drift_dt = D U0 dt``. Returns ``(x_new, status)``.

    ``status`` is 0 if the path survives, 1 if it ends inside the step with the
    crossing fraction stored in ``x_new``, 2 if it ends at an unresolved point
    of the step (taken as mid-step).
    """
    if exact and x * x < _EXACT_ZONE * var:
        # exact reflecting Bessel step, then exact conditional hitting of 0
        k = rng.poisson(x * x / (2.0 * var))
        if delta == 0.0:
            # dimension 0 is absorbed at 0, which it reaches exactly when k = 0
            if k == 0:
                return 0.5, 2
            return math.sqrt(2.0 * var * rng.standard_gamma(k)), 0
        g = rng.standard_gamma(0.5 * delta + k)
        xn = math.sqrt(2.0 * var * g)
        p = _kill_probability(x * xn / var, table, u_lo, du)
        if p > 0.0 and rng.random() < p:
            return 0.5, 2
        return xn, 0
    xn = x - drift_dt * x / (reg2 + x * x) + sigma * rng.standard_normal()
    if xn <= level:
        return (x - level) / (x - xn), 1
    gap = 2.0 * (x - level) * (xn - level)
    if gap < _BRIDGE_CUTOFF * var and rng.random() < math.exp(-gap / var):
        return 0.5, 2
    return xn, 0


@_jit
def _excursion_block(rng, n_attempts, D, U0, b, level, xreg, dt, n_lo, n_hi,
                     exact, delta, table, u_lo, du, split_dim, split_height, areas, taus):
    """Run ``n_attempts`` launches from ``b``; a path ends at its first crossing of ``level``.

    With ``split_dim > 0`` each attempt starts with the path conditioned to climb
    ``split_height`` above ``level``: an exact Bessel process of that dimension in
    ``x - level``. Writes accepted (area above ``level``, duration) pairs and
    returns their count.
    """
    var = 2.0 * D * dt
    sigma = math.sqrt(var)
    drift_dt = D * U0 * dt
    reg2 = xreg * xreg
    accepted = 0
    for _ in range(n_attempts):
        if split_dim > 0.0:
            y = b - level
            area = 0.0
            n = 0
            while y < split_height and n < n_hi:
                k = rng.poisson(y * y / (2.0 * var))
                yn = math.sqrt(2.0 * var * rng.standard_gamma(0.5 * split_dim + k))
                area += 0.5 * dt * (y + yn)
                y = yn
                n += 1
            x = y + level
        elif level < b:
            x = b
            area = 0.0
            n = 0
        else:
            u = rng.random()
            x = b + sigma * math.sqrt(-2.0 * math.log1p(-u))
            area = 0.5 * dt * (x - b)
            n = 1
        tau = -1.0
        while n < n_hi:
            xn, status = _advance(rng, x, drift_dt, level, reg2, var, sigma, exact, delta, table,
                                  u_lo, du)
            if status != 0:
                # xn carries the fraction of the step survived
                area += 0.5 * xn * dt * (x - level)
                tau = (n + xn) * dt
                break
            area += 0.5 * dt * ((x - level) + (xn - level))
            x = xn
            n += 1
            if (n & 63) == 0:
                # drop paths that cannot come back in time: reaching level means first
                # falling to x/2, with drift help at most 2 D U0 r / x on the way
                r = (n_hi - n) * dt
                need = 0.5 * x - level - max(U0, 0.0) * 2.0 * D * r / x
                if need > _PRUNE_SIGMAS * math.sqrt(2.0 * D * r):
                    break
        if tau >= n_lo * dt and tau > 0.0:
            areas[accepted] = area
            taus[accepted] = tau
            accepted += 1
    return accepted


@_jit
def _propagator_block(rng, n_paths, D, U0, x0, xreg, dt, n_steps, exact, delta, table, u_lo,
                      du, ends):
    """Endpoints at ``n_steps * dt`` of paths from ``x0`` absorbed at the origin; survivors only."""
    var = 2.0 * D * dt
    sigma = math.sqrt(var)
    drift_dt = D * U0 * dt
    reg2 = xreg * xreg
    kept = 0
    for _ in range(n_paths):
        x = x0
        alive = True
        for _ in range(n_steps):
            xn, status = _advance(rng, x, drift_dt, 0.0, reg2, var, sigma, exact, delta, table,
                                  u_lo, du)
            if status != 0:
                alive = False
                break
            x = xn
        if alive:
            ends[kept] = x
            kept += 1
    return kept


def _kill_table(alpha: float):
    """``1 - I_alpha(z) / I_{-alpha}(z)`` on a log grid: the chance that a reflecting
    Bessel bridge between ``x`` and ``y`` touches 0, with ``z = x y / (2 D dt)``."""
    u = np.linspace(math.log(_KILL_Z_MIN), math.log(_KILL_Z_MAX), _KILL_GRID)
    z = np.exp(u)
    c = 2.0 / math.pi * math.sin(math.pi * alpha)
    k_part = c * special.kve(alpha, z) * np.exp(-2.0 * z)
    table = k_part / (special.ive(alpha, z) + k_part)
    return table, float(u[0]), float(u[1] - u[0])


def _exact_args(params: ExcursionParams, level: float):
    """Kernel arguments for the exact near-origin step (only for -1 < U0 <= 1 with kill at 0)."""
    U0 = params.U0
    if level == 0.0 and -1.0 < U0 < 1.0:
        table, u_lo, du = _kill_table(params.alpha)
        return True, 1.0 - U0, table, u_lo, du
    if level == 0.0 and U0 == 1.0:
        return True, 0.0, np.zeros(2), 0.0, 1.0
    return False, 1.0, np.zeros(2), 0.0, 1.0


def _split_args(config: McConfig):
    """Dimension and height of the conditioned climb, or ``(0, 0)`` for plain rejection.

    Killed at the origin, the path conditioned to reach ``H`` before 0 is a
    Bessel process of dimension ``3 + U0``. For ``U0 = 0`` with the threshold,
    ``x - b`` conditioned likewise is a Bessel process of dimension 3. Any
    excursion lasting ``T/2`` climbs ``H = 0.2 sqrt(D T)`` except with
    probability of order ``exp(-pi^2 / 0.08)``.
    """
    p = config.params
    H = SPLIT_HEIGHT * math.sqrt(p.D * p.T)
    if config.kill_level == 0.0 and p.U0 > -1:
        return 3.0 + p.U0, H
    if config.kill_level > 0.0 and p.U0 == 0.0:
        return 3.0, H
    return 0.0, 0.0


def _block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block, keyed by ``(seed, block)``."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, block])
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, dtype=np.uint64)))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    """Simulation settings.

    ``return_window`` is the relative width of the accepted duration range
    ``[T(1 - window), T]``. ``x_start`` doubles as launch height and return
    threshold; ``x0_reg`` regularizes the drift as ``-D U0 x / (x0_reg^2 + x^2)``.
    """

    params: ExcursionParams
    n_target: int
    seed: int
    dt: float
    x_start: float
    return_window: float
    x0_reg: float
    return_level: str = "auto"

    def __post_init__(self):
        p = self.params
        if p.mode is BoundaryMode.CONTINUED:
            raise DomainError("the continued branch is not the law of a process; no sampler")
        if self.n_target < 1:
            raise DomainError("n_target must be positive")
        if not 0 < self.dt <= 1e-2 * p.T:
            raise DomainError("dt must be positive and at most T/100")
        if not 0 < self.x_start <= 0.1 * math.sqrt(p.D * p.T):
            raise DomainError("x_start must lie in (0, 0.1 sqrt(D T)]")
        if not 0 < self.return_window <= 0.5:
            raise DomainError("return_window must lie in (0, 0.5]")
        if not 0 < self.x0_reg <= self.x_start:
            raise DomainError("x0_reg must lie in (0, x_start]")
        if self.return_level not in ("auto", "threshold", "origin"):
            raise DomainError("return_level must be 'auto', 'threshold' or 'origin'")
        if self.return_level == "origin" and p.U0 <= -1:
            raise DomainError("the origin is not reached for U0 <= -1; use the threshold")

    @property
    def kill_level(self) -> float:
        """Level whose first crossing ends a path."""
        mode = self.return_level
        if mode == "auto":
            # the threshold proxy is exact when |alpha| = 1/2 and the only choice for U0 <= -1
            U0 = self.params.U0
            mode = "threshold" if (U0 <= -1 or self.params.a == 0.5) else "origin"
        return 0.0 if mode == "origin" else self.x_start

    @classmethod
    def default(cls, params: ExcursionParams, n_target: int, seed: int, eps: float = 0.02,
                dt_fraction: float = 4e-4, window: float = 0.5, reg_fraction: float = 0.25,
                return_level: str = "auto"):
        x_start = eps * math.sqrt(params.D * params.T)
        return cls(params, n_target, seed, dt_fraction * params.T, x_start, window,
                   reg_fraction * x_start, return_level)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = self.params.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> McConfig:
        data = dict(data)
        p = data["params"]
        data["params"] = ExcursionParams(p["U0"], p["D"], p["T"], BoundaryMode(p["mode"]))
        return cls(**data)


@dataclass(frozen=True)
class McEnsemble:
    """Accepted excursions sorted by area: area above threshold and duration (physical units)."""

    areas: np.ndarray
    durations: np.ndarray
    acceptance_rate: float
    seed: int
    config: McConfig | None = None
    attempts: int = 0

    @property
    def scaled_areas(self) -> np.ndarray:
        D = self.config.params.D if self.config is not None else 0.5
        return self.areas / (math.sqrt(D) * self.durations ** 1.5)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["area", "duration"])
        for a, t in zip(self.areas, self.durations):
            writer.writerow([repr(float(a)), repr(float(t))])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"config": self.config.to_dict() if self.config else None,
                "acceptance_rate": self.acceptance_rate, "attempts": self.attempts,
                "seed": self.seed, "n": int(self.areas.size)}

    @classmethod
    def from_files(cls, csv_text: str, sidecar: dict) -> McEnsemble:
        rows = list(csv.DictReader(line for line in csv_text.splitlines() if not line.startswith("#")))
        cfg = McConfig.from_dict(sidecar["config"]) if sidecar.get("config") else None
        return cls(np.array([float(r["area"]) for r in rows]),
                   np.array([float(r["duration"]) for r in rows]),
                   sidecar["acceptance_rate"], sidecar["seed"], cfg, sidecar.get("attempts", 0))


def sample_excursions(config: McConfig, threads: int = 1) -> McEnsemble:
    """Exactly ``config.n_target`` accepted excursions; deterministic in ``config.seed``.

    Attempts are grouped into fixed blocks with independent streams and
    merged in block order, so the result does not depend on ``threads``.
    """
    p = config.params
    n_hi = int(round(p.T / config.dt))
    n_lo = p.T * (1.0 - config.return_window) / config.dt
    level = config.kill_level
    split_dim, split_height = _split_args(config)
    args = (p.D, p.U0, config.x_start, level, config.x0_reg, config.dt, n_lo, n_hi,
            *_exact_args(p, level), split_dim, split_height)

    def run_block(block):
        rng = _block_rng(config.seed, block)
        areas = np.empty(BLOCK_ATTEMPTS)
        taus = np.empty(BLOCK_ATTEMPTS)
        k = _excursion_block(rng, BLOCK_ATTEMPTS, *args, areas, taus)
        return areas[:k], taus[:k]

    collected_a, collected_t = [], []
    total = 0
    block = 0
    attempts = 0
    workers = max(1, int(threads))
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while total < config.n_target:
            ids = range(block, block + workers)
            results = list(pool.map(run_block, ids)) if pool else [run_block(block)]
            for a, t in results:
                collected_a.append(a)
                collected_t.append(t)
                total += a.size
                attempts += BLOCK_ATTEMPTS
                block += 1
                if total >= config.n_target:
                    break
            if attempts >= PROBE_ATTEMPTS and total / attempts < MIN_ACCEPTANCE:
                raise AcceptanceStarvationError(
                    f"acceptance rate {total / attempts:.2e} below {MIN_ACCEPTANCE:g} "
                    f"after {attempts} attempts")
    finally:
        if pool:
            pool.shutdown()
    areas = np.concatenate(collected_a)[:config.n_target]
    taus = np.concatenate(collected_t)[:config.n_target]
    order = np.lexsort((taus, areas))
    return McEnsemble(areas[order], taus[order], total / attempts, config.seed, config, attempts)


def sample_propagator(params: ExcursionParams, x0: float, T: float, n_paths: int, seed: int,
                      dt: float = 1e-4, x0_reg: float = 1e-3) -> tuple[np.ndarray, int]:
    """Surviving endpoints of ``n_paths`` paths from ``x0`` absorbed at 0 after time ``T``."""
    n_steps = int(round(T / dt))
    rng = _block_rng(seed, 0)
    ends = np.empty(n_paths)
    k = _propagator_block(rng, n_paths, params.D, params.U0, x0, x0_reg, T / n_steps, n_steps,
                          *_exact_args(params, 0.0), ends)
    return np.sort(ends[:k]), n_paths


# ---------------------------------------------------------------------------
# Comparison with tabulated densities

def table_cdf(table: DistributionTable):
    """Piecewise-linear CDF from a table, renormalized to reach 1 at the last grid point."""
    cdf = table.cdf()
    total = cdf[-1]
    x = table.a_hat_grid

    def F(values):
        return np.interp(values, x, cdf / total, left=0.0, right=1.0)

    return F, total


def mc_vs_analytic(ensemble: McEnsemble, table: DistributionTable,
                   reference_moments: tuple[float, float] | None = None,
                   n_bins: int = 60) -> dict:
    """KS distance, moment z-scores and histogram overlay for an ensemble against a table.

    ``reference_moments`` gives ``(M1, M2)`` in scaled units; by default they are
    integrated from the table. Raises :class:`CoverageError` when the table's
    mass is off by more than 1e-3 or more than 0.1% of samples lie off the grid.
    """
    from .moments import moment_quadrature

    x = ensemble.scaled_areas
    n = x.size
    F, total = table_cdf(table)
    lo, hi = table.a_hat_grid[0], table.a_hat_grid[-1]
    outside = np.count_nonzero((x < lo) | (x > hi)) / n
    if abs(total - 1) > 1e-3 or outside > 1e-3:
        raise CoverageError(f"table mass {total:.5f}, {outside:.2%} of samples off the grid")
    ks = stats.kstest(x, F)
    crit = float(stats.kstwo.ppf(0.99, n))
    if reference_moments is None:
        reference_moments = (moment_quadrature(table, 1), moment_quadrature(table, 2))
    m1_ref, m2_ref = reference_moments
    mean = float(np.mean(x))
    mean_sq = float(np.mean(x * x))
    z1 = (mean - m1_ref) / (np.std(x, ddof=1) / math.sqrt(n))
    z2 = (mean_sq - m2_ref) / (np.std(x * x, ddof=1) / math.sqrt(n))
    edges = np.linspace(lo, min(hi, float(np.quantile(x, 0.9995)) * 1.05), n_bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    width = np.diff(edges)
    expected = np.diff(F(edges))
    overlay = [
        {"a_hat": float(c), "mc_density": float(k / (n * w)),
         "mc_stderr": float(math.sqrt(k) / (n * w)), "table_density": float(e / w)}
        for c, k, w, e in zip(centers, counts, width, expected)
    ]
    return {
        "n": int(n),
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ks_critical_1pct": crit,
        "ks_pass": bool(ks.statistic < crit),
        "mean": mean, "m1_reference": float(m1_ref), "z1": float(z1),
        "mean_square": mean_sq, "m2_reference": float(m2_ref), "z2": float(z2),
        "acceptance_rate": ensemble.acceptance_rate,
        "overlay": overlay,
    }


def overlay_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["a_hat", "mc_density", "mc_stderr", "table_density"])
    for row in report["overlay"]:
        writer.writerow([repr(row["a_hat"]), repr(row["mc_density"]), repr(row["mc_stderr"]),
                         repr(row["table_density"])])
    return buf.getvalue()


def two_sample_ks(a: McEnsemble, b: McEnsemble) -> dict:
    """Two-sample KS test on scaled areas."""
    res = stats.ks_2samp(a.scaled_areas, b.scaled_areas)
    return {"statistic": float(res.statistic), "pvalue": float(res.pvalue),
            "pass_1pct": bool(res.pvalue > 0.01)}
