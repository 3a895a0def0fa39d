"""Monte Carlo threshold estimation and the qudit hashing bound.

Failure rates are estimated by sampling errors, decoding their syndromes,
and comparing the decoder's absolute winding estimate with the winding of
the sampled error.  Thresholds come from a finite-size-scaling fit of the
crossing of p_dec(p_phys) curves at different lattice sizes.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, curve_fit

from .lattice import build_lattice, syndrome, winding
from .noise import iid_bitflip, sample_error
from .rg import decode_batch

__version__ = "0.1.0"

# Memory cap for the batched decoder: at most this many (cell, term)
# entries per level-0 array.
_TERM_BUDGET = 4_000_000

CSV_COLUMNS = ("d", "L", "p_phys", "n_trials", "n_fail", "p_dec",
               "ci_low", "ci_high", "bp_rounds", "seed")


@dataclass(frozen=True)
class DecoderConfig:
    bp_rounds: int = 3
    base_size: int = 2


@dataclass(frozen=True)
class TrialResult:
    d: int
    L: int
    p_phys: float
    seed: object
    success: bool
    degenerate: bool
    levels_used: int


@dataclass(frozen=True)
class SweepSpec:
    """One Monte Carlo sweep: a (d, L, p) grid with a master seed."""

    ds: tuple
    Ls: tuple
    p_min: float
    p_max: float
    p_count: int
    trials: int = 10_000
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    master_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.p_min <= self.p_max < 1.0):
            raise ValueError("p grid must lie inside (0, 1)")
        if self.p_count < 1 or self.trials < 1:
            raise ValueError("p_count and trials must be >= 1")

    @property
    def p_grid(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.p_count)


@dataclass(frozen=True)
class PointResult:
    p_dec: float
    ci_low: float
    ci_high: float
    n_fail: int
    n_trials: int
    n_degenerate: int


class FitError(RuntimeError):
    """Finite-size-scaling fit failed to converge or is rank-deficient."""


@dataclass(frozen=True)
class FitResult:
    """Crossing fit p_dec = offset + slope * (p_phys - p_th) * L^(1/nu)."""

    p_th: float
    nu: float
    offset: float
    slope: float
    stderr_p_th: float
    stderr_nu: float
    residual: float


def _trial_seed(master_seed: int, point_key: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((master_seed, point_key, index))


def _batch_size(L: int, d: int) -> int:
    cells = (L // 2) ** 2 if L > 2 else 1
    return max(1, _TERM_BUDGET // (cells * d ** 7))


def run_trial(d: int, L: int, p_phys: float, seed,
              config: DecoderConfig = DecoderConfig()) -> TrialResult:
    """Sample one error, decode its syndrome, compare winding estimates."""
    lattice = build_lattice(L, d)
    noise = iid_bitflip(lattice.n_edges, d, p_phys)
    error = sample_error(noise, seed)
    labels, _, levels, diag = decode_batch(
        lattice, syndrome(lattice, error)[None, :], noise,
        bp_rounds=config.bp_rounds, base_size=config.base_size)
    degenerate = bool(diag["degenerate"][0])
    w1, w2 = winding(lattice, error)
    success = (not degenerate
               and int(labels[0, 0]) == w1 and int(labels[0, 1]) == w2)
    return TrialResult(d=d, L=L, p_phys=p_phys, seed=seed, success=success,
                       degenerate=degenerate, levels_used=levels)


def _run_block(args) -> tuple:
    """Decode trials [start, stop) of one sweep point; returns fail counts."""
    d, L, p_phys, master_seed, point_key, start, stop, config = args
    lattice = build_lattice(L, d)
    noise = iid_bitflip(lattice.n_edges, d, p_phys)
    n_fail = n_degen = 0
    step = _batch_size(L, d)
    for lo in range(start, stop, step):
        hi = min(stop, lo + step)
        errors = np.stack([
            sample_error(noise, _trial_seed(master_seed, point_key, i))
            for i in range(lo, hi)])
        labels, _, _, diag = decode_batch(
            lattice, syndrome(lattice, errors), noise,
            bp_rounds=config.bp_rounds, base_size=config.base_size)
        w1, w2 = winding(lattice, errors)
        ok = ((labels[:, 0] == w1) & (labels[:, 1] == w2)
              & ~diag["degenerate"])
        n_fail += int((~ok).sum())
        n_degen += int(diag["degenerate"].sum())
    return n_fail, n_degen


def wilson_interval(n_fail: int, n_trials: int, z: float = 1.959964) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    phat = n_fail / n_trials
    denom = 1.0 + z * z / n_trials
    center = (phat + z * z / (2 * n_trials)) / denom
    half = (z / denom) * math.sqrt(
        phat * (1 - phat) / n_trials + z * z / (4 * n_trials ** 2))
    return (max(0.0, center - half), min(1.0, center + half))


def monte_carlo(d: int, L: int, p_phys: float, n_trials: int,
                master_seed: int = 0, config: DecoderConfig = DecoderConfig(),
                workers: int = 1, point_key: int = 0) -> PointResult:
    """Estimate the decoding failure rate at one sweep point.

    Trials are seeded by a splittable counter from the master seed, so the
    estimate is reproducible and independent of the worker count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    workers = max(1, workers)
    if workers == 1:
        n_fail, n_degen = _run_block(
            (d, L, p_phys, master_seed, point_key, 0, n_trials, config))
    else:
        bounds = np.linspace(0, n_trials, 4 * workers + 1, dtype=int)
        tasks = [(d, L, p_phys, master_seed, point_key, int(lo), int(hi), config)
                 for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, tasks))
        n_fail = sum(p[0] for p in parts)
        n_degen = sum(p[1] for p in parts)
    lo, hi = wilson_interval(n_fail, n_trials)
    return PointResult(p_dec=n_fail / n_trials, ci_low=lo, ci_high=hi,
                       n_fail=n_fail, n_trials=n_trials, n_degenerate=n_degen)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Run every (d, L, p) point of a sweep; returns CSV-ready row dicts."""
    rows = []
    point_key = 0
    for d in spec.ds:
        for L in spec.Ls:
            for p in spec.p_grid:
                res = monte_carlo(d, L, float(p), spec.trials,
                                  master_seed=spec.master_seed,
                                  config=spec.decoder, workers=workers,
                                  point_key=point_key)
                rows.append({
                    "d": d, "L": L, "p_phys": float(p),
                    "n_trials": res.n_trials, "n_fail": res.n_fail,
                    "p_dec": res.p_dec, "ci_low": res.ci_low,
                    "ci_high": res.ci_high,
                    "bp_rounds": spec.decoder.bp_rounds,
                    "seed": spec.master_seed,
                })
                point_key += 1
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_sweep_csv(path: str, rows: list, config: dict) -> None:
    """Write sweep rows with an embedded provenance header.

    The header records the full configuration, master seed, and code
    version; identical configurations produce byte-identical files.
    """
    with open(path, "w", newline="") as fh:
        fh.write("# zdtoric sweep results\n")
        fh.write(f"# version = {__version__}\n")
        fh.write(f"# config = {json.dumps(config, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in CSV_COLUMNS])


def read_sweep_csv(path: str) -> list:
    """Read rows written by ``write_sweep_csv`` (header comments skipped)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for rec in reader:
            rows.append({
                "d": int(rec["d"]), "L": int(rec["L"]),
                "p_phys": float(rec["p_phys"]),
                "n_trials": int(rec["n_trials"]),
                "n_fail": int(rec["n_fail"]), "p_dec": float(rec["p_dec"]),
                "ci_low": float(rec["ci_low"]),
                "ci_high": float(rec["ci_high"]),
                "bp_rounds": int(rec["bp_rounds"]), "seed": int(rec["seed"]),
            })
    return rows


def fit_points_from_rows(rows: list, d: int) -> list:
    """Build (L, p_phys, p_dec, weight) fit tuples from sweep rows."""
    points = []
    for row in rows:
        if row["d"] != d:
            continue
        n = row["n_trials"]
        p_hat = row["p_dec"]
        sigma = max(math.sqrt(p_hat * (1 - p_hat) / n), 0.5 / n)
        points.append((row["L"], row["p_phys"], p_hat, 1.0 / sigma))
    return points


def threshold_fit(points) -> FitResult:
    """Weighted fit of the scaling form p_dec = A + B*(p_phys - p_th)*L^(1/nu).

    ``points`` is an iterable of (L, p_phys, p_dec, weight) with weights
    1/sigma.  The constant A absorbs the crossing-point failure rate.
    Standard errors come from the parameter covariance; nu is reported but
    is typically too noisy at small L to be trusted.
    """
    data = np.asarray([tuple(p) for p in points], dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 4 or data.shape[0] < 4:
        raise ValueError("need >= 4 points of (L, p_phys, p_dec, weight)")
    Ls, ps, ys, ws = data.T
    distinct_L = np.unique(Ls)
    if distinct_L.size < 2:
        raise ValueError("crossing fit needs >= 2 distinct L values")
    for L in distinct_L:
        if np.unique(ps[Ls == L]).size < 3:
            raise ValueError(f"need >= 3 p values for L={int(L)}")
    if np.any(ws <= 0):
        raise ValueError("weights must be positive")

    def model(x, a, b, p_th, nu):
        L, p = x
        return a + b * (p - p_th) * L ** (1.0 / nu)

    # Initial guesses: p_th near the p with the smallest spread across L,
    # slope from a linear solve at nu = 1.5.
    spread = [np.ptp(ys[np.isclose(ps, p)]) for p in np.unique(ps)]
    p_th0 = float(np.unique(ps)[int(np.argmin(spread))])
    a0 = float(np.mean(ys))
    xs0 = (ps - p_th0) * Ls ** (1.0 / 1.5)
    denom = float(np.dot(xs0, xs0))
    b0 = float(np.dot(xs0, ys - a0) / denom) if denom > 0 else 1.0

    try:
        popt, pcov = curve_fit(
            model, (Ls, ps), ys, p0=(a0, b0 if b0 != 0 else 1.0, p_th0, 1.5),
            sigma=1.0 / ws, absolute_sigma=True, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"scaling fit did not converge: {exc}") from exc
    if not np.all(np.isfinite(popt)) or not np.all(np.isfinite(pcov)):
        raise FitError("scaling fit produced a singular covariance")

    a, b, p_th, nu = popt
    stderr = np.sqrt(np.diag(pcov))
    resid = (model((Ls, ps), *popt) - ys) * ws
    return FitResult(p_th=float(p_th), nu=float(nu), offset=float(a),
                     slope=float(b), stderr_p_th=float(stderr[2]),
                     stderr_nu=float(stderr[3]),
                     residual=float(np.sqrt(np.mean(resid ** 2))))


def hashing_bound(d: int) -> float:
    """Error rate where the qudit hashing rate 1 - 2 H_d(p) vanishes.

    H_d is the d-ary entropy of the generalized bit-flip channel,
    H_d(p) = -(1-p) log_d(1-p) - p log_d(p / (d-1)), and the root is
    bracketed in (0, (d-1)/d) and solved to 1e-10.
    """
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")
    log_d = math.log(d)

    def gap(p: float) -> float:
        entropy = (-(1 - p) * math.log1p(-p) - p * math.log(p / (d - 1))) / log_d
        return 1.0 - 2.0 * entropy

    return float(brentq(gap, 1e-15, (d - 1) / d - 1e-15, xtol=1e-12))


def rescaled_hashing_curve(thresholds: dict) -> dict:
    """Hashing-bound curve rescaled to match the measured d=2 threshold.

    ``thresholds`` maps d -> fitted p_th and must contain d=2; the output
    maps each requested d to alpha * C_d with alpha = p_th(2) / C_2.
    """
    if not thresholds:
        raise ValueError("threshold map is empty")
    if 2 not in thresholds:
        raise ValueError("threshold map must contain d=2 to fix the scale")
    alpha = thresholds[2] / hashing_bound(2)
    return {d: alpha * hashing_bound(d) for d in sorted(thresholds)}
