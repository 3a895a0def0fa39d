"""Batch command-line front-end.

Subcommands: ``simulate`` (one Monte Carlo point), ``sweep`` (a (d, L, p)
grid written as CSV), ``fit`` (finite-size-scaling threshold fit of a
sweep CSV), ``hashing-bound`` (table of C_d), and ``oracle-check``
(exact-decoder and cell-marginal cross-checks against brute-force
enumeration).  Flags override values from an optional JSON config file;
progress goes to stderr, results to files or stdout.

Environment overrides: ZDTORIC_WORKERS for the worker count and
ZDTORIC_OUTDIR as base directory for relative output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .cell import brute_force_cell_marginal, build_cell_basis, cell_marginal
from .lattice import (brute_force_class_probabilities, build_lattice,
                      exact_class_probabilities, syndrome)
from .noise import iid_bitflip
from .rg import recursion_levels
from .threshold import (DecoderConfig, SweepSpec, __version__,
                        fit_points_from_rows, hashing_bound, monte_carlo,
                        read_sweep_csv, threshold_fit, write_sweep_csv)

ORACLE_TOL = 1e-12


class CLIError(ValueError):
    """Invalid command-line or config-file input."""


@dataclass
class RunConfig:
    command: str
    ds: tuple = (3,)
    Ls: tuple = (8, 16, 32)
    p_min: float = 0.10
    p_max: float = 0.16
    p_count: int = 7
    p_single: float = 0.10
    trials: int = 10_000
    seed: int = 0
    bp_rounds: int = 3
    base_size: int = 2
    workers: int = 1
    out: str = ""
    input: str = ""
    cases: int = 50
    verbose: bool = False


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError as exc:
        raise CLIError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_d_spec(text: str) -> tuple:
    """Accept '3', '2,3,4', or a range '2..6'; empty means unrestricted."""
    text = str(text)
    if not text:
        return ()
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            return tuple(range(int(lo), int(hi) + 1))
        except ValueError as exc:
            raise CLIError(f"bad dimension range {text!r}") from exc
    return _parse_int_list(text)


def _parse_p_grid(text: str) -> tuple:
    """Parse 'min:max:count' into (p_min, p_max, p_count)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise CLIError(f"expected p grid as min:max:count, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise CLIError(f"bad p grid {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zdtoric",
        description="Z_d toric code threshold estimation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None,
                       help="JSON config file; flags override its values")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("-v", "--verbose", action="store_true", default=None)

    p = sub.add_parser("simulate", help="one Monte Carlo point")
    add_common(p)
    p.add_argument("--d", default=None)
    p.add_argument("--L", default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--bp-rounds", type=int, default=None, dest="bp_rounds")
    p.add_argument("--base-size", type=int, default=None, dest="base_size")

    p = sub.add_parser("sweep", help="Monte Carlo sweep over a (d, L, p) grid")
    add_common(p)
    p.add_argument("--d", default=None)
    p.add_argument("--L", default=None)
    p.add_argument("--p", default=None, help="grid as min:max:count")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--bp-rounds", type=int, default=None, dest="bp_rounds")
    p.add_argument("--base-size", type=int, default=None, dest="base_size")

    p = sub.add_parser("fit", help="finite-size-scaling fit of a sweep CSV")
    add_common(p)
    p.add_argument("--input", default=None, help="sweep CSV path")
    p.add_argument("--d", default=None, help="restrict to these dimensions")

    p = sub.add_parser("hashing-bound", help="table of hashing-bound rates C_d")
    add_common(p)
    p.add_argument("--d", default=None, help="e.g. 2..6 or 2,3,4")

    p = sub.add_parser("oracle-check",
                       help="cross-check decoders against brute force")
    add_common(p)
    p.add_argument("--d", default=None)
    p.add_argument("--cases", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    return parser


def parse_and_validate(argv) -> RunConfig:
    """Parse argv (flags override config-file values) and validate."""
    ns = _build_parser().parse_args(argv)
    file_cfg = {}
    if getattr(ns, "config", None):
        with open(ns.config) as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise CLIError("config file must hold a JSON object")

    def pick(key, default):
        flag = getattr(ns, key, None)
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    d_defaults = {"simulate": "3", "sweep": "3", "fit": "",
                  "hashing-bound": "2..6", "oracle-check": "2,3"}
    cfg = RunConfig(command=ns.command)
    cfg.ds = _parse_d_spec(pick("d", d_defaults[ns.command]))
    cfg.Ls = _parse_int_list(pick("L", "8,16,32"))
    cfg.trials = int(pick("trials", 10_000))
    cfg.seed = int(pick("seed", 0))
    cfg.bp_rounds = int(pick("bp_rounds", 3))
    cfg.base_size = int(pick("base_size", 2))
    cfg.workers = int(pick("workers",
                           os.environ.get("ZDTORIC_WORKERS",
                                          os.cpu_count() or 1)))
    cfg.out = str(pick("out", ""))
    cfg.input = str(pick("input", ""))
    cfg.cases = int(pick("cases", 50))
    cfg.verbose = bool(pick("verbose", False))

    if ns.command == "sweep":
        cfg.p_min, cfg.p_max, cfg.p_count = _parse_p_grid(pick("p", "0.10:0.16:7"))
    elif ns.command in ("simulate", "oracle-check"):
        cfg.p_single = float(pick("p", 0.10))

    if ns.command != "fit" and not cfg.ds:
        raise CLIError("at least one qudit dimension is required")
    for d in cfg.ds:
        if d < 2:
            raise CLIError(f"qudit dimension must be >= 2, got {d}")
    if ns.command in ("simulate", "sweep"):
        if cfg.trials < 1:
            raise CLIError("trials must be >= 1")
        if cfg.bp_rounds < 0:
            raise CLIError("bp-rounds must be >= 0")
        for L in cfg.Ls:
            try:
                recursion_levels(L, cfg.base_size)
            except ValueError as exc:
                raise CLIError(str(exc)) from exc
    if ns.command == "sweep":
        if not (0.0 < cfg.p_min <= cfg.p_max < 1.0):
            raise CLIError("p grid must lie inside (0, 1)")
        if cfg.p_count < 1:
            raise CLIError("p grid count must be >= 1")
    if ns.command in ("simulate", "oracle-check"):
        if not 0.0 <= cfg.p_single <= 1.0:
            raise CLIError(f"p must lie in [0, 1], got {cfg.p_single}")
    if ns.command == "fit" and not cfg.input:
        raise CLIError("fit requires --input CSV")
    return cfg


def _out_path(path: str) -> str:
    outdir = os.environ.get("ZDTORIC_OUTDIR", "")
    if outdir and path and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _progress(cfg: RunConfig, message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _config_record(cfg: RunConfig, keys) -> dict:
    full = {
        "command": cfg.command, "d": list(cfg.ds), "L": list(cfg.Ls),
        "trials": cfg.trials, "seed": cfg.seed, "bp_rounds": cfg.bp_rounds,
        "base_size": cfg.base_size, "version": __version__,
    }
    if "p_grid" in keys:
        full["p_grid"] = [cfg.p_min, cfg.p_max, cfg.p_count]
    if "p" in keys:
        full["p"] = cfg.p_single
    return full


def _cmd_sweep(cfg: RunConfig) -> int:
    spec = SweepSpec(ds=cfg.ds, Ls=cfg.Ls, p_min=cfg.p_min, p_max=cfg.p_max,
                     p_count=cfg.p_count, trials=cfg.trials,
                     decoder=DecoderConfig(cfg.bp_rounds, cfg.base_size),
                     master_seed=cfg.seed)
    n_points = len(cfg.ds) * len(cfg.Ls) * cfg.p_count
    _progress(cfg, f"sweep: {n_points} points x {cfg.trials} trials, "
                   f"workers={cfg.workers}")
    rows = []
    point_key = 0
    for d in spec.ds:
        for L in spec.Ls:
            for p in spec.p_grid:
                res = monte_carlo(d, L, float(p), spec.trials,
                                  master_seed=spec.master_seed,
                                  config=spec.decoder, workers=cfg.workers,
                                  point_key=point_key)
                rows.append({
                    "d": d, "L": L, "p_phys": float(p),
                    "n_trials": res.n_trials, "n_fail": res.n_fail,
                    "p_dec": res.p_dec, "ci_low": res.ci_low,
                    "ci_high": res.ci_high, "bp_rounds": spec.decoder.bp_rounds,
                    "seed": spec.master_seed,
                })
                _progress(cfg, f"  d={d} L={L} p={p:.6g} "
                               f"p_dec={res.p_dec:.6g} "
                               f"[{res.ci_low:.4g},{res.ci_high:.4g}]")
                point_key += 1
    out = _out_path(cfg.out)
    if out:
        write_sweep_csv(out, rows, _config_record(cfg, ("p_grid",)))
        _progress(cfg, f"wrote {out}")
    else:
        json.dump(rows, sys.stdout, indent=1)
        print()
    return 0


def _cmd_simulate(cfg: RunConfig) -> int:
    d, L = cfg.ds[0], cfg.Ls[0]
    res = monte_carlo(d, L, cfg.p_single, cfg.trials, master_seed=cfg.seed,
                      config=DecoderConfig(cfg.bp_rounds, cfg.base_size),
                      workers=cfg.workers)
    row = {"d": d, "L": L, "p_phys": cfg.p_single, "n_trials": res.n_trials,
           "n_fail": res.n_fail, "p_dec": res.p_dec, "ci_low": res.ci_low,
           "ci_high": res.ci_high, "bp_rounds": cfg.bp_rounds,
           "seed": cfg.seed}
    out = _out_path(cfg.out)
    if out:
        write_sweep_csv(out, [row], _config_record(cfg, ("p",)))
    json.dump(row, sys.stdout, indent=1)
    print()
    return 0


def _cmd_fit(cfg: RunConfig) -> int:
    rows = read_sweep_csv(cfg.input)
    if not rows:
        raise CLIError(f"no data rows in {cfg.input}")
    wanted = cfg.ds or tuple(sorted({r["d"] for r in rows}))
    report = {}
    for d in wanted:
        points = fit_points_from_rows(rows, d)
        if not points:
            continue
        fit = threshold_fit(points)
        report[str(d)] = {
            "p_th": fit.p_th, "nu": fit.nu,
            "stderr_p_th": fit.stderr_p_th, "stderr_nu": fit.stderr_nu,
            "offset": fit.offset, "slope": fit.slope,
            "residual": fit.residual,
        }
    if not report:
        raise CLIError("no rows matched the requested dimensions")
    text = json.dumps(report, indent=1, sort_keys=True)
    out = _out_path(cfg.out)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_hashing_bound(cfg: RunConfig) -> int:
    lines = ["d,C_d"]
    for d in cfg.ds:
        lines.append(f"{d},{hashing_bound(d):.6f}")
    text = "\n".join(lines)
    out = _out_path(cfg.out)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_oracle_check(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    p = cfg.p_single
    report = {"tolerance": ORACLE_TOL, "checks": []}
    worst = 0.0
    for d in cfg.ds:
        basis = build_cell_basis(d)
        dev_cell = 0.0
        for _ in range(cfg.cases):
            a = rng.integers(0, d, size=3)
            noise_rows = rng.dirichlet(np.ones(d), size=10)
            got = cell_marginal(basis, a, noise_rows)
            ref = brute_force_cell_marginal(basis, a, noise_rows)
            dev_cell = max(dev_cell, float(np.abs(got - ref).max()))

        lattice = build_lattice(2, d)
        noise = iid_bitflip(lattice.n_edges, d, p)
        dev_base = 0.0
        for _ in range(cfg.cases):
            err = rng.integers(0, d, size=lattice.n_edges)
            s = syndrome(lattice, err)
            got = exact_class_probabilities(lattice, s, noise)
            ref = brute_force_class_probabilities(lattice, s, noise)
            dev_base = max(dev_base, float(np.abs(got - ref).max()))

        report["checks"].append({"d": d, "cases": cfg.cases,
                                 "cell_marginal_dev": dev_cell,
                                 "base_case_dev": dev_base})
        worst = max(worst, dev_cell, dev_base)
        _progress(cfg, f"  d={d}: cell dev {dev_cell:.3g}, "
                       f"base dev {dev_base:.3g}")
    report["passed"] = bool(worst <= ORACLE_TOL)
    text = json.dumps(report, indent=1)
    out = _out_path(cfg.out)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0 if report["passed"] else 1


def run(cfg: RunConfig) -> int:
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "fit": _cmd_fit,
        "hashing-bound": _cmd_hashing_bound,
        "oracle-check": _cmd_oracle_check,
    }
    return handlers[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_and_validate(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except (CLIError, ValueError, OSError) as exc:
        record = {"error": str(exc), "type": type(exc).__name__}
        print(json.dumps(record), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
