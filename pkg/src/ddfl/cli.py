"""Command-line front end: ``ddfl run|sweep|presets|check``.

Exit codes: 0 ok, 2 configuration error, 3 persistency-of-excitation
violation, 4 divergence, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (ConfigError, DDFLError, IntegrationDiverged, InvalidArgument,
                     ModelEvaluationError, PEViolation)
from .numerics import check_pe
from .simloop import ExperimentConfig, IoLog, RunMetrics, SweepRow, loglog_slope, run_experiment, sweep
from .svg import line_chart

log = logging.getLogger("ddfl")

EXIT_OK, EXIT_CONFIG, EXIT_PE, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4, 5

DEFAULT_GRID = (0.04, 0.02, 0.01, 0.005, 0.0025)

PRESETS: dict[str, dict[str, Any]] = {
    "case1": {
        "kind": "run",
        "description": "coupled alpha (delta=1) and delta_beta = 0.3 sin(xi_1)",
        "config": {"delta": 1, "perturbation_gain": 0.3},
    },
    "case2": {
        "kind": "run",
        "description": "alpha depends on xi only (delta=0), no perturbation",
        "config": {"delta": 0, "perturbation_gain": 0.0},
    },
    "zero-dynamics": {
        "kind": "run",
        "description": "u = 0 and xi clamped at 0: the unforced Van der Pol orbit",
        "config": {"mode": "zero_dynamics", "xi0": [0.0, 0.0], "horizon": 40.0,
                   "substeps": 20},
    },
    "sweep-beta": {
        "kind": "sweep",
        "description": "beta estimation error vs T without perturbation",
        "config": {"delta": 1, "perturbation_gain": 0.0, "horizon": 5.0},
        "fit": "e_beta",
    },
    "sweep-beta-perturbed": {
        "kind": "sweep",
        "description": "beta estimation error vs T with delta_beta = 0.3 sin(xi_1)",
        "config": {"delta": 1, "perturbation_gain": 0.3, "horizon": 5.0},
        "fit": "e_beta",
    },
    "sweep-xi": {
        "kind": "sweep",
        "description": "sup of the extended-state estimation error vs T (delta=0)",
        "config": {"delta": 0, "perturbation_gain": 0.0, "horizon": 5.0},
        "fit": "sup_exi",
    },
    "sweep-noise": {
        "kind": "sweep",
        "description": "beta estimation error vs T with uniform output noise of 1e-3",
        "config": {"delta": 1, "perturbation_gain": 0.0, "noise": 1e-3,
                   "stop_after_beta": True},
        "fit": "e_beta",
    },
}


# -- configuration ----------------------------------------------------------

def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name]["config"])


def _load_config_file(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def resolve(args: argparse.Namespace, kind: str) -> tuple[str, ExperimentConfig, dict[str, Any]]:
    """Merge preset, config file and flags (later wins). Returns
    ``(scenario name, config, sweep options)``."""
    file_data = _load_config_file(args.config) if args.config else {}
    sweep_opts = {k: file_data.pop(k) for k in ("T_grid", "fresh_seeds") if k in file_data}

    name = args.preset or ("custom" if args.config else
                           "case1" if kind == "run" else "sweep-beta")
    if name == "custom":
        if not args.config:
            raise ConfigError("preset 'custom' needs --config FILE")
        base: dict[str, Any] = {}
    else:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        if PRESETS[name]["kind"] != kind:
            raise ConfigError(f"preset {name!r} is a {PRESETS[name]['kind']}; "
                              f"use `ddfl {PRESETS[name]['kind']}`")
        base = dict(PRESETS[name]["config"])
    base.update(file_data)
    for flag, key in (("seed", "seed"), ("T", "T"), ("horizon", "horizon"), ("noise", "noise")):
        v = getattr(args, flag, None)
        if v is not None:
            base[key] = v
    try:
        cfg = ExperimentConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    if kind == "sweep":
        grid = getattr(args, "grid", None) or sweep_opts.get("T_grid") or DEFAULT_GRID
        try:
            grid = [float(v) for v in grid]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad T grid: {grid}") from exc
        if not grid or any(not (math.isfinite(v) and v > 0) for v in grid):
            raise ConfigError(f"T grid must be non-empty and positive: {grid}")
        for T in grid:
            dataclasses.replace(cfg, T=T).validate()
        sweep_opts["T_grid"] = sorted(grid)
        sweep_opts["fresh_seeds"] = bool(getattr(args, "fresh_seeds", False)
                                         or sweep_opts.get("fresh_seeds", False))
        sweep_opts["fit"] = PRESETS.get(name, {}).get("fit", "e_beta")
    return name, cfg, sweep_opts


# -- output writing ---------------------------------------------------------

def _num(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj: Any) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def trajectory_csv(iolog: IoLog) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    ne, nr = iolog.eta.shape[1], iolog.xi.shape[1]
    w.writerow(["k", "t", "phase", "u", "y", *[f"eta{i + 1}" for i in range(ne)],
                *[f"xi{i + 1}" for i in range(nr)], *[f"xihat{i + 1}" for i in range(nr)],
                "alphahat"])
    for i in range(len(iolog)):
        w.writerow([int(iolog.k[i]), _num(iolog.t[i]), iolog.phase[i], _num(iolog.u[i]),
                    _num(iolog.y[i]), *map(_num, iolog.eta[i]), *map(_num, iolog.xi[i]),
                    *map(_num, iolog.xi_hat[i]), _num(iolog.alpha_hat[i])])
    return buf.getvalue()


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Parse a trajectory CSV back into columns (``phase`` stays a list of str)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    cols: dict[str, Any] = {}
    for key in rows[0]:
        if key == "phase":
            cols[key] = [r[key] for r in rows]
        elif key == "k":
            cols[key] = np.array([int(r[key]) for r in rows])
        else:
            cols[key] = np.array([float(r[key]) for r in rows])
    return cols


def _write_all(out_dir: Path, files: dict[str, bytes]) -> list[Path]:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        manifest = {"files": []}
        for name, data in files.items():
            p = out_dir / name
            _atomic_write(p, data)
            written.append(p)
            manifest["files"].append({"path": name, "sha256": hashlib.sha256(data).hexdigest(),
                                      "bytes": len(data)})
        mp = out_dir / "manifest.json"
        _atomic_write(mp, _json_bytes(manifest))
        written.append(mp)
        return written
    except OSError as exc:
        raise OSError(f"cannot write outputs to {exc.filename or out_dir}: {exc.strerror or exc}") from exc


def emit_outputs(iolog: IoLog, metrics: RunMetrics, out_dir, cfg: ExperimentConfig,
                 scenario: str = "custom") -> list[Path]:
    """Write trajectory, metrics, resolved config, plots and a hashed manifest."""
    out_dir = Path(out_dir)
    ne, nr = iolog.eta.shape[1], iolog.xi.shape[1]
    t = iolog.t
    xi_plot = line_chart([(f"xi{i + 1}", t, iolog.xi[:, i]) for i in range(nr)],
                         title=f"{scenario}: controllable states", xlabel="t [s]", ylabel="xi")
    norm_plot = line_chart([("||xi||", t, iolog.xi_norm)], title=f"{scenario}: convergence",
                           xlabel="t [s]", ylabel="||xi||", logy=True)
    eta_plot = line_chart([("eta", iolog.eta[:, 0], iolog.eta[:, 1] if ne > 1 else iolog.eta[:, 0])],
                          title=f"{scenario}: internal states", xlabel="eta1", ylabel="eta2")
    resolved = cfg.resolved().to_dict()
    resolved["scenario"] = scenario
    files = {
        "trajectory.csv": trajectory_csv(iolog).encode(),
        "metrics.json": _json_bytes(metrics.to_dict()),
        "config-resolved.json": _json_bytes(resolved),
        "plot-xi.svg": xi_plot.encode(),
        "plot-xi-norm.svg": norm_plot.encode(),
        "plot-eta.svg": eta_plot.encode(),
    }
    return _write_all(out_dir, files)


def sweep_table(rows: Sequence[SweepRow], fit: str) -> tuple[str, dict[str, float]]:
    Ts = [r.T for r in rows]
    slopes = {"slope_e_beta": loglog_slope(Ts, [r.e_beta for r in rows]),
              "slope_sup_exi": loglog_slope(Ts, [r.sup_exi for r in rows])}
    slope = slopes[f"slope_{fit}"]
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "e_beta", "sup_exi", "slope_fit"])
    for r in rows:
        w.writerow([_num(r.T), _num(r.e_beta), _num(r.sup_exi), _num(slope)])
    return buf.getvalue(), slopes


def emit_sweep_outputs(rows: Sequence[SweepRow], out_dir, cfg: ExperimentConfig,
                       opts: dict[str, Any], scenario: str = "custom") -> list[Path]:
    table, slopes = sweep_table(rows, opts["fit"])
    Ts = [r.T for r in rows]
    plot = line_chart([("e_beta", Ts, [r.e_beta for r in rows]),
                       ("sup e_xi", Ts, [r.sup_exi for r in rows])],
                      title=f"{scenario}: error vs sampling time", xlabel="T [s]",
                      ylabel="error", logx=True, logy=True, markers=True)
    metrics = {"fit_target": opts["fit"], **slopes, "seed": cfg.seed,
               "fresh_seeds": opts["fresh_seeds"],
               "rows": [dataclasses.asdict(r) for r in rows]}
    resolved = cfg.resolved().to_dict()
    resolved.pop("T")
    resolved.pop("substeps")
    resolved.update(scenario=scenario, T_grid=opts["T_grid"], fresh_seeds=opts["fresh_seeds"],
                    substeps_rule="ceil(T / 1e-4)" if cfg.substeps is None else cfg.substeps)
    files = {
        "sweep.csv": table.encode(),
        "metrics.json": _json_bytes(metrics),
        "config-resolved.json": _json_bytes(resolved),
        "plot-sweep.svg": plot.encode(),
    }
    return _write_all(Path(out_dir), files)


# -- commands ---------------------------------------------------------------

def cmd_run(args) -> int:
    name, cfg, _ = resolve(args, "run")
    out = Path(args.out or f"out/{name}")
    iolog, metrics = run_experiment(cfg)
    files = emit_outputs(iolog, metrics, out, cfg, scenario=name)
    for k, v in metrics.to_dict().items():
        print(f"{k:>14} = {v}")
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    name, cfg, opts = resolve(args, "sweep")
    out = Path(args.out or f"out/{name}")
    rows = sweep(cfg, opts["T_grid"], fresh_seeds=opts["fresh_seeds"], workers=args.workers)
    files = emit_sweep_outputs(rows, out, cfg, opts, scenario=name)
    print(f"{'T':>10} {'e_beta':>14} {'sup_exi':>14}")
    for r in rows:
        print(f"{r.T:>10.5g} {r.e_beta:>14.6g} {r.sup_exi:>14.6g}")
    _, slopes = sweep_table(rows, opts["fit"])
    print(f"log-log slope of {opts['fit']}: {slopes['slope_' + opts['fit']]:.4f}")
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_presets(args) -> int:
    names = [args.preset] if args.preset else sorted(PRESETS)
    for n in names:
        if n not in PRESETS:
            raise ConfigError(f"unknown preset {n!r}")
        p = PRESETS[n]
        print(f"{n:<22} [{p['kind']}] {p['description']}")
        if args.preset:
            print(json.dumps(preset_config(n).resolved().to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_check(args) -> int:
    """Persistency-of-excitation self test of the rank gate."""
    name, cfg, _ = resolve(args, "run") if (args.preset or args.config) else \
        ("case1", preset_config("case1"), {})
    rho = cfg.rho
    order = 2 * rho + 2
    rng = np.random.default_rng(cfg.seed)
    batch_rng = cfg.excitation.make_rng()
    batch = cfg.amplitude * batch_rng.standard_normal(max(cfg.n_excite, 2 * order - 1))
    cases = [
        ("zero signal", np.zeros(15), 6, False),
        ("constant signal", np.full(15, 3.0), 2, False),
        ("seeded normal, 15 samples", rng.standard_normal(15), 6, True),
        (f"{name} excitation batch", batch, order, True),
    ]
    ok = True
    for label, sig, g, expected in cases:
        got = check_pe(sig, g)
        status = "ok" if got == expected else "UNEXPECTED"
        ok &= got == expected
        print(f"{label:<32} order {g}: pe={got!s:<5} expected={expected!s:<5} {status}")
    return EXIT_OK if ok else EXIT_PE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddfl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--preset", help="built-in scenario name (see `ddfl presets`)")
        p.add_argument("--config", help="JSON file with ExperimentConfig keys")
        if out:
            p.add_argument("--out", help="output directory (default out/<preset>)")
        p.add_argument("--seed", type=int)
        p.add_argument("--T", type=float, help="sampling time in seconds")
        p.add_argument("--horizon", type=float, help="simulated time in seconds")
        p.add_argument("--noise", type=float, help="output noise amplitude")

    p = sub.add_parser("run", help="single closed-loop experiment")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="repeat an experiment over a grid of sampling times")
    common(p)
    p.add_argument("--grid", type=lambda s: [float(v) for v in s.split(",")],
                   help="comma-separated sampling times")
    p.add_argument("--fresh-seeds", action="store_true", help="use seed+i for the i-th T")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("presets", help="list built-in scenarios")
    p.add_argument("--preset", help="show the resolved config of one preset")
    p.set_defaults(func=cmd_presets)
    p = sub.add_parser("check", help="persistency-of-excitation self test")
    common(p, out=False)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PEViolation as exc:
        print(f"error: persistency of excitation violated: {exc}", file=sys.stderr)
        return EXIT_PE
    except (IntegrationDiverged, ModelEvaluationError) as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DDFLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
