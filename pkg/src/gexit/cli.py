"""Command-line entry point: ``gexit chart|thresholds|couple|exit``."""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
import dataclasses
import json
import logging
from pathlib import Path
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .coupling import coupled_bp_threshold, coupled_de_run, coupled_rate, wave_csv, _frozen_inner
from .ebp import EbpChart, assemble_chart, chart_thresholds
from .plot import chart_svg

log = logging.getLogger("gexit")

COMPONENTS = ("outer", "inner", "cn", "vn", "detector")


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def provenance(cfg: RunConfig, extra: dict | None = None) -> dict:
    return {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "seed": cfg.numerics.seed,
        "kernel": "fast" if cfg.fast_kernel else "exact",
        "versions": {"gexit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        **(extra or {}),
    }


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _chart(cfg: RunConfig, system, out: Path, pool) -> EbpChart:
    n = cfg.numerics
    chart = assemble_chart(system, dh=n.dh, dh_fine=n.dh_fine, pool=pool)
    _write(out, "chart.csv", chart.to_csv())
    return chart


def _svg(cfg: RunConfig, system, chart: EbpChart, out: Path, rep=None) -> None:
    marks = {} if rep is None else {"MAP": rep.h_map, "UB": rep.h_ub, "BP": rep.h_bp}
    _write(out, "chart.svg", chart_svg(chart.h, chart.g, cfg.name, marks, (0.0, system.h_max)))


def cmd_chart(cfg, system, args, pool) -> dict:
    chart = _chart(cfg, system, args.out, pool)
    _svg(cfg, system, chart, args.out)
    return {"points": len(chart)}


def cmd_thresholds(cfg, system, args, pool) -> dict:
    chart = _chart(cfg, system, args.out, pool)
    rep = chart_thresholds(system, chart)
    _svg(cfg, system, chart, args.out, rep)
    res = dataclasses.asdict(rep)
    _write(args.out, "thresholds.json", _dump(res))
    print(f"{'scheme':<8}{'rate':>8}{'h_BP':>9}{'h_MAP':>9}{'h_UB':>9}{'BP dB':>9}{'MAP dB':>9}{'UB dB':>9}")
    print(f"{cfg.name:<8}{rep.rate:>8.4f}{rep.h_bp:>9.4f}{rep.h_map:>9.4f}{rep.h_ub:>9.4f}"
          f"{rep.es_n0_db_bp:>9.2f}{rep.es_n0_db_map:>9.2f}{rep.es_n0_db_ub:>9.2f}")
    return res


def cmd_couple(cfg, system, args, pool) -> dict:
    if not hasattr(system, "inner_curve"):
        raise ConfigError(f"coupling is only defined for kind 'sctc', not '{cfg.kind}'")
    cc = cfg.coupling_config(args.paper_scale)
    lo, hi = cfg.coupling.bracket or (0.0, system.h_max)
    lo = max(lo, 1e-3 * system.h_max)
    h = coupled_bp_threshold(system, cc, lo, hi)
    res = {"h_bp_coupled": h, "es_n0_db_bp_coupled": system.es_n0_db(h), "L": cc.L, "b": list(cc.b),
           "rate": system.rate, "coupled_rate": coupled_rate(system.rate, cc.m_s, cc.L)}
    _write(args.out, "coupled.json", _dump(res))
    if args.wave:
        _, state = coupled_de_run(_frozen_inner(system, h), system.outer_curve, cc, record_every=args.wave)
        _write(args.out, "wave.csv", wave_csv(state))
    print(f"{cfg.name}: coupled BP threshold h={h:.4f} ({res['es_n0_db_bp_coupled']:.2f} dB), L={cc.L}")
    return res


def _component(system, name: str, h: float | None):
    need_h = name in ("inner", "vn", "detector")
    if need_h and h is None:
        raise ConfigError(f"component '{name}' needs --h")
    if name == "outer" and hasattr(system, "outer_curve"):
        return system.outer_curve
    if name == "inner" and hasattr(system, "inner_curve"):
        return lambda x: system.inner_curve(h, x)
    if name == "cn" and hasattr(system, "cn_curve"):
        return system.cn_curve
    if name == "vn" and hasattr(system, "vn_curve") and hasattr(system, "mixture"):
        return lambda x: system.vn_curve(x, h)
    if name == "detector" and hasattr(system, "det_curve"):
        return lambda x: system.det_curve(h, x)
    raise ConfigError(f"component '{name}' is not available for this system")


def cmd_exit(cfg, system, args, pool) -> dict:
    fn = _component(system, args.component, args.h)
    xs = np.linspace(0.0, 1.0, args.points)
    ys = np.asarray(fn(xs), dtype=float)
    lines = ["I_A,I_E"] + [f"{x:.10g},{y:.10g}" for x, y in zip(xs, ys)]
    _write(args.out, "exit.csv", "\n".join(lines) + "\n")
    return {"component": args.component, "h": args.h, "points": args.points}


COMMANDS = {"chart": cmd_chart, "thresholds": cmd_thresholds, "couple": cmd_couple, "exit": cmd_exit}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gexit", description="EBP-GEXIT chart and threshold analysis.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="TOML file or preset name (S1..S8)")
        s.add_argument("--out", required=True, type=Path)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--fast-kernel", action="store_true")
        s.add_argument("--paper-scale", action="store_true", help="coupling chain L=200, 1e5 iterations")
        s.add_argument("--seed", type=int)
        s.add_argument("--cache", help="table cache directory")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "couple":
            s.add_argument("--wave", type=int, default=0, metavar="K", help="record the wave every K iterations")
        if name == "exit":
            s.add_argument("--component", required=True, choices=COMPONENTS)
            s.add_argument("--h", type=float)
            s.add_argument("--points", type=int, default=101)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.numerics.seed = args.seed
        if args.fast_kernel:
            cfg.fast_kernel = True
        if args.cache:
            cfg.cache_dir = args.cache
        pool = ThreadPoolExecutor(args.threads) if args.threads > 1 else None
        try:
            system = cfg.build(pool).prepare()
            result = COMMANDS[args.command](cfg, system, args, pool)
        finally:
            if pool is not None:
                pool.shutdown()
        extra = {"command": args.command, "paper_scale": bool(args.paper_scale), "result": result}
        _write(args.out, "provenance.json", _dump(provenance(cfg, extra)))
        return 0
    except Exception as exc:  # report every failure as machine-readable JSON
        log.debug("failure", exc_info=True)
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2 if isinstance(exc, ConfigError) else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
