"""Command line front end: solve one instance, sweep a parameter, validate.

Exit codes: 0 success, 1 configuration problem (bad file, unknown key,
invalid value, missing plots package), 2 solver failure, 3 validation
failure.  Everything the run used is echoed into the output JSON so a
result file is self-describing.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ScenarioConfig, default_config
from .channels import generate_realization
from .harness import (NO_RIS_MODES, ResultTable, Scheme, SweepSpec,
                      SWEEPABLE_PARAMS, run_sweep)
from .solver import PHASE_ALGORITHMS, SolverConfig, solve
from .validate import main_validate


class ConfigError(ValueError):
    """Anything wrong with the requested configuration (exit code 1)."""


def _parse_set_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings need no quoting on the command line


def _apply_override(data: dict, key: str, raw: str) -> None:
    value = _parse_set_value(raw)
    parts = key.split(".")
    target = data
    try:
        for p in parts[:-1]:
            target = target[int(p)] if isinstance(target, list) else target[p]
        last = parts[-1]
        if isinstance(target, list):
            target[int(last)] = value
        else:
            if last not in target:
                raise KeyError(last)
            target[last] = value
    except (KeyError, IndexError, TypeError):
        raise ConfigError(f"unknown config key in override: {key!r}") from None


def _load_scenario(args) -> tuple[ScenarioConfig, dict]:
    """Config file (or defaults) plus --set overrides; returns the echo dict."""
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
    else:
        data = default_config().to_dict()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        _apply_override(data, key, raw)
        overrides[key] = _parse_set_value(raw)
    try:
        cfg = ScenarioConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, overrides


def _solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(
            phase_algorithm=args.algorithm,
            outer_tol=args.outer_tol,
            outer_max_iter=args.outer_max_iter,
            phase_tol=args.phase_tol,
            phase_max_iter=args.phase_max_iter,
            phase_init=args.phase_init,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    return out


def _figures(kind: str, out: Path) -> list:
    try:
        import risplot
    except ImportError:
        raise ConfigError(
            "--figures requires the risplot package "
            "(install it from the plots/ directory)") from None
    if kind == "sweep":
        return risplot.render_sweep_figures(out / "sweep.csv", out,
                                            traces=out / "sweep_traces.json")
    return risplot.render_convergence_figure(out / "solve_report.json", out)


def _cmd_solve(args) -> int:
    cfg, overrides = _load_scenario(args)
    scfg = _solver_config(args)
    out = _out_dir(args)
    try:
        ch = generate_realization(cfg, args.seed)
        report = solve(ch, scfg, args.seed)
    except Exception as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    doc = {
        "effective_config": cfg.to_dict(),
        "overrides": overrides,
        "solver": {
            "phase_algorithm": scfg.phase_algorithm,
            "outer_tol": scfg.outer_tol,
            "outer_max_iter": scfg.outer_max_iter,
            "phase_tol": scfg.phase_tol,
            "phase_max_iter": scfg.phase_max_iter,
            "phase_init": scfg.phase_init,
        },
        "report": report.to_json_dict(),
    }
    path = out / "solve_report.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    r = report.rates
    print(f"sum rate   {r.sum_rate:.4f} bit/s/Hz "
          f"(UL {r.ul_total:.4f}, DL {r.dl_total:.4f})")
    print(f"terminated {report.termination} after "
          f"{report.outer_iterations} outer iterations "
          f"({report.phase_iterations} phase steps)")
    print(f"wall time  {report.wall_ms:.0f} ms")
    print(f"report     {path}")
    if args.figures:
        for f in _figures("solve", out):
            print(f"figure     {f}")
    return 0


def _parse_values(raw: str) -> list:
    vals = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        vals.append(_parse_set_value(tok))
    if not vals:
        raise ConfigError("--values must list at least one value")
    return vals


def _cmd_sweep(args) -> int:
    cfg, overrides = _load_scenario(args)
    scfg = _solver_config(args)
    out = _out_dir(args)
    try:
        schemes = [Scheme(s.strip()) for s in args.schemes.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        spec = SweepSpec(
            param=args.param, values=_parse_values(args.values),
            realizations=args.realizations, base_config=cfg,
            base_seed=args.seed, schemes=schemes, solver=scfg,
            no_ris_mode=args.no_ris_mode, jobs=args.jobs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = run_sweep(spec)

    csv_path = out / "sweep.csv"
    table.write_csv(csv_path)
    with open(out / "sweep_traces.json", "w") as fh:
        json.dump(table.traces, fh)
        fh.write("\n")
    with open(out / "sweep_meta.json", "w") as fh:
        json.dump({
            "effective_config": cfg.to_dict(),
            "overrides": overrides,
            "param": spec.param,
            "values": [str(v) for v in spec.values],
            "realizations": spec.realizations,
            "base_seed": spec.base_seed,
            "schemes": [s.value for s in spec.schemes],
            "no_ris_mode": spec.no_ris_mode,
        }, fh, indent=1)
        fh.write("\n")

    for row in table.errors():
        print(f"error: {row.scheme} {row.param}={row.value} seed={row.seed}: "
              f"{row.error}", file=sys.stderr)
    summary = table.summary()
    for (scheme, value), stats in sorted(summary.items()):
        print(f"{scheme:14s} {spec.param}={value:>8s}  "
              f"{stats['mean']:8.4f} +/- {stats['stderr']:.4f} bit/s/Hz  "
              f"(n={stats['count']})")
    print(f"results    {csv_path}")
    if args.figures:
        for f in _figures("sweep", out):
            print(f"figure     {f}")
    if table.rows and len(table.errors()) == len(table.rows):
        print("every sweep cell failed", file=sys.stderr)
        return 2
    return 0


def _cmd_validate(_args) -> int:
    code = main_validate(sys.stdout)
    return 0 if code == 0 else 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario JSON file (default: shipped)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field (dotted keys index lists)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=".", help="output directory")
    p.add_argument("--algorithm", default="sca", choices=PHASE_ALGORITHMS)
    p.add_argument("--phase-init", default="random", choices=("random", "zeros"))
    p.add_argument("--outer-tol", type=float, default=1e-4)
    p.add_argument("--outer-max-iter", type=int, default=300)
    p.add_argument("--phase-tol", type=float, default=1e-5)
    p.add_argument("--phase-max-iter", type=int, default=500)
    p.add_argument("--figures", action="store_true",
                   help="render figures next to the outputs (needs risplot)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdris",
        description="Precoding and surface-phase optimization for "
                    "multi-cell full-duplex MIMO networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="optimize one channel realization")
    _add_common(p_solve)

    p_sweep = sub.add_parser("sweep", help="sweep a parameter over schemes")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=SWEEPABLE_PARAMS)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated parameter values")
    p_sweep.add_argument("--realizations", type=int, default=10)
    p_sweep.add_argument("--schemes", default="fd_opt_sca",
                         help="comma-separated scheme names: "
                              + ",".join(s.value for s in Scheme))
    p_sweep.add_argument("--no-ris-mode", default="zero_phase",
                         choices=NO_RIS_MODES)
    p_sweep.add_argument("--jobs", type=int, default=1)

    sub.add_parser("validate", help="run the invariant suite on small instances")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
