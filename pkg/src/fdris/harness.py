"""Experiment harness: benchmark schemes, parameter sweeps, CSV results.

Schemes wrap the solver with the right phase handling; the half-duplex
baselines run the same solver twice on the uplink-only and downlink-only
halves of the instance and time-share the result.  Sweeps pair random
numbers across schemes (one channel realization per cell, reused by every
scheme) so scheme differences are not noise.

The CSV layout is fixed; everything except the wall-time column is a pure
function of (config, seed).
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .channels import ChannelSet, generate_realization
from .config import ScenarioConfig
from .network import RateBreakdown
from .solver import SolverConfig, SolverReport, solve

CSV_HEADER = ("scheme,param,value,seed,sum_rate_bps_hz,ul_rate_bps_hz,"
              "dl_rate_bps_hz,outer_iters,wall_ms")


class Scheme(str, Enum):
    FD_OPT_CCM = "fd_opt_ccm"
    FD_OPT_SCA = "fd_opt_sca"
    FD_RANDOM_RIS = "fd_random_ris"
    FD_NO_RIS = "fd_no_ris"
    HD_OPT_RIS = "hd_opt_ris"
    HD_NO_RIS = "hd_no_ris"


NO_RIS_MODES = ("zero_phase", "no_reflection")

# swept name -> (config field writer, value parser)
_SWEEPABLE = {
    "ris_elements": lambda c, v: replace(c, ris_elements=int(v)),
    "sic_db": lambda c, v: replace(c, sic_db=float(v)),
    "alpha_r": lambda c, v: replace(c, pathloss_exp_ris=float(v)),
    "bs_tx_antennas": lambda c, v: replace(c, bs_tx_antennas=int(v)),
    "power_bs": lambda c, v: replace(c, power_bs_watt=float(v)),
    "y_user": lambda c, v: replace(c, user_center_y=float(v)),
    "x_ris": lambda c, v: replace(
        c, ris_position=[float(v), c.ris_position[1], c.ris_position[2]]),
    "x_user": lambda c, v: replace(c, user_center_x=float(v)),
    "direct_links_enabled": lambda c, v: replace(
        c, direct_links_enabled=bool(int(v)) if not isinstance(v, bool) else v),
}

SWEEPABLE_PARAMS = tuple(sorted(_SWEEPABLE))


def apply_param(config: ScenarioConfig, param: str, value) -> ScenarioConfig:
    """Return a copy of config with one swept parameter replaced."""
    try:
        setter = _SWEEPABLE[param]
    except KeyError:
        raise ValueError(
            f"unknown sweep parameter {param!r}; "
            f"choose from {SWEEPABLE_PARAMS}") from None
    return setter(config, value)


def _strip_users(ch: ChannelSet, keep_dl: bool, keep_ul: bool) -> ChannelSet:
    """Slice away one link direction for the half-duplex baselines."""
    kd = ch.users_dl if keep_dl else 0
    ku = ch.users_ul if keep_ul else 0
    return dataclasses.replace(
        ch,
        h_db=ch.h_db[:, :kd],
        h_du=ch.h_du[:, :kd, :, :ku],
        h_bu=ch.h_bu[:, :, :ku],
        g_dr=ch.g_dr[:, :kd],
        g_ru=ch.g_ru[:, :ku],
    )


def _zero_surface(ch: ChannelSet) -> ChannelSet:
    """Remove the surface entirely (no reflected power at all)."""
    return dataclasses.replace(
        ch,
        g_br=np.zeros_like(ch.g_br),
        g_dr=np.zeros_like(ch.g_dr),
        g_rb=np.zeros_like(ch.g_rb),
        g_ru=np.zeros_like(ch.g_ru),
    )


def _pad_to(trace: list, n: int) -> np.ndarray:
    arr = np.asarray(trace, dtype=float)
    if arr.size >= n:
        return arr[:n]
    return np.concatenate([arr, np.full(n - arr.size, arr[-1])])


def _combine_half_duplex(ul_half: SolverReport,
                         dl_half: SolverReport) -> SolverReport:
    """Time-share two single-direction runs into one report.

    Each direction is active half the time, so per-user spectral
    efficiencies are halved; the surface is reconfigured between the two
    slots, which is why the halves were optimized independently.
    """
    rates = RateBreakdown(ul=0.5 * ul_half.rates.ul, dl=0.5 * dl_half.rates.dl)
    n = max(len(ul_half.obj_trace), len(dl_half.obj_trace))
    trace = 0.5 * (_pad_to(ul_half.obj_trace, n) + _pad_to(dl_half.obj_trace, n))
    times = {k: ul_half.block_time_ms.get(k, 0.0) + dl_half.block_time_ms.get(k, 0.0)
             for k in set(ul_half.block_time_ms) | set(dl_half.block_time_ms)}
    converged = (ul_half.termination == "converged"
                 and dl_half.termination == "converged")
    return SolverReport(
        algorithm=ul_half.algorithm,
        seed=ul_half.seed,
        termination="converged" if converged else "max_iters",
        outer_iterations=max(ul_half.outer_iterations, dl_half.outer_iterations),
        phase_iterations=ul_half.phase_iterations + dl_half.phase_iterations,
        obj_trace=trace.tolist(),
        block_time_ms=times,
        wall_ms=ul_half.wall_ms + dl_half.wall_ms,
        rates=rates,
        precoders=dataclasses.replace(dl_half.precoders,
                                      f_ul=ul_half.precoders.f_ul),
        phase=dl_half.phase,
        max_power_violation=max(ul_half.max_power_violation,
                                dl_half.max_power_violation),
        max_slackness=max(ul_half.max_slackness, dl_half.max_slackness),
        hd_halves=(ul_half, dl_half),
    )


def run_scheme(scheme, ch: ChannelSet, solver_config: SolverConfig, seed: int,
               no_ris_mode: str = "zero_phase") -> SolverReport:
    """Run one benchmark scheme on one realization."""
    scheme = Scheme(scheme)
    if no_ris_mode not in NO_RIS_MODES:
        raise ValueError(f"no_ris_mode must be one of {NO_RIS_MODES}")
    base = solver_config

    if scheme == Scheme.FD_OPT_CCM:
        return solve(ch, replace(base, phase_algorithm="ccm"), seed)
    if scheme == Scheme.FD_OPT_SCA:
        return solve(ch, replace(base, phase_algorithm="sca"), seed)
    if scheme == Scheme.FD_RANDOM_RIS:
        return solve(ch, replace(base, phase_algorithm="random-fixed"), seed)
    if scheme == Scheme.FD_NO_RIS:
        cfg = replace(base, phase_algorithm="none", phase_init="zeros")
        if no_ris_mode == "no_reflection":
            return solve(_zero_surface(ch), cfg, seed)
        return solve(ch, cfg, seed)

    # half-duplex baselines: independent uplink-only and downlink-only runs
    if scheme == Scheme.HD_OPT_RIS:
        alg = base.phase_algorithm if base.phase_algorithm in ("ccm", "sca") \
            else "sca"
        cfg = replace(base, phase_algorithm=alg)
    else:
        cfg = replace(base, phase_algorithm="none", phase_init="zeros")
    ul_half = solve(_strip_users(ch, keep_dl=False, keep_ul=True), cfg, seed)
    dl_half = solve(_strip_users(ch, keep_dl=True, keep_ul=False), cfg, seed)
    return _combine_half_duplex(ul_half, dl_half)


@dataclass
class ResultRow:
    """One (scheme, parameter value, realization) cell of a sweep."""

    scheme: str
    param: str
    value: str
    seed: int
    sum_rate_bps_hz: float
    ul_rate_bps_hz: float
    dl_rate_bps_hz: float
    outer_iters: int
    wall_ms: float
    error: str | None = None

    def is_error(self) -> bool:
        return self.error is not None or math.isnan(self.sum_rate_bps_hz)


def format_value(v) -> str:
    """Canonical string for the CSV value column (bools become 0/1)."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class ResultTable:
    """Sweep output: rows plus the per-run solver traces, keyed by cell."""

    rows: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)

    def errors(self) -> list:
        return [r for r in self.rows if r.is_error()]

    def schemes(self) -> list:
        seen = []
        for r in self.rows:
            if r.scheme not in seen:
                seen.append(r.scheme)
        return seen

    def write_csv(self, path) -> None:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(",".join([
                r.scheme, r.param, r.value, str(r.seed),
                repr(float(r.sum_rate_bps_hz)),
                repr(float(r.ul_rate_bps_hz)),
                repr(float(r.dl_rate_bps_hz)),
                str(int(r.outer_iters)),
                f"{r.wall_ms:.3f}",
            ]))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}")
        rows = []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != 9:
                raise ValueError(f"malformed CSV row: {ln!r}")
            rows.append(ResultRow(
                scheme=parts[0], param=parts[1], value=parts[2],
                seed=int(parts[3]), sum_rate_bps_hz=float(parts[4]),
                ul_rate_bps_hz=float(parts[5]), dl_rate_bps_hz=float(parts[6]),
                outer_iters=int(parts[7]), wall_ms=float(parts[8])))
        return cls(rows=rows)

    def summary(self) -> dict:
        """Per (scheme, value): mean and standard error of the sum rate."""
        groups: dict = {}
        for r in self.rows:
            if r.is_error():
                continue
            groups.setdefault((r.scheme, r.value), []).append(r.sum_rate_bps_hz)
        out = {}
        for key, vals in groups.items():
            arr = np.asarray(vals)
            stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) \
                if arr.size > 1 else 0.0
            out[key] = {"mean": float(arr.mean()), "stderr": stderr,
                        "count": int(arr.size)}
        return out


@dataclass
class SweepSpec:
    """A parameter sweep: which knob, which values, how many realizations."""

    param: str
    values: list
    realizations: int
    base_config: ScenarioConfig
    base_seed: int = 0
    schemes: list = field(default_factory=lambda: [Scheme.FD_OPT_SCA])
    solver: SolverConfig = field(default_factory=SolverConfig)
    no_ris_mode: str = "zero_phase"
    jobs: int = 1
    collect_traces: bool = True

    def __post_init__(self) -> None:
        if self.param not in _SWEEPABLE:
            raise ValueError(
                f"unknown sweep parameter {self.param!r}; "
                f"choose from {SWEEPABLE_PARAMS}")
        if not self.values:
            raise ValueError("values must be non-empty")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        self.schemes = [Scheme(s) for s in self.schemes]


def _run_cell(spec: SweepSpec, value, idx: int) -> tuple[list, dict]:
    """All schemes on one (value, realization) cell; never raises."""
    seed = spec.base_seed + idx
    vstr = format_value(value)
    rows, traces = [], {}
    try:
        cfg = apply_param(spec.base_config, spec.param, value)
        ch = generate_realization(cfg, seed)
    except Exception as exc:  # config or generation failure poisons the cell
        for scheme in spec.schemes:
            rows.append(ResultRow(scheme.value, spec.param, vstr, seed,
                                  float("nan"), float("nan"), float("nan"),
                                  -1, 0.0, error=str(exc)))
        return rows, traces
    for scheme in spec.schemes:
        try:
            rep = run_scheme(scheme, ch, spec.solver, seed,
                             no_ris_mode=spec.no_ris_mode)
            rows.append(ResultRow(
                scheme.value, spec.param, vstr, seed,
                rep.rates.sum_rate, rep.rates.ul_total, rep.rates.dl_total,
                rep.outer_iterations, rep.wall_ms))
            if spec.collect_traces:
                key = f"{scheme.value}|{spec.param}={vstr}|seed={seed}"
                traces[key] = rep.to_json_dict()
        except Exception as exc:
            rows.append(ResultRow(scheme.value, spec.param, vstr, seed,
                                  float("nan"), float("nan"), float("nan"),
                                  -1, 0.0, error=str(exc)))
    return rows, traces


def run_sweep(spec: SweepSpec) -> ResultTable:
    """Run every scheme over values x realizations; errors mark their row.

    Realization i of every value uses seed base_seed + i for both the
    channel draw and the solver, so schemes and values share randomness.
    """
    cells = [(value, idx) for value in spec.values
             for idx in range(spec.realizations)]
    table = ResultTable()
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_cell, [spec] * len(cells),
                                    [c[0] for c in cells],
                                    [c[1] for c in cells]))
    else:
        results = [_run_cell(spec, value, idx) for value, idx in cells]
    for rows, traces in results:
        table.rows.extend(rows)
        table.traces.update(traces)
    return table
