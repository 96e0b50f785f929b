"""Alternating solver: filters and weights, precoders, then surface phases.

Each outer iteration runs the three blocks in order and re-evaluates the
true sum rate.  The first two blocks are exact minimizers of the weighted
MSE and the phase block never increases it, so the recorded objective
trace is non-decreasing up to floating-point slack; tests assert this.

Termination follows the relative-change rule on the sum rate with a hard
iteration cap, plus an early exit when the objective is numerically zero
(nothing left to optimize, e.g. all-zero channels).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .network import (PhaseState, PrecoderSet, RateBreakdown,
                      effective_channels, rates_from_effective)
from .phase_opt import (LineSearchConfig, build_quadratic_form, ccm_minimize,
                        sca_minimize)
from .wmmse import update_all_precoders, update_auxiliaries

PHASE_ALGORITHMS = ("ccm", "sca", "none", "random-fixed")
OBJECTIVE_FLOOR = 1e-12


@dataclass
class SolverConfig:
    """Knobs of the alternating solver and its inner blocks."""

    phase_algorithm: str = "sca"
    outer_tol: float = 1e-4
    outer_max_iter: int = 300
    phase_tol: float = 1e-5
    phase_max_iter: int = 500
    bisection_tol: float = 1e-6
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    phase_init: str = "random"  # random | zeros

    def __post_init__(self) -> None:
        if self.phase_algorithm not in PHASE_ALGORITHMS:
            raise ValueError(f"phase_algorithm must be one of {PHASE_ALGORITHMS}")
        if self.phase_init not in ("random", "zeros"):
            raise ValueError("phase_init must be 'random' or 'zeros'")
        if not self.outer_tol > 0 or not self.phase_tol > 0:
            raise ValueError("tolerances must be positive")
        if self.outer_max_iter < 1 or self.phase_max_iter < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class SolverReport:
    """Everything a run produced, JSON-serializable via to_json_dict."""

    algorithm: str
    seed: int
    termination: str  # converged | max_iters
    outer_iterations: int
    phase_iterations: int
    obj_trace: list
    block_time_ms: dict
    wall_ms: float
    rates: RateBreakdown
    precoders: PrecoderSet
    phase: PhaseState
    max_power_violation: float
    max_slackness: float
    hd_halves: tuple | None = None

    def to_json_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "termination": self.termination,
            "outer_iterations": self.outer_iterations,
            "phase_iterations": self.phase_iterations,
            "obj_trace": [float(x) for x in self.obj_trace],
            "block_time_ms": {k: float(v) for k, v in self.block_time_ms.items()},
            "wall_ms": float(self.wall_ms),
            "sum_rate_bps_hz": self.rates.sum_rate,
            "ul_rate_bps_hz": self.rates.ul_total,
            "dl_rate_bps_hz": self.rates.dl_total,
            "rates_ul": self.rates.ul.tolist(),
            "rates_dl": self.rates.dl.tolist(),
            "theta": self.phase.theta.tolist(),
            "max_power_violation": float(self.max_power_violation),
            "max_slackness": float(self.max_slackness),
        }
        if self.hd_halves is not None:
            out["hd_halves"] = [h.to_json_dict() for h in self.hd_halves]
        return out


def initialize(ch: ChannelSet, config: SolverConfig,
               seed: int) -> tuple[PrecoderSet, PhaseState]:
    """Gaussian precoders scaled to budget equality, then the phase draw.

    The draw order (downlink precoders, uplink precoders, phases) is fixed
    so equal seeds give equal starting points regardless of the algorithm.
    """
    rng = np.random.default_rng(seed)
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    bd, bu = ch.streams_dl, ch.streams_ul

    def cn(shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
            / np.sqrt(2.0)

    f_dl = cn((nl, kd, ch.bs_tx, bd))
    for l in range(nl):
        p = np.sum(np.abs(f_dl[l]) ** 2)
        if p > 0:
            f_dl[l] *= np.sqrt(ch.power_bs_watt / p)
    f_ul = cn((nl, ku, ch.ue_tx, bu))
    for l in range(nl):
        for k in range(ku):
            p = np.sum(np.abs(f_ul[l, k]) ** 2)
            if p > 0:
                f_ul[l, k] *= np.sqrt(ch.power_ue_watt / p)
    if config.phase_init == "zeros" and config.phase_algorithm != "random-fixed":
        phase = PhaseState.zeros(ch.ris_elements)
    else:
        phase = PhaseState.random(ch.ris_elements, rng)
    return PrecoderSet(f_dl=f_dl, f_ul=f_ul), phase


def solve(ch: ChannelSet, config: SolverConfig, seed: int) -> SolverReport:
    """Run the alternating optimization to convergence for one realization."""
    t_start = time.perf_counter()
    prec, phase = initialize(ch, config, seed)
    times = {"auxiliaries": 0.0, "precoders": 0.0, "phase": 0.0,
             "rate_eval": 0.0}

    def rate_now() -> RateBreakdown:
        t0 = time.perf_counter()
        r = rates_from_effective(effective_channels(ch, phase), prec, ch)
        times["rate_eval"] += (time.perf_counter() - t0) * 1e3
        return r

    rates = rate_now()
    obj = rates.sum_rate
    trace = [obj]
    termination = "max_iters"
    outer = 0
    phase_iters = 0
    max_violation = 0.0
    max_slackness = 0.0

    for t in range(1, config.outer_max_iter + 1):
        outer = t
        t0 = time.perf_counter()
        aux = update_auxiliaries(ch, prec, phase)
        times["auxiliaries"] += (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        prec, solves = update_all_precoders(ch, phase, aux,
                                            tol=config.bisection_tol)
        times["precoders"] += (time.perf_counter() - t0) * 1e3
        for l in range(ch.num_cells):
            over = (prec.bs_power(l) - ch.power_bs_watt) / ch.power_bs_watt
            max_violation = max(max_violation, over)
            for k in range(ch.users_ul):
                over = (prec.ue_power(l, k) - ch.power_ue_watt) \
                    / ch.power_ue_watt
                max_violation = max(max_violation, over)
        for ms in solves:
            max_slackness = max(max_slackness, ms.slackness())

        if config.phase_algorithm in ("ccm", "sca"):
            t0 = time.perf_counter()
            qf = build_quadratic_form(ch, prec, aux)
            if config.phase_algorithm == "ccm":
                res = ccm_minimize(qf, phase.phi, ls=config.line_search,
                                   tol=config.phase_tol,
                                   max_iter=config.phase_max_iter)
            else:
                res = sca_minimize(qf, phase.theta, ls=config.line_search,
                                   tol=config.phase_tol,
                                   max_iter=config.phase_max_iter)
            phase = PhaseState(res.theta)
            phase_iters += res.iterations
            times["phase"] += (time.perf_counter() - t0) * 1e3

        rates = rate_now()
        obj_new = rates.sum_rate
        trace.append(obj_new)
        if obj_new < OBJECTIVE_FLOOR:
            termination = "converged"
            break
        if abs(obj_new - obj) <= config.outer_tol * max(obj, OBJECTIVE_FLOOR):
            obj = obj_new
            termination = "converged"
            break
        obj = obj_new

    wall_ms = (time.perf_counter() - t_start) * 1e3
    return SolverReport(
        algorithm=config.phase_algorithm,
        seed=seed,
        termination=termination,
        outer_iterations=outer,
        phase_iterations=phase_iters,
        obj_trace=trace,
        block_time_ms=times,
        wall_ms=wall_ms,
        rates=rates,
        precoders=prec,
        phase=phase,
        max_power_violation=max(max_violation, 0.0),
        max_slackness=max_slackness,
    )
