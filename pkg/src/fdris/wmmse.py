"""Weighted-MMSE machinery: decoders, weights, and the precoder block.

The rate objective is handled through its weighted mean-square-error
surrogate: with the receive filters U and weights W at their closed-form
optima, ``log2 det W - (tr(WE) - b) / ln 2`` equals the user rate exactly,
which is what makes the alternating scheme monotone.

The precoder update has a water-filling-like closed form in the eigenbasis
of a per-transmitter quadratic matrix A; the power constraint enters
through a scalar multiplier found by bisection on the monotone function
``power_of_multiplier``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .network import (EffectiveChannels, LN2, PhaseState, PrecoderSet,
                      _dl_covariance, _ul_covariance, effective_channels,
                      hermitize)


def mse_matrix(u: np.ndarray, h: np.ndarray, f: np.ndarray,
               v: np.ndarray) -> np.ndarray:
    """Stream error covariance (U^H H F - I)(.)^H + U^H V U."""
    b = f.shape[1]
    d = u.conj().T @ h @ f - np.eye(b, dtype=complex)
    return hermitize(d @ d.conj().T + u.conj().T @ v @ u)


def mmse_decoder(h: np.ndarray, f: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Wiener receive filter (H F F^H H^H + V)^-1 H F, shape (N_rx, b)."""
    hf = h @ f
    j = hermitize(hf @ hf.conj().T + v)
    return np.linalg.solve(j, hf)


def weight_update(e: np.ndarray) -> np.ndarray:
    """W = E^-1; a singular E means a stream has collapsed."""
    try:
        w = np.linalg.inv(e)
    except np.linalg.LinAlgError as exc:
        raise ValueError("MSE matrix is singular (degenerate stream)") from exc
    return hermitize(w)


def surrogate_rate(w: np.ndarray, e: np.ndarray, b: int) -> float:
    """log2 det W - (tr(WE) - b) * log2(e); equals the rate at optimal U, W."""
    _, ld = np.linalg.slogdet(w)
    tr = float(np.real(np.trace(w @ e)))
    return float(ld / LN2 - (tr - b) / LN2)


@dataclass
class AuxiliarySet:
    """Receive filters U, weights W and error matrices E for every user.

    u_ul[l, k]: (Mbr, bu)   w_ul, e_ul: (bu, bu)
    u_dl[l, k]: (Mur, bd)   w_dl, e_dl: (bd, bd)
    """

    u_ul: np.ndarray
    u_dl: np.ndarray
    w_ul: np.ndarray
    w_dl: np.ndarray
    e_ul: np.ndarray
    e_dl: np.ndarray


def update_auxiliaries(ch: ChannelSet, prec: PrecoderSet,
                       phase: PhaseState) -> AuxiliarySet:
    """Joint closed-form update of all receive filters and weights."""
    eff = effective_channels(ch, phase)
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    bu, bd = prec.f_ul.shape[3], prec.f_dl.shape[3]
    u_ul = np.zeros((nl, ku, ch.bs_rx, bu), dtype=complex)
    u_dl = np.zeros((nl, kd, ch.ue_rx, bd), dtype=complex)
    w_ul = np.zeros((nl, ku, bu, bu), dtype=complex)
    w_dl = np.zeros((nl, kd, bd, bd), dtype=complex)
    e_ul = np.zeros((nl, ku, bu, bu), dtype=complex)
    e_dl = np.zeros((nl, kd, bd, bd), dtype=complex)
    for l in range(nl):
        for k in range(ku):
            h, f = eff.bu[l, l, k], prec.f_ul[l, k]
            v = _ul_covariance(eff, prec, ch, l, k)
            u = mmse_decoder(h, f, v)
            e = mse_matrix(u, h, f, v)
            u_ul[l, k], e_ul[l, k], w_ul[l, k] = u, e, weight_update(e)
        for k in range(kd):
            h, f = eff.db[l, k, l], prec.f_dl[l, k]
            v = _dl_covariance(eff, prec, ch, l, k)
            u = mmse_decoder(h, f, v)
            e = mse_matrix(u, h, f, v)
            u_dl[l, k], e_dl[l, k], w_dl[l, k] = u, e, weight_update(e)
    return AuxiliarySet(u_ul=u_ul, u_dl=u_dl, w_ul=w_ul, w_dl=w_dl,
                        e_ul=e_ul, e_dl=e_dl)


def weighted_mse_objective(ch: ChannelSet, phase: PhaseState,
                           aux: AuxiliarySet, prec: PrecoderSet) -> float:
    """sum_k tr(W_k E_k) at fixed filters and weights.

    The quantity both remaining blocks minimize; tests compare the
    quadratic phase model and the precoder stationarity against it.
    """
    eff = effective_channels(ch, phase)
    total = 0.0
    for l in range(ch.num_cells):
        for k in range(ch.users_ul):
            v = _ul_covariance(eff, prec, ch, l, k)
            e = mse_matrix(aux.u_ul[l, k], eff.bu[l, l, k], prec.f_ul[l, k], v)
            total += float(np.real(np.trace(aux.w_ul[l, k] @ e)))
        for k in range(ch.users_dl):
            v = _dl_covariance(eff, prec, ch, l, k)
            e = mse_matrix(aux.u_dl[l, k], eff.db[l, k, l], prec.f_dl[l, k], v)
            total += float(np.real(np.trace(aux.w_dl[l, k] @ e)))
    return total


# -- precoder block ----------------------------------------------------------


@dataclass
class MultiplierSolve:
    """Outcome of one power-constraint bisection."""

    multiplier: float
    power_watt: float
    iterations: int
    bracket: tuple
    budget: float

    def slackness(self) -> float:
        """|lambda * (power - budget)| normalized by the budget."""
        return abs(self.multiplier * (self.power_watt - self.budget)) / self.budget


def _rx_weight_outer(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return u @ w @ u.conj().T


def build_a_matrices(ch: ChannelSet, phase: PhaseState,
                     aux: AuxiliarySet) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic coefficient of the precoder subproblem per transmitter.

    Returns (a_bs, a_ul) with a_bs[l]: (Mbt, Mbt) for the BS of cell l and
    a_ul[l, k]: (Mut, Mut) for uplink user k of cell l.  The residual
    self-interference factor multiplies only the BS-to-itself term.
    """
    eff = effective_channels(ch, phase)
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    rho_inv = ch.sic_linear_inv()
    b_dl = np.zeros((nl, kd, ch.ue_rx, ch.ue_rx), dtype=complex)
    for j in range(nl):
        for i in range(kd):
            b_dl[j, i] = _rx_weight_outer(aux.u_dl[j, i], aux.w_dl[j, i])
    b_ul_bs = np.zeros((nl, ch.bs_rx, ch.bs_rx), dtype=complex)
    for j in range(nl):
        for i in range(ku):
            b_ul_bs[j] += _rx_weight_outer(aux.u_ul[j, i], aux.w_ul[j, i])

    a_bs = np.zeros((nl, ch.bs_tx, ch.bs_tx), dtype=complex)
    for l in range(nl):
        acc = np.zeros((ch.bs_tx, ch.bs_tx), dtype=complex)
        for j in range(nl):
            for i in range(kd):
                h = eff.db[j, i, l]
                acc += h.conj().T @ b_dl[j, i] @ h
            coef = rho_inv if j == l else 1.0
            h = eff.bb[j, l]
            acc += coef * (h.conj().T @ b_ul_bs[j] @ h)
        a_bs[l] = hermitize(acc)

    a_ul = np.zeros((nl, ku, ch.ue_tx, ch.ue_tx), dtype=complex)
    for l in range(nl):
        for k in range(ku):
            acc = np.zeros((ch.ue_tx, ch.ue_tx), dtype=complex)
            for j in range(nl):
                for i in range(kd):
                    h = eff.du[j, i, l, k]
                    acc += h.conj().T @ b_dl[j, i] @ h
                h = eff.bu[j, l, k]
                acc += h.conj().T @ b_ul_bs[j] @ h
            a_ul[l, k] = hermitize(acc)
    return a_bs, a_ul


def precoder_from_multiplier(a: np.ndarray, lam: float, h: np.ndarray,
                             u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(A + lam I)^-1 H^H U W for one user; raises if the system is singular."""
    n = a.shape[0]
    rhs = h.conj().T @ u @ w
    return np.linalg.solve(a + lam * np.eye(n), rhs)


def power_of_multiplier(z: np.ndarray, eigvals: np.ndarray, lam: float) -> float:
    """sum_i z_i / (eigvals_i + lam)^2, the transmit power along an A eigenbasis.

    z holds the squared right-hand-side weights per eigendirection; entries
    with z_i = 0 contribute nothing even for a zero denominator.
    """
    z = np.asarray(z, dtype=float)
    d = np.asarray(eigvals, dtype=float) + lam
    mask = z > 0.0
    if np.any(d[mask] <= 0.0):
        return float("inf")
    out = np.zeros_like(z)
    out[mask] = z[mask] / d[mask] ** 2
    return float(np.sum(out))


def bisection_solve(power_fn, budget: float, bracket=None,
                    tol: float = 1e-6, max_iter: int = 500) -> MultiplierSolve:
    """Find lambda >= 0 with power_fn(lambda) at the budget.

    power_fn must be continuous and strictly decreasing wherever it is
    finite.  Exits at lambda = 0 when the unconstrained point is feasible,
    otherwise once the power matches the budget to ``tol`` relative; the
    tolerance shrinks with the multiplier magnitude so the complementary
    slackness product |lambda * (power - budget)| meets ``tol * budget``
    too.  The iteration cap only guards against a non-conforming power_fn.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    p0 = power_fn(0.0)
    if p0 <= budget:
        return MultiplierSolve(0.0, float(p0), 0, (0.0, 0.0), budget)
    lo = 0.0
    hi = 1.0 if bracket is None else float(bracket[1])
    grow = 0
    while power_fn(hi) > budget:
        hi *= 2.0
        grow += 1
        if grow > 200:
            raise RuntimeError("failed to bracket the power budget")
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            raise RuntimeError("bisection exhausted float resolution "
                               "before meeting the power tolerance")
        p = power_fn(mid)
        if abs(p - budget) <= tol * budget / max(1.0, mid):
            return MultiplierSolve(mid, float(p), it, (lo, hi), budget)
        if p > budget:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("power bisection did not converge")


def _eig_clamped(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, q = np.linalg.eigh(hermitize(a))
    floor = -1e-9 * max(1.0, float(vals[-1]))
    if vals[0] < floor:
        raise RuntimeError(f"quadratic matrix has negative eigenvalue {vals[0]}")
    return np.clip(vals, 0.0, None), q


def _solve_transmitter(a: np.ndarray, rhs_list: list[np.ndarray],
                       budget: float,
                       tol: float) -> tuple[list[np.ndarray], MultiplierSolve]:
    """Closed-form precoders for one transmitter under its power budget.

    rhs_list holds H^H U W per served user.  Decomposing A = Q diag(vals) Q^H
    turns (A + lam I)^-1 into a per-eigendirection scaling, so the transmit
    power is an explicit rational function of the multiplier.
    """
    vals, q = _eig_clamped(a)
    bt = [q.conj().T @ rhs for rhs in rhs_list]
    z = np.zeros(vals.size)
    for b in bt:
        z += np.sum(np.abs(b) ** 2, axis=1)
    if not np.any(z > 0.0):
        zero = [np.zeros_like(rhs) for rhs in rhs_list]
        return zero, MultiplierSolve(0.0, 0.0, 0, (0.0, 0.0), budget)
    # power(lam) <= sum(z) / lam^2, so this lambda is always feasible
    hi = float(np.sqrt(np.sum(z) / budget))
    ms = bisection_solve(lambda lam: power_of_multiplier(z, vals, lam),
                         budget, bracket=(0.0, hi), tol=tol)
    d = vals + ms.multiplier
    inv = np.zeros_like(d)
    good = d > 0.0
    inv[good] = 1.0 / d[good]  # z is zero wherever d is not positive
    precs = [q @ (b * inv[:, None]) for b in bt]
    return precs, ms


def update_all_precoders(ch: ChannelSet, phase: PhaseState, aux: AuxiliarySet,
                         tol: float = 1e-6
                         ) -> tuple[PrecoderSet, list[MultiplierSolve]]:
    """Minimize the weighted MSE over every precoder at fixed U, W, phases.

    Returns the new precoders and one multiplier record per transmitter
    (cell downlinks share a multiplier, uplink users get their own).
    """
    eff = effective_channels(ch, phase)
    a_bs, a_ul = build_a_matrices(ch, phase, aux)
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    f_dl = np.zeros((nl, kd, ch.bs_tx, aux.w_dl.shape[2]), dtype=complex)
    f_ul = np.zeros((nl, ku, ch.ue_tx, aux.w_ul.shape[2]), dtype=complex)
    solves: list[MultiplierSolve] = []
    for l in range(nl):
        rhs = [eff.db[l, k, l].conj().T @ aux.u_dl[l, k] @ aux.w_dl[l, k]
               for k in range(kd)]
        if rhs:
            precs, ms = _solve_transmitter(a_bs[l], rhs, ch.power_bs_watt, tol)
            for k in range(kd):
                f_dl[l, k] = precs[k]
            solves.append(ms)
    for l in range(nl):
        for k in range(ku):
            rhs = [eff.bu[l, l, k].conj().T @ aux.u_ul[l, k] @ aux.w_ul[l, k]]
            precs, ms = _solve_transmitter(a_ul[l, k], rhs,
                                           ch.power_ue_watt, tol)
            f_ul[l, k] = precs[0]
            solves.append(ms)
    return PrecoderSet(f_dl=f_dl, f_ul=f_ul), solves
