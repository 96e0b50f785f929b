"""Shared builders and independent oracles for the test suite.

Oracles here are written from the definitions, loop by loop, on purpose;
they must not share code paths with the implementation they check.
"""

from __future__ import annotations

import numpy as np

from fdris.channels import ChannelSet
from fdris.network import PhaseState, PrecoderSet


def cn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / np.sqrt(2.0)


def synthetic_channels(rng: np.random.Generator, nl=2, kd=1, ku=1, mbt=3,
                       mbr=2, mut=3, mur=2, m=4, bd=1, bu=1, noise=1e-2,
                       sic_db=20.0, p_bs=1.0, p_ue=0.5,
                       scale=1.0) -> ChannelSet:
    """Random instance with O(1) scales, convenient for algebraic checks."""
    return ChannelSet(
        h_db=scale * cn(rng, nl, kd, nl, mur, mbt),
        h_bb=scale * cn(rng, nl, nl, mbr, mbt),
        h_bu=scale * cn(rng, nl, nl, ku, mbr, mut),
        h_du=scale * cn(rng, nl, kd, nl, ku, mur, mut),
        g_br=scale * cn(rng, nl, mbr, m),
        g_dr=scale * cn(rng, nl, kd, mur, m),
        g_rb=scale * cn(rng, nl, m, mbt),
        g_ru=scale * cn(rng, nl, ku, m, mut),
        noise_bs_watt=noise, noise_ue_watt=noise, sic_db=sic_db,
        power_bs_watt=p_bs, power_ue_watt=p_ue,
        streams_dl=bd, streams_ul=bu, seed=0)


def random_feasible(rng: np.random.Generator,
                    ch: ChannelSet) -> tuple[PrecoderSet, PhaseState]:
    """A budget-tight random operating point, independent of the solver."""
    f_dl = cn(rng, ch.num_cells, ch.users_dl, ch.bs_tx, ch.streams_dl)
    for l in range(ch.num_cells):
        nrm = np.sqrt(np.sum(np.abs(f_dl[l]) ** 2))
        if nrm > 0:
            f_dl[l] *= np.sqrt(ch.power_bs_watt) / nrm
    f_ul = cn(rng, ch.num_cells, ch.users_ul, ch.ue_tx, ch.streams_ul)
    for l in range(ch.num_cells):
        for k in range(ch.users_ul):
            nrm = np.linalg.norm(f_ul[l, k])
            if nrm > 0:
                f_ul[l, k] *= np.sqrt(ch.power_ue_watt) / nrm
    phase = PhaseState(rng.uniform(0.0, 2.0 * np.pi, ch.ris_elements))
    return PrecoderSet(f_dl=f_dl, f_ul=f_ul), phase


def eff_link(direct: np.ndarray, g_rx: np.ndarray, phi: np.ndarray,
             g_tx: np.ndarray) -> np.ndarray:
    """Reference effective channel using an explicit diagonal matrix."""
    return direct + g_rx @ np.diag(phi) @ g_tx


def oracle_ul_cov(ch: ChannelSet, prec: PrecoderSet, phase: PhaseState,
                  l: int, k: int) -> np.ndarray:
    """Uplink interference covariance, summed term by term."""
    phi = phase.phi
    rho_inv = 10.0 ** (-ch.sic_db / 10.0)
    v = ch.noise_bs_watt * np.eye(ch.bs_rx, dtype=complex)
    for j in range(ch.num_cells):
        for i in range(ch.users_ul):
            if (j, i) == (l, k):
                continue
            h = eff_link(ch.h_bu[l, j, i], ch.g_br[l], phi, ch.g_ru[j, i])
            f = prec.f_ul[j, i]
            v = v + h @ f @ f.conj().T @ h.conj().T
    for j in range(ch.num_cells):
        h = eff_link(ch.h_bb[l, j], ch.g_br[l], phi, ch.g_rb[j])
        coef = rho_inv if j == l else 1.0
        for i in range(ch.users_dl):
            f = prec.f_dl[j, i]
            v = v + coef * (h @ f @ f.conj().T @ h.conj().T)
    return v


def oracle_dl_cov(ch: ChannelSet, prec: PrecoderSet, phase: PhaseState,
                  l: int, k: int) -> np.ndarray:
    """Downlink interference covariance, summed term by term."""
    phi = phase.phi
    v = ch.noise_ue_watt * np.eye(ch.ue_rx, dtype=complex)
    for j in range(ch.num_cells):
        h = eff_link(ch.h_db[l, k, j], ch.g_dr[l, k], phi, ch.g_rb[j])
        for i in range(ch.users_dl):
            if (j, i) == (l, k):
                continue
            f = prec.f_dl[j, i]
            v = v + h @ f @ f.conj().T @ h.conj().T
    for j in range(ch.num_cells):
        for i in range(ch.users_ul):
            h = eff_link(ch.h_du[l, k, j, i], ch.g_dr[l, k], phi, ch.g_ru[j, i])
            f = prec.f_ul[j, i]
            v = v + h @ f @ f.conj().T @ h.conj().T
    return v


def oracle_user_rate(ch: ChannelSet, prec: PrecoderSet, phase: PhaseState,
                     l: int, k: int, direction: str) -> float:
    """log2 det(I + H F F^H H^H V^-1) with an explicit inverse."""
    phi = phase.phi
    if direction == "ul":
        h = eff_link(ch.h_bu[l, l, k], ch.g_br[l], phi, ch.g_ru[l, k])
        f = prec.f_ul[l, k]
        v = oracle_ul_cov(ch, prec, phase, l, k)
    else:
        h = eff_link(ch.h_db[l, k, l], ch.g_dr[l, k], phi, ch.g_rb[l])
        f = prec.f_dl[l, k]
        v = oracle_dl_cov(ch, prec, phase, l, k)
    s = h @ f @ f.conj().T @ h.conj().T
    mat = np.eye(v.shape[0]) + s @ np.linalg.inv(v)
    val = np.linalg.det(mat)
    assert abs(val.imag) < 1e-9 * max(1.0, abs(val.real))
    return float(np.log2(val.real))


def oracle_weighted_mse(ch: ChannelSet, prec: PrecoderSet, phase: PhaseState,
                        u_of, w_of) -> float:
    """sum_k tr(W_k E_k) from raw definitions; u_of/w_of index (l, k, dir)."""
    phi = phase.phi
    total = 0.0
    for l in range(ch.num_cells):
        for k in range(ch.users_ul):
            h = eff_link(ch.h_bu[l, l, k], ch.g_br[l], phi, ch.g_ru[l, k])
            f = prec.f_ul[l, k]
            v = oracle_ul_cov(ch, prec, phase, l, k)
            u, w = u_of(l, k, "ul"), w_of(l, k, "ul")
            d = u.conj().T @ h @ f - np.eye(f.shape[1])
            e = d @ d.conj().T + u.conj().T @ v @ u
            total += float(np.real(np.trace(w @ e)))
        for k in range(ch.users_dl):
            h = eff_link(ch.h_db[l, k, l], ch.g_dr[l, k], phi, ch.g_rb[l])
            f = prec.f_dl[l, k]
            v = oracle_dl_cov(ch, prec, phase, l, k)
            u, w = u_of(l, k, "dl"), w_of(l, k, "dl")
            d = u.conj().T @ h @ f - np.eye(f.shape[1])
            e = d @ d.conj().T + u.conj().T @ v @ u
            total += float(np.real(np.trace(w @ e)))
    return total


def monotone_nondecreasing(seq, rel_slack=1e-8) -> bool:
    seq = list(seq)
    return all(b >= a - rel_slack * max(1.0, abs(a))
               for a, b in zip(seq, seq[1:]))


def monotone_nonincreasing(seq, rel_slack=1e-12) -> bool:
    seq = list(seq)
    return all(b <= a + rel_slack * max(1.0, abs(a))
               for a, b in zip(seq, seq[1:]))
