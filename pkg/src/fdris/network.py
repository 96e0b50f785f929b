"""Optimization variables and rate evaluation for the full-duplex network.

The surface phases enter every link as ``direct + G_rx diag(phi) G_tx``;
:func:`effective_channels` folds them in once so the rate and covariance
code below never touches the raw surface matrices again.

Rates are Shannon spectral efficiencies in bit/s/Hz, base-2 logs.  All
covariance builders symmetrize their output, so downstream eigen and
determinant code can rely on Hermitian inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet

LN2 = float(np.log(2.0))


def hermitize(a: np.ndarray) -> np.ndarray:
    """Average away the skew part left by floating-point accumulation."""
    return 0.5 * (a + a.conj().swapaxes(-1, -2))


@dataclass
class PhaseState:
    """Surface configuration as a real phase vector theta in [0, 2pi)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.mod(np.asarray(self.theta, dtype=float).ravel(),
                       2.0 * np.pi)
        # np.mod of a tiny negative rounds up to the modulus itself
        theta[theta >= 2.0 * np.pi] = 0.0
        self.theta = theta

    @property
    def phi(self) -> np.ndarray:
        """Unit-modulus reflection coefficients exp(j theta)."""
        return np.exp(1j * self.theta)

    @property
    def num_elements(self) -> int:
        return self.theta.size

    @classmethod
    def zeros(cls, m: int) -> "PhaseState":
        return cls(np.zeros(m))

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "PhaseState":
        return cls(rng.uniform(0.0, 2.0 * np.pi, size=m))


@dataclass
class PrecoderSet:
    """Transmit precoders, one matrix per user.

    f_dl[l, k] is the (Mbt, bd) precoder the BS of cell l applies for its
    downlink user k; f_ul[l, k] the (Mut, bu) precoder uplink user k of
    cell l applies itself.
    """

    f_dl: np.ndarray
    f_ul: np.ndarray

    def bs_power(self, l: int) -> float:
        return float(np.sum(np.abs(self.f_dl[l]) ** 2))

    def ue_power(self, l: int, k: int) -> float:
        return float(np.sum(np.abs(self.f_ul[l, k]) ** 2))

    def check_budgets(self, power_bs: float, power_ue: float,
                      rel_tol: float = 1e-6) -> None:
        """Raise if any node exceeds its budget beyond rel_tol."""
        for l in range(self.f_dl.shape[0]):
            p = self.bs_power(l)
            if p > power_bs * (1.0 + rel_tol):
                raise ValueError(f"BS {l} power {p} exceeds budget {power_bs}")
        for l in range(self.f_ul.shape[0]):
            for k in range(self.f_ul.shape[1]):
                p = self.ue_power(l, k)
                if p > power_ue * (1.0 + rel_tol):
                    raise ValueError(
                        f"UL user ({l},{k}) power {p} exceeds budget {power_ue}")


@dataclass
class RateBreakdown:
    """Per-user spectral efficiencies; ul is (L, Ku), dl is (L, Kd)."""

    ul: np.ndarray
    dl: np.ndarray

    @property
    def ul_total(self) -> float:
        return float(np.sum(self.ul))

    @property
    def dl_total(self) -> float:
        return float(np.sum(self.dl))

    @property
    def sum_rate(self) -> float:
        return self.ul_total + self.dl_total


def effective_channel(direct: np.ndarray, g_rx: np.ndarray,
                      phase: PhaseState, g_tx: np.ndarray) -> np.ndarray:
    """direct + G_rx diag(phi) G_tx for one link."""
    m = phase.num_elements
    if g_rx.shape[1] != m or g_tx.shape[0] != m:
        raise ValueError("surface matrices do not match the phase vector length")
    if direct.shape != (g_rx.shape[0], g_tx.shape[1]):
        raise ValueError("direct link shape does not match the surface hops")
    return direct + (g_rx * phase.phi) @ g_tx


@dataclass
class EffectiveChannels:
    """All links with the surface folded in; same index layout as ChannelSet."""

    db: np.ndarray
    bb: np.ndarray
    bu: np.ndarray
    du: np.ndarray


def effective_channels(ch: ChannelSet, phase: PhaseState) -> EffectiveChannels:
    """Fold the phase configuration into every link at once."""
    phi = phase.phi
    if phi.size != ch.ris_elements:
        raise ValueError("phase vector length does not match the channel set")
    db = ch.h_db + np.einsum("lkrm,m,jmt->lkjrt", ch.g_dr, phi, ch.g_rb)
    bb = ch.h_bb + np.einsum("lrm,m,jmt->ljrt", ch.g_br, phi, ch.g_rb)
    bu = ch.h_bu + np.einsum("lrm,m,jimt->ljirt", ch.g_br, phi, ch.g_ru)
    du = ch.h_du + np.einsum("lkrm,m,jimt->lkjirt", ch.g_dr, phi, ch.g_ru)
    return EffectiveChannels(db=db, bb=bb, bu=bu, du=du)


def _outer(f: np.ndarray) -> np.ndarray:
    return f @ f.conj().T


def _ul_covariance(eff: EffectiveChannels, prec: PrecoderSet, ch: ChannelSet,
                   l: int, k: int) -> np.ndarray:
    """Interference-plus-noise at BS l decoding its uplink user k."""
    nl, ku = ch.num_cells, ch.users_ul
    v = ch.noise_bs_watt * np.eye(ch.bs_rx, dtype=complex)
    for j in range(nl):
        for i in range(ku):
            if j == l and i == k:
                continue
            h = eff.bu[l, j, i]
            v = v + h @ _outer(prec.f_ul[j, i]) @ h.conj().T
    rho_inv = ch.sic_linear_inv()
    for j in range(nl):
        cov_tx = sum((_outer(prec.f_dl[j, i]) for i in range(ch.users_dl)),
                     np.zeros((ch.bs_tx, ch.bs_tx), dtype=complex))
        coef = rho_inv if j == l else 1.0
        h = eff.bb[l, j]
        v = v + coef * (h @ cov_tx @ h.conj().T)
    return hermitize(v)


def _dl_covariance(eff: EffectiveChannels, prec: PrecoderSet, ch: ChannelSet,
                   l: int, k: int) -> np.ndarray:
    """Interference-plus-noise at downlink user k of cell l."""
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    v = ch.noise_ue_watt * np.eye(ch.ue_rx, dtype=complex)
    for j in range(nl):
        cov_tx = sum((_outer(prec.f_dl[j, i]) for i in range(kd)
                      if not (j == l and i == k)),
                     np.zeros((ch.bs_tx, ch.bs_tx), dtype=complex))
        h = eff.db[l, k, j]
        v = v + h @ cov_tx @ h.conj().T
    for j in range(nl):
        for i in range(ku):
            h = eff.du[l, k, j, i]
            v = v + h @ _outer(prec.f_ul[j, i]) @ h.conj().T
    return hermitize(v)


def ul_interference_covariance(l: int, k: int, ch: ChannelSet,
                               prec: PrecoderSet, phase: PhaseState) -> np.ndarray:
    return _ul_covariance(effective_channels(ch, phase), prec, ch, l, k)


def dl_interference_covariance(l: int, k: int, ch: ChannelSet,
                               prec: PrecoderSet, phase: PhaseState) -> np.ndarray:
    return _dl_covariance(effective_channels(ch, phase), prec, ch, l, k)


def _stream_rate(h: np.ndarray, f: np.ndarray, v: np.ndarray) -> float:
    """log2 det(I + H F F^H H^H V^-1), computed without the explicit inverse."""
    s = h @ _outer(f) @ h.conj().T
    _, ld_v = np.linalg.slogdet(v)
    _, ld_vs = np.linalg.slogdet(hermitize(v + s))
    return max(float((ld_vs - ld_v) / LN2), 0.0)


def user_rate(l: int, k: int, direction: str, ch: ChannelSet,
              prec: PrecoderSet, phase: PhaseState) -> float:
    """Achievable spectral efficiency of one user, bit/s/Hz."""
    eff = effective_channels(ch, phase)
    if direction == "ul":
        return _stream_rate(eff.bu[l, l, k], prec.f_ul[l, k],
                            _ul_covariance(eff, prec, ch, l, k))
    if direction == "dl":
        return _stream_rate(eff.db[l, k, l], prec.f_dl[l, k],
                            _dl_covariance(eff, prec, ch, l, k))
    raise ValueError(f"direction must be 'ul' or 'dl', got {direction!r}")


def rates_from_effective(eff: EffectiveChannels, prec: PrecoderSet,
                         ch: ChannelSet) -> RateBreakdown:
    """All user rates from precomputed effective channels."""
    nl, kd, ku = ch.num_cells, ch.users_dl, ch.users_ul
    ul = np.zeros((nl, ku))
    dl = np.zeros((nl, kd))
    for l in range(nl):
        for k in range(ku):
            ul[l, k] = _stream_rate(eff.bu[l, l, k], prec.f_ul[l, k],
                                    _ul_covariance(eff, prec, ch, l, k))
        for k in range(kd):
            dl[l, k] = _stream_rate(eff.db[l, k, l], prec.f_dl[l, k],
                                    _dl_covariance(eff, prec, ch, l, k))
    return RateBreakdown(ul=ul, dl=dl)


def sum_rate(ch: ChannelSet, prec: PrecoderSet, phase: PhaseState) -> RateBreakdown:
    """Network-wide rate breakdown for one operating point."""
    return rates_from_effective(effective_channels(ch, phase), prec, ch)
