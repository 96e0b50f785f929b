"""Channel generation: large-scale path loss plus seeded small-scale fading.

One :class:`ChannelSet` bundles a single realization of every link in the
network together with the noise levels and power budgets that complete the
optimization instance.  Generation is deterministic per (config, seed): user
positions are drawn first, then the fading matrices in a fixed array order,
so equal inputs give bit-identical outputs.

Conventions
-----------
* Path loss at distance d:  PL(d) = ref_db - 10 * exponent * log10(d / 1 m),
  applied to amplitudes as 10**(PL/20).
* Links through the reflecting surface get the per-hop loss with the
  surface exponent on each hop, so the two-hop product reproduces
  2*ref_db - 10 * exponent * log10(d1 * d2).
* Array responses are uniform linear arrays; angles are drawn fresh per
  link per realization.  Surface and base-station array links fade with a
  Rician factor, direct user links are Rayleigh.
* Matrix index order is receiver first, transmitter second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

# Reference distance of the log-distance path-loss model.
D0_M = 1.0


def path_loss_db(distance_m: float, exponent: float, ref_loss_db: float) -> float:
    """Log-distance path loss in dB (negative for lossy links).

    Raises ValueError for non-positive distances; the model is not defined
    there.
    """
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return ref_loss_db - 10.0 * exponent * np.log10(distance_m / D0_M)


def reflected_path_loss_db(d_tx_ris_m: float, d_ris_rx_m: float,
                           exponent: float, ref_loss_db: float) -> float:
    """Combined two-hop path loss through the reflecting surface, in dB."""
    if d_tx_ris_m <= 0.0 or d_ris_rx_m <= 0.0:
        raise ValueError("hop distances must be positive")
    return (path_loss_db(d_tx_ris_m, exponent, ref_loss_db)
            + path_loss_db(d_ris_rx_m, exponent, ref_loss_db))


def steering_vector(angle_rad: float, n: int,
                    spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Uniform-linear-array response, element 0 has phase exactly zero."""
    if n < 1:
        raise ValueError("array size must be >= 1")
    phase = 2.0 * np.pi * spacing_wavelengths * np.arange(n) * np.sin(angle_rad)
    return np.exp(1j * phase)


def rician_channel(kappa: float, los: np.ndarray, nlos: np.ndarray) -> np.ndarray:
    """Mix a deterministic and a scattered component with Rician factor kappa."""
    if kappa < 0:
        raise ValueError("rician factor must be >= 0")
    if los.shape != nlos.shape:
        raise ValueError(f"shape mismatch: {los.shape} vs {nlos.shape}")
    return np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * nlos


def user_cluster_centers(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell centers of the downlink and uplink user clusters, (L, 3) each.

    Clusters sit ``user_center_x`` meters from their own base station along
    the direction of the surface, downlink at -y and uplink at +y.
    """
    ris_x = config.ris_position[0]
    dl = np.zeros((config.num_cells, 3))
    ul = np.zeros((config.num_cells, 3))
    for l, (bx, by, _bz) in enumerate(config.bs_positions):
        toward = 1.0 if ris_x >= bx else -1.0
        cx = bx + config.user_center_x * toward
        dl[l] = (cx, by - config.user_center_y, config.user_height_m)
        ul[l] = (cx, by + config.user_center_y, config.user_height_m)
    return dl, ul


@dataclass
class ChannelSet:
    """One realization of every link, plus the constants of the instance.

    Shapes (receiver index first):
      h_db[l, k, j]    BS j -> DL user k of cell l          (Mur, Mbt)
      h_bb[l, j]       BS j -> BS l; l == j is the residual
                       self-interference link               (Mbr, Mbt)
      h_bu[l, j, i]    UL user i of cell j -> BS l          (Mbr, Mut)
      h_du[l, k, j, i] UL user i of cell j -> DL user k
                       of cell l                            (Mur, Mut)
      g_br[l]          surface -> BS l                      (Mbr, M)
      g_dr[l, k]       surface -> DL user k of cell l       (Mur, M)
      g_rb[j]          BS j -> surface                      (M, Mbt)
      g_ru[j, i]       UL user i of cell j -> surface       (M, Mut)
    """

    h_db: np.ndarray
    h_bb: np.ndarray
    h_bu: np.ndarray
    h_du: np.ndarray
    g_br: np.ndarray
    g_dr: np.ndarray
    g_rb: np.ndarray
    g_ru: np.ndarray
    noise_bs_watt: float
    noise_ue_watt: float
    sic_db: float
    power_bs_watt: float
    power_ue_watt: float
    streams_dl: int
    streams_ul: int
    seed: int

    # -- derived dimensions --------------------------------------------------

    @property
    def num_cells(self) -> int:
        return self.h_bb.shape[0]

    @property
    def users_dl(self) -> int:
        return self.h_db.shape[1]

    @property
    def users_ul(self) -> int:
        return self.h_bu.shape[2]

    @property
    def bs_tx(self) -> int:
        return self.h_bb.shape[3]

    @property
    def bs_rx(self) -> int:
        return self.h_bb.shape[2]

    @property
    def ue_tx(self) -> int:
        return self.h_bu.shape[4]

    @property
    def ue_rx(self) -> int:
        return self.h_db.shape[3]

    @property
    def ris_elements(self) -> int:
        return self.g_rb.shape[1]

    def sic_linear_inv(self) -> float:
        """Multiplier applied to the self-interference covariance, <= 1."""
        return 10.0 ** (-self.sic_db / 10.0)

    def validate(self) -> None:
        """Check dimension consistency and finiteness of every array."""
        l, kd, ku = self.num_cells, self.users_dl, self.users_ul
        mbt, mbr, mut, mur = self.bs_tx, self.bs_rx, self.ue_tx, self.ue_rx
        m = self.ris_elements
        expect = {
            "h_db": (l, kd, l, mur, mbt),
            "h_bb": (l, l, mbr, mbt),
            "h_bu": (l, l, ku, mbr, mut),
            "h_du": (l, kd, l, ku, mur, mut),
            "g_br": (l, mbr, m),
            "g_dr": (l, kd, mur, m),
            "g_rb": (l, m, mbt),
            "g_ru": (l, ku, m, mut),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if not (self.noise_bs_watt > 0 and self.noise_ue_watt > 0):
            raise ValueError("noise powers must be positive")
        if not (self.power_bs_watt > 0 and self.power_ue_watt > 0):
            raise ValueError("power budgets must be positive")
        if self.sic_db < 0:
            raise ValueError("sic_db must be >= 0")
        if not 1 <= self.streams_dl <= min(mbt, mur):
            raise ValueError("streams_dl out of range for the array sizes")
        if not 1 <= self.streams_ul <= min(mut, mbr):
            raise ValueError("streams_ul out of range for the array sizes")


def _disk_point(rng: np.random.Generator, center: np.ndarray,
                radius: float) -> np.ndarray:
    # sqrt on the radial draw makes the point uniform over the disk area
    r = radius * np.sqrt(rng.uniform())
    ang = 2.0 * np.pi * rng.uniform()
    return np.array([center[0] + r * np.cos(ang),
                     center[1] + r * np.sin(ang),
                     center[2]])


def _rayleigh(rng: np.random.Generator, n_rx: int, n_tx: int) -> np.ndarray:
    re = rng.standard_normal((n_rx, n_tx))
    im = rng.standard_normal((n_rx, n_tx))
    return (re + 1j * im) / np.sqrt(2.0)


def _rician(rng: np.random.Generator, kappa: float, n_rx: int, n_tx: int,
            spacing: float) -> np.ndarray:
    aoa = rng.uniform(0.0, 2.0 * np.pi)
    aod = rng.uniform(0.0, 2.0 * np.pi)
    los = np.outer(steering_vector(aoa, n_rx, spacing),
                   steering_vector(aod, n_tx, spacing).conj())
    return rician_channel(kappa, los, _rayleigh(rng, n_rx, n_tx))


def generate_realization(config: ScenarioConfig, seed: int) -> ChannelSet:
    """Draw one complete channel realization.

    Draw order is fixed: user positions first (per cell, downlink before
    uplink), then each matrix family in the order it appears in
    :class:`ChannelSet`, looping receiver-major.  Disabling direct links
    zeroes the BS-to-user and user-to-BS matrices after drawing, so the
    remaining links are identical across the two settings at equal seed.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    c = config
    nl, kd, ku = c.num_cells, c.users_per_cell_dl, c.users_per_cell_ul
    mbt, mbr = c.bs_tx_antennas, c.bs_rx_antennas
    mut, mur = c.ue_tx_antennas, c.ue_rx_antennas
    m = c.ris_elements
    sp = c.antenna_spacing_wavelengths
    kap = c.rician_factor
    ris = np.asarray(c.ris_position, dtype=float)
    bs = np.asarray(c.bs_positions, dtype=float)

    dl_centers, ul_centers = user_cluster_centers(c)
    pos_dl = np.zeros((nl, kd, 3))
    pos_ul = np.zeros((nl, ku, 3))
    for l in range(nl):
        for k in range(kd):
            pos_dl[l, k] = _disk_point(rng, dl_centers[l], c.user_region_radius)
        for i in range(ku):
            pos_ul[l, i] = _disk_point(rng, ul_centers[l], c.user_region_radius)

    def amp(pl_db: float) -> float:
        return 10.0 ** (pl_db / 20.0)

    def dist(a, b) -> float:
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    h_db = np.zeros((nl, kd, nl, mur, mbt), dtype=complex)
    for l in range(nl):
        for k in range(kd):
            for j in range(nl):
                pl = path_loss_db(dist(pos_dl[l, k], bs[j]),
                                  c.pathloss_exp_bs_user, c.pathloss_ref_db)
                h_db[l, k, j] = amp(pl) * _rayleigh(rng, mur, mbt)

    h_bb = np.zeros((nl, nl, mbr, mbt), dtype=complex)
    for l in range(nl):
        for j in range(nl):
            if l == j:
                # loopback link: si_pathloss_db is attenuation, usually 0
                a = 10.0 ** (-c.si_pathloss_db / 20.0)
            else:
                a = amp(path_loss_db(dist(bs[l], bs[j]),
                                     c.pathloss_exp_bs_bs, c.pathloss_ref_db))
            h_bb[l, j] = a * _rician(rng, kap, mbr, mbt, sp)

    h_bu = np.zeros((nl, nl, ku, mbr, mut), dtype=complex)
    for l in range(nl):
        for j in range(nl):
            for i in range(ku):
                pl = path_loss_db(dist(bs[l], pos_ul[j, i]),
                                  c.pathloss_exp_bs_user, c.pathloss_ref_db)
                h_bu[l, j, i] = amp(pl) * _rayleigh(rng, mbr, mut)

    h_du = np.zeros((nl, kd, nl, ku, mur, mut), dtype=complex)
    for l in range(nl):
        for k in range(kd):
            for j in range(nl):
                for i in range(ku):
                    pl = path_loss_db(dist(pos_dl[l, k], pos_ul[j, i]),
                                      c.pathloss_exp_user_user, c.pathloss_ref_db)
                    h_du[l, k, j, i] = amp(pl) * _rayleigh(rng, mur, mut)

    g_br = np.zeros((nl, mbr, m), dtype=complex)
    for l in range(nl):
        pl = path_loss_db(dist(bs[l], ris), c.pathloss_exp_ris, c.pathloss_ref_db)
        g_br[l] = amp(pl) * _rician(rng, kap, mbr, m, sp)

    g_dr = np.zeros((nl, kd, mur, m), dtype=complex)
    for l in range(nl):
        for k in range(kd):
            pl = path_loss_db(dist(pos_dl[l, k], ris),
                              c.pathloss_exp_ris, c.pathloss_ref_db)
            g_dr[l, k] = amp(pl) * _rician(rng, kap, mur, m, sp)

    g_rb = np.zeros((nl, m, mbt), dtype=complex)
    for j in range(nl):
        pl = path_loss_db(dist(bs[j], ris), c.pathloss_exp_ris, c.pathloss_ref_db)
        g_rb[j] = amp(pl) * _rician(rng, kap, m, mbt, sp)

    g_ru = np.zeros((nl, ku, m, mut), dtype=complex)
    for j in range(nl):
        for i in range(ku):
            pl = path_loss_db(dist(pos_ul[j, i], ris),
                              c.pathloss_exp_ris, c.pathloss_ref_db)
            g_ru[j, i] = amp(pl) * _rician(rng, kap, m, mut, sp)

    if not c.direct_links_enabled:
        h_db[:] = 0.0
        h_bu[:] = 0.0

    ch = ChannelSet(
        h_db=h_db, h_bb=h_bb, h_bu=h_bu, h_du=h_du,
        g_br=g_br, g_dr=g_dr, g_rb=g_rb, g_ru=g_ru,
        noise_bs_watt=c.noise_power_watt(),
        noise_ue_watt=c.noise_power_watt(),
        sic_db=c.sic_db,
        power_bs_watt=c.power_bs_watt,
        power_ue_watt=c.power_ue_watt,
        streams_dl=c.streams_dl,
        streams_ul=c.streams_ul,
        seed=seed,
    )
    ch.validate()
    return ch
