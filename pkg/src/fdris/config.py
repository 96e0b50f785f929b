"""Scenario configuration: geometry, antenna counts, powers, propagation.

Every physical constant of the simulated network lives in one
:class:`ScenarioConfig`.  Everything downstream (channel draws, optimizers,
sweeps) is a pure function of a config plus a seed, so two runs with equal
configs and seeds are bit-identical.

Units: distances in meters, powers in watts, frequencies in Hz.  Fields
holding decibel quantities say so in their names.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources


def _default_bs_positions() -> list[list[float]]:
    return [[0.0, 0.0, 30.0], [700.0, 0.0, 30.0]]


@dataclass
class ScenarioConfig:
    """All parameters of one network scenario.

    ``user_center_x`` is the distance of a cell's user cluster from its own
    base station along the line toward the reflecting surface;
    ``user_center_y`` the lateral offset (uplink cluster at +y, downlink at
    -y).  Cluster centers are derived per cell, see
    :func:`fdris.channels.user_cluster_centers`.
    """

    num_cells: int = 2
    users_per_cell_dl: int = 2
    users_per_cell_ul: int = 2
    bs_tx_antennas: int = 6
    bs_rx_antennas: int = 2
    ue_tx_antennas: int = 6
    ue_rx_antennas: int = 2
    ris_elements: int = 100
    streams_dl: int = 2
    streams_ul: int = 2
    bs_positions: list = field(default_factory=_default_bs_positions)
    ris_position: list = field(default_factory=lambda: [350.0, 0.0, 15.0])
    user_center_x: float = 300.0
    user_center_y: float = 50.0
    user_region_radius: float = 20.0
    user_height_m: float = 1.5
    carrier_freq_hz: float = 2.4e9
    bandwidth_hz: float = 1.0e7
    noise_density_dbm_per_hz: float = -174.0
    power_bs_watt: float = 1.0
    power_ue_watt: float = 0.2
    sic_db: float = 90.0
    pathloss_ref_db: float = -30.0
    pathloss_exp_bs_user: float = 3.75
    pathloss_exp_user_user: float = 3.9
    pathloss_exp_bs_bs: float = 3.2
    pathloss_exp_ris: float = 2.2
    rician_factor: float = 3.0
    antenna_spacing_wavelengths: float = 0.5
    si_pathloss_db: float = 0.0
    direct_links_enabled: bool = True

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Raise ValueError on any inconsistent or non-physical field."""
        c = self
        if c.num_cells < 1:
            raise ValueError("num_cells must be >= 1")
        for name in ("users_per_cell_dl", "users_per_cell_ul"):
            if getattr(c, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("bs_tx_antennas", "bs_rx_antennas", "ue_tx_antennas",
                     "ue_rx_antennas", "ris_elements", "streams_dl",
                     "streams_ul"):
            if getattr(c, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if c.streams_dl > min(c.bs_tx_antennas, c.ue_rx_antennas):
            raise ValueError(
                "streams_dl exceeds min(bs_tx_antennas, ue_rx_antennas)")
        if c.streams_ul > min(c.ue_tx_antennas, c.bs_rx_antennas):
            raise ValueError(
                "streams_ul exceeds min(ue_tx_antennas, bs_rx_antennas)")
        if len(c.bs_positions) != c.num_cells:
            raise ValueError("bs_positions must list one [x, y, z] per cell")
        for p in c.bs_positions:
            if len(p) != 3:
                raise ValueError("each BS position must be [x, y, z]")
        if len(c.ris_position) != 3:
            raise ValueError("ris_position must be [x, y, z]")
        if not c.power_bs_watt > 0 or not c.power_ue_watt > 0:
            raise ValueError("power budgets must be positive")
        if c.sic_db < 0:
            raise ValueError("sic_db must be >= 0")
        if not c.user_region_radius > 0:
            raise ValueError("user_region_radius must be positive")
        for name in ("pathloss_exp_bs_user", "pathloss_exp_user_user",
                     "pathloss_exp_bs_bs", "pathloss_exp_ris"):
            if not getattr(c, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not c.carrier_freq_hz > 0 or not c.bandwidth_hz > 0:
            raise ValueError("carrier_freq_hz and bandwidth_hz must be positive")
        if not c.antenna_spacing_wavelengths > 0:
            raise ValueError("antenna_spacing_wavelengths must be positive")
        if c.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")

    # -- derived quantities -------------------------------------------------

    def noise_power_watt(self) -> float:
        """Thermal noise power over the full bandwidth, in watts."""
        dbm = self.noise_density_dbm_per_hz + 10.0 * math.log10(self.bandwidth_hz)
        return 10.0 ** ((dbm - 30.0) / 10.0)

    def sic_linear(self) -> float:
        """Residual self-interference attenuation 10^(sic_db/10), >= 1."""
        return 10.0 ** (self.sic_db / 10.0)

    def wavelength_m(self) -> float:
        return 299792458.0 / self.carrier_freq_hz

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_config() -> ScenarioConfig:
    """The packaged default scenario (two cells around one shared surface)."""
    text = resources.files("fdris").joinpath("defaults.json").read_text()
    return ScenarioConfig.from_dict(json.loads(text))
