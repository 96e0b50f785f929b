import dataclasses
import json

import pytest

from fdris.config import ScenarioConfig, default_config


def test_defaults_match_packaged_file():
    # the dataclass defaults and defaults.json must describe the same scenario
    assert ScenarioConfig() == default_config()


def test_default_scenario_values():
    c = default_config()
    assert c.num_cells == 2
    assert c.bs_positions == [[0.0, 0.0, 30.0], [700.0, 0.0, 30.0]]
    assert c.ris_position == [350.0, 0.0, 15.0]
    assert c.ris_elements == 100
    assert (c.bs_tx_antennas, c.bs_rx_antennas) == (6, 2)
    assert (c.ue_tx_antennas, c.ue_rx_antennas) == (6, 2)
    assert (c.streams_dl, c.streams_ul) == (2, 2)
    assert c.power_bs_watt == 1.0 and c.power_ue_watt == 0.2
    assert c.sic_db == 90.0


def test_noise_power():
    # -174 dBm/Hz over 10 MHz -> -104 dBm -> 10^(-13.4) W
    c = default_config()
    assert c.noise_power_watt() == pytest.approx(10.0 ** (-13.4), rel=1e-12)


def test_sic_linear():
    assert default_config().sic_linear() == pytest.approx(1e9)


@pytest.mark.parametrize("field,value", [
    ("num_cells", 0),
    ("streams_dl", 3),            # exceeds min(bs_tx=6, ue_rx=2)
    ("streams_ul", 0),
    ("power_bs_watt", 0.0),
    ("power_ue_watt", -1.0),
    ("sic_db", -5.0),
    ("user_region_radius", 0.0),
    ("pathloss_exp_ris", 0.0),
    ("bandwidth_hz", -1.0),
    ("rician_factor", -0.5),
])
def test_validation_rejects(field, value):
    with pytest.raises(ValueError):
        dataclasses.replace(default_config(), **{field: value})


def test_bs_positions_must_match_cells():
    with pytest.raises(ValueError):
        dataclasses.replace(default_config(), bs_positions=[[0, 0, 30]])


def test_from_dict_rejects_unknown_keys():
    d = default_config().to_dict()
    d["not_a_field"] = 1
    with pytest.raises(ValueError, match="unknown config keys"):
        ScenarioConfig.from_dict(d)


def test_json_round_trip(tmp_path):
    c = dataclasses.replace(default_config(), ris_elements=17, sic_db=110.0)
    p = tmp_path / "scenario.json"
    c.save_json(p)
    back = ScenarioConfig.load_json(p)
    assert back == c
    # and the file itself is plain JSON
    with open(p) as fh:
        assert json.load(fh)["ris_elements"] == 17
