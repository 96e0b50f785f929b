import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdris.channels import (ChannelSet, generate_realization, path_loss_db,
                            reflected_path_loss_db, rician_channel,
                            steering_vector, user_cluster_centers)
from fdris.config import default_config


# -- path loss ----------------------------------------------------------------

def test_reference_pathloss_direct_link():
    # BS at (0,0,30) to the uplink cluster center (300,50,1.5), exp 3.75
    c = default_config()
    _dl, ul = user_cluster_centers(c)
    d = float(np.linalg.norm(ul[0] - np.asarray(c.bs_positions[0])))
    pl = path_loss_db(d, c.pathloss_exp_bs_user, c.pathloss_ref_db)
    assert pl == pytest.approx(-123.19, abs=0.01)


def test_reference_pathloss_reflected_link():
    c = default_config()
    _dl, ul = user_cluster_centers(c)
    bs = np.asarray(c.bs_positions[0])
    ris = np.asarray(c.ris_position)
    d1 = float(np.linalg.norm(ris - bs))
    d2 = float(np.linalg.norm(ul[0] - ris))
    assert reflected_path_loss_db(d1, d2, 2.2, c.pathloss_ref_db) \
        == pytest.approx(-156.84, abs=0.01)
    assert reflected_path_loss_db(d1, d2, 2.8, c.pathloss_ref_db) \
        == pytest.approx(-183.25, abs=0.01)


def test_pathloss_domain_errors():
    with pytest.raises(ValueError):
        path_loss_db(0.0, 3.0, -30.0)
    with pytest.raises(ValueError):
        path_loss_db(-2.0, 3.0, -30.0)
    with pytest.raises(ValueError):
        reflected_path_loss_db(10.0, 0.0, 2.2, -30.0)


@given(d=st.floats(1.0, 1e5), mult=st.floats(1.1, 10.0),
       exp=st.floats(0.5, 6.0))
@settings(max_examples=50, deadline=None)
def test_pathloss_decreases_with_distance(d, mult, exp):
    assert path_loss_db(d * mult, exp, -30.0) < path_loss_db(d, exp, -30.0)


def test_reflected_is_sum_of_hops():
    got = reflected_path_loss_db(350.0, 70.0, 2.2, -30.0)
    want = path_loss_db(350.0, 2.2, -30.0) + path_loss_db(70.0, 2.2, -30.0)
    assert got == pytest.approx(want, rel=1e-12)


# -- array responses ----------------------------------------------------------

@given(angle=st.floats(0.0, 2.0 * np.pi), n=st.integers(1, 64))
@settings(max_examples=50, deadline=None)
def test_steering_unit_modulus(angle, n):
    v = steering_vector(angle, n)
    assert v[0] == 1.0 + 0.0j
    assert np.allclose(np.abs(v), 1.0, atol=1e-12)


def test_steering_rejects_empty_array():
    with pytest.raises(ValueError):
        steering_vector(0.3, 0)


def test_rician_limits():
    rng = np.random.default_rng(0)
    los = np.ones((2, 3), dtype=complex)
    nlos = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    assert np.allclose(rician_channel(0.0, los, nlos), nlos)
    big = rician_channel(1e12, los, nlos)
    assert np.allclose(big, los, atol=1e-5)
    mixed = rician_channel(3.0, los, nlos)
    want = np.sqrt(0.75) * los + np.sqrt(0.25) * nlos
    assert np.allclose(mixed, want)


def test_rician_shape_mismatch():
    with pytest.raises(ValueError):
        rician_channel(1.0, np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        rician_channel(-1.0, np.ones((2, 2)), np.ones((2, 2)))


# -- geometry -----------------------------------------------------------------

def test_cluster_centers_face_the_surface():
    c = default_config()
    dl, ul = user_cluster_centers(c)
    # cell 0 sits left of the surface, cell 1 right of it
    assert dl[0].tolist() == [300.0, -50.0, 1.5]
    assert ul[0].tolist() == [300.0, 50.0, 1.5]
    assert dl[1].tolist() == [400.0, -50.0, 1.5]
    assert ul[1].tolist() == [400.0, 50.0, 1.5]


# -- generation ---------------------------------------------------------------

def small_cfg(**over):
    base = dict(ris_elements=5, users_per_cell_dl=1, users_per_cell_ul=2,
                bs_tx_antennas=3, ue_tx_antennas=4, streams_dl=1,
                streams_ul=2)
    base.update(over)
    return dataclasses.replace(default_config(), **base)


def test_generation_shapes():
    c = small_cfg()
    ch = generate_realization(c, 0)
    assert ch.h_db.shape == (2, 1, 2, 2, 3)
    assert ch.h_bb.shape == (2, 2, 2, 3)
    assert ch.h_bu.shape == (2, 2, 2, 2, 4)
    assert ch.h_du.shape == (2, 1, 2, 2, 2, 4)
    assert ch.g_br.shape == (2, 2, 5)
    assert ch.g_dr.shape == (2, 1, 2, 5)
    assert ch.g_rb.shape == (2, 5, 3)
    assert ch.g_ru.shape == (2, 2, 5, 4)
    assert ch.seed == 0
    ch.validate()


def test_generation_deterministic():
    c = small_cfg()
    a = generate_realization(c, 42)
    b = generate_realization(c, 42)
    for f in ("h_db", "h_bb", "h_bu", "h_du", "g_br", "g_dr", "g_rb", "g_ru"):
        assert np.array_equal(getattr(a, f), getattr(b, f)), f
    other = generate_realization(c, 43)
    assert not np.array_equal(a.h_db, other.h_db)


def test_disabled_direct_links_zero_only_bs_user_matrices():
    c = small_cfg()
    on = generate_realization(c, 7)
    off = generate_realization(
        dataclasses.replace(c, direct_links_enabled=False), 7)
    assert np.all(off.h_db == 0) and np.all(off.h_bu == 0)
    # everything else identical draw for draw
    for f in ("h_bb", "h_du", "g_br", "g_dr", "g_rb", "g_ru"):
        assert np.array_equal(getattr(on, f), getattr(off, f)), f


def test_self_interference_scale():
    # loopback uses the SI attenuation, not a geometric distance
    c = small_cfg()
    ch = generate_realization(c, 1)
    # kappa=3 keeps entries O(1); cross-BS entries carry ~ -121 dB instead
    assert np.mean(np.abs(ch.h_bb[0, 0])) > 1e-2
    assert np.mean(np.abs(ch.h_bb[0, 1])) < 1e-4


def test_nlos_unit_variance_monte_carlo():
    # shrink the user disk so the direct-link distance is deterministic,
    # then the Rayleigh entries of h_db should average |h|^2 = amp^2
    c = small_cfg(user_region_radius=1e-9, ris_elements=2,
                  users_per_cell_ul=1)
    _dl, _ul = user_cluster_centers(c)
    d = float(np.linalg.norm(_dl[0] - np.asarray(c.bs_positions[0])))
    amp2 = 10.0 ** (path_loss_db(d, c.pathloss_exp_bs_user,
                                 c.pathloss_ref_db) / 10.0)
    acc = 0.0
    n = 0
    for seed in range(1000):
        ch = generate_realization(c, seed)
        acc += float(np.sum(np.abs(ch.h_db[0, 0, 0]) ** 2))
        n += ch.h_db[0, 0, 0].size
    assert acc / n / amp2 == pytest.approx(1.0, rel=0.05)


def test_invalid_config_rejected_before_generation():
    with pytest.raises(ValueError):
        generate_realization(small_cfg(streams_ul=5), 0)


def test_channelset_validate_catches_bad_shapes():
    ch = generate_realization(small_cfg(), 0)
    broken = dataclasses.replace(ch, g_rb=ch.g_rb[:, :-1])
    with pytest.raises(ValueError):
        broken.validate()
    nonfinite = dataclasses.replace(ch, h_bb=ch.h_bb.copy())
    nonfinite.h_bb[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        nonfinite.validate()
