import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaindefect.model import (ChainConfig, ConfigError, DefectHypothesis, PhysicalUnits,
                               bar_from_chain, identify_from_bar, load_config,
                               max_resolved_frequency, parse_model_config, physical_frequency,
                               physical_time)

UNIT = PhysicalUnits(length=1.0, density=1.0, youngs_modulus=1.0, cross_section=1.0)


def test_chain_invariants():
    with pytest.raises(ConfigError):
        ChainConfig(n_masses=2)
    with pytest.raises(ConfigError):
        ChainConfig(damping=-0.1)
    with pytest.raises(ConfigError):
        ChainConfig(base_stiffness=0.0)
    with pytest.raises(ConfigError):
        DefectHypothesis(40, -1.0)
    with pytest.raises(ConfigError):
        DefectHypothesis(1, 1.3).check(ChainConfig())
    with pytest.raises(ConfigError):
        DefectHypothesis(101, 1.3).check(ChainConfig())
    assert list(ChainConfig().defect_indices) == list(range(2, 101))


def test_identify_constant_bar():
    n = 100
    m, k, d = identify_from_bar(np.ones(n), np.ones(n), np.full(n, 0.1), 0.01)
    np.testing.assert_allclose(m, 0.01)
    np.testing.assert_allclose(k, 100.0)
    np.testing.assert_allclose(d, 0.001)


def test_identify_is_local():
    E = np.ones(50)
    E[17] = 1.3
    m0, k0, _ = identify_from_bar(np.ones(50), np.ones(50), np.zeros(50), 0.02)
    m1, k1, _ = identify_from_bar(np.ones(50), E, np.zeros(50), 0.02)
    np.testing.assert_array_equal(m0, m1)
    ratio = k1 / k0
    assert np.count_nonzero(ratio != 1.0) == 1
    assert ratio[17] == pytest.approx(1.3, rel=1e-15)


def test_identify_errors():
    with pytest.raises(ValueError):
        identify_from_bar(np.ones(3), np.ones(4), np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        identify_from_bar(np.array([1.0, 0.0, 1.0]), np.ones(3), np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        identify_from_bar(np.ones(3), np.array([1.0, -2.0, 1.0]), np.zeros(3), 0.1)


@given(st.lists(st.floats(0.1, 1e4), min_size=3, max_size=30), st.floats(1e-4, 1.0))
def test_identify_round_trip(profile, dx):
    rho = np.array(profile)
    E = rho[::-1] * 3.0
    mu = rho / 7.0
    back = bar_from_chain(*identify_from_bar(rho, E, mu, dx), dx)
    for orig, rec in zip((rho, E, mu), back):
        np.testing.assert_allclose(rec, orig, rtol=1e-14)


def test_defect_equals_modulus_ratio():
    # a constant bar with one modified element maps to k* = E_def / E0 on the unit chain
    n, dx = 100, 0.01
    E = np.ones(n)
    E[39] = 1.3
    _, k, _ = identify_from_bar(np.ones(n), E, np.zeros(n), dx)
    k_rel = k / k[0]
    assert k_rel[39] == pytest.approx(1.3, rel=1e-15)
    assert np.all(np.delete(k_rel, 39) == 1.0)


def test_physical_time_unit_cell():
    assert physical_time(1.0, UNIT, ChainConfig(n_masses=100)) == pytest.approx(0.01, rel=1e-15)
    assert physical_time(0.0, UNIT, ChainConfig()) == 0.0


def test_physical_time_is_cell_travel_time():
    u = PhysicalUnits(2.0, 7850.0, 200e9, 3e-4)
    chain = ChainConfig(n_masses=80)
    expected = 2.3 * (2.0 / 80) / math.sqrt(200e9 / 7850.0)
    assert physical_time(2.3, u, chain) == pytest.approx(expected, rel=1e-14)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-2, 10.0),
       st.floats(1.0, 1e4), st.floats(1e6, 1e12), st.floats(1e-6, 1.0),
       st.integers(3, 2000))
def test_time_frequency_scales_are_reciprocal(omega, t, L, rho, E, A, n):
    u = PhysicalUnits(L, rho, E, A)
    chain = ChainConfig(n_masses=n)
    assert physical_frequency(omega, u, chain) * physical_time(t, u, chain) == \
        pytest.approx(omega * t, rel=1e-14)


def test_max_resolved_frequency():
    assert max_resolved_frequency(UNIT, ChainConfig(n_masses=100)) == pytest.approx(25.0)
    assert max_resolved_frequency(UNIT, ChainConfig(n_masses=200)) == pytest.approx(50.0)
    steel = PhysicalUnits(1.0, 7850.0, 200e9, 1e-4)
    c = 200e9 ** 0.5 / 7850.0 ** 0.5
    assert steel.wave_speed == pytest.approx(5047.5446512507, rel=1e-12)
    assert steel.wave_speed == pytest.approx(c, rel=1e-15)
    assert max_resolved_frequency(steel, ChainConfig(n_masses=100)) == pytest.approx(1.2618862e5, rel=1e-7)
    half = PhysicalUnits(0.5, 7850.0, 200e9, 1e-4)
    assert max_resolved_frequency(half, ChainConfig()) == pytest.approx(
        2 * max_resolved_frequency(steel, ChainConfig()))


def test_parse_flat_config(tmp_path):
    flat = {"n_masses": 50, "damping": 0.2, "defect.index": 10, "defect.stiffness": 0.8,
            "units.length": 1.0, "units.density": 7850.0, "units.youngs_modulus": 2e11,
            "units.cross_section": 1e-4}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(flat))
    cfg = parse_model_config(load_config(path))
    assert cfg.chain.n_masses == 50 and cfg.defect == DefectHypothesis(10, 0.8)
    assert cfg.units.density == 7850.0
    assert parse_model_config(cfg.to_flat()) == cfg


@pytest.mark.parametrize("flat", [
    {"n_masses": 50, "colour": "red"},
    {"defect.index": 3},
    {"units.length": 1.0},
    {"n_masses": 10, "defect.index": 11, "defect.stiffness": 1.0},
])
def test_parse_rejects(flat):
    with pytest.raises(ConfigError):
        parse_model_config(flat)
