import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipfree.netmodel import (
    NetworkInstance,
    ScenarioConfig,
    apply_motion,
    generate_network,
    make_instance,
    measure_distances,
    network_from_positions,
)


class FixedDraws:
    """Stands in for a Generator, returning preset draws."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def normal(self, loc, scale, size):
        return self.values[:size]

    def uniform(self, lo, hi, size):
        return self.values[:size]


def pair(d, r=20.0):
    return network_from_positions([(0, 0), (d, 0)], r)


def test_single_edge():
    inst = network_from_positions([(0, 0), (15, 0)], 20)
    assert inst.edges() == [(0, 1)]
    assert inst.d_hat(0, 1) == 15


def test_no_edge_when_out_of_range():
    inst = network_from_positions([(0, 0), (15, 0)], 10)
    assert inst.edges() == []
    assert not inst.has_edge(0, 1)


def test_edge_count_matches_pairwise_scan():
    cfg = ScenarioConfig(n=100, area_size=100, r=30)
    inst = generate_network(cfg, np.random.default_rng(7))
    pos = inst.positions
    count = sum(
        1 for i in range(100) for j in range(i + 1, 100)
        if np.sqrt((pos[i, 0] - pos[j, 0]) ** 2 + (pos[i, 1] - pos[j, 1]) ** 2) <= 30
    )
    assert len(inst.edges()) == count
    assert count > 0


def test_noise_clamped_to_upper_bound():
    inst = measure_distances(pair(10), 1.0, 0.2, FixedDraws([0.5]))
    assert inst.d_hat(0, 1) == pytest.approx(10.2)


def test_zero_delta_is_exact():
    inst = make_instance(ScenarioConfig(n=40, delta=0.0), np.random.default_rng(0))
    for i, j in inst.edges():
        assert inst.d_hat(i, j) == inst.true_distance(i, j)


def test_absolute_value_rule_without_clamp():
    inst = measure_distances(pair(0.1), 1.0, 1.0, FixedDraws([-0.5]))
    assert inst.d_hat(0, 1) == pytest.approx(0.4)


def test_motion_adds_draw():
    base = pair(10)
    assert apply_motion(base, 1.0, FixedDraws([0.5])).d_hat(0, 1) == pytest.approx(10.5)


def test_zero_motion_is_identity():
    base = pair(10)
    assert apply_motion(base, 0.0, np.random.default_rng(0)) is base


def test_motion_floors_at_zero():
    base = measure_distances(pair(0.5), 1.0, 1.0, FixedDraws([-0.2]))
    assert base.d_hat(0, 1) == pytest.approx(0.3)
    assert apply_motion(base, 1.0, FixedDraws([-0.5])).d_hat(0, 1) == 0.0


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"n": 10, "colour": "red"})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"areaSize": 50, "dMax": 0.4, "epsilonMode": "errorPlusMotion", "n": 20}))
    cfg = ScenarioConfig.from_json(path)
    assert (cfg.area_size, cfg.d_max, cfg.n) == (50, 0.4, 20)
    assert cfg.epsilon == pytest.approx(1.4)


@pytest.mark.parametrize(
    "bad", [{"n": 2}, {"r": 0}, {"delta": -1}, {"epsilon_mode": "x"}, {"triangle_mode": "x"}, {"grid_res": 0}]
)
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ScenarioConfig(**bad)


def test_config_roundtrip():
    cfg = ScenarioConfig(n=33, delta=0.5, grid_res=0.1)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.h == 0.1
    assert ScenarioConfig(delta=1.0).h == 0.25


def test_instance_json_roundtrip():
    inst = make_instance(ScenarioConfig(n=30, delta=0.5), np.random.default_rng(2))
    back = NetworkInstance.from_dict(json.loads(json.dumps(inst.to_dict())))
    assert np.array_equal(back.positions, inst.positions)
    assert np.array_equal(np.nan_to_num(back.measured, nan=-1), np.nan_to_num(inst.measured, nan=-1))


def test_connectivity_is_reported():
    inst = network_from_positions([(0, 0), (1, 0), (50, 50)], 5)
    assert not inst.is_connected()
    assert inst.components() == 2


cfgs = st.builds(
    ScenarioConfig,
    n=st.integers(3, 60),
    r=st.floats(5, 40),
    delta=st.sampled_from([0.0, 0.02, 0.2, 1.0, 3.0]),
    d_max=st.sampled_from([0.0, 0.4, 2.0]),
    epsilon_mode=st.sampled_from(["errorOnly", "errorPlusMotion"]),
    seed=st.integers(0, 2**32),
)


@settings(max_examples=40, deadline=None)
@given(cfgs)
def test_deviation_bounded_symmetric_deterministic(cfg):
    a = make_instance(cfg, np.random.default_rng(cfg.seed))
    b = make_instance(cfg, np.random.default_rng(cfg.seed))
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(np.isnan(a.measured), np.isnan(b.measured))
    assert np.array_equal(np.nan_to_num(a.measured), np.nan_to_num(b.measured))
    m = a.measured
    assert np.array_equal(np.isnan(m), np.isnan(m.T))
    assert np.array_equal(np.nan_to_num(m), np.nan_to_num(m.T))
    for i, j in a.edges():
        assert m[i, j] >= 0
        assert abs(m[i, j] - a.true_distance(i, j)) <= cfg.epsilon + 1e-9
