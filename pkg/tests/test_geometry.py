import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacnet import geometry as geo
from isacnet.config import ExperimentConfig
from isacnet.errors import InvalidConfigError, OutOfBoundsError


def rng(seed=0):
    return np.random.default_rng(seed)


def test_cf_drop_shape_and_bounds():
    cfg = ExperimentConfig()
    cf = geo.drop_cf_deployment(cfg, rng(1))
    assert cf.ap_positions.shape == (32, 3)
    assert np.all(cf.ap_positions[:, 2] == 10.0)
    assert np.all((cf.ap_positions[:, :2] >= 0) & (cf.ap_positions[:, :2] <= 1000))
    assert cf.ap_array.num_elements == 4


def test_roles_partition_aps():
    cf = geo.drop_cf_deployment(ExperimentConfig(), rng(2))
    assert len(cf.tx_set) == 24 and len(cf.rx_set) == 8
    assert not set(cf.tx_set) & set(cf.rx_set)
    assert sorted(np.concatenate([cf.tx_set, cf.rx_set])) == list(range(32))


def test_empty_rx_rejected():
    with pytest.raises(InvalidConfigError):
        geo.drop_cf_deployment(ExperimentConfig().replace(m_cf=2, m_tx=2, m_rx=0), rng())


def test_cf_drop_deterministic():
    a = geo.drop_cf_deployment(ExperimentConfig(), rng(42))
    b = geo.drop_cf_deployment(ExperimentConfig(), rng(42))
    assert np.array_equal(a.ap_positions, b.ap_positions)
    assert np.array_equal(a.tx_set, b.tx_set)


def test_mc_centres_four_cells():
    mc = geo.drop_mc_deployment(1000, 4, 24, 8, 8.0)
    want = {(250, 250, 10), (250, 750, 10), (750, 250, 10), (750, 750, 10)}
    assert {tuple(p) for p in mc.bs_positions} == want


def test_mc_single_cell():
    mc = geo.drop_mc_deployment(1000, 1, 24, 8, 8.0)
    assert np.array_equal(mc.bs_positions, [[500, 500, 10]])
    for p in ([0, 0, 5], [1000, 1000, 50], [123, 987, 30]):
        assert geo.responsible_bs(mc, np.array(p)) == 0


def test_mc_three_cells_rejected():
    with pytest.raises(InvalidConfigError):
        geo.drop_mc_deployment(1000, 3, 24, 8, 8.0)


def test_responsible_bs_quadrant_and_tie():
    mc = geo.drop_mc_deployment(1000, 4, 24, 8, 8.0)
    b = geo.responsible_bs(mc, np.array([100, 100, 50]))
    assert tuple(mc.bs_positions[b][:2]) == (250, 250)
    # shared edge x = 500 goes to the lower-index cell
    left = geo.responsible_bs(mc, np.array([499.9, 100, 50]))
    assert geo.responsible_bs(mc, np.array([500.0, 100, 50])) == left
    with pytest.raises(OutOfBoundsError):
        geo.responsible_bs(mc, np.array([1000.1, 10, 50]))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0, 1000), y=st.floats(0, 1000), m=st.sampled_from([1, 2, 4, 9, 16]))
def test_responsible_bs_cell_contains_point(x, y, m):
    mc = geo.drop_mc_deployment(1000, m, 4, 4, 1.0)
    b = geo.responsible_bs(mc, np.array([x, y, 50.0]))
    x0, x1, y0, y1 = mc.cell_bounds[b]
    assert x0 <= x <= x1 and y0 <= y <= y1


def test_fairness_mapping_defaults():
    fair = geo.map_cf_to_fair_mc(32, 4, 24, 8, 1.0)
    assert (fair.m_mc, fair.n_tx, fair.n_rx) == (4, 24, 8)
    assert fair.per_bs_power == pytest.approx(8.0)
    # total power is preserved
    assert fair.m_mc * fair.per_bs_power == pytest.approx(32 * 1.0)


def test_fairness_mapping_empty_rx():
    with pytest.raises(InvalidConfigError):
        geo.map_cf_to_fair_mc(1, 1, 1, 0, 1.0)


def test_entities():
    cfg = ExperimentConfig()
    ues, target = geo.drop_entities(cfg, rng(3))
    assert ues.shape == (16, 3) and np.all(ues[:, 2] == 1.65)
    assert 20 <= target.position[2] <= 100
    assert np.linalg.norm(target.velocity) == pytest.approx(10.0)
    assert target.velocity[2] == 0
    ues0, _ = geo.drop_entities(cfg.replace(k_ues=0), rng(3))
    assert ues0.shape == (0, 3)


def test_target_height_mean():
    cfg = ExperimentConfig()
    g = rng(4)
    z = [geo.drop_entities(cfg.replace(k_ues=0), g)[1].position[2] for _ in range(10_000)]
    assert abs(np.mean(z) - 60.0) < 1.0


def test_zone_restriction_keeps_every_zone_testable():
    cfg = ExperimentConfig()
    cf = geo.restrict_sensing_to_zones(geo.drop_cf_deployment(cfg, rng(5)), cfg.area_m)
    assert len(cf.sensing_sets) == 4
    for z, (tx, rx) in enumerate(cf.sensing_sets):
        assert len(tx) >= 1 and len(rx) >= 1
        assert set(tx) <= set(cf.tx_set) and set(rx) <= set(cf.rx_set)


def test_serving_sets():
    cfg = ExperimentConfig()
    cf = geo.drop_cf_deployment(cfg, rng(6))
    ues, _ = geo.drop_entities(cfg, rng(7))
    all_ = geo.assign_cf_serving(cf, ues, "all")
    assert all(np.array_equal(s, cf.tx_set) for s in all_.serving_sets)
    assert len(all_.served_ues(cf.tx_set[0])) == 16
    near = geo.assign_cf_serving(cf, ues, "nearest", 4)
    for ue, s in zip(ues, near.serving_sets):
        d = np.linalg.norm(cf.ap_positions[cf.tx_set] - ue, axis=1)
        assert np.isclose(np.sort(np.linalg.norm(cf.ap_positions[s] - ue, axis=1)),
                          np.sort(d)[:4]).all()


def test_mc_assignment_partitions_ues():
    cfg = ExperimentConfig()
    ues, target = geo.drop_entities(cfg, rng(8))
    mc = geo.assign_mc(geo.drop_mc_deployment(1000, 4, 24, 8, 8.0), ues, [target.position])
    assert sorted(np.concatenate(mc.ue_assignment)) == list(range(16))
    owner = geo.responsible_bs(mc, target.position)
    assert list(mc.cell_grid_sets[owner]) == [0]
