import numpy as np
import pytest

from zdmtd.scenarios import (
    CrowdScenario,
    IotScenario,
    crowd_game,
    crowd_scenario,
    default_suites,
    iot_game,
    iot_scenario,
    migration_matrix,
    scenario_from_dict,
    scenario_to_dict,
)


def test_iot_game_zero_cost_example():
    s = IotScenario(2, 5.0, np.zeros((2, 2)), 3.0, (1.0, 1.0))
    g = iot_game(s)
    assert g.u_d_cov.tolist() == [5, 5]
    assert g.u_d_unc.tolist() == [0, 0]
    assert g.u_a_cov.tolist() == [-1, -1]
    assert g.u_a_unc.tolist() == [2, 2]


def test_iot_game_average_migration_cost():
    s = IotScenario(2, 5.0, [[0, 2], [2, 0]], 3.0, (1.0, 1.0))
    g = iot_game(s)
    assert g.u_d_cov.tolist() == [4, 4]
    assert g.u_d_unc.tolist() == [-1, -1]


def test_migration_matrix_generator_regression():
    # amp = 0 reproduces the plain mobility matrix 2*theta*(ones - I)
    assert migration_matrix(2, 1.0, amp=0.0).tolist() == [[0, 2], [2, 0]]
    # default-amp values pinned once as a regression guard
    y = migration_matrix(2, 0.5, amp=0.4, modulus=7)
    assert y[0, 0] == 0.0 and y[1, 1] == 0.0
    assert y[0, 1] == pytest.approx(1.0 + 0.4 * (5 / 7 + 1 / 4))
    assert y[1, 0] == pytest.approx(1.0 + 0.4 * (3 / 7))
    assert y[0, 1] != y[1, 0]  # perturbation keeps it asymmetric
    # column means stay distinct so devices are heterogeneous
    for k in (3, 5, 10):
        means = migration_matrix(k, 0.6).mean(axis=0)
        assert len(np.unique(np.round(means, 12))) == k


def test_iot_assumption_and_gap():
    for k in (3, 5, 10):
        for zeta in (1, 2, 3):
            s = iot_scenario(k, zeta)
            g = iot_game(s)
            gap = g.u_d_cov - g.u_d_unc
            assert np.allclose(gap, s.s)


def test_iot_validation():
    with pytest.raises(ValueError, match="positive"):
        IotScenario(2, -1.0, np.zeros((2, 2)), 3.0, (1, 1))
    with pytest.raises(ValueError, match="nonnegative"):
        IotScenario(2, 1.0, [[0, -1], [0, 0]], 3.0, (1, 1))
    with pytest.raises(ValueError, match="theta"):
        migration_matrix(2, 1.5)


def test_crowd_game_examples():
    s = CrowdScenario(2, (4.0, 6.0), (1.0, 2.0), 1.0, (2.0, 4.0), (1.5, 3.0), (0.5, 0.0))
    honest = crowd_game(s, "honest")
    assert honest.u_d_cov.tolist() == [3, 5]
    assert honest.u_d_unc.tolist() == [-1, -1]
    assert honest.u_a_cov.tolist() == [2, 4]
    assert honest.u_a_unc.tolist() == [0, 0]

    mal = crowd_game(s, "malicious")
    assert mal.u_d_cov.tolist() == [2, 3]
    assert mal.u_a_cov.tolist() == [1.5, 3.0]
    assert mal.u_a_unc.tolist() == [3.5, 3.0]  # mean(2, 4) + extras


def test_crowd_game_rejects_assumption_violation():
    s = CrowdScenario(2, (4.0, 6.0), (6.0, 2.0), 1.0, (2.0, 4.0), (1.5, 3.0), (0.0, 0.0))
    with pytest.raises(ValueError, match=r"task\(s\) \[1\]"):
        crowd_game(s, "malicious")
    crowd_game(s, "honest")  # honest rows unaffected by the losses


def test_crowd_types_differ_only_in_specified_entries():
    s = crowd_scenario("honest", 50)
    honest, mal = crowd_game(s, "honest"), crowd_game(s, "malicious")
    assert np.array_equal(honest.u_d_unc, mal.u_d_unc)
    assert np.all(honest.u_d_cov - mal.u_d_cov == s.m)
    assert not np.array_equal(honest.u_a_cov, mal.u_a_cov)


def test_default_suites_counts_and_determinism():
    suites = default_suites()
    names = [n for n, _ in suites]
    assert sum(n.startswith("iot_") for n in names) == 9
    assert sum(n.startswith("crowd_") for n in names) == 6
    again = default_suites()
    assert [n for n, _ in again] == names
    for (_, a), (_, b) in zip(suites, again):
        assert scenario_to_dict(a) == scenario_to_dict(b)
    # every generated game passes construction (assumption validated there)
    for name, s in suites:
        if isinstance(s, IotScenario):
            iot_game(s)
        else:
            crowd_game(s, "honest")
            crowd_game(s, "malicious")


def test_scenario_envelope_roundtrip():
    for _, s in default_suites()[:2] + default_suites()[-2:]:
        d = scenario_to_dict(s)
        s2 = scenario_from_dict(d)
        assert scenario_to_dict(s2) == d
    with pytest.raises(ValueError, match="scenario"):
        scenario_from_dict({"k": 2})
