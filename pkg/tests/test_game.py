import json

import numpy as np
import pytest

from zdmtd.game import (
    GameSpec,
    MemoryOneStrategy,
    canonicalize,
    flat_index,
    game_from_dict,
    game_to_dict,
    hat_indicator,
    one_shot_utilities,
    profit_vector,
    pure_strategy,
    random_strategy,
    relabeling,
    unflat,
    uniform_strategy,
)

MATCHING_PENNIES = GameSpec(2, (1, 1), (-1, -1), (-1, -1), (1, 1))


def test_flat_index_roundtrip():
    for k in (2, 3, 5):
        seen = set()
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                s = flat_index(k, i, j)
                assert unflat(k, s) == (i, j)
                seen.add(s)
        assert seen == set(range(k * k))


def test_one_shot_utilities_examples():
    g = MATCHING_PENNIES
    assert one_shot_utilities(g, 1, 1) == (1, -1)
    assert one_shot_utilities(g, 1, 2) == (-1, 1)
    assert one_shot_utilities(g, 2, 2) == (1, -1)
    with pytest.raises(IndexError):
        one_shot_utilities(g, 0, 1)
    with pytest.raises(IndexError):
        one_shot_utilities(g, 1, 3)


def test_profit_vector_examples():
    g = GameSpec(2, (1, 4), (0, 2), (-1, -3), (5, 6))
    assert profit_vector(g, "defender").entries.tolist() == [1, 2, 0, 4]
    assert profit_vector(g, "attacker").entries.tolist() == [-1, 6, 5, -3]

    g3 = GameSpec(3, (1, 1, 1), (0, 0, 0), (0, 0, 0), (1, 1, 1))
    v = profit_vector(g3, "defender").entries
    expect = np.zeros(9)
    expect[[0, 4, 8]] = 1
    assert np.array_equal(v, expect)


def test_profit_vector_matches_one_shot():
    rng = np.random.default_rng(0)
    for k in (2, 3, 4):
        unc = rng.normal(size=k)
        g = GameSpec(k, unc + rng.uniform(0.1, 2, size=k), unc,
                     rng.normal(size=k), rng.normal(size=k))
        sd = profit_vector(g, "defender").entries
        sa = profit_vector(g, "attacker").entries
        for d in range(1, k + 1):
            for a in range(1, k + 1):
                ud, ua = one_shot_utilities(g, d, a)
                assert sd[flat_index(k, d, a)] == ud
                assert sa[flat_index(k, d, a)] == ua


def test_hat_indicator_examples():
    assert hat_indicator(2, 1).tolist() == [1, 1, 0, 0]
    assert hat_indicator(2, 2).tolist() == [0, 0, 1, 1]
    assert hat_indicator(3, 2).tolist() == [0, 0, 0, 1, 1, 1, 0, 0, 0]
    with pytest.raises(IndexError):
        hat_indicator(2, 3)


def test_hat_indicators_partition():
    for k in (2, 3, 5):
        total = sum(hat_indicator(k, t) for t in range(1, k + 1))
        assert np.array_equal(total, np.ones(k * k))


def test_assumption_violation_rejected():
    with pytest.raises(ValueError, match="target"):
        GameSpec(2, (1, 0), (0, 0), (0, 0), (0, 0))
    with pytest.raises(ValueError):
        GameSpec(1, (1,), (0,), (0,), (0,))
    with pytest.raises(ValueError):
        GameSpec(2, (1, np.inf), (0, 0), (0, 0), (0, 0))


def test_canonicalize_sorts_by_covered_profit():
    g = GameSpec(3, (3, 7, 5), (0, 0, 0), (0, 0, 0), (1, 1, 1))
    cg, cp = canonicalize(g)
    assert cp.perm[1] == 1  # original target 2 becomes label 1
    assert cg.u_d_cov.tolist() == [7, 5, 3]
    assert cp.invert_game(cg).u_d_cov.tolist() == g.u_d_cov.tolist()


def test_canonicalize_identity_and_ties():
    g = GameSpec(3, (7, 5, 3), (0, 0, 0), (0, 0, 0), (1, 1, 1))
    _, cp = canonicalize(g)
    assert cp.is_identity()

    tie = GameSpec(3, (7, 7, 1), (0, 0, 0), (0, 0, 0), (1, 1, 1))
    _, cp = canonicalize(tie)
    assert cp.perm[0] == 1


def test_permutation_roundtrips_strategy_and_profit():
    rng = np.random.default_rng(42)
    g = GameSpec(3, (3, 7, 5), (0, 1, 2), (-1, 0, 1), (2, 0, 1))
    cg, cp = canonicalize(g)
    s = random_strategy(3, rng)
    back = cp.invert_strategy(cp.apply_strategy(s))
    assert np.allclose(back.rows, s.rows, atol=0)

    p = profit_vector(g, "attacker")
    assert np.allclose(cp.apply_profit(p).entries,
                       profit_vector(cg, "attacker").entries)

    # relabeled strategy agrees pointwise with the label map
    cs = cp.apply_strategy(s)
    for i in range(1, 4):
        for j in range(1, 4):
            for t in range(1, 4):
                assert cs.rows[flat_index(3, cp.perm[i - 1], cp.perm[j - 1]),
                               cp.perm[t - 1] - 1] == s.rows[flat_index(3, i, j), t - 1]


def test_relabeling_roles():
    cp = relabeling(4, role1=3, role_k=2)
    assert cp.perm[2] == 1
    assert cp.perm[1] == 4
    # middles keep order: originals 1, 4 -> labels 2, 3
    assert cp.perm[0] == 2 and cp.perm[3] == 3


def test_strategy_validation():
    with pytest.raises(ValueError, match="sum"):
        MemoryOneStrategy(2, np.full((4, 2), 0.4))
    with pytest.raises(ValueError):
        MemoryOneStrategy(2, np.array([[1.2, -0.2]] * 4))
    s = uniform_strategy(3)
    assert np.allclose(s.rows.sum(axis=1), 1)
    p = pure_strategy(2, 2)
    assert p.column(2).tolist() == [1, 1, 1, 1]


def test_game_json_strict():
    g = MATCHING_PENNIES
    d = game_to_dict(g)
    g2 = game_from_dict(json.loads(json.dumps(d)))
    assert game_to_dict(g2) == d

    with pytest.raises(ValueError, match="unknown"):
        game_from_dict({**d, "extra": 1})
    with pytest.raises(ValueError, match="missing"):
        game_from_dict({k: v for k, v in d.items() if k != "u_a_cov"})
    with pytest.raises(ValueError, match="length"):
        game_from_dict({**d, "u_d_cov": [1, 1, 1]})
