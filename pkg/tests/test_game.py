import itertools
import math

import numpy as np
import pytest

from scmas.game import (
    FollowerPolicy,
    InformationStructure,
    LayeredStrategy,
    Observation,
    PayoffEvaluator,
    ScmasGame,
    expected_payoffs,
    game_from_dict,
    game_to_dict,
    observe,
    signal_matrix,
    validate,
)
from scmas.generators import synthetic
from scmas.scm import enumerate_exogenous
from conftest import make_simple_game, oracle_profile_value


def _policy_const(game, action, layers=(None,)):
    k_l = len(game.leader_support)
    responses = {}
    for lay in layers:
        for x in range(k_l):
            responses[Observation(x, lay)] = LayeredStrategy("L2", action=action)
    return FollowerPolicy(responses)


def test_appendix_game_coordinated_outcome_value():
    game = synthetic("appendix_d_coordination", 0)
    pol = _policy_const(game, 0)
    el, ef = expected_payoffs(game, LayeredStrategy("L2", action=0), pol)
    assert abs(el - 15.0) < 1e-12
    assert abs(ef - 15.0) < 1e-12


def test_zero_rewards_give_zero_payoffs():
    game = make_simple_game([[0, 0], [0, 0]], [[0, 0], [0, 0]],
                            (0.5, 0.5), (0.5, 0.5))
    for leader in (LayeredStrategy("L1"), LayeredStrategy("L2", action=1),
                   LayeredStrategy("L3", counterfactual_map=(1, 0))):
        el, ef = expected_payoffs(game, leader, _policy_const(game, 0))
        assert el == 0.0 and ef == 0.0


def test_instinctive_leader_vs_always_cooperate_follower():
    # cooperation rate 0.7 weights the two rows of the dilemma table
    game = synthetic("prisoners_dilemma_m1", 0)
    pol = _policy_const(game, 0, layers=("L1", "L2", "L3"))
    el, ef = expected_payoffs(game, LayeredStrategy("L1"), pol)
    rl = game.reward_arrays()[0]
    rf = game.reward_arrays()[1]
    want_l = 0.7 * rl[0, 0] + 0.3 * rl[1, 0]
    want_f = 0.7 * rf[0, 0] + 0.3 * rf[1, 0]
    assert abs(el - want_l) < 1e-12
    assert abs(ef - want_f) < 1e-12


def test_expected_payoffs_match_plain_enumeration_oracle():
    game = make_simple_game([[4, 1], [2, 7]], [[3, 5], [6, 0]],
                            (0.6, 0.4), (0.3, 0.7))
    pol = FollowerPolicy({
        Observation(0, None): LayeredStrategy("L1"),
        Observation(1, None): LayeredStrategy("L3", counterfactual_map=(1, 0)),
    })
    for leader in (LayeredStrategy("L1"), LayeredStrategy("L2", action=0),
                   LayeredStrategy("L2", action=1),
                   LayeredStrategy("L3", counterfactual_map=(1, 1))):
        got = expected_payoffs(game, leader, pol)
        want = oracle_profile_value(game, leader, pol)
        assert got == pytest.approx(want, abs=1e-12)


def test_identity_map_equals_instinctive_play():
    game = make_simple_game([[4, 1], [2, 7]], [[3, 5], [6, 0]],
                            (0.6, 0.4), (0.3, 0.7))
    pol = FollowerPolicy({
        Observation(0, None): LayeredStrategy("L2", action=1),
        Observation(1, None): LayeredStrategy("L1"),
    })
    a = expected_payoffs(game, LayeredStrategy("L1"), pol)
    b = expected_payoffs(game, LayeredStrategy("L3", counterfactual_map=(0, 1)), pol)
    assert abs(a[0] - b[0]) < 1e-12 and abs(a[1] - b[1]) < 1e-12


def test_instinctive_leader_payoff_is_mixture_of_forced_actions():
    # leader instinct independent of everything else
    game = make_simple_game([[4, 1], [2, 7]], [[3, 5], [6, 0]],
                            (0.6, 0.4), (0.3, 0.7))
    pol = FollowerPolicy({
        Observation(0, None): LayeredStrategy("L2", action=1),
        Observation(1, None): LayeredStrategy("L1"),
    })
    l1 = expected_payoffs(game, LayeredStrategy("L1"), pol)[0]
    l2 = [expected_payoffs(game, LayeredStrategy("L2", action=a), pol)[0]
          for a in (0, 1)]
    assert abs(l1 - (0.6 * l2[0] + 0.4 * l2[1])) < 1e-12


def test_policy_must_cover_visited_observations():
    game = make_simple_game([[1, 0], [0, 1]], [[1, 0], [0, 1]],
                            (0.5, 0.5), (0.5, 0.5))
    pol = FollowerPolicy({Observation(0, None): LayeredStrategy("L2", action=0)})
    with pytest.raises(ValueError):
        expected_payoffs(game, LayeredStrategy("L1"), pol)


def test_observe_per_information_kind():
    g_perf = make_simple_game([[1, 0], [0, 1]], [[1, 0], [0, 1]],
                              (0.5, 0.5), (0.5, 0.5))
    assert observe(g_perf, "L1", 1) == Observation(1, None)

    g_mech = make_simple_game([[1, 0], [0, 1]], [[1, 0], [0, 1]],
                              (0.5, 0.5), (0.5, 0.5),
                              info=InformationStructure("mechanism"))
    assert observe(g_mech, "L1", 0) == Observation(0, "L1")

    g_noise0 = make_simple_game([[1, 0], [0, 1]], [[1, 0], [0, 1]],
                                (0.5, 0.5), (0.5, 0.5),
                                info=InformationStructure("imperfect", 0.0))
    assert observe(g_noise0, "L2", 1, noise_seed=5) == Observation(1, None)

    g_noisy = make_simple_game([[1, 0], [0, 1]], [[1, 0], [0, 1]],
                               (0.5, 0.5), (0.5, 0.5),
                               info=InformationStructure("imperfect", 1.0))
    obs = observe(g_noisy, "L2", 0, noise_seed=3)
    assert obs == observe(g_noisy, "L2", 0, noise_seed=3)
    assert obs.action_signal in (0, 1) and obs.layer_signal is None

    with pytest.raises(ValueError):
        observe(g_perf, "L2", 9)


def test_signal_matrix_rows_normalized():
    for sigma in (0.0, 0.1, 0.5, 1.0):
        m = signal_matrix(4, sigma)
        assert np.allclose(m.sum(axis=1), 1.0)
        assert (m >= 0).all()
    assert np.allclose(signal_matrix(3, 0.0), np.eye(3))
    # wide noise spreads mass off the diagonal
    assert signal_matrix(4, 1.0)[0, 1] > 0


def test_validate_clean_game():
    assert validate(synthetic("appendix_d_coordination", 0)) == []


def test_validate_duplicate_action_variable():
    game = synthetic("coordination", 0)
    bad = ScmasGame(
        scm=game.scm, leader_action="XL", follower_action="XL",
        rewards=game.rewards, info=game.info,
    )
    issues = validate(bad)
    assert any("leader_action" in msg and "follower_action" in msg for msg in issues)


def test_validate_timing_violation():
    # follower's node feeds the leader's equation: ordering is inconsistent
    from scmas.scm import (EndogenousVar, ExogenousVar, Scm, StructuralEquation,
                           table_from_fn)
    scm = Scm(
        exogenous=(ExogenousVar("U", (0, 1), (0.5, 0.5)),),
        endogenous=(EndogenousVar("XF", (0, 1)), EndogenousVar("XL", (0, 1))),
        equations=(
            StructuralEquation("XF", ("U",), table_from_fn([2], lambda u: u)),
            StructuralEquation("XL", ("XF",), table_from_fn([2], lambda x: x)),
        ),
        action_nodes=("XL", "XF"),
    )
    bad = ScmasGame(
        scm=scm, leader_action="XL", follower_action="XF",
        rewards=(((0.0, 0.0), (0.0, 0.0)), ((0.0, 0.0), (0.0, 0.0))),
        info=InformationStructure("perfect"),
    )
    assert any("timing violation" in msg for msg in validate(bad))


def test_game_json_round_trip():
    for name in ("appendix_d_coordination", "prisoners_dilemma_m2"):
        game = synthetic(name, 3)
        d = game_to_dict(game)
        again = game_to_dict(game_from_dict(d))
        assert again == d


def test_imperfect_expectation_uses_channel():
    game = make_simple_game([[9, 0], [0, 9]], [[9, 0], [0, 9]],
                            (1.0, 0.0), (1.0, 0.0),
                            info=InformationStructure("imperfect", 1.0))
    # follower repeats the signal; noise shifts some mass to the wrong cell
    pol = FollowerPolicy({
        Observation(0, None): LayeredStrategy("L2", action=0),
        Observation(1, None): LayeredStrategy("L2", action=1),
    })
    el, _ = expected_payoffs(game, LayeredStrategy("L2", action=0), pol)
    m = signal_matrix(2, 1.0)
    assert abs(el - 9.0 * m[0, 0]) < 1e-12
    assert el < 9.0
