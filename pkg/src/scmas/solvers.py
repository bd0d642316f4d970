"""Equilibrium computation by backward induction over reasoning layers.

Stage 2 computes, for a candidate leader strategy, the follower's best
response at every observation (maximized over the follower's own layers);
stage 1 then maximizes the leader's exact expected reward over all layer and
within-layer choices. Ties are broken by layer preference L1 > L2 > L3, then
lowest action index, then lexicographically smallest counterfactual map;
candidates are visited in exactly that order and replaced only on a strict
improvement, so the tie-break is structural rather than tolerance-based.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ActionSpaceTooLarge,
    CapExceeded,
    TooLarge,
    TypeMismatch,
    TypeSetTooSmall,
)
from .game import (
    IMPERFECT,
    L1,
    L2,
    L3,
    LAYERS,
    MECHANISM,
    FollowerPolicy,
    LayeredStrategy,
    MixedResponse,
    Observation,
    PayoffEvaluator,
    ScmasGame,
)
from .scm import DEFAULT_ENUM_CAP, sample_exogenous

DEFAULT_ACTION_CAP = 8
# Full map enumeration for leader L3 is used up to this many maps; above it
# the map is assembled pointwise per instinct value, which coincides with the
# exhaustive optimum whenever instincts are independent of the rest of the
# model (the generator guarantees that class).
L3_ENUM_LIMIT = 4096

DEFAULT_SAMPLE_CONSTANT = 0.5
DEFAULT_TREMBLE_GRID = (1e-2, 1e-3, 1e-4)


def _action_cap(explicit: int | None) -> int:
    if explicit is not None:
        return explicit
    return int(os.environ.get("SCMAS_EXACT_CAP", DEFAULT_ACTION_CAP))


@dataclass(frozen=True)
class SolveMethod:
    """Provenance of an equilibrium profile."""

    kind: str  # exact | classical_l2 | approx | satisficing
    epsilon: float | None = None
    seed: int | None = None
    n_samples: int | None = None
    eps_sat: float | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for k in ("epsilon", "seed", "n_samples", "eps_sat"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out


@dataclass(frozen=True)
class EquilibriumProfile:
    leader: LayeredStrategy
    follower: FollowerPolicy
    leader_payoff: float
    follower_payoff: float
    welfare: float
    method: SolveMethod

    def __post_init__(self):
        if abs(self.welfare - (self.leader_payoff + self.follower_payoff)) > 1e-12:
            raise ValueError("welfare must equal the payoff sum")


def observations(game: ScmasGame) -> list[Observation]:
    """Every observation the information structure can produce."""
    k_l = len(game.leader_support)
    if game.info.kind == MECHANISM:
        return [Observation(x, lay) for lay in LAYERS for x in range(k_l)]
    return [Observation(x, None) for x in range(k_l)]


def _posterior(ev: PayoffEvaluator, obs: Observation,
               leader_layer: str | None, leader_xl: np.ndarray | None):
    """Joint weights and per-joint leader actions conditioned on an observation.

    With a leader action process (layer, realized-action array), conditions
    on the event that it produced this observation (Bayes over the noise
    channel when imperfect). Off-path or without a leader process, the
    follower takes the action signal at face value and keeps its prior over
    the exogenous space.
    """
    n = len(ev.joints)
    face_value = np.full(n, obs.action_signal, dtype=int)
    prior = ev.weights / ev.weights.sum()
    if leader_xl is None:
        return face_value, prior

    kind = ev.game.info.kind
    if kind == IMPERFECT:
        w = ev.weights * ev.signal[leader_xl, obs.action_signal]
    else:
        on_path = obs.layer_signal is None or obs.layer_signal == leader_layer
        w = ev.weights * (leader_xl == obs.action_signal) if on_path else np.zeros(n)
    total = w.sum()
    if total <= 0.0:
        return face_value, prior
    return leader_xl, w / total


def _follower_value(ev: PayoffEvaluator, xl: np.ndarray, w: np.ndarray, xf: np.ndarray) -> float:
    return float(np.dot(w, ev.RF[xl, xf]))


def _best_in_layer(ev: PayoffEvaluator, xl: np.ndarray, w: np.ndarray, layer: str):
    """Best within-layer follower strategy at a posterior; ties go to the
    lowest action index / lexicographically smallest map."""
    instincts = ev.i_follower[np.arange(len(ev.joints)), xl]
    if layer == L1:
        strat = LayeredStrategy(L1)
        return _follower_value(ev, xl, w, instincts), strat
    if layer == L2:
        best_a, best_v = 0, -math.inf
        for a in range(ev.k_f):
            v = _follower_value(ev, xl, w, np.full(len(xl), a, dtype=int))
            if v > best_v:
                best_a, best_v = a, v
        return best_v, LayeredStrategy(L2, action=best_a)
    # L3: the objective is additive across instinct values, so the optimal
    # map is assembled pointwise; per-value ties at the lowest action give
    # the lexicographically smallest optimal map.
    cmap = []
    for v in range(ev.k_f):
        sel = instincts == v
        best_a, best_v = 0, -math.inf
        for a in range(ev.k_f):
            val = float(np.dot(w[sel], ev.RF[xl[sel], a]))
            if val > best_v:
                best_a, best_v = a, val
        cmap.append(best_a)
    strat = LayeredStrategy(L3, counterfactual_map=tuple(cmap))
    cmap_arr = np.asarray(cmap, dtype=int)
    return _follower_value(ev, xl, w, cmap_arr[instincts]), strat


def _best_follower_at(ev, xl, w, layers=LAYERS):
    best = None
    for layer in layers:  # L1 > L2 > L3 on ties
        v, strat = _best_in_layer(ev, xl, w, layer)
        if best is None or v > best[0]:
            best = (v, strat)
    return best[1]


def _stage2(ev: PayoffEvaluator, leader_layer: str | None,
            leader_xl: np.ndarray | None, layers=LAYERS) -> FollowerPolicy:
    responses = {}
    for obs in observations(ev.game):
        xl, w = _posterior(ev, obs, leader_layer, leader_xl)
        responses[obs] = _best_follower_at(ev, xl, w, layers)
    return FollowerPolicy(responses)


def follower_best_response(game: ScmasGame, observation: Observation,
                           follower_layer: str, *,
                           enum_cap: int = DEFAULT_ENUM_CAP) -> LayeredStrategy:
    """Best within-layer response to a single observation taken at face value."""
    ev = PayoffEvaluator(game, enum_cap=enum_cap)
    xl, w = _posterior(ev, observation, None, None)
    _, strat = _best_in_layer(ev, xl, w, follower_layer)
    return strat


def _conditional_leader_value(ev, idx, x, policy, layer_for_obs):
    """Leader reward mass from the joints in idx when the leader plays x."""
    if idx.size == 0:
        return 0.0
    if ev.game.info.kind == IMPERFECT:
        total = 0.0
        for s in range(ev.k_l):
            p = ev.signal[x, s]
            if p == 0.0:
                continue
            strat = policy.response(Observation(s, None))
            total += ev._group_value(idx, x, strat, scale=p)[0]
        return total
    lay = layer_for_obs if ev.game.info.kind == MECHANISM else None
    strat = policy.response(Observation(x, lay))
    return ev._group_value(idx, x, strat)[0]


def _pointwise_leader_map(ev, policy_for_action) -> tuple[int, ...]:
    """Assemble the leader's counterfactual map one instinct value at a time.

    policy_for_action(x) must give the follower policy in force when the
    leader's realized action is x.
    """
    cmap = []
    for v in range(ev.k_l):
        idx = np.flatnonzero(ev.i_leader == v)
        best_x, best_v = 0, -math.inf
        for x in range(ev.k_l):
            val = _conditional_leader_value(ev, idx, x, policy_for_action(x), L3)
            if val > best_v:
                best_x, best_v = x, val
        cmap.append(best_x)
    return tuple(cmap)


def _leader_candidates(ev, policy_for_action):
    """Leader strategies in tie-break order: L1, L2 by action, then L3."""
    yield LayeredStrategy(L1)
    for a in range(ev.k_l):
        yield LayeredStrategy(L2, action=a)
    if ev.k_l ** ev.k_l <= L3_ENUM_LIMIT:
        for cmap in itertools.product(range(ev.k_l), repeat=ev.k_l):
            yield LayeredStrategy(L3, counterfactual_map=cmap)
    else:
        yield LayeredStrategy(
            L3, counterfactual_map=_pointwise_leader_map(ev, policy_for_action)
        )


def _solve_backward(ev: PayoffEvaluator, follower_layers, method: SolveMethod,
                    payoff_ev: PayoffEvaluator | None = None,
                    leader_layers=LAYERS) -> EquilibriumProfile:
    """Backward induction on an evaluator (exact or empirical measure).

    Candidates inducing the same realized-action process (layer plus
    per-assignment action array) have identical stage-2 responses and
    payoffs, so both are cached on that key.
    """
    cache: dict = {}

    def evaluated(cand: LayeredStrategy):
        xl = ev.leader_actions(cand)
        key = (cand.layer, xl.tobytes())
        hit = cache.get(key)
        if hit is None:
            pol = _stage2(ev, cand.layer, xl, follower_layers)
            el, ef = ev.value_from_actions(xl, cand.layer, pol)
            hit = cache[key] = (el, ef, pol)
        return hit

    def policy_for_action(x: int) -> FollowerPolicy:
        return evaluated(LayeredStrategy(L2, action=x))[2]

    best = None
    for cand in _leader_candidates(ev, policy_for_action):
        if cand.layer not in leader_layers:
            continue
        el, ef, pol = evaluated(cand)
        if best is None or el > best[0]:
            best = (el, ef, cand, pol)

    el, ef, cand, pol = best
    if payoff_ev is not None:
        el, ef = payoff_ev.profile_value(cand, pol)
    return EquilibriumProfile(
        leader=cand,
        follower=pol,
        leader_payoff=el,
        follower_payoff=ef,
        welfare=el + ef,
        method=method,
    )


def exact_scne(game: ScmasGame, *, enum_cap: int = DEFAULT_ENUM_CAP,
               action_cap: int | None = None) -> EquilibriumProfile:
    """Exact equilibrium by exhaustive backward induction."""
    cap = _action_cap(action_cap)
    if max(len(game.leader_support), len(game.follower_support)) > cap:
        raise ActionSpaceTooLarge(
            f"action spaces exceed the exact-solver cap {cap} "
            "(set SCMAS_EXACT_CAP or use the sampling solver)"
        )
    ev = PayoffEvaluator(game, enum_cap=enum_cap)
    return _solve_backward(ev, LAYERS, SolveMethod("exact"))


def classical_stackelberg(game: ScmasGame, *, enum_cap: int = DEFAULT_ENUM_CAP,
                          action_cap: int | None = None) -> EquilibriumProfile:
    """Baseline: both agents restricted to deliberate (L2) play; the follower
    keys only on the action signal, so its response is constant across layer
    signals."""
    cap = _action_cap(action_cap)
    if max(len(game.leader_support), len(game.follower_support)) > cap:
        raise ActionSpaceTooLarge(
            f"action spaces exceed the exact-solver cap {cap}"
        )
    ev = PayoffEvaluator(game, enum_cap=enum_cap)
    return _solve_backward(
        ev, (L2,), SolveMethod("classical_l2"), leader_layers=(L2,)
    )


def approx_scne(game: ScmasGame, epsilon: float, seed: int, *,
                sample_constant: float = DEFAULT_SAMPLE_CONSTANT,
                enum_cap: int = DEFAULT_ENUM_CAP) -> EquilibriumProfile:
    """Sampling approximation: empirical best responses on N causal draws.

    N = ceil(c * eps^-2 * ln(max(|X_L|, |X_F|, 2))). The returned strategies
    come from the empirical comparison; the reported payoffs are recomputed
    exactly when the exogenous space is enumerable, so the profile invariant
    (payoffs reproducible from the stored strategies) holds either way.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    k = max(len(game.leader_support), len(game.follower_support), 2)
    n = math.ceil(sample_constant * epsilon ** -2 * math.log(k))
    n = max(n, 1)
    joints = sample_exogenous(game.scm, seed, n)
    try:
        payoff_ev = PayoffEvaluator(game, enum_cap=enum_cap)
    except CapExceeded:
        payoff_ev = None
    if payoff_ev is not None:
        ids = game.scm.exogenous_ids
        index = {tuple(u[k] for k in ids): j for j, u in enumerate(payoff_ev.joints)}
        idx = [index[tuple(u[k] for k in ids)] for u in joints]
        ev = payoff_ev.restricted_to(joints, idx)
    else:
        ev = PayoffEvaluator(game, joints=joints, weights=np.full(n, 1.0 / n))
    method = SolveMethod("approx", epsilon=epsilon, seed=seed, n_samples=n)
    return _solve_backward(ev, LAYERS, method, payoff_ev=payoff_ev)


def _satisficing_policy(ev: PayoffEvaluator, eps_sat: float) -> FollowerPolicy:
    responses = {}
    for obs in observations(ev.game):
        xl, w = _posterior(ev, obs, None, None)
        vals = [
            _follower_value(ev, xl, w, np.full(len(xl), a, dtype=int))
            for a in range(ev.k_f)
        ]
        top = max(vals)
        accept = [a for a, v in enumerate(vals) if v >= top - eps_sat]
        weights = [0.0] * ev.k_f
        for a in accept:
            weights[a] = 1.0 / len(accept)
        responses[obs] = MixedResponse(tuple(weights))
    return FollowerPolicy(responses)


def satisficing_scne(game: ScmasGame, eps_sat: float, *,
                     enum_cap: int = DEFAULT_ENUM_CAP,
                     action_cap: int | None = None) -> EquilibriumProfile:
    """Follower accepts anything within eps_sat of its best reward at each
    observation and mixes uniformly over the acceptance set; the leader
    best-responds to that mixture exactly."""
    if eps_sat < 0:
        raise ValueError("eps_sat must be nonnegative")
    cap = _action_cap(action_cap)
    if max(len(game.leader_support), len(game.follower_support)) > cap:
        raise ActionSpaceTooLarge(
            f"action spaces exceed the exact-solver cap {cap}"
        )
    ev = PayoffEvaluator(game, enum_cap=enum_cap)
    pol = _satisficing_policy(ev, eps_sat)
    best = _best_leader_vs_policy(ev, pol)
    el, ef = ev.profile_value(best, pol)
    return EquilibriumProfile(
        leader=best,
        follower=pol,
        leader_payoff=el,
        follower_payoff=ef,
        welfare=el + ef,
        method=SolveMethod("satisficing", eps_sat=eps_sat),
    )


def _best_leader_vs_policy(ev: PayoffEvaluator, pol: FollowerPolicy) -> LayeredStrategy:
    """Leader's best (layer, strategy) against one fixed follower policy."""
    best = None
    cache: dict = {}
    for cand in _leader_candidates(ev, lambda x: pol):
        xl = ev.leader_actions(cand)
        key = (cand.layer, xl.tobytes())
        el = cache.get(key)
        if el is None:
            el = cache[key] = ev.value_from_actions(xl, cand.layer, pol)[0]
        if best is None or el > best[0]:
            best = (el, cand)
    return best[1]


def trembling_hand_check(game: ScmasGame, profile: EquilibriumProfile,
                         eps_grid=DEFAULT_TREMBLE_GRID, *,
                         enum_cap: int = DEFAULT_ENUM_CAP) -> bool:
    """Finite-grid surrogate for trembling-hand perfection.

    For each grid epsilon the follower is forced to put probability epsilon
    on every action, the rest on its best-response action per observation;
    the check passes if the leader's equilibrium choice stays optimal (under
    the tie-break rule) against every such perturbation. This is a sound
    desk-scale surrogate for the limit definition, not the limit itself.
    """
    ev = PayoffEvaluator(game, enum_cap=enum_cap)
    leader_xl = ev.leader_actions(profile.leader)
    for eps in eps_grid:
        extra = 1.0 - ev.k_f * eps
        if extra < 0:
            raise ValueError(f"epsilon {eps} too large for {ev.k_f} actions")
        responses = {}
        for obs in observations(game):
            xl, w = _posterior(ev, obs, profile.leader.layer, leader_xl)
            best_a, best_v = 0, -math.inf
            for a in range(ev.k_f):
                v = _follower_value(ev, xl, w, np.full(len(xl), a, dtype=int))
                if v > best_v:
                    best_a, best_v = a, v
            weights = [eps] * ev.k_f
            weights[best_a] += extra
            responses[obs] = MixedResponse(tuple(weights))
        pol = FollowerPolicy(responses)
        if _best_leader_vs_policy(ev, pol) != profile.leader:
            return False
    return True


# --- forward induction ------------------------------------------------------

FORWARD_INDUCTION_MAP_LIMIT = 4096


def _belief_posterior(ev: PayoffEvaluator, obs: Observation):
    """Posterior a follower holds at obs when attributing it to this type.

    An instinctive-layer signal is attributed to the type's natural play (its
    instinct distribution); deliberate and counterfactual signals pin the
    action to the observed one.
    """
    prior = ev.weights / ev.weights.sum()
    if obs.layer_signal == L1:
        return ev.i_leader, prior
    return np.full(len(ev.joints), obs.action_signal, dtype=int), prior


def _response_value(ev, xl, w, strat) -> float:
    if isinstance(strat, MixedResponse):
        return sum(
            p * _follower_value(ev, xl, w, np.full(len(xl), a, dtype=int))
            for a, p in enumerate(strat.weights) if p
        )
    instincts = ev.i_follower[np.arange(len(ev.joints)), xl]
    if strat.layer == L1:
        xf = instincts
    elif strat.layer == L2:
        xf = np.full(len(xl), strat.action, dtype=int)
    else:
        xf = np.asarray(strat.counterfactual_map, dtype=int)[instincts]
    return _follower_value(ev, xl, w, xf)


def _leader_alternatives(k_l: int):
    out = [LayeredStrategy(L1)]
    out += [LayeredStrategy(L2, action=a) for a in range(k_l)]
    if k_l ** k_l <= 256:
        out += [
            LayeredStrategy(L3, counterfactual_map=m)
            for m in itertools.product(range(k_l), repeat=k_l)
        ]
    else:
        out += [
            LayeredStrategy(L3, counterfactual_map=(a,) * k_l) for a in range(k_l)
        ]
    return out


def _choice_for_observation(ev: PayoffEvaluator, obs: Observation):
    """The leader choice that would have produced this observation, or None
    if this type cannot produce it."""
    if obs.layer_signal == L2:
        return LayeredStrategy(L2, action=obs.action_signal)
    if obs.layer_signal == L1:
        if not np.any((ev.i_leader == obs.action_signal) & (ev.weights > 0)):
            return None
        return LayeredStrategy(L1)
    return LayeredStrategy(L3, counterfactual_map=(obs.action_signal,) * ev.k_l)


def forward_induction_filter(games: list[ScmasGame],
                             profiles: list[EquilibriumProfile], *,
                             enum_cap: int = DEFAULT_ENUM_CAP) -> list[EquilibriumProfile]:
    """Drop profiles whose off-path responses are explicable only by beliefs
    in leader types for whom the observed choice is never optimal.

    A type is plausible at an off-path observation if some assignment of
    pure follower responses to observations makes the observed (layer,
    action) choice weakly optimal for that type. A profile is removed when
    some off-path observation's stored response best-responds to a belief
    pinned on an implausible type while no plausible type rationalizes it.
    """
    if len(games) < 2:
        raise TypeSetTooSmall("need at least two leader types")
    shape = (games[0].leader_support, games[0].follower_support)
    for g in games:
        if g.info.kind != MECHANISM:
            raise TypeMismatch("forward induction requires mechanism information")
        if (g.leader_support, g.follower_support) != shape:
            raise TypeMismatch("leader types must share the action shape")
    if not profiles:
        return []

    evs = [PayoffEvaluator(g, enum_cap=enum_cap) for g in games]
    obs_list = observations(games[0])
    k_f = len(games[0].follower_support)
    n_maps = k_f ** len(obs_list)
    if n_maps > FORWARD_INDUCTION_MAP_LIMIT:
        raise TooLarge(f"{n_maps} follower response maps exceed the filter limit")

    response_maps = []
    for combo in itertools.product(range(k_f), repeat=len(obs_list)):
        response_maps.append(FollowerPolicy({
            o: LayeredStrategy(L2, action=a) for o, a in zip(obs_list, combo)
        }))

    alternatives = _leader_alternatives(len(games[0].leader_support))

    def plausible(t: int, obs: Observation) -> bool:
        choice = _choice_for_observation(evs[t], obs)
        if choice is None:
            return False
        for pol in response_maps:
            v_choice = evs[t].profile_value(choice, pol)[0]
            if all(
                v_choice >= evs[t].profile_value(alt, pol)[0] - 1e-12
                for alt in alternatives
            ):
                return True
        return False

    def rationalized(t: int, obs: Observation, strat) -> bool:
        xl, w = _belief_posterior(evs[t], obs)
        val = _response_value(evs[t], xl, w, strat)
        best = max(
            _response_value(evs[t], xl, w, LayeredStrategy(L2, action=a))
            for a in range(k_f)
        )
        return val >= best - 1e-12

    kept = []
    for prof in profiles:
        reached = set()
        for t in range(len(games)):
            xl = evs[t].leader_actions(prof.leader)
            for x in np.unique(xl[evs[t].weights > 0]):
                reached.add(Observation(int(x), prof.leader.layer))
        removed = False
        for obs in obs_list:
            if obs in reached:
                continue
            strat = prof.follower.response(obs)
            plaus = [t for t in range(len(games)) if plausible(t, obs)]
            implaus = [t for t in range(len(games)) if t not in plaus]
            if not plaus or not implaus:
                continue
            if any(rationalized(t, obs, strat) for t in implaus) and not any(
                rationalized(t, obs, strat) for t in plaus
            ):
                removed = True
                break
        if not removed:
            kept.append(prof)
    return kept


# --- serialization ----------------------------------------------------------


def strategy_to_dict(strat) -> dict:
    if isinstance(strat, MixedResponse):
        return {"mixture": list(strat.weights)}
    out = {"layer": strat.layer}
    if strat.layer == L2:
        out["action"] = strat.action
    elif strat.layer == L3:
        out["map"] = list(strat.counterfactual_map)
    return out


def profile_to_dict(profile: EquilibriumProfile) -> dict:
    entries = []
    for obs in sorted(
        profile.follower.responses,
        key=lambda o: (o.layer_signal or "", o.action_signal),
    ):
        entries.append({
            "observation": {
                "action_signal": obs.action_signal,
                "layer_signal": obs.layer_signal,
            },
            "response": strategy_to_dict(profile.follower.responses[obs]),
        })
    return {
        "method": profile.method.to_dict(),
        "leader": strategy_to_dict(profile.leader),
        "follower": entries,
        "leader_payoff": profile.leader_payoff,
        "follower_payoff": profile.follower_payoff,
        "welfare": profile.welfare,
    }
