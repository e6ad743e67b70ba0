"""Attacker best response to a committed defender strategy, solved as an
average-reward MDP over the K^2 previous-action states.

Evaluation convention shared by every oracle in this module: attacker
policies are blended with the uniform distribution at the module epsilon
(deterministic rows would otherwise produce reducible chains), and the
defender's strategy is blended the same way only when it contains zero
entries.  Under this rule every induced chain is strictly positive, so the
direct stationary solve always applies and policy iteration and exhaustive
enumeration score policies identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameSpec, MemoryOneStrategy, profit_vector
from .markov import EPSILON_MIX

BELLMAN_TOL = 1e-9
TIE_TOL = 1e-9
_SWITCH_TOL = 1e-12


class PolicyIterationCycleError(RuntimeError):
    """Policy iteration revisited a policy without improving."""


@dataclass(frozen=True)
class AttackerMdp:
    """States are flat previous-action pairs; playing a from state s moves to
    flat(d, a) with probability pi_d(d|s) and pays sum_d pi_d(d|s) u_a(d, a)."""

    g: GameSpec
    pi_d: MemoryOneStrategy
    rewards: np.ndarray  # K^2 x K

    @property
    def k(self) -> int:
        return self.g.k

    def transition(self, s: int, a: int) -> np.ndarray:
        """Dense next-state distribution for (state s, 1-based action a)."""
        k = self.k
        out = np.zeros(k * k)
        out[np.arange(k) * k + (a - 1)] = self.pi_d.rows[s]
        return out


@dataclass(frozen=True)
class BestResponse:
    policy: tuple  # 1-based target per flat state
    gain: float
    bias: np.ndarray
    policies_evaluated: int = None


def build_attacker_mdp(g: GameSpec, pi_d: MemoryOneStrategy) -> AttackerMdp:
    if g.k != pi_d.k:
        raise ValueError(f"K mismatch: game {g.k}, strategy {pi_d.k}")
    _, ua = g.payoff_matrices()
    return AttackerMdp(g, pi_d, pi_d.rows @ ua)


def _mix_matrix(k: int, eps: float = EPSILON_MIX) -> np.ndarray:
    """W[a, a'] = probability of executing a' when the policy picks a."""
    return (1.0 - eps) * np.eye(k) + eps / k


def _defender_matrix(pi_d: MemoryOneStrategy) -> np.ndarray:
    if np.min(pi_d.rows) <= 0.0:
        return (1.0 - EPSILON_MIX) * pi_d.rows + EPSILON_MIX / pi_d.k
    return pi_d.rows


def _effective_tables(g: GameSpec, pi_d: MemoryOneStrategy):
    """(F, W, R_eff, S_d, S_a): defender matrix, action mix, mixed rewards."""
    f = _defender_matrix(pi_d)
    w = _mix_matrix(g.k)
    _, ua = g.payoff_matrices()
    r_eff = (f @ ua) @ w.T
    sd = profit_vector(g, "defender").entries
    sa = profit_vector(g, "attacker").entries
    return f, w, r_eff, sd, sa


def _chain(f: np.ndarray, wrows: np.ndarray) -> np.ndarray:
    """Chain matrix from defender matrix f and per-state executed-action rows."""
    n, k = f.shape[0], f.shape[1]
    return np.einsum("sd,sa->sda", f, wrows).reshape(n, n)


def _stationary_direct(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    a = m.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(a, b)


def _policy_value(g: GameSpec, pi_d: MemoryOneStrategy, policy) -> tuple[float, float]:
    """(u_d, u_a) of the deterministic attacker policy under the shared
    evaluation convention."""
    f, w, _, sd, sa = _effective_tables(g, pi_d)
    wrows = w[np.asarray(policy, dtype=int) - 1]
    v = _stationary_direct(_chain(f, wrows))
    return float(v @ sd), float(v @ sa)


def _evaluate(f, w, r_eff, policy_idx):
    """Gain and bias (h[0] = 0) of a policy on the effective MDP."""
    n = f.shape[0]
    p = _chain(f, w[policy_idx])
    r = r_eff[np.arange(n), policy_idx]
    a = np.zeros((n + 1, n + 1))
    a[:n, :n] = np.eye(n) - p
    a[:n, n] = 1.0
    a[n, 0] = 1.0
    b = np.zeros(n + 1)
    b[:n] = r
    sol = np.linalg.solve(a, b)
    return sol[n], sol[:n], p


def best_response(mdp: AttackerMdp) -> BestResponse:
    """Howard policy iteration for the average-reward optimum.

    Deterministic: ties in the improvement step go to the lowest action
    index, and a state switches action only on a strict Q improvement.
    """
    g, pi_d = mdp.g, mdp.pi_d
    k, n = g.k, g.k * g.k
    f, w, r_eff, _, _ = _effective_tables(g, pi_d)

    policy = np.argmax(r_eff, axis=1)
    seen = {tuple(policy)}
    for _ in range(n * k + 100):
        gain, h, _ = _evaluate(f, w, r_eff, policy)
        # Q(s, a) = R_eff(s, a) + sum_d F[s, d] * sum_a' W[a, a'] h[flat(d, a')]
        q = r_eff + f @ (h.reshape(k, k) @ w.T)
        best = np.argmax(q, axis=1)
        cur = q[np.arange(n), policy]
        switch = q[np.arange(n), best] > cur + _SWITCH_TOL
        if not np.any(switch):
            u_d, u_a = _policy_value(g, pi_d, policy + 1)
            return BestResponse(tuple(int(a) + 1 for a in policy), u_a, h)
        policy = np.where(switch, best, policy)
        key = tuple(policy)
        if key in seen:
            raise PolicyIterationCycleError(
                "policy iteration revisited a policy; lexicographic tie-breaking "
                "did not resolve the cycle"
            )
        seen.add(key)
    raise PolicyIterationCycleError("policy iteration exceeded its iteration budget")


def bellman_residual(mdp: AttackerMdp, br: BestResponse) -> float:
    """max_s |gain + h(s) - max_a Q(s, a)| on the effective MDP."""
    g, pi_d = mdp.g, mdp.pi_d
    k, n = g.k, g.k * g.k
    f, w, r_eff, _, _ = _effective_tables(g, pi_d)
    q = r_eff + f @ (br.bias.reshape(k, k) @ w.T)
    return float(np.max(np.abs(br.gain + br.bias - q.max(axis=1))))


def _enumerate_policies(k: int) -> np.ndarray:
    """All deterministic policies in lexicographic order, 0-based actions."""
    n = k * k
    count = k**n
    states = np.arange(n)
    p = np.arange(count)[:, None]
    return (p // (k ** (n - 1 - states))) % k


def _policy_values_batch(g: GameSpec, pi_d: MemoryOneStrategy):
    """(u_d, u_a) for every deterministic policy, evaluated like _policy_value."""
    f, w, _, sd, sa = _effective_tables(g, pi_d)
    n = g.k * g.k
    pols = _enumerate_policies(g.k)
    wrows = w[pols]  # P x n x k
    m = np.einsum("sd,psa->psda", f, wrows).reshape(len(pols), n, n)
    a = np.transpose(m, (0, 2, 1)) - np.eye(n)
    a[:, -1, :] = 1.0
    b = np.zeros((n, 1))
    b[-1, 0] = 1.0
    v = np.linalg.solve(a, np.broadcast_to(b, (len(pols), n, 1)))[..., 0]
    return pols, v @ sd, v @ sa


def exhaustive_br(g: GameSpec, pi_d: MemoryOneStrategy) -> BestResponse:
    """Oracle: enumerate all K^(K^2) deterministic memory-one policies and
    return the maximizer of the attacker's long-run utility (ties go to the
    lexicographically smallest policy)."""
    if g.k > 3:
        raise ValueError(f"exhaustive enumeration guarded to K <= 3, got K={g.k}")
    pols, _, u_a = _policy_values_batch(g, pi_d)
    best = int(np.argmax(u_a))
    policy = tuple(int(x) + 1 for x in pols[best])
    f, w, r_eff, _, _ = _effective_tables(g, pi_d)
    _, h, _ = _evaluate(f, w, r_eff, pols[best])
    return BestResponse(policy, float(u_a[best]), h, policies_evaluated=len(pols))


def defender_utility_under_br(g: GameSpec, pi_d: MemoryOneStrategy):
    """Best response with the optimistic-follower tie rule: among attacker
    policies within TIE_TOL of the optimal gain, pick one maximizing the
    defender's utility (exact enumeration at K <= 3, candidate swaps above).

    Returns ((u_d, u_a), BestResponse-of-the-chosen-policy).
    """
    from .markov import UtilityPair

    br = best_response(build_attacker_mdp(g, pi_d))
    n = g.k * g.k

    if g.k <= 3:
        pols, u_d, u_a = _policy_values_batch(g, pi_d)
        tie = np.nonzero(u_a >= np.max(u_a) - TIE_TOL)[0]
        chosen = tie[int(np.argmax(u_d[tie]))]
        policy = tuple(int(x) + 1 for x in pols[chosen])
        pair = UtilityPair(float(u_d[chosen]), float(u_a[chosen]))
    else:
        gain_ref = br.gain
        candidates = [np.asarray(br.policy, dtype=int)]
        candidates += [np.full(n, m, dtype=int) for m in range(1, g.k + 1)]
        best_pol, best_pair = None, None
        for cand in candidates:
            ud, ua = _policy_value(g, pi_d, cand)
            if ua < gain_ref - TIE_TOL:
                continue
            if best_pair is None or ud > best_pair[0] + _SWITCH_TOL:
                best_pol, best_pair = cand.copy(), (ud, ua)
        pol = best_pol
        improved = True
        guard = 0
        while improved and guard < 50:
            improved = False
            guard += 1
            for s in range(n):
                orig = pol[s]
                for a in range(1, g.k + 1):
                    if a == orig:
                        continue
                    pol[s] = a
                    ud, ua = _policy_value(g, pi_d, pol)
                    if ua >= gain_ref - TIE_TOL and ud > best_pair[0] + _SWITCH_TOL:
                        best_pair = (ud, ua)
                        orig = a
                        improved = True
                    else:
                        pol[s] = orig
                pol[s] = orig
        policy = tuple(int(x) for x in pol)
        pair = UtilityPair(*best_pair)

    f, w, r_eff, _, _ = _effective_tables(g, pi_d)
    _, h, _ = _evaluate(f, w, r_eff, np.asarray(policy) - 1)
    chosen_br = BestResponse(policy, pair.u_a, h, br.policies_evaluated)
    return pair, chosen_br
