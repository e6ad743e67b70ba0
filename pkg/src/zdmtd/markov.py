"""Markov analysis of a strategy pair: induced K^2-state chain, stationary
distribution, long-run average utilities, and the determinant-ratio form of
the same utilities used to cross-check the linear-algebra path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameSpec, MemoryOneStrategy, profit_vector

DIRECT_RESIDUAL_TOL = 1e-10
NULLITY_SVD_TOL = 1e-10
CESARO_TOL = 1e-6
CESARO_BUDGET = 2_000_000
DET_SINGULAR_TOL = 1e-12
EPSILON_MIX = 1e-8  # shared with the best-response module so oracles agree


class StationaryError(RuntimeError):
    """Cesaro averaging did not reach the documented tolerance."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class SingularChainError(RuntimeError):
    """Determinant denominator vanished (reducible chain); use the
    stationary-based evaluator instead."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Chain over flat states; row s moves to flat(d, a) with probability
    pi_d(d|s) * pi_a(a|s), so every row is a rank-one outer product."""

    k: int
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        n = self.k * self.k
        if m.shape != (n, n):
            raise ValueError(f"transition matrix must be {n} x {n}")
        if np.min(m) < -1e-12 or np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition matrix must be row-stochastic")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "m", m)


@dataclass(frozen=True)
class StationaryDist:
    v: np.ndarray
    method: str  # direct | cesaro
    residual: float


@dataclass(frozen=True)
class UtilityPair:
    u_d: float
    u_a: float


def build_transition(pi_d: MemoryOneStrategy, pi_a: MemoryOneStrategy) -> TransitionMatrix:
    """M[s, flat(d, a)] = pi_d(d|s) * pi_a(a|s)."""
    if pi_d.k != pi_a.k:
        raise ValueError(f"strategy K mismatch: {pi_d.k} vs {pi_a.k}")
    k = pi_d.k
    m = np.einsum("sd,sa->sda", pi_d.rows, pi_a.rows).reshape(k * k, k * k)
    return TransitionMatrix(k, m)


def eps_mixed(s: MemoryOneStrategy, eps: float = EPSILON_MIX) -> MemoryOneStrategy:
    """Blend every row with the uniform distribution at weight eps.

    Reproducible tiebreak for reducible/periodic chains produced by
    deterministic strategies; the bias it introduces is O(eps).
    """
    rows = (1.0 - eps) * s.rows + eps / s.k
    return MemoryOneStrategy(s.k, rows)


def _direct_stationary(m: np.ndarray):
    """Solve v' (M - I) = 0 with the last equation replaced by sum(v) = 1."""
    n = m.shape[0]
    a = m.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        v = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    residual = float(np.max(np.abs(v @ m - v)))
    if residual > DIRECT_RESIDUAL_TOL or np.min(v) < -1e-9:
        return None
    v = np.maximum(v, 0.0)
    v /= v.sum()
    return v


def _nullity_at_least_two(m: np.ndarray) -> bool:
    sv = np.linalg.svd(m.T - np.eye(m.shape[0]), compute_uv=False)
    return bool(sv[-2] < NULLITY_SVD_TOL)


def _cesaro(m: np.ndarray):
    """Running average of the iterates from a uniform start.

    The average's fixed-point residual is bounded by 2/t for any stochastic
    matrix, so the budget guarantees the documented tolerance; the fast path
    exits early once successive averages differ by < 1e-10 and the average
    already satisfies the fixed-point equation tightly.
    """
    n = m.shape[0]
    v = np.full(n, 1.0 / n)
    avg = v.copy()
    for t in range(2, CESARO_BUDGET + 1):
        v = v @ m
        delta = (v - avg) / t
        avg = avg + delta
        if np.max(np.abs(delta)) < 1e-10:
            residual = float(np.max(np.abs(avg @ m - avg)))
            if residual <= 1e-8:
                return avg / avg.sum(), residual
    residual = float(np.max(np.abs(avg @ m - avg)))
    if residual > CESARO_TOL:
        raise StationaryError(
            f"cesaro averaging residual {residual:.3e} above {CESARO_TOL:.0e} "
            f"after {CESARO_BUDGET} iterations",
            residual=residual,
        )
    return avg / avg.sum(), residual


def stationary(tm: TransitionMatrix) -> StationaryDist:
    """Stationary distribution: direct linear solve in the unichain case,
    Cesaro averaging from the uniform start otherwise."""
    m = tm.m
    if np.min(m) > 0.0 or not _nullity_at_least_two(m):
        v = _direct_stationary(m)
        if v is not None:
            return StationaryDist(v, "direct", float(np.max(np.abs(v @ m - v))))
    v, residual = _cesaro(m)
    return StationaryDist(v, "cesaro", residual)


def long_run_utilities(g: GameSpec, pi_d: MemoryOneStrategy, pi_a: MemoryOneStrategy) -> UtilityPair:
    """Average-reward pair (v . S_d, v . S_a) at the stationary vector."""
    if not (g.k == pi_d.k == pi_a.k):
        raise ValueError("K mismatch between game and strategies")
    v = stationary(build_transition(pi_d, pi_a)).v
    sd = profit_vector(g, "defender").entries
    sa = profit_vector(g, "attacker").entries
    return UtilityPair(float(v @ sd), float(v @ sa))


def _replaced_logdet(base: np.ndarray, f: np.ndarray):
    """(sign, logabsdet) of (M - I) with its last column replaced by f."""
    d = base.copy()
    d[:, -1] = f
    return np.linalg.slogdet(d)


def det_utilities(g: GameSpec, pi_d: MemoryOneStrategy, pi_a: MemoryOneStrategy) -> UtilityPair:
    """Determinant-ratio utilities: det with last column replaced by the
    profit vector over det with it replaced by the ones vector.

    The common scale of both determinants cancels in the ratio; the
    denominator is tested against a Hadamard-scaled threshold and a
    singular chain is reported rather than evaluated.
    """
    if not (g.k == pi_d.k == pi_a.k):
        raise ValueError("K mismatch between game and strategies")
    m = build_transition(pi_d, pi_a).m
    base = m - np.eye(m.shape[0])
    ones = np.ones(m.shape[0])

    den_base = base.copy()
    den_base[:, -1] = ones
    row_norms = np.linalg.norm(den_base, axis=1)
    log_hadamard = float(np.sum(np.log(np.maximum(row_norms, 1e-300))))
    sign_den, log_den = np.linalg.slogdet(den_base)
    if sign_den == 0 or log_den - log_hadamard < np.log(DET_SINGULAR_TOL):
        raise SingularChainError(
            "denominator determinant vanishes (reducible chain); "
            "evaluate via the stationary distribution instead"
        )

    out = []
    for player in ("defender", "attacker"):
        f = profit_vector(g, player).entries
        sign_num, log_num = _replaced_logdet(base, f)
        if sign_num == 0:
            out.append(0.0)
        else:
            out.append(float(sign_num * sign_den * np.exp(log_num - log_den)))
    return UtilityPair(out[0], out[1])


def zd_residual(
    g: GameSpec,
    pi_d: MemoryOneStrategy,
    pi_a: MemoryOneStrategy,
    alpha: float,
    beta: float,
    gamma: float,
) -> float:
    """|alpha * u_d + beta * u_a + gamma| at the long-run utilities."""
    u = long_run_utilities(g, pi_d, pi_a)
    return abs(alpha * u.u_d + beta * u.u_a + gamma)
