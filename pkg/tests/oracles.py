"""Shared brute-force oracles used by module and acceptance tests.

These re-derive expected values through independent computations (dense
grids, exhaustive enumeration, direct linear algebra) rather than through
the code paths they check.
"""

import numpy as np

from zdmtd.game import GameSpec
from zdmtd.markov import EPSILON_MIX
from zdmtd.mdp import defender_utility_under_br
from zdmtd.programs import ZdSolveResult, realize_params, solve_optimal


def random_game(k, rng, scale=1.0):
    unc = rng.normal(size=k) * scale
    cov = unc + rng.uniform(0.1, 2, size=k)
    order = np.argsort(-cov, kind="stable")
    return GameSpec(k, cov[order], unc[order],
                    rng.normal(size=k)[order] * scale,
                    rng.normal(size=k)[order] * scale)


def ideal_feasible_game(k, rng, scale=1.0):
    """Random game whose attacker values take the equalizer-friendly shape
    (covered value at label 1 reappears as the middle uncovered values), so
    the ideal program is feasible by construction."""
    unc = rng.normal(size=k) * scale
    cov = unc + rng.uniform(0.1, 2, size=k)
    order = np.argsort(-cov, kind="stable")
    t = float(rng.normal()) * scale
    u_a_cov = np.empty(k)
    u_a_unc = np.empty(k)
    u_a_cov[0] = t
    u_a_cov[1:] = t + rng.uniform(0, 2, size=k - 1) * scale
    u_a_unc[0] = t + rng.uniform(0, 2) * scale
    u_a_unc[1 : k - 1] = t
    u_a_unc[k - 1] = t - rng.uniform(0.1, 2) * scale
    return GameSpec(k, cov[order], unc[order], u_a_cov, u_a_unc)


def phi_grid_feasible_k2(g, p, lo=0.0, hi=10.0, step=1e-2, tol=1e-9):
    """Grid oracle for the K=2 existence inequalities over phi_1 (phi_2 = 0)."""
    c1 = p.alpha * g.u_d_cov[0] + p.beta * g.u_a_cov[0] + p.gamma
    c2 = p.alpha * g.u_d_cov[1] + p.beta * g.u_a_cov[1] + p.gamma
    u1 = p.alpha * g.u_d_unc[0] + p.beta * g.u_a_unc[0] + p.gamma
    u2 = p.alpha * g.u_d_unc[1] + p.beta * g.u_a_unc[1] + p.gamma
    phis = np.arange(lo, hi + step / 2, step)
    ok = (
        (c1 >= -phis - tol) & (c1 <= tol)
        & (c2 >= -tol) & (c2 <= phis + tol)
        & (u1 >= -tol) & (u1 <= phis + tol)
        & (u2 >= -phis - tol) & (u2 <= tol)
    )
    return bool(np.any(ok))


def k2_grid_oracle(g: GameSpec, step: float = 1e-2, tol: float = 1e-9):
    """Best realized defender value over a dense sphere grid of normalized
    line coefficients at the given angular resolution.

    Every grid direction is existence-checked through the K=2 inequalities
    (covered value at 1 nonpositive, at 2 nonnegative, uncovered reversed);
    feasible ones are constructed by the explicit one-step formula and
    scored under exhaustive attacker best response with the optimistic tie
    rule, all batched in numpy.
    """
    assert g.k == 2
    thetas = np.arange(step / 2, np.pi, step)
    phis = np.arange(0.0, 2 * np.pi, step)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    dirs = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)

    cov = np.column_stack([g.u_d_cov, g.u_a_cov, np.ones(2)])
    unc = np.column_stack([g.u_d_unc, g.u_a_unc, np.ones(2)])
    c1, c2 = dirs @ cov[0], dirs @ cov[1]
    u1, u2 = dirs @ unc[0], dirs @ unc[1]
    feas = (c1 <= tol) & (c2 >= -tol) & (u1 >= -tol) & (u2 <= tol)

    c1, c2, u1, u2 = c1[feas], c2[feas], u1[feas], u2[feas]
    tight = np.maximum.reduce([-c1, c2, u1, -u2])
    alg = np.abs(u1) + np.abs(c1)  # explicit construction's multiplier
    phi1 = np.where(alg >= tight - 1e-15, alg, tight)
    ok = phi1 > 1e-9
    c1, c2, u1, u2, phi1 = c1[ok], c2[ok], u1[ok], u2[ok], phi1[ok]
    n = len(phi1)
    if n == 0:
        return -np.inf, 0

    # one-step construction: column of target 1 over states (11, 12, 21, 22)
    r = np.column_stack([c1, u2, u1, c2])
    col1 = np.clip(r / phi1[:, None] + np.array([1.0, 1.0, 0.0, 0.0]), 0.0, 1.0)
    rows = np.stack([col1, 1.0 - col1], axis=-1)  # n x 4 x 2

    eps = EPSILON_MIX
    f = (1.0 - eps) * rows + eps / 2.0
    w = (1.0 - eps) * np.eye(2) + eps / 2.0
    pols = ((np.arange(16)[:, None] // (2 ** (3 - np.arange(4)))) % 2)
    wr = w[pols]  # 16 x 4 x 2
    m = np.einsum("gsd,psa->gpsda", f, wr).reshape(n, 16, 4, 4)
    a = np.swapaxes(m, -1, -2) - np.eye(4)
    a[..., -1, :] = 1.0
    b = np.zeros((4, 1))
    b[-1, 0] = 1.0
    v = np.linalg.solve(a, np.broadcast_to(b, (n, 16, 4, 1)))[..., 0]

    sd = np.array([g.u_d_cov[0], g.u_d_unc[1], g.u_d_unc[0], g.u_d_cov[1]])
    sa = np.array([g.u_a_cov[0], g.u_a_unc[1], g.u_a_unc[0], g.u_a_cov[1]])
    u_d = v @ sd
    u_a = v @ sa
    gain = u_a.max(axis=1)
    tie = u_a >= gain[:, None] - 1e-9
    value = np.where(tie, u_d, -np.inf).max(axis=1)
    return float(value.max()), n


def pipeline_value(g: GameSpec, result: ZdSolveResult = None):
    """Realized defender utility of the solve pipeline's strategy under
    attacker best response (None when no strategy exists)."""
    if result is None:
        result = solve_optimal(g)
    if result.kind == "none":
        return None
    if result.kind == "ideal":
        built = realize_params(g, result.params, result.role1, result.role_k)
    else:
        built = realize_params(g, result.params, result.cell.i1, result.cell.i2)
    if built is None:
        return None
    strategy, _, _ = built
    pair, _ = defender_utility_under_br(g, strategy)
    return pair.u_d
