"""Linear-parameter search for zero-determinant strategies.

Two programs, mirroring the construction algorithm's first step:

* the ideal program -- a small feasibility LP pinning the enforced line
  through the best covered outcome (label 1) with sign conditions at a
  second reference target; feasible parameters give the defender the full
  Stackelberg value under attacker best response;
* the optimal program -- when no ideal line exists, enumerate the cells of
  parameter space cut out by the uncovered-value equalities (all targets
  except an ordered pair (i1, i2)), and on each cell maximize the
  defender's coordinate over the intersection of the enforced line with
  the convex hull of attainable utility pairs.

The bilinear coupling between the line coefficients and the utility point
disappears inside a cell: the coefficients live in a low-dimensional cone,
so the search reduces to finitely many candidate rays (cone extreme rays,
lines through hull vertices, and an angular sweep with local refinement),
each certified by direct constraint re-verification.  Candidates are also
screened through the existence inequalities in the construction frame, and
at desk scale each surviving candidate is realized and scored under actual
attacker best response.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec, relabeling
from .lp import EQ, GE, LE, check_feasible
from .markov import UtilityPair
from .mdp import defender_utility_under_br
from .zd import (
    WeightParams,
    ZdConstructionError,
    ZdLinearParams,
    _eq8_existence,
    construct_strategy,
)

FEAS_TOL = 1e-9
CERT_TOL = 1e-8
_SWEEP_STEP = 1e-3  # radians
_BR_EVAL_MAX_K = 12


@dataclass(frozen=True)
class LambdaCell:
    """Ordered target pair whose cell fixes the uncovered equalities at all
    other targets plus four sign conditions at (i1, i2)."""

    i1: int
    i2: int

    def __post_init__(self):
        if self.i1 == self.i2:
            raise ValueError("cell indices must differ")


@dataclass(frozen=True)
class HullPolygon:
    """Convex hull of the 2K utility pairs, counterclockwise; degenerate
    hulls (segment, point) keep their reduced vertex list."""

    vertices: np.ndarray

    @property
    def n(self) -> int:
        return len(self.vertices)

    def contains(self, x: float, y: float, tol: float = FEAS_TOL) -> bool:
        v = self.vertices
        scale = max(1.0, float(np.max(np.abs(v))))
        if self.n == 1:
            return bool(np.hypot(x - v[0, 0], y - v[0, 1]) <= tol * scale)
        if self.n == 2:
            a, b = v
            d = b - a
            t = float(np.clip(np.dot([x - a[0], y - a[1]], d) / max(d @ d, 1e-300), 0, 1))
            px, py = a + t * d
            return bool(np.hypot(x - px, y - py) <= tol * scale)
        for i in range(self.n):
            ax, ay = v[i]
            bx, by = v[(i + 1) % self.n]
            cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
            if cross < -tol * scale * max(1.0, np.hypot(bx - ax, by - ay)):
                return False
        return True

    def line_section(self, a: float, b: float, c: float, tol: float = FEAS_TOL):
        """Points where the line a*x + b*y + c = 0 meets the hull boundary
        (plus vertices lying on it); empty when the line misses the hull."""
        norm = np.hypot(a, b)
        if norm < 1e-300:
            return []
        a, b, c = a / norm, b / norm, c / norm
        v = self.vertices
        scale = max(1.0, float(np.max(np.abs(v))))
        f = a * v[:, 0] + b * v[:, 1] + c
        pts = [tuple(v[i]) for i in range(self.n) if abs(f[i]) <= tol * scale]
        m = self.n if self.n > 2 else self.n - 1
        for i in range(max(m, 0)):
            j = (i + 1) % self.n
            if f[i] * f[j] < 0:
                t = f[i] / (f[i] - f[j])
                p = v[i] + t * (v[j] - v[i])
                pts.append((float(p[0]), float(p[1])))
        return pts


@dataclass(frozen=True)
class ZdSolveResult:
    kind: str  # ideal | optimal | none
    params: ZdLinearParams = None
    predicted: UtilityPair = None
    realized: UtilityPair = None
    cell: LambdaCell = None
    role1: int = None
    role_k: int = None
    certificate: dict = field(default_factory=dict)


def hull(g: GameSpec) -> HullPolygon:
    """Monotone-chain convex hull of the 2K covered/uncovered utility pairs."""
    pts = np.concatenate(
        [np.column_stack([g.u_d_cov, g.u_a_cov]), np.column_stack([g.u_d_unc, g.u_a_unc])]
    )
    uniq = np.unique(pts, axis=0)  # lexicographic sort included
    if len(uniq) == 1:
        return HullPolygon(uniq)

    def half(points):
        out = []
        for p in points:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(uniq)
    upper = half(uniq[::-1])
    verts = np.array(lower[:-1] + upper[:-1])
    if len(verts) < 2:  # all points collinear and reduced
        verts = np.array([uniq[0], uniq[-1]])
    return HullPolygon(verts)


def _cov_row(g: GameSpec, t: int) -> np.ndarray:
    return np.array([g.u_d_cov[t - 1], g.u_a_cov[t - 1], 1.0])


def _unc_row(g: GameSpec, t: int) -> np.ndarray:
    return np.array([g.u_d_unc[t - 1], g.u_a_unc[t - 1], 1.0])


@dataclass(frozen=True)
class IdealResult:
    found: bool
    params: ZdLinearParams = None
    role1: int = None
    role_k: int = None


def solve_ideal(g: GameSpec) -> IdealResult:
    """Feasibility of the ideal-line program.

    The displayed program pins targets 1 and K into specific roles after a
    relabeling that only fixes the argmax; we therefore try every argmax
    tie in the "1" role and every other target in the "K" role, and exclude
    the all-zero solution with the lossless normalization beta - alpha >= 1
    (the system is homogeneous with alpha <= 0 <= beta).
    """
    if g.u_d_cov[0] < np.max(g.u_d_cov) - 1e-12:
        raise ValueError("game must be canonicalized (label 1 carries max covered profit)")
    top = [t for t in range(1, g.k + 1) if g.u_d_cov[t - 1] >= np.max(g.u_d_cov) - 1e-9]
    for role1 in top:
        for role_k in range(1, g.k + 1):
            if role_k == role1:
                continue
            rows = [(_cov_row(g, role1), EQ, 0.0),
                    (_cov_row(g, role_k), GE, 0.0),
                    (_unc_row(g, role1), GE, 0.0)]
            for t in range(1, g.k + 1):
                if t not in (role1, role_k):
                    rows.append((_unc_row(g, t), EQ, 0.0))
            rows.append((_unc_row(g, role_k), LE, 0.0))
            rows.append((np.array([1.0, 0.0, 0.0]), LE, 0.0))
            rows.append((np.array([0.0, 1.0, 0.0]), GE, 0.0))
            rows.append((np.array([-1.0, 1.0, 0.0]), GE, 1.0))
            res = check_feasible(rows, 3)
            if res.feasible:
                p = ZdLinearParams(*res.x).normalized()
                return IdealResult(True, p, role1, role_k)
    return IdealResult(False)


@dataclass(frozen=True)
class CorollaryReport:
    equalizer: bool
    extortion: bool
    generous: bool
    theta: float
    chi: float = None


def check_corollaries(g: GameSpec, theta: float = 0.0, tol: float = FEAS_TOL) -> CorollaryReport:
    """Fast sufficient conditions for an ideal line of each typical class.

    The extortion/generous conditions are evaluated in the orientation
    consistent with the ideal program's sign constraints (alpha <= 0 <=
    beta); see the repo notes on the orientation of the printed lists.
    Requires canonical labels; theta is the caller's surplus baseline.
    """
    if g.u_d_cov[0] < np.max(g.u_d_cov) - 1e-12:
        raise ValueError("game must be canonicalized (label 1 carries max covered profit)")
    k = g.k
    t1, tk = 1, k

    mids_eq = all(abs(g.u_a_unc[t - 1] - g.u_a_cov[0]) <= tol for t in range(2, k))
    equalizer = (
        g.u_a_cov[tk - 1] >= g.u_a_cov[0] - tol
        and g.u_a_unc[0] >= g.u_a_cov[0] - tol
        and g.u_a_unc[tk - 1] <= g.u_a_cov[0] + tol
        and mids_eq
    )

    if abs(g.u_a_cov[0] - theta) <= 1e-12:
        raise ValueError(
            f"chi undefined: attacker covered value at label 1 equals theta={theta}"
        )
    chi = (g.u_d_cov[0] - theta) / (g.u_a_cov[0] - theta)

    def expr(ud, ua):
        return (ud - theta) - chi * (ua - theta)

    shape = (
        expr(g.u_d_cov[tk - 1], g.u_a_cov[tk - 1]) <= tol
        and expr(g.u_d_unc[tk - 1], g.u_a_unc[tk - 1]) >= -tol
        and expr(g.u_d_unc[0], g.u_a_unc[0]) <= tol
        and all(
            abs(expr(g.u_d_unc[t - 1], g.u_a_unc[t - 1])) <= tol for t in range(2, k)
        )
    )
    extortion = bool(shape and chi >= 1.0 - 1e-12)
    generous = bool(shape and -1e-12 <= chi <= 1.0 + 1e-12)
    return CorollaryReport(bool(equalizer), extortion, generous, theta, chi)


def _null_space(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis (3 x d) of the null space of a (m x 3) system."""
    if rows.size == 0:
        return np.eye(3)
    u, s, vt = np.linalg.svd(rows)
    rank = int(np.sum(s > FEAS_TOL * max(1.0, s[0] if len(s) else 1.0)))
    return vt[rank:].T


def _cell_ineq_rows(g: GameSpec, cell: LambdaCell) -> np.ndarray:
    """Rows r with the cell requiring r @ p >= 0."""
    return np.array([
        -_cov_row(g, cell.i1),
        _unc_row(g, cell.i1),
        _cov_row(g, cell.i2),
        -_unc_row(g, cell.i2),
    ])


def _cone_rays_2d(gmat: np.ndarray, basis: np.ndarray):
    """Extreme rays of {z in R^2 : (G B) z >= 0}, mapped back to R^3."""
    gb = gmat @ basis
    rays = []
    for row in gb:
        if np.hypot(row[0], row[1]) < 1e-14:
            continue
        for z in (np.array([-row[1], row[0]]), np.array([row[1], -row[0]])):
            if np.all(gb @ z >= -FEAS_TOL * max(1.0, float(np.max(np.abs(gb))))):
                rays.append(basis @ z)
    return rays


def _cone_rays_3d(gmat: np.ndarray):
    """Extreme rays of {p in R^3 : G p >= 0} from pairs of active rows."""
    rays = []
    scale = max(1.0, float(np.max(np.abs(gmat))))
    m = len(gmat)
    for i in range(m):
        for j in range(i + 1, m):
            basis = _null_space(np.array([gmat[i], gmat[j]]))
            if basis.shape[1] != 1:
                continue
            for s in (1.0, -1.0):
                r = s * basis[:, 0]
                if np.all(gmat @ r >= -FEAS_TOL * scale):
                    rays.append(r)
    return rays


def _sweep_2d(gmat: np.ndarray, basis: np.ndarray, value):
    """Angular sweep over the unit circle of the 2-d coefficient space with
    local refinement around the best feasible sample."""
    gb = gmat @ basis
    scale = max(1.0, float(np.max(np.abs(gb))))
    ts = np.arange(0.0, 2 * np.pi, _SWEEP_STEP)
    best_t, best_v = None, -np.inf
    for t in ts:
        z = np.array([np.cos(t), np.sin(t)])
        if np.any(gb @ z < -FEAS_TOL * scale):
            continue
        v = value(basis @ z)
        if v is not None and v > best_v:
            best_t, best_v = t, v
    if best_t is None:
        return []
    lo, hi = best_t - _SWEEP_STEP, best_t + _SWEEP_STEP
    for _ in range(24):
        for t in (lo + (hi - lo) / 3, hi - (hi - lo) / 3):
            z = np.array([np.cos(t), np.sin(t)])
            if np.all(gb @ z >= -FEAS_TOL * scale):
                v = value(basis @ z)
                if v is not None and v > best_v:
                    best_t, best_v = t, v
        lo, hi = best_t - (hi - lo) / 3, best_t + (hi - lo) / 3
    return [basis @ np.array([np.cos(best_t), np.sin(best_t)])]


def _cell_candidates(g: GameSpec, cell: LambdaCell, hp: HullPolygon):
    """Finite family of candidate coefficient vectors for one cell."""
    eq_rows = np.array([_unc_row(g, t) for t in range(1, g.k + 1)
                        if t not in (cell.i1, cell.i2)])
    basis = _null_space(eq_rows.reshape(-1, 3) if eq_rows.size else np.zeros((0, 3)))
    d = basis.shape[1]
    if d == 0:
        return []
    gmat = _cell_ineq_rows(g, cell)
    scale = max(1.0, float(np.max(np.abs(gmat))))

    def feasible(p):
        return np.all(gmat @ p >= -FEAS_TOL * scale)

    def predicted_value(p):
        pts = hp.line_section(p[0], p[1], p[2])
        if not pts:
            return None
        return _directional_value(p, pts)

    cands = []
    if d == 1:
        for s in (1.0, -1.0):
            p = s * basis[:, 0]
            if feasible(p):
                cands.append(p)
        return cands

    def sub_candidates(extra_row):
        """Candidates on the slice where one extra homogeneous row binds."""
        stacked = (np.vstack([eq_rows.reshape(-1, 3), extra_row])
                   if eq_rows.size else extra_row.reshape(1, 3))
        sub = _null_space(stacked)
        dd = sub.shape[1]
        if dd == 1:
            for s in (1.0, -1.0):
                p = s * sub[:, 0]
                if feasible(p):
                    cands.append(p)
        elif dd == 2:
            cands.extend(r for r in _cone_rays_2d(gmat, sub) if feasible(r))
            cands.extend(_sweep_2d(gmat, sub, predicted_value))

    if d == 2:
        cands.extend(r for r in _cone_rays_2d(gmat, basis) if feasible(r))
    if d == 3:
        cands.extend(_cone_rays_3d(gmat))
        for row in gmat:  # optima with one sign condition active
            sub_candidates(row)

    # lines through each hull vertex: one extra homogeneous equality
    for vx, vy in hp.vertices:
        sub_candidates(np.array([vx, vy, 1.0]))

    if d == 2:
        cands.extend(_sweep_2d(gmat, basis, predicted_value))
    return cands


def _normalize(p: np.ndarray) -> ZdLinearParams:
    return ZdLinearParams(*p).normalized()


def _directional_value(p, pts) -> float:
    """Defender value a best-responding attacker lets the line realize.

    The attacker maximizes its own coordinate along the enforced segment:
    with nonnegative correlation (or an indifferent attacker under the
    optimistic tie rule) that is the max-u_d end, otherwise the min-u_d end.
    """
    xs = [x for x, _ in pts]
    if abs(p[0]) <= 1e-12 or (abs(p[1]) > 1e-12 and -p[0] / p[1] >= 0):
        return max(xs)
    return min(xs)


def realize_params(g: GameSpec, p: ZdLinearParams, i1: int, i2: int,
                   omega: WeightParams = None):
    """Build the strategy for cell-frame (i1 -> label 1, i2 -> label K) and
    return (strategy-in-g-labels, phi-in-frame, frame) or None.

    When every line value vanishes (the line contains all covered and
    uncovered pairs), enforcement is vacuous and the recursion has nothing to
    divide by; the trivial repeat-own-action strategy realizes it.
    """
    from .game import repeat_strategy
    from .zd import ZdStrategy, classify, defining_residual

    frame = relabeling(g.k, i1, i2)
    gw = frame.apply_game(g)
    ex = _eq8_existence(gw, p)
    if not ex.exists:
        return None
    try:
        zd = construct_strategy(gw, p, ex.phi, omega)
    except ZdConstructionError:
        line_values = np.concatenate([
            p.alpha * gw.u_d_cov + p.beta * gw.u_a_cov + p.gamma,
            p.alpha * gw.u_d_unc + p.beta * gw.u_a_unc + p.gamma,
        ])
        if np.max(np.abs(line_values)) > 1e-8:
            return None
        rep = repeat_strategy(g.k)
        zd = ZdStrategy(rep, p, ex.phi,
                        defining_residual(gw, rep, p, ex.phi), classify(p))
    return frame.invert_strategy(zd.strategy), zd, frame


def solve_optimal(g: GameSpec, run_ideal_first: bool = True,
                  evaluate_br: bool = None) -> ZdSolveResult:
    """Cell-enumeration search for the best enforceable line.

    With run_ideal_first, a feasible ideal program short-circuits (kind
    "ideal").  Candidates must pass the cell constraints, the existence
    inequalities in their construction frame, and line/hull membership; at
    desk scale (or when evaluate_br is set) each surviving candidate is
    realized and scored by its defender utility under attacker best
    response, otherwise by the predicted hull value.
    """
    if g.u_d_cov[0] < np.max(g.u_d_cov) - 1e-12:
        raise ValueError("game must be canonicalized (label 1 carries max covered profit)")
    if evaluate_br is None:
        evaluate_br = g.k <= _BR_EVAL_MAX_K

    if run_ideal_first:
        ideal = solve_ideal(g)
        if ideal.found:
            t = ideal.role1 - 1
            pred = UtilityPair(float(g.u_d_cov[t]), float(g.u_a_cov[t]))
            cert = {"line_at_predicted": abs(ideal.params.alpha * pred.u_d
                                             + ideal.params.beta * pred.u_a
                                             + ideal.params.gamma)}
            return ZdSolveResult("ideal", ideal.params, pred,
                                 role1=ideal.role1, role_k=ideal.role_k,
                                 certificate=cert)

    hp = hull(g)
    best = None  # (score_key, result)
    for i1 in range(1, g.k + 1):
        for i2 in range(1, g.k + 1):
            if i1 == i2:
                continue
            cell = LambdaCell(i1, i2)
            gmat = _cell_ineq_rows(g, cell)
            scale = max(1.0, float(np.max(np.abs(gmat))))
            shortlist = []  # (corr-sign, proxy value, params, max-u_d point)
            for raw in _cell_candidates(g, cell, hp):
                p = _normalize(raw)
                vec = p.as_array()
                if np.max(np.abs(vec)) < 1e-12:
                    continue
                if np.any(gmat @ vec < -FEAS_TOL * scale):
                    continue
                pts = hp.line_section(vec[0], vec[1], vec[2])
                if not pts:
                    continue
                x, y = max(pts, key=lambda q: q[0])
                proxy = _directional_value(vec, pts)
                corr = 0 if abs(vec[0]) <= 1e-12 else (0 if -vec[1] / vec[0] >= 0 else 1)
                cur = next((s for s in shortlist if s[0] == corr), None)
                if cur is None or proxy > cur[1] + 1e-12:
                    shortlist = [s for s in shortlist if s[0] != corr]
                    shortlist.append((corr, proxy, vec, (x, y)))
            for _, proxy, vec, (x, y) in sorted(shortlist, key=lambda s: s[0]):
                p = ZdLinearParams(*vec)
                realized = None
                if evaluate_br:
                    built = realize_params(g, p, i1, i2)
                    if built is None:
                        continue
                    strategy, _, _ = built
                    pair, _ = defender_utility_under_br(g, strategy)
                    realized = pair
                else:
                    frame = relabeling(g.k, i1, i2)
                    if not _eq8_existence(frame.apply_game(g), p).exists:
                        continue
                cert = {
                    "cell_defect": float(max(0.0, -np.min(gmat @ vec) / scale)),
                    "line_at_predicted": float(abs(vec[0] * x + vec[1] * y + vec[2])),
                    "hull_member": 0.0 if hp.contains(x, y) else 1.0,
                }
                score = (realized.u_d if realized is not None else proxy, x)
                if best is None or score[0] > best[0][0] + 1e-12 or (
                    abs(score[0] - best[0][0]) <= 1e-12 and score[1] > best[0][1] + 1e-12
                ):
                    best = (score, ZdSolveResult(
                        "optimal", p, UtilityPair(x, y), realized, cell,
                        certificate=cert))
    if best is None:
        return ZdSolveResult("none")
    return best[1]
