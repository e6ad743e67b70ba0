"""Small dense linear-program kernel: two-phase simplex with Bland's rule.

Built for the tiny programs this package solves (a handful of variables,
tens of constraints).  The pivot rule is fixed -- entering variable is the
lowest-index column with negative reduced cost, leaving row breaks ratio
ties by the lowest basis index -- so identical inputs always produce
identical outcomes and cycling is impossible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-8
_EPS = 1e-9
_MAX_PIVOTS = 50_000

LE, EQ, GE = "<=", "=", ">="


class LpError(ValueError):
    """Malformed program (dimension mismatch, bad relation, non-finite rhs)."""


class LpNumericalError(RuntimeError):
    """Numerically degenerate solve; the status could not be certified."""


@dataclass(frozen=True)
class LinearProgram:
    """max/min objective @ x subject to rows (coeffs, relation, rhs) and
    per-variable bounds (lo, hi), either side None for unbounded."""

    objective: np.ndarray
    sense: str = "max"
    constraints: tuple = ()
    bounds: tuple = None  # defaults to all-free

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=float)
        if obj.ndim != 1 or obj.size < 1:
            raise LpError("objective must be a non-empty vector")
        if self.sense not in ("max", "min"):
            raise LpError(f"sense must be 'max' or 'min', got {self.sense!r}")
        n = obj.size
        rows = []
        for row, rel, rhs in self.constraints:
            r = np.asarray(row, dtype=float)
            if r.shape != (n,):
                raise LpError(f"constraint row has length {r.size}, expected {n}")
            if rel not in (LE, EQ, GE):
                raise LpError(f"relation must be one of <=, =, >=, got {rel!r}")
            if not np.isfinite(rhs):
                raise LpError("constraint rhs must be finite")
            rows.append((r, rel, float(rhs)))
        bounds = self.bounds
        if bounds is None:
            bounds = tuple((None, None) for _ in range(n))
        else:
            bounds = tuple(bounds)
            if len(bounds) != n:
                raise LpError("bounds must list one (lo, hi) pair per variable")
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "constraints", tuple(rows))
        object.__setattr__(self, "bounds", bounds)

    @property
    def n(self) -> int:
        return self.objective.size

    def dump(self) -> str:
        """Plain-text rendering for bug reports."""
        lines = [f"{self.sense} {self.objective.tolist()}"]
        for row, rel, rhs in self.constraints:
            lines.append(f"  {row.tolist()} {rel} {rhs}")
        lines.append(f"  bounds: {list(self.bounds)}")
        return "\n".join(lines)


@dataclass(frozen=True)
class LpOutcome:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray = None
    objective: float = None
    max_violation: float = None


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    x: np.ndarray = None
    violated: tuple = field(default=())  # indices of violated rows at the LP's answer


def _standardize(lp: LinearProgram):
    """Rewrite in nonnegative variables y >= 0: x_i = shift_i + sign_i * y_col.

    Free variables split into a positive and a negative part.  Finite upper
    bounds become extra <= rows.  Returns (c, rows, mapping) where mapping
    reconstructs x from y.
    """
    n = lp.n
    cols = []  # per original variable: list of (col_index, sign)
    shifts = np.zeros(n)
    extra_rows = []
    ncol = 0
    for i, (lo, hi) in enumerate(lp.bounds):
        if lo is None and hi is None:
            cols.append([(ncol, 1.0), (ncol + 1, -1.0)])
            ncol += 2
        elif lo is not None and hi is None:
            shifts[i] = lo
            cols.append([(ncol, 1.0)])
            ncol += 1
        elif lo is None and hi is not None:
            shifts[i] = hi
            cols.append([(ncol, -1.0)])
            ncol += 1
        else:
            if hi < lo:
                raise LpError(f"variable {i} has empty bound interval [{lo}, {hi}]")
            shifts[i] = lo
            cols.append([(ncol, 1.0)])
            extra_rows.append((i, ncol, hi - lo))
            ncol += 1

    def to_y(row):
        out = np.zeros(ncol)
        for i, coef in enumerate(row):
            if coef != 0.0:
                for c, s in cols[i]:
                    out[c] += coef * s
        return out

    rows = []
    for row, rel, rhs in lp.constraints:
        rows.append((to_y(row), rel, rhs - float(row @ shifts)))
    for _, c, ub in extra_rows:
        r = np.zeros(ncol)
        r[c] = 1.0
        rows.append((r, LE, ub))

    c = to_y(lp.objective)
    if lp.sense == "max":
        c = -c

    def back(y):
        x = shifts.copy()
        for i in range(n):
            for col, s in cols[i]:
                x[i] += s * y[col]
        return x

    return c, rows, ncol, back


def _simplex(c: np.ndarray, rows, ncol: int):
    """Two-phase primal simplex on min c@y, rows, y >= 0 with Bland's rule.

    Returns (status, y) with status in optimal/infeasible/unbounded.
    """
    m = len(rows)
    if m == 0:
        if np.any(c < -_EPS):
            return "unbounded", None
        return "optimal", np.zeros(ncol)

    # scale rows, force nonnegative rhs
    A = np.zeros((m, ncol))
    b = np.zeros(m)
    rels = []
    for i, (row, rel, rhs) in enumerate(rows):
        scale = max(1.0, np.max(np.abs(row))) if row.size else 1.0
        r, rv = row / scale, rhs / scale
        if rv < 0:
            r, rv = -r, -rv
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        A[i], b[i] = r, rv
        rels.append(rel)

    # slack / surplus / artificial columns
    n_slack = sum(1 for r in rels if r != EQ)
    n_art = sum(1 for r in rels if r != LE)
    width = ncol + n_slack + n_art
    T = np.zeros((m, width + 1))
    T[:, :ncol] = A
    T[:, -1] = b
    basis = np.empty(m, dtype=int)
    si, ai = ncol, ncol + n_slack
    art_cols = []
    for i, rel in enumerate(rels):
        if rel == LE:
            T[i, si] = 1.0
            basis[i] = si
            si += 1
        elif rel == GE:
            T[i, si] = -1.0
            si += 1
            T[i, ai] = 1.0
            basis[i] = ai
            art_cols.append(ai)
            ai += 1
        else:
            T[i, ai] = 1.0
            basis[i] = ai
            art_cols.append(ai)
            ai += 1

    def run(obj_row):
        """Bland simplex on the current tableau with the given objective row."""
        pivots = 0
        while True:
            enter = -1
            for j in range(width):
                if obj_row[j] < -_EPS:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            leave, best = -1, np.inf
            for i in range(m):
                a = T[i, enter]
                if a > _EPS:
                    ratio = T[i, -1] / a
                    if ratio < best - _EPS or (
                        abs(ratio - best) <= _EPS and (leave < 0 or basis[i] < basis[leave])
                    ):
                        best, leave = ratio, i
            if leave < 0:
                return "unbounded"
            piv = T[leave, enter]
            T[leave] /= piv
            for i in range(m):
                if i != leave and T[i, enter] != 0.0:
                    T[i] -= T[i, enter] * T[leave]
            obj_row -= obj_row[enter] * T[leave]
            basis[leave] = enter
            pivots += 1
            if pivots > _MAX_PIVOTS:
                raise LpNumericalError("pivot budget exhausted (degenerate basis?)")

    if art_cols:
        w = np.zeros(width + 1)
        for j in art_cols:
            w[j] = 1.0
        for i in range(m):
            if basis[i] in art_cols:
                w -= T[i]
        status = run(w)
        if status != "optimal":
            raise LpNumericalError("phase-1 reported unbounded; inconsistent tableau")
        if -w[-1] > FEAS_TOL:  # w stores -(current value) in the rhs slot
            return "infeasible", None
        # drive remaining zero-level artificials out of the basis
        art_set = set(art_cols)
        for i in range(m):
            if basis[i] in art_set:
                for j in range(ncol + n_slack):
                    if abs(T[i, j]) > 1e-7:
                        piv = T[i, j]
                        T[i] /= piv
                        for r in range(m):
                            if r != i and T[r, j] != 0.0:
                                T[r] -= T[r, j] * T[i]
                        basis[i] = j
                        break
        # zero out any artificial column still in the basis (redundant row)
        for j in art_cols:
            T[:, j] = 0.0

    z = np.zeros(width + 1)
    z[:ncol] = c
    for i in range(m):
        if z[basis[i]] != 0.0:
            z -= z[basis[i]] * T[i]
    status = run(z)
    if status != "optimal":
        return "unbounded", None

    y = np.zeros(width)
    for i in range(m):
        y[basis[i]] = T[i, -1]
    return "optimal", np.maximum(y[:ncol], 0.0)


def _violation(lp: LinearProgram, x: np.ndarray) -> float:
    worst = 0.0
    for row, rel, rhs in lp.constraints:
        scale = max(1.0, float(np.max(np.abs(row))) if row.size else 1.0)
        v = float(row @ x) - rhs
        if rel == LE:
            worst = max(worst, v / scale)
        elif rel == GE:
            worst = max(worst, -v / scale)
        else:
            worst = max(worst, abs(v) / scale)
    return worst


def solve_lp(lp: LinearProgram) -> LpOutcome:
    """Solve the program; optimal answers are re-verified against the original
    rows and a violation above the feasibility tolerance is a hard error."""
    c, rows, ncol, back = _standardize(lp)
    status, y = _simplex(c, rows, ncol)
    if status != "optimal":
        return LpOutcome(status=status)
    x = back(y)
    # clamp bound round-off so bounds hold exactly
    for i, (lo, hi) in enumerate(lp.bounds):
        if lo is not None and x[i] < lo:
            x[i] = lo
        if hi is not None and x[i] > hi:
            x[i] = hi
    viol = _violation(lp, x)
    if viol > FEAS_TOL:
        raise LpNumericalError(
            f"simplex returned 'optimal' but the point violates constraints by {viol:.3e}"
        )
    return LpOutcome("optimal", x, float(lp.objective @ x), viol)


def check_feasible(constraints, n: int, bounds=None) -> Feasibility:
    """Phase-1 wrapper: find any point satisfying the rows (zero objective)."""
    lp = LinearProgram(np.zeros(n), "min", tuple(constraints), bounds)
    out = solve_lp(lp)
    if out.status == "optimal":
        return Feasibility(True, out.x)
    violated = []
    if out.status == "infeasible":
        violated = list(range(len(lp.constraints)))
    return Feasibility(False, violated=tuple(violated))
