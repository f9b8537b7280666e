"""Dense two-phase simplex for small linear programs.

Problems are stated as

    minimize  c^T x
    s.t.      row_lo <= M x <= row_hi
              var_lo <= x   <= var_hi

and rewritten in standard form (equalities, nonnegative variables) before
pivoting. Bland's rule picks both the entering and the leaving variable,
so the solver terminates on degenerate problems and is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_MAX_ITER = 50_000


class LPInfeasible(Exception):
    pass


class LPUnbounded(Exception):
    pass


@dataclass
class DenseLP:
    objective: np.ndarray
    constraint_matrix: np.ndarray
    row_lo: Optional[np.ndarray] = None
    row_hi: Optional[np.ndarray] = None
    var_lo: Optional[np.ndarray] = None
    var_hi: Optional[np.ndarray] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        nv = self.objective.size
        m = np.asarray(self.constraint_matrix, dtype=float)
        if m.size == 0:
            m = m.reshape(0, nv)
        if m.ndim != 2 or m.shape[1] != nv:
            raise ValueError(f"constraint matrix shape {m.shape} does not match {nv} variables")
        self.constraint_matrix = m
        nr = m.shape[0]

        def fill(v, size, default):
            if v is None:
                return np.full(size, default)
            v = np.asarray(v, dtype=float).ravel()
            if v.size != size:
                raise ValueError(f"bound vector has length {v.size}, expected {size}")
            return v

        self.row_lo = fill(self.row_lo, nr, -np.inf)
        self.row_hi = fill(self.row_hi, nr, np.inf)
        self.var_lo = fill(self.var_lo, nv, 0.0)
        self.var_hi = fill(self.var_hi, nv, np.inf)
        for name in ("objective", "constraint_matrix"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if np.any(self.row_lo > self.row_hi) or np.any(self.var_lo > self.var_hi):
            raise ValueError("a lower bound exceeds its upper bound")

    @property
    def n_vars(self) -> int:
        return self.objective.size


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0
    primal_residual: float = np.nan
    dual_infeasibility: float = np.nan
    slackness_residual: float = np.nan

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _to_standard(lp: DenseLP):
    """Return (c, A, b, T, offset, c0) with x = offset + T x_std."""
    nv = lp.n_vars
    cols = []
    offset = np.zeros(nv)
    box = []  # (std column, width) for variables bounded on both sides
    for j in range(nv):
        lo, hi = lp.var_lo[j], lp.var_hi[j]
        e = np.zeros(nv)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                box.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    t = np.array(cols).T if cols else np.zeros((nv, 0))
    ns = t.shape[1]

    m = lp.constraint_matrix
    mt = m @ t
    shift = m @ offset
    rows, rhs, slack_sign = [], [], []
    for i in range(m.shape[0]):
        lo, hi = lp.row_lo[i] - shift[i], lp.row_hi[i] - shift[i]
        if lo == hi:
            rows.append(mt[i]); rhs.append(hi); slack_sign.append(0)
            continue
        if np.isfinite(hi):
            rows.append(mt[i]); rhs.append(hi); slack_sign.append(1)
        if np.isfinite(lo):
            rows.append(mt[i]); rhs.append(lo); slack_sign.append(-1)
    for col, width in box:
        r = np.zeros(ns)
        r[col] = 1.0
        rows.append(r); rhs.append(width); slack_sign.append(1)

    n_slack = sum(1 for s in slack_sign if s != 0)
    a = np.zeros((len(rows), ns + n_slack))
    k = ns
    for i, (row, sg) in enumerate(zip(rows, slack_sign)):
        a[i, :ns] = row
        if sg != 0:
            a[i, k] = sg
            k += 1
    c = np.concatenate([t.T @ lp.objective, np.zeros(n_slack)])
    return c, a, np.array(rhs, dtype=float), t, offset, float(lp.objective @ offset)


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])


def _bland(tab: np.ndarray, basis: list, n_cols: int, iters: int) -> tuple[str, int]:
    """Minimize the objective held in the last tableau row over columns < n_cols."""
    m = tab.shape[0] - 1
    while True:
        if iters >= _MAX_ITER:
            raise RuntimeError("simplex iteration limit reached")
        neg = tab[-1, :n_cols] < -_COST_TOL
        if not neg.any():
            return OPTIMAL, iters
        col = int(neg.argmax())
        column = tab[:m, col]
        ok = column > _PIVOT_TOL
        if not ok.any():
            return UNBOUNDED, iters
        ratios = np.full(m, np.inf)
        ratios[ok] = tab[:m, -1][ok] / column[ok]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = int(tied[0]) if tied.size == 1 else int(min(tied, key=basis.__getitem__))
        _pivot(tab, row, col)
        basis[row] = col
        iters += 1


def _crash_basis(a: np.ndarray) -> list:
    """Per row, a column that is +1 there and 0 elsewhere (a slack), or None."""
    m = a.shape[0]
    if m == 0:
        return []
    unit = (np.count_nonzero(a, axis=0) == 1) & (a.max(axis=0) == 1.0)
    found = [None] * m
    for j in np.flatnonzero(unit):
        i = int(np.flatnonzero(a[:, j])[0])
        if found[i] is None:
            found[i] = int(j)
    return found


def solve(lp: DenseLP) -> LPResult:
    """Solve ``lp``; infeasible and unbounded problems are reported in ``status``."""
    c, a, b, t, offset, c_const = _to_standard(lp)
    m, n = a.shape

    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    # phase 1: artificials only for rows without a slack to start from
    crash = _crash_basis(a)
    art_rows = [i for i in range(m) if crash[i] is None]
    n_art = len(art_rows)
    tab = np.zeros((m + 1, n + n_art + 1))
    tab[:m, :n] = a
    tab[:m, -1] = b
    basis = list(crash)
    for k, i in enumerate(art_rows):
        tab[i, n + k] = 1.0
        basis[i] = n + k
    tab[-1, :n] = -a[art_rows].sum(axis=0)
    tab[-1, -1] = -b[art_rows].sum()
    status, iters = _bland(tab, basis, n, 0)
    phase1 = -tab[-1, -1]
    if phase1 > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult(INFEASIBLE, iterations=iters)

    # drive zero-level artificials out; rows with no usable pivot are redundant
    keep = []
    for i in range(m):
        if basis[i] >= n:
            nz = np.flatnonzero(np.abs(tab[i, :n]) > 1e-9)
            if nz.size == 0:
                continue
            _pivot(tab, i, int(nz[0]))
            basis[i] = int(nz[0])
        keep.append(i)
    tab = np.vstack([tab[keep], tab[-1:]])
    basis = [basis[i] for i in keep]
    tab = np.delete(tab, np.s_[n:n + n_art], axis=1)

    # phase 2
    tab[-1, :] = 0.0
    tab[-1, :n] = c
    for i, j in enumerate(basis):
        tab[-1] -= c[j] * tab[i]
    status, iters = _bland(tab, basis, n, iters)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=iters)

    x_std = np.zeros(n)
    x_std[basis] = tab[:-1, -1]
    x_std = np.maximum(x_std, 0.0)
    x = offset + t @ x_std[: t.shape[1]]

    # duals from the final basis, for the optimality certificate
    a_rows = a[keep]
    bmat = a_rows[:, basis]
    y = np.linalg.lstsq(bmat.T, c[basis], rcond=None)[0] if basis else np.zeros(0)
    reduced = c - a_rows.T @ y
    result = LPResult(
        OPTIMAL,
        x=x,
        objective=float(c @ x_std + c_const),
        iterations=iters,
        primal_residual=float(np.abs(a @ x_std - b).max(initial=0.0)),
        dual_infeasibility=float(max(0.0, -reduced.min(initial=0.0))),
        slackness_residual=float(np.abs(x_std * reduced).max(initial=0.0)),
    )
    return result


def l1_min_inf_constraint(q: np.ndarray, b: np.ndarray, mu: float) -> np.ndarray:
    """argmin ||beta||_1 subject to ||q beta - b||_inf <= mu.

    Split beta = beta_plus - beta_minus with both parts nonnegative.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    q = np.atleast_2d(np.asarray(q, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    k = q.shape[1]
    if q.shape[0] != b.size:
        raise ValueError(f"q has {q.shape[0]} rows, b has length {b.size}")
    lp = DenseLP(
        objective=np.ones(2 * k),
        constraint_matrix=np.hstack([q, -q]),
        row_lo=b - mu,
        row_hi=b + mu,
    )
    res = solve(lp)
    if res.status == INFEASIBLE:
        raise LPInfeasible(f"no beta with ||q beta - b||_inf <= {mu}")
    if res.status == UNBOUNDED:
        raise LPUnbounded("l1 objective unbounded, which cannot happen for a valid problem")
    return res.x[:k] - res.x[k:]
