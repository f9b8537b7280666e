"""Prediction risk of linear rules under a known factor model, and the
simulation runner built on it.

The excess risk of alpha is E[(X*^T alpha - Z*^T beta)^2]
= ||Sigma_Z^1/2 (A^T alpha - beta)||^2 + alpha^T Sigma_W alpha,
which is computed exactly; the Monte Carlo version is kept as a check.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .methods import FitContext, MethodSpec, as_spec, fit_method
from .model import (Dataset, ERDesign, FactorModelParams, generate_er, generate_frm,
                    replication_seed, snr, sym_sqrt)
from .predictors import LinearPredictor
from .spectra import ProjectionDiagnostics, SvdCache, decompose, diagnostics

log = logging.getLogger(__name__)

_MC_CHUNK = 20_000


def exact_excess_risk(theta: FactorModelParams, alpha) -> float:
    alpha = getattr(alpha, "alpha", alpha)
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.size != theta.p:
        raise ValueError(f"alpha has length {alpha.size}, model has p = {theta.p}")
    d = theta.a.T @ alpha - theta.beta
    return float(d @ theta.sigma_z @ d + theta.w_quad(alpha))


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    n_mc: int


def mc_risk(theta: FactorModelParams, alpha, n_mc: int, seed: int) -> MCEstimate:
    """Average of (X*^T alpha - Z*^T beta)^2 over n_mc fresh draws of (Z*, W*).

    The response noise is never drawn, so sigma^2 plays no role.
    """
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    alpha = np.asarray(getattr(alpha, "alpha", alpha), dtype=float).ravel()
    rng = np.random.default_rng(seed)
    root_z = sym_sqrt(theta.sigma_z)
    if theta.w_is_diag:
        w_scale = np.sqrt(np.maximum(theta.sigma_w, 0.0))
        root_w = None
    else:
        root_w = sym_sqrt(theta.sigma_w)
    a_alpha = theta.a.T @ alpha
    total = total_sq = 0.0
    done = 0
    while done < n_mc:
        m = min(_MC_CHUNK, n_mc - done)
        z = rng.standard_normal((m, theta.k)) @ root_z
        g = rng.standard_normal((m, theta.p))
        w_alpha = g @ (w_scale * alpha) if root_w is None else g @ (root_w @ alpha)
        err = z @ (a_alpha - theta.beta) + w_alpha
        total += err @ err
        total_sq += np.sum(err ** 4)
        done += m
    mean = total / n_mc
    var = (total_sq - n_mc * mean ** 2) / (n_mc - 1)
    return MCEstimate(float(mean), float(np.sqrt(max(var, 0.0) / n_mc)), n_mc)


@dataclass(frozen=True)
class OracleBounds:
    lower: float
    exact: float
    upper: float
    snr: float


def oracle_bounds(theta: FactorModelParams) -> OracleBounds:
    """Risk of the best linear predictor and the xi-sandwich around it.

    With M = A^T Sigma_W^-1 A: upper = beta^T M^-1 beta,
    exact = beta^T (Sigma_Z^-1 + M)^-1 beta, lower = xi / (1 + xi) * upper.
    """
    sw = theta.sigma_w
    if theta.w_is_diag:
        if np.any(sw <= 0):
            raise np.linalg.LinAlgError("Sigma_W is singular")
        swinv_a = theta.a / sw[:, None]
    else:
        swinv_a = np.linalg.solve(sw, theta.a)  # raises on singular Sigma_W
    m = theta.a.T @ swinv_a
    beta = theta.beta
    upper = float(beta @ np.linalg.solve(m, beta))
    exact = float(beta @ np.linalg.solve(np.linalg.inv(theta.sigma_z) + m, beta))
    xi = snr(theta)
    return OracleBounds(xi / (1 + xi) * upper, exact, upper, xi)


def prediction_diagnostics(pred: LinearPredictor, data: Dataset,
                           cache: Optional[SvdCache] = None) -> Optional[ProjectionDiagnostics]:
    """(r_hat, eta_hat, psi_hat) of the projection behind ``pred``, if it has one."""
    if pred.method == "gls":
        cache = decompose(data.x) if cache is None else cache
        r = cache.rank
        return ProjectionDiagnostics(r, cache.lam(r), 0.0)
    b = pred.basis
    if b is None:
        return None
    if b.shape[1] == 0 or not np.any(b):
        cache = decompose(data.x) if cache is None else cache
        return ProjectionDiagnostics(0, 0.0, cache.lam(1))
    return diagnostics(data.x, b)


@dataclass
class RiskReport:
    excess_risk_exact: float
    oracle_lower: float
    oracle_exact: float
    oracle_upper: float
    excess_risk_mc: Optional[float] = None
    mc_std_error: Optional[float] = None
    diagnostics: Optional[ProjectionDiagnostics] = None


def risk_report(theta: FactorModelParams, pred: LinearPredictor, data: Optional[Dataset] = None,
                n_mc: Optional[int] = None, seed: int = 0) -> RiskReport:
    ob = oracle_bounds(theta)
    rep = RiskReport(exact_excess_risk(theta, pred.alpha), ob.lower, ob.exact, ob.upper)
    if n_mc:
        mc = mc_risk(theta, pred.alpha, n_mc, seed)
        rep.excess_risk_mc, rep.mc_std_error = mc.estimate, mc.std_error
    if data is not None:
        rep.diagnostics = prediction_diagnostics(pred, data)
    return rep


# ---------------------------------------------------------------------------
# simulation study

@dataclass(frozen=True)
class DesignPoint:
    """One cell of a simulation grid.

    ``family`` is "frm" (dense Gaussian loadings scaled by ``loading_scale``)
    or "er" (pure-variable loadings with ``m`` pure features per factor).
    """

    family: str = "frm"
    n: int = 300
    p: int = 500
    k: int = 5
    m: int = 5
    loading_scale: float = 1.0
    label: Optional[str] = None

    def __post_init__(self):
        if self.family not in ("frm", "er"):
            raise ValueError(f"unknown design family {self.family!r}")
        for name in ("n", "p", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.family == "er":
            ERDesign(self.k, self.m, self.p, self.n)
            if self.k < 4 and self.k * self.m < self.p:
                raise ValueError(f"ER design with non-pure rows needs K >= 4, got K={self.k}")

    @property
    def tag(self) -> str:
        if self.label:
            return self.label
        base = f"{self.family}-n{self.n}-p{self.p}-k{self.k}"
        if self.family == "er":
            return base + f"-m{self.m}"
        return base if self.loading_scale == 1.0 else base + f"-a{self.loading_scale:g}"

    def draw(self, seed: int) -> tuple[FactorModelParams, Dataset]:
        if self.family == "frm":
            return generate_frm(self.p, self.k, self.n, self.loading_scale, seed)
        return generate_er(ERDesign(self.k, self.m, self.p, self.n), seed)


RESULT_COLUMNS = ("design", "family", "n", "p", "k", "loading_scale", "method", "rep", "seed",
                  "snr", "excess_risk", "selected_rank")
MC_COLUMNS = ("mc_risk", "mc_std_error")


@dataclass
class BenchmarkTable:
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    designs: list = field(default_factory=list)
    methods: list = field(default_factory=list)

    def column(self, name: str, **where) -> np.ndarray:
        sel = [r for r in self.rows if all(r[k] == v for k, v in where.items())]
        return np.array([np.nan if r[name] is None else r[name] for r in sel], dtype=float)

    def median(self, design: str, method: str) -> float:
        v = self.column("excess_risk", design=design, method=method)
        return float(np.median(v)) if v.size else float("nan")

    def summary(self) -> list:
        return summarize(self.rows, self.designs, self.methods)


def summarize(rows: Sequence[dict], designs: Sequence[str] = (),
              methods: Sequence[str] = ()) -> list:
    """Median and IQR of the excess risk per (design, method).

    Cells are ordered by the given design and method lists, falling back to
    first appearance for names not listed.
    """
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["design"], r["method"]), []).append(r)
    m_order = {}
    for i, m in enumerate(list(methods) + [r["method"] for r in rows]):
        m_order.setdefault(m, i)
    d_order = {}
    for i, d in enumerate(list(designs) + [r["design"] for r in rows]):
        d_order.setdefault(d, i)
    out = []
    for design, method in sorted(cells, key=lambda c: (d_order[c[0]], m_order[c[1]])):
        rs = cells[(design, method)]
        risk = np.array([r["excess_risk"] for r in rs], dtype=float)
        q25, med, q75 = np.percentile(risk, [25, 50, 75])
        ranks = [r["selected_rank"] for r in rs if r["selected_rank"] is not None]
        hit = [r["selected_rank"] == r["k"] for r in rs if r["selected_rank"] is not None]
        out.append({
            "design": design, "method": method, "count": len(rs),
            "median": float(med), "q25": float(q25), "q75": float(q75), "iqr": float(q75 - q25),
            "median_rank": float(np.median(ranks)) if ranks else None,
            "frac_rank_eq_k": float(np.mean(hit)) if hit else None,
        })
    return out


def _run_rep(design: DesignPoint, methods: Sequence[MethodSpec], rep: int, seed: int,
             n_mc: Optional[int]) -> tuple[list, list, list]:
    rep_seed = replication_seed(seed, rep)
    rows, errors, timings = [], [], []
    try:
        theta, data = design.draw(rep_seed)
    except Exception as exc:
        errors.append({"design": design.tag, "method": "*", "rep": rep,
                       "error": f"{type(exc).__name__}: {exc}"})
        return rows, errors, timings
    xi = snr(theta)
    ctx = FitContext(theta=theta, seed=rep_seed)
    for spec in methods:
        t0 = time.perf_counter()
        try:
            pred = fit_method(spec, data, ctx)
            risk = exact_excess_risk(theta, pred.alpha)
        except Exception as exc:
            log.warning("%s / %s / rep %d failed: %s", design.tag, spec.tag, rep, exc)
            errors.append({"design": design.tag, "method": spec.tag, "rep": rep,
                           "error": f"{type(exc).__name__}: {exc}"})
            continue
        seconds = time.perf_counter() - t0
        row = {"design": design.tag, "family": design.family, "n": design.n, "p": design.p,
               "k": design.k, "loading_scale": design.loading_scale, "method": spec.tag,
               "rep": rep, "seed": rep_seed, "snr": xi, "excess_risk": risk,
               "selected_rank": pred.selected_rank}
        if n_mc:
            mc = mc_risk(theta, pred.alpha, n_mc, rep_seed)
            row.update(mc_risk=mc.estimate, mc_std_error=mc.std_error)
        rows.append(row)
        timings.append({"design": design.tag, "method": spec.tag, "rep": rep,
                        "seconds": seconds})
    return rows, errors, timings


def _run_rep_args(args):
    return _run_rep(*args)


def run_benchmark(designs: Sequence[DesignPoint], methods: Sequence, reps: int, seed: int = 0,
                  n_mc: Optional[int] = None, jobs: int = 1) -> BenchmarkTable:
    """Fit every method on ``reps`` fresh draws of every design point.

    Replication r uses seed ``seed ^ r`` at every design point, so cells that
    differ in one design parameter share their random numbers. Failures are
    collected in ``table.errors`` and the run continues. Output order is
    fixed (design, rep, method) whatever ``jobs`` is.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    methods = [as_spec(m) for m in methods]
    if not methods:
        raise ValueError("no methods")
    if not designs:
        raise ValueError("no design points")
    tags = [m.tag for m in methods]
    if len(set(tags)) != len(tags):
        raise ValueError(f"duplicate method labels: {tags}")

    tasks = [(d, methods, r, seed, n_mc) for d in designs for r in range(reps)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_rep_args, tasks, chunksize=1))
    else:
        parts = [_run_rep(*t) for t in tasks]
    table = BenchmarkTable(designs=[d.tag for d in designs], methods=tags)
    for rows, errors, timings in parts:
        table.rows += rows
        table.errors += errors
        table.timings += timings
    return table
