"""Essential Regression predictor built on the LOVE estimate of A.

Pipeline: pure-variable partition from thresholded covariances, signed
canonical rows for the pure block, a plug-in Sigma_Z, Dantzig-type rows for
the remaining variables, then the projected predictor with B = A_hat.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import LPInfeasible, l1_min_inf_constraint
from .model import Dataset
from .predictors import LinearPredictor, fit_projected

log = logging.getLogger(__name__)

DEFAULT_DELTA_SCALE = 3.0
DEFAULT_MU_SCALE = 1.0


class ERError(Exception):
    """The LOVE pipeline cannot produce a loading estimate."""


@dataclass
class ERConfig:
    """Tuning of the LOVE pipeline.

    ``delta`` and ``mu`` default to ``scale * sqrt(log(max(p, n)) / n)``.
    ``center`` switches the covariance estimate from X^T X / n to the
    centered sample covariance.
    """

    delta: Optional[float] = None
    mu: Optional[float] = None
    delta_scale: float = DEFAULT_DELTA_SCALE
    mu_scale: float = DEFAULT_MU_SCALE
    center: bool = False

    def resolve(self, n: int, p: int) -> tuple[float, float]:
        rate = math.sqrt(math.log(max(p, n)) / n)
        delta = self.delta_scale * rate if self.delta is None else self.delta
        mu = self.mu_scale * rate if self.mu is None else self.mu
        return delta, mu


@dataclass
class ERFit:
    partition: list
    k_hat: int
    sigma_z_hat: np.ndarray
    a_hat: np.ndarray
    delta: float
    mu: float
    lp_failures: list = field(default_factory=list)

    @property
    def pure_index(self) -> np.ndarray:
        return np.array(sorted(i for g in self.partition for i in g), dtype=int)

    @property
    def reliable(self) -> bool:
        return all(len(g) >= 2 for g in self.partition) and not self.lp_failures


def _merge(candidate: set, groups: list) -> None:
    for idx, g in enumerate(groups):
        if g & candidate:
            groups[idx] = g & candidate
            return
    groups.append(candidate)


def pure_var(sigma_hat: np.ndarray, delta: float) -> tuple[list, int]:
    """Partition of the pure variables and its size.

    Variable i is a pure candidate when every l whose |Sigma_il| is within
    2*delta of row i's largest off-diagonal entry also has its own largest
    entry within 2*delta of |Sigma_il|. Candidate sets are merged in index
    order; on overlap the existing group is replaced by the intersection.
    """
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    p = sigma_hat.shape[0]
    if p < 2:
        return [], 0
    off = np.abs(sigma_hat)
    np.fill_diagonal(off, -np.inf)
    row_max = off.max(axis=1)
    close = row_max[:, None] <= off + 2 * delta
    np.fill_diagonal(close, False)
    consistent = np.abs(off - row_max[None, :]) <= 2 * delta
    pure = np.all(consistent | ~close, axis=1)

    groups: list = []
    for i in np.flatnonzero(pure):
        cand = set(np.flatnonzero(close[i]).tolist())
        cand.add(int(i))
        _merge(cand, groups)
    partition = [sorted(g) for g in groups]
    return partition, len(partition)


def build_a_pure(sigma_hat: np.ndarray, partition: list) -> np.ndarray:
    """Rows of A_hat for the pure variables, as a p x K_hat matrix (zeros elsewhere).

    Within a group the smallest index is the anchor and gets e_k; every other
    member gets sign(Sigma_hat[anchor, j]) * e_k.
    """
    if not partition:
        raise ERError("empty partition")
    p = sigma_hat.shape[0]
    a = np.zeros((p, len(partition)))
    for k, group in enumerate(partition):
        if len(group) < 2:
            raise ERError(f"group {k} has a single member {group}; need at least two")
        anchor = group[0]
        a[anchor, k] = 1.0
        for j in group[1:]:
            s = np.sign(sigma_hat[anchor, j])
            if s == 0:
                raise ERError(f"ambiguous sign: Sigma_hat[{anchor}, {j}] = 0")
            a[j, k] = s
    return a


def estimate_sigma_z(sigma_hat: np.ndarray, partition: list, a_pure: np.ndarray) -> np.ndarray:
    """Plug-in latent covariance from within- and between-group averages."""
    k_hat = len(partition)
    out = np.zeros((k_hat, k_hat))
    for a, ga in enumerate(partition):
        ga = np.asarray(ga)
        block = np.abs(sigma_hat[np.ix_(ga, ga)])
        m = ga.size
        out[a, a] = (block.sum() - np.trace(block)) / (m * (m - 1))
        for b in range(a + 1, k_hat):
            gb = np.asarray(partition[b])
            signed = a_pure[ga, a][:, None] * a_pure[gb, b][None, :] * sigma_hat[np.ix_(ga, gb)]
            out[a, b] = out[b, a] = signed.mean()
    return out


def _pure_targets(sigma_hat: np.ndarray, partition: list, a_pure: np.ndarray,
                  cols: np.ndarray) -> np.ndarray:
    """(A_I^T A_I)^-1 A_I^T Sigma_hat[I, cols], one column per requested variable."""
    pure = np.array(sorted(i for g in partition for i in g))
    a_i = a_pure[pure]
    gram = a_i.T @ a_i
    return np.linalg.solve(gram, a_i.T @ sigma_hat[np.ix_(pure, cols)])


def dantzig_rows(sigma_z_hat: np.ndarray, sigma_hat: np.ndarray, partition: list,
                 a_pure: np.ndarray, mu: float) -> tuple[np.ndarray, list]:
    """l1-minimal rows for the non-pure variables.

    Returns the rows (indexed by the sorted non-pure variables) and a list of
    variables whose linear program was infeasible; those rows are left at 0.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    p = sigma_hat.shape[0]
    pure = set(i for g in partition for i in g)
    rest = np.array([j for j in range(p) if j not in pure], dtype=int)
    k_hat = len(partition)
    rows = np.zeros((rest.size, k_hat))
    failures = []
    if rest.size == 0:
        return rows, failures
    targets = _pure_targets(sigma_hat, partition, a_pure, rest)
    for r, j in enumerate(rest):
        try:
            rows[r] = l1_min_inf_constraint(sigma_z_hat, targets[:, r], mu)
        except LPInfeasible:
            log.warning("Dantzig row %d infeasible at mu=%g; using zero row", j, mu)
            failures.append(int(j))
    return rows, failures


def second_moment(x: np.ndarray, center: bool = False) -> np.ndarray:
    if center:
        x = x - x.mean(axis=0)
    return x.T @ x / x.shape[0]


def estimate_loadings(sigma_hat: np.ndarray, delta: float, mu: float) -> ERFit:
    partition, k_hat = pure_var(sigma_hat, delta)
    if k_hat == 0:
        raise ERError(f"no pure variables found at delta={delta:g}")
    a_hat = build_a_pure(sigma_hat, partition)
    sigma_z_hat = estimate_sigma_z(sigma_hat, partition, a_hat)
    rows, failures = dantzig_rows(sigma_z_hat, sigma_hat, partition, a_hat, mu)
    pure = set(i for g in partition for i in g)
    rest = [j for j in range(sigma_hat.shape[0]) if j not in pure]
    a_hat[rest] = rows
    return ERFit(partition, k_hat, sigma_z_hat, a_hat, delta, mu, failures)


def fit_er(data: Dataset, config: Optional[ERConfig] = None) -> tuple[ERFit, LinearPredictor]:
    """Estimate A by LOVE and fit the projected predictor with B = A_hat."""
    config = ERConfig() if config is None else config
    if data.n < 2:
        raise ERError("need at least two samples")
    delta, mu = config.resolve(data.n, data.p)
    sigma_hat = second_moment(data.x, config.center)
    fit = estimate_loadings(sigma_hat, delta, mu)
    pred = fit_projected(data, fit.a_hat, method="er", selected_rank=fit.k_hat)
    pred.meta.update(delta=delta, mu=mu, lp_failures=len(fit.lp_failures))
    return fit, pred


def align_columns(a_hat: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Â with columns reordered and sign-flipped to best match A.

    Columns are matched greedily by absolute inner product. Both matrices
    must have the same number of columns; the latent factors are only
    identified up to such a signed permutation.
    """
    if a_hat.shape != a.shape:
        raise ValueError(f"shapes differ: {a_hat.shape} vs {a.shape}")
    k = a.shape[1]
    score = a_hat.T @ a
    out = np.zeros_like(a_hat)
    free_hat, free_true = set(range(k)), set(range(k))
    for _ in range(k):
        i, j = max(((i, j) for i in free_hat for j in free_true),
                   key=lambda ij: (abs(score[ij]), -ij[0], -ij[1]))
        out[:, j] = a_hat[:, i] * (1.0 if score[i, j] >= 0 else -1.0)
        free_hat.discard(i)
        free_true.discard(j)
    return out
