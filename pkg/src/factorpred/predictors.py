"""Linear predictors of the form x^T B (B^T X^T X B)^+ B^T X^T Y.

PCR takes B = top-k right singular vectors of X, GLS takes B = I_p. The
population best linear predictor is provided as a benchmark.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import Dataset, FactorModelParams
from .spectra import RANK_RTOL, SvdCache, decompose, numerical_rank

DEFAULT_C0 = 2.0
DEFAULT_MU_SCALE = 0.25
DEFAULT_KAPPA = 2.0


@dataclass
class LinearPredictor:
    alpha: np.ndarray
    method: str
    selected_rank: Optional[int] = None
    meta: dict = field(default_factory=dict)
    # the B of alpha = B (XB)^+ Y when there is one; None for GLS (B = I_p)
    basis: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("predictor coefficients are not finite")

    @property
    def p(self) -> int:
        return self.alpha.size


@dataclass
class RankSelection:
    """Outcome of a rank selector.

    ``criterion_values`` holds lambda_hat_1..lambda_hat_r for the elbow rule
    and v_hat_k^2 for k = 0..k_bar for the penalized rule.
    """

    chosen: int
    criterion_values: np.ndarray
    rule: str
    threshold: Optional[float] = None
    mu_n: Optional[float] = None
    k_bar: Optional[int] = None
    closed_form: Optional[int] = None


def pinv_solve(m: np.ndarray, y: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """m^+ y through the SVD, dropping singular values <= rtol * s_1."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    r = numerical_rank(s, rtol)
    return vt[:r].T @ ((u[:, :r].T @ y) / s[:r])


def fit_projected(data: Dataset, b: np.ndarray, method: str = "projected",
                  selected_rank: Optional[int] = None) -> LinearPredictor:
    """alpha = B (X B)^+ Y, which equals B (B^T X^T X B)^+ B^T X^T Y."""
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] != data.p:
        raise ValueError(f"B has {b.shape[0]} rows, data has p = {data.p}")
    if not np.any(b):
        raise ValueError("B is the zero matrix")
    alpha = b @ pinv_solve(data.x @ b, data.y)
    return LinearPredictor(alpha, method, selected_rank, basis=b)


def fit_pcr(data: Dataset, cache: Optional[SvdCache], k: int) -> LinearPredictor:
    """Principal component regression on the top k components."""
    cache = decompose(data.x) if cache is None else cache
    rank = cache.rank
    if not 0 <= k <= rank:
        raise ValueError(f"k must lie in [0, rank(X) = {rank}], got {k}")
    v, s, u = cache.v[:, :k], cache.s[:k], cache.u[:, :k]
    alpha = v @ ((u.T @ data.y) / s)
    return LinearPredictor(alpha, "pcr", k, basis=v)


def fit_gls(data: Dataset) -> LinearPredictor:
    """Minimum-norm least squares X^+ Y (an interpolator once rank(X) = n)."""
    return LinearPredictor(pinv_solve(data.x, data.y), "gls", None)


def predict(pred: LinearPredictor, x_new: np.ndarray) -> np.ndarray:
    x_new = np.asarray(x_new, dtype=float)
    if x_new.ndim == 1:
        x_new = x_new[None, :]
    if x_new.shape[1] != pred.p:
        raise ValueError(f"x_new has {x_new.shape[1]} columns, predictor expects {pred.p}")
    return x_new @ pred.alpha


def select_elbow(cache: SvdCache, delta_w: float, c0: float = DEFAULT_C0) -> RankSelection:
    """Largest k with lambda_hat_k >= c0 * delta_w, k ranging over 0..rank(X)."""
    if delta_w < 0:
        raise ValueError("delta_w must be nonnegative")
    if c0 <= 1:
        raise ValueError("c0 must exceed 1")
    lam = cache.lambda_hat[: cache.rank]
    threshold = c0 * delta_w
    passing = np.flatnonzero(lam >= threshold)
    chosen = int(passing[-1] + 1) if passing.size else 0
    return RankSelection(chosen, lam, "elbow", threshold=threshold)


def default_mu_n(n: int, p: int, scale: float = DEFAULT_MU_SCALE) -> float:
    return scale * (n + p)


def select_penalized(cache: SvdCache, p: int, mu_n: Optional[float] = None,
                     kappa: float = DEFAULT_KAPPA) -> RankSelection:
    """Minimize v_k^2 = ||X - X_(k)||_F^2 / (np - mu_n k) over 0 <= k <= k_bar.

    Ties go to the smallest k. The closed form, the count of
    sigma_k^2 > mu_n v_k^2 over 1..k_bar, is recorded alongside; the two
    coincide whenever no near-tie is lost to round-off.
    """
    n = cache.n
    mu_n = default_mu_n(n, p) if mu_n is None else mu_n
    if mu_n <= 0:
        raise ValueError("mu_n must be positive")
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    k_bar = min(math.floor(kappa / (1 + kappa) * n * p / mu_n), n, p)
    if k_bar < 0:
        raise ValueError("mu_n too large: k_bar < 0")

    s2 = np.zeros(max(k_bar, cache.s.size))
    r = cache.rank
    s2[:r] = cache.s[:r] ** 2
    # tail sums from the end keep exact zeros in the noiseless case
    tail = np.concatenate([np.cumsum(s2[::-1])[::-1], [0.0]])
    ks = np.arange(k_bar + 1)
    v2 = tail[ks] / (n * p - mu_n * ks)
    chosen = int(np.argmin(v2))

    closed = int(np.sum(s2[:k_bar] > mu_n * v2[1:]))
    if closed != chosen:
        warnings.warn(f"penalized rank: argmin {chosen} != closed form {closed}")
    return RankSelection(chosen, v2, "penalized", mu_n=mu_n, k_bar=k_bar, closed_form=closed)


def blp_pinv(theta: FactorModelParams) -> np.ndarray:
    """[Cov(X)]^+ Cov(X, Y) by eigendecomposition."""
    return np.linalg.pinv(theta.cov_x(), rcond=RANK_RTOL, hermitian=True) @ theta.cov_xy()


def blp_woodbury(theta: FactorModelParams) -> np.ndarray:
    """Sigma_W^-1 A (Sigma_Z^-1 + A^T Sigma_W^-1 A)^-1 beta; needs invertible Sigma_W."""
    sw = theta.sigma_w
    if theta.w_is_diag or np.count_nonzero(sw - np.diag(np.diag(sw))) == 0:
        d = sw if theta.w_is_diag else np.diag(sw)
        if np.any(d <= 0):
            raise np.linalg.LinAlgError("Sigma_W is singular")
        swinv_a = theta.a / d[:, None]
    else:
        swinv_a = np.linalg.solve(sw, theta.a)
    core = np.linalg.inv(theta.sigma_z) + theta.a.T @ swinv_a
    return swinv_a @ np.linalg.solve(core, theta.beta)


def blp(theta: FactorModelParams) -> LinearPredictor:
    """Population best linear predictor coefficient."""
    try:
        alpha = blp_woodbury(theta)
    except np.linalg.LinAlgError:
        alpha = blp_pinv(theta)
    return LinearPredictor(alpha, "blp", theta.k)
