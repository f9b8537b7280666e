"""SVD cache of the data matrix and projection diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-12


@dataclass(frozen=True)
class SvdCache:
    """Thin SVD ``x = u @ diag(s) @ v.T`` with r = min(n, p) components.

    ``v`` holds the right singular vectors as columns (p x r); its leading
    k columns are the top-k eigenvectors of x^T x / n.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    n: int

    @property
    def rank(self) -> int:
        return numerical_rank(self.s)

    @property
    def lambda_hat(self) -> np.ndarray:
        """s_k^2 / n, with singular values under the rank tolerance set to 0."""
        s = np.where(np.arange(self.s.size) < self.rank, self.s, 0.0)
        return s ** 2 / self.n

    def lam(self, k: int) -> float:
        """1-indexed eigenvalue with lambda_0 = inf and lambda_k = 0 past the rank."""
        if k <= 0:
            return np.inf
        lh = self.lambda_hat
        return float(lh[k - 1]) if k <= lh.size else 0.0


@dataclass(frozen=True)
class ProjectionDiagnostics:
    r_hat: int
    eta_hat: float
    psi_hat: float


def numerical_rank(s: np.ndarray, rtol: float = RANK_RTOL, scale: float = None) -> int:
    """Count singular values above ``rtol * scale`` (scale defaults to s[0])."""
    if s.size == 0:
        return 0
    scale = s[0] if scale is None else scale
    if scale <= 0:
        return 0
    return int(np.sum(s > rtol * scale))


def decompose(x: np.ndarray) -> SvdCache:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    return SvdCache(u=u, s=s, v=vt.T, n=x.shape[0])


def column_basis(b: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space of b."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.ndim != 2:
        raise ValueError("b must be a matrix")
    if not np.any(b):
        raise ValueError("b is the zero matrix")
    ub, sb, _ = np.linalg.svd(b, full_matrices=False)
    return ub[:, : numerical_rank(sb)]


def projection(b: np.ndarray) -> np.ndarray:
    q = column_basis(b)
    return q @ q.T


def diagnostics(x: np.ndarray, b: np.ndarray) -> ProjectionDiagnostics:
    """Rank and spectral edges of X restricted to span(b) and its complement.

    r_hat = rank(X P_b), eta_hat = sigma_{r_hat}^2(X P_b) / n and
    psi_hat = sigma_1^2(X P_b^perp) / n. Singular values below 1e-12 times
    sigma_1(X) count as zero, so psi_hat is exactly 0 when b spans R^p.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    q = column_basis(b)
    if q.shape[0] != p:
        raise ValueError(f"b has {q.shape[0]} rows, X has {p} columns")
    scale = np.linalg.norm(x, 2)

    xq = x @ q
    s_in = np.linalg.svd(xq, compute_uv=False)
    r_hat = numerical_rank(s_in, scale=scale)
    eta_hat = float(s_in[r_hat - 1] ** 2 / n) if r_hat > 0 else 0.0

    if q.shape[1] >= p:
        psi_hat = 0.0
    else:
        resid = x - xq @ q.T
        s_out = np.linalg.svd(resid, compute_uv=False)
        top = s_out[0] if s_out.size else 0.0
        psi_hat = float(top ** 2 / n) if top > RANK_RTOL * scale else 0.0
    return ProjectionDiagnostics(r_hat, eta_hat, psi_hat)


def low_rank_approx(cache: SvdCache, k: int) -> np.ndarray:
    """Best rank-k approximation sum_{j<=k} s_j u_j v_j^T."""
    r = cache.s.size
    if not 0 <= k <= r:
        raise ValueError(f"k must lie in [0, {r}], got {k}")
    return (cache.u[:, :k] * cache.s[:k]) @ cache.v[:, :k].T
