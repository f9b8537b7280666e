"""Factor regression model: parameters, validation and synthetic designs.

The model is

    Y = Z^T beta + eps,    X = A Z + W,

with latent Z in R^K, loadings A (p x K), Cov(Z) = Sigma_Z, Cov(W) = Sigma_W
and Var(eps) = sigma_sq. Samples are stored row-wise: X is n x p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64"
GENERATOR_VERSION = "factorpred-gen/1"

_SYM_TOL = 1e-10
_PURE_TOL = 1e-12


@dataclass(frozen=True)
class FactorModelParams:
    """Parameter tuple of a factor regression model.

    Parameters
    ----------
    k : int
        Latent dimension.
    a : ndarray, shape (p, k)
        Loading matrix.
    beta : ndarray, shape (k,)
        Regression coefficient of Y on Z.
    sigma_z : ndarray, shape (k, k)
        Covariance of Z.
    sigma_w : ndarray, shape (p, p) or (p,)
        Covariance of W. A 1-d array stands for a diagonal covariance; the
        generators use it so that large-p designs stay cheap.
    sigma_sq : float
        Variance of the response noise.
    """

    k: int
    a: np.ndarray
    beta: np.ndarray
    sigma_z: np.ndarray
    sigma_w: np.ndarray
    sigma_sq: float = 1.0

    @property
    def p(self) -> int:
        return self.a.shape[0]

    @property
    def w_is_diag(self) -> bool:
        return np.ndim(self.sigma_w) == 1

    def sigma_w_matrix(self) -> np.ndarray:
        return as_matrix(self.sigma_w)

    def w_quad(self, alpha: np.ndarray) -> float:
        """alpha^T Sigma_W alpha."""
        if self.w_is_diag:
            return float(np.sum(self.sigma_w * alpha * alpha))
        return float(alpha @ self.sigma_w @ alpha)

    def cov_x(self) -> np.ndarray:
        return self.a @ self.sigma_z @ self.a.T + self.sigma_w_matrix()

    def cov_xy(self) -> np.ndarray:
        return self.a @ self.sigma_z @ self.beta


@dataclass(frozen=True)
class Dataset:
    """Training data, with the latent factors kept when the data is synthetic."""

    x: np.ndarray
    y: np.ndarray
    z: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2:
            raise ValueError(f"x must be 2-d, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.z is not None:
            z = np.asarray(self.z, dtype=float)
            if z.ndim == 1:
                z = z[:, None]
            if z.shape[0] != x.shape[0]:
                raise ValueError(f"x has {x.shape[0]} rows but z has {z.shape[0]}")
            if not np.all(np.isfinite(z)):
                raise ValueError("latent factors contain non-finite entries")
            object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        z = None if self.z is None else self.z[rows]
        return Dataset(self.x[rows], self.y[rows], z, self.seed)


@dataclass(frozen=True)
class ERDesign:
    """Essential Regression design: k factors with m pure variables each."""

    k: int
    m: int
    p: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be positive")
        if self.k * self.m > self.p:
            raise ValueError(f"k*m = {self.k * self.m} exceeds p = {self.p}")


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    er_assumptions: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return not self.violations

    @property
    def er_satisfied(self) -> bool:
        return bool(self.er_assumptions) and all(self.er_assumptions.values())


def as_matrix(sigma_w) -> np.ndarray:
    sigma_w = np.asarray(sigma_w, dtype=float)
    return np.diag(sigma_w) if sigma_w.ndim == 1 else sigma_w


def op_norm(sigma_w) -> float:
    """Operator norm of a PSD covariance given as a matrix or a diagonal."""
    sigma_w = np.asarray(sigma_w, dtype=float)
    if sigma_w.ndim == 1:
        return float(np.abs(sigma_w).max(initial=0.0))
    return float(np.linalg.norm(sigma_w, 2)) if sigma_w.size else 0.0


def trace(sigma_w) -> float:
    sigma_w = np.asarray(sigma_w, dtype=float)
    return float(sigma_w.sum() if sigma_w.ndim == 1 else np.trace(sigma_w))


def _rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > 1e-12 * s[0]))


def sym_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; tiny negative eigenvalues clip to 0."""
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _check_psd(name: str, m: np.ndarray, out: list) -> None:
    if np.max(np.abs(m - m.T), initial=0.0) > _SYM_TOL:
        out.append(f"{name} not symmetric")
        return
    if m.size and np.linalg.eigvalsh(m).min() < -_SYM_TOL:
        out.append(f"{name} has a negative eigenvalue")


def pure_rows(a: np.ndarray, tol: float = _PURE_TOL) -> np.ndarray:
    """Return, per row, the factor index of a signed canonical row, else -1."""
    absa = np.abs(a)
    top = absa.argmax(axis=1)
    is_unit = np.abs(absa[np.arange(a.shape[0]), top] - 1.0) <= tol
    rest = absa.sum(axis=1) - absa[np.arange(a.shape[0]), top]
    return np.where(is_unit & (rest <= tol), top, -1)


def validate_params(theta: FactorModelParams) -> ValidationReport:
    """Check the model invariants and the Essential Regression assumptions.

    Dimension mismatches raise; every other failed invariant is listed in
    ``violations``. ``er_assumptions`` reports A0 (row l1-norms at most 1),
    A1 (two pure rows per factor) and A3 (diagonal Sigma_W).
    """
    a = np.asarray(theta.a, dtype=float)
    k = theta.k
    if a.ndim != 2 or a.shape[1] != k:
        raise ValueError(f"A has shape {a.shape}, expected (p, {k})")
    p = a.shape[0]
    if np.shape(theta.beta) != (k,):
        raise ValueError(f"beta has shape {np.shape(theta.beta)}, expected ({k},)")
    if np.shape(theta.sigma_z) != (k, k):
        raise ValueError(f"Sigma_Z has shape {np.shape(theta.sigma_z)}, expected ({k}, {k})")
    if np.shape(theta.sigma_w) not in ((p, p), (p,)):
        raise ValueError(f"Sigma_W has shape {np.shape(theta.sigma_w)}, expected ({p}, {p})")

    report = ValidationReport()
    v = report.violations
    if k < 1:
        v.append("K < 1")
    if k >= p:
        v.append("K >= p")
    if _rank(a) < k:
        v.append("rank(A) < K")
    _check_psd("Sigma_Z", theta.sigma_z, v)
    if _rank(theta.sigma_z) < k:
        v.append("rank(Sigma_Z) < K")
    if theta.w_is_diag:
        if np.any(theta.sigma_w < -_SYM_TOL):
            v.append("Sigma_W has a negative eigenvalue")
    else:
        _check_psd("Sigma_W", theta.sigma_w, v)
    if theta.sigma_sq < 0:
        v.append("sigma_sq < 0")

    labels = pure_rows(a)
    sw = theta.sigma_w
    diagonal = theta.w_is_diag or not np.any(sw - np.diag(np.diag(sw)))
    report.er_assumptions = {
        "A0": bool(np.all(np.abs(a).sum(axis=1) <= 1 + 1e-10)),
        "A1": bool(all(np.sum(labels == j) >= 2 for j in range(k))),
        "A3": bool(diagonal),
    }
    return report


def frm_sigma_z(k: int) -> np.ndarray:
    """Latent covariance of the simulation designs.

    Diagonal evenly spaced on [2.5, 3]; off-diagonal entries
    (-1)^(i+j) * min(d_i, d_j) * 0.3^|i-j|.
    """
    d = np.linspace(2.5, 3.0, k)
    idx = np.arange(k)
    sign = np.where((idx[:, None] + idx[None, :]) % 2 == 0, 1.0, -1.0)
    s = sign * np.minimum(d[:, None], d[None, :]) * 0.3 ** np.abs(idx[:, None] - idx[None, :])
    np.fill_diagonal(s, d)
    return s


def _draw_data(theta: FactorModelParams, w_diag: np.ndarray, n: int, rng):
    k, p = theta.k, theta.p
    chol = np.linalg.cholesky(theta.sigma_z)
    z = rng.standard_normal((n, k)) @ chol.T
    w = rng.standard_normal((n, p)) * np.sqrt(w_diag)
    eps = rng.standard_normal(n) * np.sqrt(theta.sigma_sq)
    return z, z @ theta.a.T + w, z @ theta.beta + eps


def generate_frm(p: int, k: int, n: int, loading_scale: float = 1.0,
                 seed: int = 0) -> tuple[FactorModelParams, Dataset]:
    """Draw a generic factor regression instance and n samples from it.

    Loadings are i.i.d. N(0, 1/sqrt(k)) (variance), multiplied by
    ``loading_scale``. The random stream does not depend on
    ``loading_scale``, so a sweep over it at a fixed seed reuses the same
    draws.
    """
    if k >= min(n, p):
        raise ValueError(f"need k < min(n, p), got k={k}, n={n}, p={p}")
    if k < 1:
        raise ValueError("k must be positive")
    if loading_scale <= 0:
        raise ValueError("loading_scale must be positive")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, k)) * k ** -0.25 * loading_scale
    w_diag = rng.uniform(1.0, 3.0, p)
    beta = rng.uniform(0.0, 3.0, k)
    theta = FactorModelParams(k, a, beta, frm_sigma_z(k), w_diag, 1.0)
    z, x, y = _draw_data(theta, w_diag, n, rng)
    return theta, Dataset(x, y, z, seed)


def er_loadings(design: ERDesign, rng) -> np.ndarray:
    """Pure block I_K (x) 1_m on top, sparse signed rows below."""
    k, m, p = design.k, design.m, design.p
    if k < 4:
        raise ValueError(f"ER loadings need K >= 4 (support sizes 2..floor(K/2)), got K={k}")
    a = np.zeros((p, k))
    a[: k * m] = np.kron(np.eye(k), np.ones((m, 1)))
    for j in range(k * m, p):
        s = int(rng.integers(2, k // 2 + 1))
        support = rng.choice(k, size=s, replace=False)
        vals = rng.uniform(0.0, 1.0 / s, s)
        signs = np.where(rng.random(s) < 0.5, -1.0, 1.0)
        a[j, support] = vals * signs
        l1 = np.abs(a[j]).sum()
        if l1 > 1.0:
            a[j] /= l1
    return a


def generate_er(design: ERDesign, seed: int = 0,
                n: Optional[int] = None) -> tuple[FactorModelParams, Dataset]:
    """Draw an Essential Regression instance; ``n`` overrides ``design.n``.

    The all-pure case k*m == p needs no sparse rows and is allowed for any k.
    """
    n = design.n if n is None else n
    k, p = design.k, design.p
    if k >= min(n, p):
        raise ValueError(f"need k < min(n, p), got k={k}, n={n}, p={p}")
    rng = np.random.default_rng(seed)
    if k * design.m == p:
        a = np.kron(np.eye(k), np.ones((design.m, 1)))
    else:
        a = er_loadings(design, rng)
    w_diag = rng.uniform(1.0, 3.0, p)
    beta = rng.uniform(0.0, 3.0, k)
    theta = FactorModelParams(k, a, beta, frm_sigma_z(k), w_diag, 1.0)
    z, x, y = _draw_data(theta, w_diag, n, rng)
    return theta, Dataset(x, y, z, seed)


def noise_level(sigma_w: np.ndarray, n: int, scale_c: float = 1.0) -> float:
    """Operator-norm noise level c * (||Sigma_W||_op + tr(Sigma_W) / n)."""
    if n < 1 or scale_c <= 0:
        raise ValueError("need n >= 1 and scale_c > 0")
    return float(scale_c * (op_norm(sigma_w) + trace(sigma_w) / n))


def snr(theta: FactorModelParams) -> float:
    """lambda_K(A Sigma_Z A^T) / ||Sigma_W||_op."""
    op = op_norm(theta.sigma_w)
    if op == 0:
        raise ValueError("infinite SNR: Sigma_W is zero")
    # the K nonzero eigenvalues of A S A^T are those of S^1/2 A^T A S^1/2
    root = sym_sqrt(theta.sigma_z)
    g = root @ theta.a.T @ theta.a @ root
    return float(np.linalg.eigvalsh(g)[0] / op)


def effective_rank(sigma_w: np.ndarray) -> float:
    """tr(Sigma_W) / ||Sigma_W||_op."""
    op = op_norm(sigma_w)
    if op == 0:
        raise ValueError("effective rank undefined for the zero matrix")
    return trace(sigma_w) / op


def replication_seed(seed: int, rep: int) -> int:
    """Seed of replication ``rep``: ``seed XOR rep``."""
    return int(seed) ^ int(rep)
