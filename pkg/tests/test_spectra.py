import numpy as np
import pytest
from hypothesis import given, strategies as st

from factorpred.spectra import column_basis, decompose, diagnostics, low_rank_approx, projection


def test_identity_and_rank_one():
    c = decompose(np.eye(3))
    np.testing.assert_allclose(c.s, [1, 1, 1])
    u, v = np.arange(1.0, 5.0), np.array([2.0, -1.0, 0.5])
    c = decompose(np.outer(u, v))
    assert c.rank == 1
    assert c.s[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))


def test_reconstruction_and_orthonormality(rng):
    x = rng.standard_normal((50, 80))
    c = decompose(x)
    assert np.linalg.norm(x - (c.u * c.s) @ c.v.T) / np.linalg.norm(x) <= 1e-8
    assert np.abs(c.u.T @ c.u - np.eye(50)).max() <= 1e-8
    assert np.abs(c.v.T @ c.v - np.eye(50)).max() <= 1e-8
    assert np.all(np.diff(c.s) <= 0)


def test_lambda_hat_matches_gram_eigenvalues(rng):
    x = rng.standard_normal((30, 12))
    c = decompose(x)
    ev = np.sort(np.linalg.eigvalsh(x.T @ x / 30))[::-1]
    np.testing.assert_allclose(c.lambda_hat, ev, rtol=1e-10)
    assert c.lam(0) == np.inf
    assert c.lam(13) == 0.0


def test_lambda_zero_past_rank(rng):
    x = rng.standard_normal((20, 3)) @ rng.standard_normal((3, 10))
    c = decompose(x)
    assert c.rank == 3
    assert np.all(c.lambda_hat[3:] == 0)
    assert c.lam(4) == 0.0


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        decompose(np.array([[1.0, np.inf]]))


def test_low_rank_approx(rng):
    x = rng.standard_normal((15, 9))
    c = decompose(x)
    assert not np.any(low_rank_approx(c, 0))
    assert np.linalg.norm(x - low_rank_approx(c, 9)) <= 1e-8 * np.linalg.norm(x)
    for k in range(10):
        resid = np.linalg.norm(x - low_rank_approx(c, k)) ** 2
        assert resid == pytest.approx(np.sum(c.s[k:] ** 2), rel=1e-9, abs=1e-9)
    with pytest.raises(ValueError):
        low_rank_approx(c, 10)


def test_diagnostics_identity(rng):
    x = rng.standard_normal((10, 25))
    c = decompose(x)
    d = diagnostics(x, np.eye(25))
    assert d.psi_hat == 0.0
    assert d.r_hat == c.rank == 10
    assert d.eta_hat == pytest.approx(c.lam(10), rel=1e-10)


def test_diagnostics_top_k(rng):
    x = rng.standard_normal((40, 30))
    c = decompose(x)
    for k in (1, 4, 11):
        d = diagnostics(x, c.v[:, :k])
        assert d.r_hat == k
        assert d.eta_hat == pytest.approx(c.lam(k), rel=1e-9)
        assert d.psi_hat == pytest.approx(c.lam(k + 1), rel=1e-9)


def test_diagnostics_random_subspace(rng):
    x = rng.standard_normal((25, 40))
    q, _ = np.linalg.qr(rng.standard_normal((40, 6)))
    d = diagnostics(x, q)
    s = np.linalg.svd(x @ q @ q.T, compute_uv=False)
    assert d.r_hat == 6
    assert d.eta_hat * 25 == pytest.approx(s[5] ** 2, rel=1e-9)
    s_perp = np.linalg.svd(x @ (np.eye(40) - q @ q.T), compute_uv=False)
    assert d.psi_hat * 25 == pytest.approx(s_perp[0] ** 2, rel=1e-9)


def test_diagnostics_zero_basis_error(rng):
    with pytest.raises(ValueError):
        diagnostics(rng.standard_normal((5, 4)), np.zeros((4, 2)))


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_diagnostics_invariant_under_reparametrization(seed, q):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((12, 8))
    b = rng.standard_normal((8, q))
    g = rng.standard_normal((q, q)) + 3 * np.eye(q)
    d1, d2 = diagnostics(x, b), diagnostics(x, b @ g)
    assert d1.r_hat == d2.r_hat
    assert d1.eta_hat == pytest.approx(d2.eta_hat, rel=1e-7)
    assert d1.psi_hat == pytest.approx(d2.psi_hat, rel=1e-7, abs=1e-12)


def test_projection_of_rank_deficient_basis(rng):
    b = rng.standard_normal((7, 2))
    b = np.hstack([b, b[:, :1] * 2])
    p = projection(b)
    assert column_basis(b).shape[1] == 2
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    np.testing.assert_allclose(p @ b, b, atol=1e-12)
