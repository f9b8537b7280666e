import numpy as np
import pytest
from hypothesis import given, strategies as st

from factorpred.methods import FitContext, fit_method
from factorpred.model import Dataset, generate_frm
from factorpred.predictors import LinearPredictor, blp, fit_gls
from factorpred.selection import SplitPlan, make_split, multi_split, split_plans, split_select


def const(alpha, name="const"):
    def fit(d):
        return LinearPredictor(np.array(alpha, dtype=float), name)
    return fit


def sse_oracle(data, plan, alphas):
    """Direct transcription of the selection rule."""
    v = data.subset(plan.d2)
    return [float(np.sum((v.y - v.x @ a) ** 2)) for a in alphas]


def small(rng, n=20, p=3):
    return Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))


@pytest.mark.parametrize("n", [2, 3, 10, 11, 301])
def test_split_sizes_and_cover(n):
    plan = make_split(n, 7)
    assert plan.d1.size == n // 2
    assert np.array_equal(np.sort(np.concatenate([plan.d1, plan.d2])), np.arange(n))


def test_split_plan_rejects_overlap():
    with pytest.raises(ValueError):
        SplitPlan([0, 1], [1, 2])
    with pytest.raises(ValueError):
        make_split(1, 0)


def test_split_plans_are_seeded_per_index():
    plans = split_plans(50, 3, 11)
    for i, plan in enumerate(plans):
        assert np.array_equal(plan.d1, make_split(50, [11, i]).d1)
    assert not np.array_equal(plans[0].d1, plans[1].d1)


def test_single_candidate_always_wins(rng):
    d = small(rng)
    res = split_select(d, [const([1.0, 2.0, 3.0])], make_split(d.n, 0))
    assert res.m_hat == 0


def test_trains_on_d1_only(rng):
    d = small(rng, 30, 4)
    plan = make_split(d.n, 3)
    res = split_select(d, [fit_gls], plan)
    np.testing.assert_allclose(res.predictor.alpha, fit_gls(d.subset(plan.d1)).alpha)
    np.testing.assert_allclose(res.validation_sse,
                               sse_oracle(d, plan, [res.predictor.alpha]), rtol=1e-12)


def test_refit_uses_all_rows(rng):
    d = small(rng, 30, 4)
    res = split_select(d, [fit_gls], make_split(d.n, 3), refit=True)
    np.testing.assert_allclose(res.predictor.alpha, fit_gls(d).alpha)


def test_duplicates_pick_smallest_index(rng):
    d = small(rng)
    a = rng.standard_normal(3)
    res = split_select(d, [const(a * 5), const(a), const(a)], make_split(d.n, 1))
    assert res.m_hat in (0, 1)
    if res.m_hat == 1:
        assert res.validation_sse[1] == res.validation_sse[2]


@given(st.integers(0, 10_000), st.permutations(range(5)))
def test_selection_follows_permutation(seed, perm):
    rng = np.random.default_rng(seed)
    d = small(rng)
    alphas = [rng.standard_normal(3) for _ in range(5)]
    plan = make_split(d.n, seed)
    base = split_select(d, [const(a) for a in alphas], plan)
    permuted = split_select(d, [const(alphas[j]) for j in perm], plan)
    assert perm[permuted.m_hat] == base.m_hat
    np.testing.assert_array_equal(permuted.validation_sse, base.validation_sse[list(perm)])
    expected = sse_oracle(d, plan, alphas)
    assert base.m_hat == int(np.argmin(expected))


def test_failed_candidate_is_scored_infinite(rng):
    d = small(rng)

    def broken(_):
        raise RuntimeError("nope")

    res = split_select(d, [broken, const([0, 0, 0])], make_split(d.n, 0))
    assert res.m_hat == 1
    assert np.isinf(res.validation_sse[0])
    assert "nope" in res.failures[0]
    with pytest.raises(RuntimeError):
        split_select(d, [broken], make_split(d.n, 0))


def test_errors(rng):
    d = small(rng)
    with pytest.raises(ValueError):
        split_select(d, [], make_split(d.n, 0))
    with pytest.raises(ValueError):
        split_select(d, [fit_gls], make_split(d.n + 1, 0))
    with pytest.raises(ValueError):
        multi_split(d, [fit_gls], 0, 0)


def test_oracle_beats_zero_predictor():
    wins = 0
    for seed in range(100):
        theta, d = generate_frm(500, 5, 300, seed=seed)
        res = split_select(d, [const(np.zeros(500)), lambda _: blp(theta)],
                           make_split(d.n, seed))
        wins += res.m_hat == 1
    assert wins >= 99


def test_one_split_equals_split_select(rng):
    d = small(rng, 40, 5)
    cands = [fit_gls, const(np.zeros(5)), const(np.ones(5))]
    ms = multi_split(d, cands, 1, 9)
    single = split_select(d, cands, make_split(d.n, [9, 0]))
    np.testing.assert_array_equal(ms.alpha, single.predictor.alpha)
    assert ms.meta["selections"] == [single.m_hat]


def test_identical_candidates_average_to_themselves(rng):
    d = small(rng)
    a = rng.standard_normal(3)
    ms = multi_split(d, [const(a), const(a)], 6, 2)
    np.testing.assert_allclose(ms.alpha, a, atol=1e-15)
    assert ms.meta["selections"] == [0] * 6


def test_multi_split_is_mean_of_selected(rng):
    d = small(rng, 40, 5)
    cands = [fit_gls, const(np.zeros(5))]
    ms = multi_split(d, cands, 4, 5)
    picks = [split_select(d, cands, plan).predictor.alpha for plan in split_plans(d.n, 4, 5)]
    np.testing.assert_allclose(ms.alpha, np.mean(picks, axis=0), atol=1e-14)


def test_ms_method_through_registry():
    theta, d = generate_frm(60, 2, 40, seed=1)
    spec = {"name": "ms", "candidates": ["gls", {"name": "pcr-k", "k": 2}], "n_splits": 3}
    pred = fit_method(spec, d, FitContext(theta=theta, seed=4))
    assert pred.method == "ms"
    assert len(pred.meta["selections"]) == 3
    assert pred.meta["candidates"] == ["gls", "pcr-k"]
    again = fit_method(spec, d, FitContext(theta=theta, seed=4))
    np.testing.assert_array_equal(pred.alpha, again.alpha)


def test_ms_refit_flag():
    theta, d = generate_frm(60, 2, 40, seed=1)
    pred = fit_method({"name": "ms", "candidates": ["gls"], "refit": True}, d,
                      FitContext(theta=theta))
    np.testing.assert_allclose(pred.alpha, fit_gls(d).alpha)
