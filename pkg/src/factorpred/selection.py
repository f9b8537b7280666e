"""Model selection by sample splitting.

Every candidate is trained on the first half D1 and scored by squared error
on the second half D2. The winner is returned as trained on D1, which is the
procedure the oracle inequality is about; ``refit=True`` retrains it on all
rows instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import Dataset
from .predictors import LinearPredictor

log = logging.getLogger(__name__)

Candidate = Callable[[Dataset], LinearPredictor]


@dataclass(frozen=True)
class SplitPlan:
    d1: np.ndarray
    d2: np.ndarray
    seed: object = None

    def __post_init__(self):
        d1 = np.asarray(self.d1, dtype=int)
        d2 = np.asarray(self.d2, dtype=int)
        if np.intersect1d(d1, d2).size:
            raise ValueError("D1 and D2 overlap")
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)

    @property
    def n(self) -> int:
        return self.d1.size + self.d2.size


def make_split(n: int, seed) -> SplitPlan:
    """Random split of range(n) with |D1| = floor(n / 2); both halves sorted."""
    if n < 2:
        raise ValueError("need at least two rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    half = n // 2
    return SplitPlan(np.sort(perm[:half]), np.sort(perm[half:]), seed)


def split_plans(n: int, n_splits: int, seed: int) -> list:
    """The plans used by :func:`multi_split`; split i is seeded by (seed, i)."""
    return [make_split(n, [seed, i]) for i in range(n_splits)]


@dataclass
class SplitResult:
    m_hat: int
    predictor: LinearPredictor
    validation_sse: np.ndarray
    predictors: list
    failures: dict = field(default_factory=dict)
    plan: SplitPlan = None


def split_select(data: Dataset, candidates: Sequence[Candidate], plan: SplitPlan,
                 refit: bool = False) -> SplitResult:
    if len(candidates) == 0:
        raise ValueError("no candidates")
    if plan.n != data.n:
        raise ValueError(f"plan covers {plan.n} rows, data has {data.n}")
    train, valid = data.subset(plan.d1), data.subset(plan.d2)

    sse = np.full(len(candidates), np.inf)
    fitted = [None] * len(candidates)
    failures = {}
    for m, fit in enumerate(candidates):
        try:
            pred = fit(train)
        except Exception as exc:  # a failed candidate just loses
            log.warning("candidate %d failed on D1: %s", m, exc)
            failures[m] = f"{type(exc).__name__}: {exc}"
            continue
        fitted[m] = pred
        resid = valid.y - valid.x @ pred.alpha
        sse[m] = float(resid @ resid)

    if not np.isfinite(sse).any():
        raise RuntimeError(f"every candidate failed: {failures}")
    m_hat = int(np.argmin(sse))  # first minimizer
    chosen = candidates[m_hat](data) if refit else fitted[m_hat]
    return SplitResult(m_hat, chosen, sse, fitted, failures, plan)


def multi_split(data: Dataset, candidates: Sequence[Candidate], n_splits: int,
                seed: int) -> LinearPredictor:
    """Average of the selected coefficient vectors over ``n_splits`` random splits."""
    if n_splits < 1:
        raise ValueError("n_splits must be at least 1")
    results = [split_select(data, candidates, plan)
               for plan in split_plans(data.n, n_splits, seed)]
    alpha = np.mean([r.predictor.alpha for r in results], axis=0)
    chosen = [r.m_hat for r in results]
    ranks = {r.predictor.selected_rank for r in results}
    pred = LinearPredictor(alpha, "ms", ranks.pop() if len(ranks) == 1 else None)
    pred.meta.update(
        selections=chosen,
        methods=[r.predictor.method for r in results],
        validation_sse=[r.validation_sse.tolist() for r in results],
        failures=[r.failures for r in results],
    )
    return pred
