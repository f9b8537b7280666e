"""Named fitting procedures shared by the benchmark runner and the CLI.

A method is a name plus a small dict of tuning values, e.g.
``MethodSpec("pcr-stilde", {"mu_scale": 0.25})``. Oracle methods (``pcr-k``
without an explicit k, ``pcr-shat`` without ``delta_w``, ``blp``) read the
true parameters from the :class:`FitContext`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .er import ERConfig, fit_er
from .model import Dataset, FactorModelParams, noise_level
from .predictors import (DEFAULT_C0, DEFAULT_KAPPA, DEFAULT_MU_SCALE, LinearPredictor, blp,
                         default_mu_n, fit_gls, fit_pcr, select_elbow, select_penalized)
from .selection import multi_split
from .spectra import SvdCache, decompose

TUNING_KEYS = {
    "pcr-k": {"k"},
    "pcr-stilde": {"mu_scale", "mu_n", "kappa"},
    "pcr-shat": {"c0", "delta_w", "noise_c"},
    "gls": set(),
    "er": {"delta", "mu", "delta_scale", "mu_scale", "center"},
    "ms": {"candidates", "n_splits", "refit"},
    "blp": set(),
}
METHOD_NAMES = tuple(TUNING_KEYS)
DEFAULT_MS_CANDIDATES = ("pcr-stilde", "gls", "er")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    tuning: dict = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self):
        if self.name not in TUNING_KEYS:
            raise ValueError(f"unknown method {self.name!r}; choose from {', '.join(METHOD_NAMES)}")
        extra = set(self.tuning) - TUNING_KEYS[self.name]
        if extra:
            raise ValueError(f"unknown tuning keys for {self.name}: {sorted(extra)}")
        if self.name == "ms":
            for c in self.tuning.get("candidates", DEFAULT_MS_CANDIDATES):
                if as_spec(c).name == "ms":
                    raise ValueError("ms cannot be its own candidate")

    @property
    def tag(self) -> str:
        return self.label or self.name


def as_spec(obj) -> MethodSpec:
    """Accept a MethodSpec, a bare name, or a {"name": ..., "label": ..., **tuning} dict."""
    if isinstance(obj, MethodSpec):
        return obj
    if isinstance(obj, str):
        return MethodSpec(obj)
    if isinstance(obj, dict):
        d = dict(obj)
        if "name" not in d:
            raise ValueError(f"method entry without a name: {obj}")
        name, label = d.pop("name"), d.pop("label", None)
        return MethodSpec(name, d, label)
    raise TypeError(f"cannot read a method from {obj!r}")


@dataclass
class FitContext:
    """What a fit may know besides the data: the true model (for oracle
    methods) and a seed (for sample splitting). The SVD of the most recent
    dataset is cached so several PCR variants share it."""

    theta: Optional[FactorModelParams] = None
    seed: int = 0
    _svd: tuple = (None, None)

    def svd(self, data: Dataset) -> SvdCache:
        if self._svd[0] is not data:
            self._svd = (data, decompose(data.x))
        return self._svd[1]

    def need_theta(self, what: str) -> FactorModelParams:
        if self.theta is None:
            raise ValueError(f"{what} needs the true model parameters")
        return self.theta


def fit_method(spec, data: Dataset, ctx: Optional[FitContext] = None) -> LinearPredictor:
    spec = as_spec(spec)
    ctx = FitContext() if ctx is None else ctx
    t = spec.tuning
    name = spec.name

    if name == "pcr-k":
        k = t.get("k")
        k = ctx.need_theta("pcr-k without k").k if k is None else int(k)
        pred = fit_pcr(data, ctx.svd(data), k)
    elif name == "pcr-stilde":
        cache = ctx.svd(data)
        mu_n = t.get("mu_n")
        if mu_n is None:
            mu_n = default_mu_n(data.n, data.p, t.get("mu_scale", DEFAULT_MU_SCALE))
        sel = select_penalized(cache, data.p, mu_n, t.get("kappa", DEFAULT_KAPPA))
        pred = fit_pcr(data, cache, min(sel.chosen, cache.rank))
        pred.meta.update(mu_n=mu_n, k_bar=sel.k_bar)
    elif name == "pcr-shat":
        cache = ctx.svd(data)
        delta_w = t.get("delta_w")
        if delta_w is None:
            sw = ctx.need_theta("pcr-shat without delta_w").sigma_w
            delta_w = noise_level(sw, data.n, t.get("noise_c", 1.0))
        c0 = t.get("c0", DEFAULT_C0)
        sel = select_elbow(cache, delta_w, c0)
        pred = fit_pcr(data, cache, sel.chosen)
        pred.meta.update(delta_w=delta_w, c0=c0)
    elif name == "gls":
        pred = fit_gls(data)
    elif name == "er":
        cfg = ERConfig(**t)
        fit, pred = fit_er(data, cfg)
        pred.meta["partition_sizes"] = [len(g) for g in fit.partition]
    elif name == "ms":
        cands = [as_spec(c) for c in t.get("candidates", DEFAULT_MS_CANDIDATES)]
        # candidates get a fresh context: the parent's SVD belongs to the full data
        procs = [_bind(c, ctx.theta) for c in cands]
        if t.get("refit", False):
            from .selection import make_split, split_select
            res = split_select(data, procs, make_split(data.n, [ctx.seed, 0]), refit=True)
            pred = LinearPredictor(res.predictor.alpha, "ms", res.predictor.selected_rank)
            pred.meta.update(selections=[res.m_hat])
        else:
            pred = multi_split(data, procs, int(t.get("n_splits", 1)), ctx.seed)
        pred.meta["candidates"] = [c.tag for c in cands]
    elif name == "blp":
        pred = blp(ctx.need_theta("blp"))
    else:  # pragma: no cover - guarded by MethodSpec
        raise AssertionError(name)
    pred.meta["method_tag"] = spec.tag
    return pred


def _bind(spec: MethodSpec, theta):
    def fit(d: Dataset) -> LinearPredictor:
        return fit_method(spec, d, FitContext(theta=theta))
    fit.__name__ = spec.tag
    return fit
