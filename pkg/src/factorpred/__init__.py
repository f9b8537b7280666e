"""Prediction under latent factor regression models.

PCR with data-driven rank, minimum-norm least squares, Essential Regression
through the LOVE loading estimate, and sample-splitting model selection,
together with exact risk evaluation and a simulation harness.
"""

from .model import (Dataset, ERDesign, FactorModelParams, effective_rank, generate_er,
                    generate_frm, noise_level, snr, validate_params)
from .predictors import (LinearPredictor, RankSelection, blp, fit_gls, fit_pcr, fit_projected,
                         predict, select_elbow, select_penalized)
from .spectra import SvdCache, decompose, diagnostics
from .er import ERConfig, ERFit, fit_er
from .selection import SplitPlan, make_split, multi_split, split_select
from .methods import FitContext, MethodSpec, fit_method
from .risk import (BenchmarkTable, DesignPoint, RiskReport, exact_excess_risk, mc_risk,
                   oracle_bounds, run_benchmark)

__version__ = "0.1.0"
