"""Hierarchical Bayesian estimate of gender bias in Nobel Prize awards.

The package links per-field laureate counts to the female share of
senior faculty a configurable number of years before each award, and
infers a per-field multiplicative bias factor with a self-contained
Hamiltonian Monte Carlo sampler. See the ``lagbias`` command line for
the file-based pipeline.
"""

from .data import (DataError, Field, LaureateRecord, RatioGroup, RatioPoint,
                   load_laureates, load_ratios, serialize_laureates,
                   serialize_ratios, summarize)
from .hmc import HmcConfig, PosteriorDraws, SamplerError, compute_diagnostics, sample
from .model import (Hyperparams, ModelParams, PosteriorDensity,
                    binomial_logpmf, prepare)
from .ratios import FitError, LogisticParams, RatioCurve, fit_all, fit_logistic

__version__ = "0.1.0"

__all__ = [
    "DataError", "Field", "LaureateRecord", "RatioGroup", "RatioPoint",
    "load_laureates", "load_ratios", "serialize_laureates",
    "serialize_ratios", "summarize",
    "HmcConfig", "PosteriorDraws", "SamplerError", "compute_diagnostics",
    "sample",
    "Hyperparams", "ModelParams", "PosteriorDensity", "binomial_logpmf",
    "prepare",
    "FitError", "LogisticParams", "RatioCurve", "fit_all", "fit_logistic",
    "__version__",
]
