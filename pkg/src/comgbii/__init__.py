"""Composite GBII distributions and regression for heavy-tailed losses.

The head and tail components are GBII laws spliced at their common mode, so
the density is continuous and smooth at the threshold.  Submodules:

- ``specfun``: log-beta, digamma, the regularized incomplete beta, its
  inverse and its shape derivatives
- ``gbii``: the four-parameter GBII distribution
- ``composite``: the mode-matched composite law and its risk measures
- ``regression``: constrained maximum likelihood with covariates
- ``solver``: augmented Lagrangian optimizer
- ``diagnostics``: information criteria, residuals, goodness of fit, risk
- ``dataio``: CSV ingestion, design matrices, splits and simulated data
"""

from .composite import CompositeGBII, CompositeParams, derive_implied
from .errors import (
    ComGbiiError,
    ConstraintError,
    ConvergenceError,
    DataError,
    DomainError,
    ExistenceError,
    NonFiniteError,
    SingularHessianError,
)
from .families import ROSTER, get_family
from .gbii import GbiiParams
from .regression import FitConfig, RegressionModel, fit
from .solver import SolverConfig

__version__ = "0.1.0"

__all__ = [
    "CompositeGBII",
    "CompositeParams",
    "derive_implied",
    "GbiiParams",
    "FitConfig",
    "RegressionModel",
    "fit",
    "SolverConfig",
    "ROSTER",
    "get_family",
    "ComGbiiError",
    "ConstraintError",
    "ConvergenceError",
    "DataError",
    "DomainError",
    "ExistenceError",
    "NonFiniteError",
    "SingularHessianError",
]
