"""Count-data regression with a single unusual event.

A SUE counting process has independent exponential interarrival times with
rate ``lambda``, except that event number ``gamma_event`` arrives at rate
``alpha * lambda``. ``alpha = 1`` is the Poisson process.
"""

from .baseline import GammaCountParams, PoissonParams, gamma_count_pmf, poisson_pmf
from .data import DatasetSchema, load_csv, load_dataset, write_csv
from .distributions import (
    MomentSummary,
    PmfTable,
    SueParams,
    sue_dispersion,
    sue_mean,
    sue_pmf,
    sue_pmf_direct,
    sue_pmf_series,
    sue_pmf_table,
    sue_second_moment,
    vm_surface,
)
from .estimator import GammaCountRegressor, PoissonCountRegressor, SUERegressor
from .exceptions import (
    BoundedEvaluationError,
    ConvergenceError,
    DatasetError,
    DatasetUnavailableError,
    DomainError,
    NumericalInstabilityError,
    RankDeficientError,
    SueError,
)
from .inference import FitResult, fit, scan_gamma, standard_errors
from .optimize import OptimizerSettings
from .regression import CountDataset, RegressionSpec, fitted_moments, log_likelihood
from .report import FitReport, build_report
from .simulate import EmpiricalPmf, SimSettings, simulate_mean_variance, simulate_sue

__version__ = "0.1.0"
