"""Covariance-driven, probabilistic and Student-t robust stochastic subspace identification."""

from .errors import IdentificationError, RankDeficiencyError
from .hankel import CovarianceSet, HankelPair, build_hankel, cholesky_sqrt, covariances
from .mdof import (
    MdofSystem,
    MultiChannelRecord,
    OutlierSpec,
    SimulationConfig,
    benchmark_3dof,
    ground_truth_modal,
    inject_outliers,
    outlier_preset,
    simulate_response,
)
from .modal import ModalSet, StateSpaceEstimate, modal_properties, system_matrices
from .projections import CcaResult, ProjectionModel, SubspacePair, cca, pcca_mle, subspaces
from .robust import EmConfig, EStepStats, RobustModel, e_step, fit, m_step, q_function, recover_rotation, solve_nu
from .ssi import run_ssi

__version__ = "0.1.0"
