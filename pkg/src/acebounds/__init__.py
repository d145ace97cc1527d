"""Average causal effect estimation under back-door, front-door and two-door assumptions."""

from .bounds import (
    BoundReport,
    SimDgpParams,
    bound,
    bound_bd,
    bound_bd_fd_td,
    bound_bd_td,
    bound_fd,
    bound_fd_td,
    bound_td,
    simdgp_bound,
    simdgp_bound_bd,
    simdgp_bound_combo,
    simdgp_bound_fd,
    simdgp_bound_td,
    simdgp_theta,
)
from .dist import (
    DiscreteJoint,
    TreatmentPair,
    ace_backdoor,
    ace_frontdoor,
    ace_twodoor,
    chain_joint,
    factorized_joint,
    cond_mean_var,
    conditional,
    marginal,
    read_dist_csv,
    write_dist_csv,
)
from .errors import (
    AceboundsError,
    AssumptionViolation,
    DegenerateModel,
    DomainError,
    FitError,
    MaxIterExceeded,
    MissingNuisance,
    PositivityViolation,
    QuadratureNonConvergence,
    RankDeficient,
    SeparationDetected,
    ZeroConditioningEvent,
)
from .influence import (
    MODEL_TAGS,
    NuisanceSet,
    Observation,
    brute_force_mean,
    brute_force_variance,
    evaluate_m,
    m_bd,
    m_bd_fd_td,
    m_bd_td,
    m_fd,
    m_fd_td,
    m_td,
    m_td_reduced,
    truth_nuisances,
)
from .quadrature import FiniteZRule, GaussHermiteZRule, expect_z

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
