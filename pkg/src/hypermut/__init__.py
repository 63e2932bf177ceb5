"""Mean passage times of the hypercube mutation walk lumped to Hamming classes."""

__version__ = "0.1.0"

from .chain import (
    ClassDistribution,
    ModelParams,
    SingleSiteKernel,
    TransitionMatrix,
    binomial,
    class_distribution,
    n_step_matrix,
    p_step,
    single_site_power,
    transition_matrix,
)
from .errors import (
    AllCensored,
    DomainError,
    NonConvergence,
    PoleAtArgument,
    SingularSystem,
)
from .exact import (
    Method,
    PassageTimeReport,
    SeriesControl,
    f_generating,
    g_generating,
    passage_time_explicit,
    passage_time_kac_series,
    phi,
    return_time_class,
    return_time_zero,
    traversal_time,
    vandermonde_check,
)
from .montecarlo import (
    EstimateReport,
    Genotype,
    SimConfig,
    estimate_hitting_time,
    lumping_consistency,
    step_genotype,
)
from .oracle import (
    PotentialMatrix,
    ehrenfest_matrix,
    ergodic_limit_residual,
    hitting_times_solve,
    lempot_residual,
    potential_matrix,
    stationary_distribution,
)
