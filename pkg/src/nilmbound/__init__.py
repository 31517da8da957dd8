"""Lower bounds on the schedule-estimation error of NILM attackers.

The Fisher information that a noisy aggregate meter reading carries about
appliance start times is ``I^w * R_d(tau)``, where ``R_d`` is the Gram matrix
of the sampled, shifted signature derivatives.  This package evaluates the
resulting Cramér-Rao-type bounds, searches for schedules that maximize them,
and checks them against a Monte Carlo maximum-likelihood attacker.
"""

from .bounds import (
    AffineBias,
    BiasTerm,
    BoundResult,
    EmpiricalBias,
    Theorem,
    bound_asymptotic,
    bound_biased,
    bound_biased_simplified,
    bound_gradient,
    bound_unbiased,
    trace_objective,
)
from .correlation import (
    CorrelationMatrix,
    Flavor,
    QuadratureSpec,
    SamplingGrid,
    r_continuous,
    r_continuous_partial,
    r_discrete,
    r_discrete_partial,
)
from .errors import (
    CatalogError,
    GradientUnavailableError,
    InfeasibleSetError,
    NumericalError,
    OptimizationError,
    QuadratureError,
    ValidationError,
)
from .noise import NoiseKind, NoiseModel, fisher_information
from .scenario import Scenario, load_scenario, parse_scenario
from .scheduler import (
    AscentConfig,
    FeasibleSet,
    ScheduleProblem,
    ScheduleSolution,
    SweepResult,
    optimize,
    project,
    sweep_2d,
)
from .signatures import (
    DoublePulse,
    LoadSignature,
    PiecewisePolynomial,
    RaisedCosinePulse,
    SignatureCatalog,
    SmoothTrapezoid,
    load_catalog,
    parse_catalog,
)
from .simulate import EstimatorConfig, EstimatorReport, generate, ml_estimate, monte_carlo

__version__ = "0.1.0"

__all__ = [
    "AffineBias",
    "AscentConfig",
    "BiasTerm",
    "bound_asymptotic",
    "bound_biased",
    "bound_biased_simplified",
    "bound_gradient",
    "bound_unbiased",
    "BoundResult",
    "CatalogError",
    "CorrelationMatrix",
    "DoublePulse",
    "EmpiricalBias",
    "EstimatorConfig",
    "EstimatorReport",
    "FeasibleSet",
    "fisher_information",
    "Flavor",
    "generate",
    "GradientUnavailableError",
    "InfeasibleSetError",
    "load_catalog",
    "load_scenario",
    "LoadSignature",
    "ml_estimate",
    "monte_carlo",
    "NoiseKind",
    "NoiseModel",
    "NumericalError",
    "OptimizationError",
    "optimize",
    "parse_catalog",
    "parse_scenario",
    "PiecewisePolynomial",
    "project",
    "QuadratureError",
    "QuadratureSpec",
    "r_continuous",
    "r_continuous_partial",
    "r_discrete",
    "r_discrete_partial",
    "RaisedCosinePulse",
    "SamplingGrid",
    "Scenario",
    "ScheduleProblem",
    "ScheduleSolution",
    "SignatureCatalog",
    "SmoothTrapezoid",
    "sweep_2d",
    "SweepResult",
    "Theorem",
    "trace_objective",
    "ValidationError",
]
