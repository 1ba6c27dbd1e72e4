"""Mean-field particle systems, exact finite-N relative entropies and action functionals."""

__version__ = "0.1.0"

from .action import (
    EntropyInitialCost,
    PointInitialCost,
    hamiltonian,
    local_lagrangian,
    minimize_action_Jt,
    quasipotential,
)
from .chain import (
    LatticeDistribution,
    build_generator,
    entropy_curve_Ft,
    scaled_product_entropy,
    stationary_distribution,
    transient_distribution,
)
from .dynamics import (
    RateFamily,
    drift,
    entropy_descent_rate,
    find_fixed_points,
    solve_forward,
)
from .gibbs import (
    GibbsModel,
    affine_model,
    curie_weiss,
    gibbs_constant_C,
    limit_rate_family,
    lyapunov_F,
    prelimit_rate_family,
)
from .particle import lln_gap, simulate_empirical, simulate_tagged
from .simplex import (
    Lattice,
    LatticeMeasure,
    empirical_measure,
    enumerate_lattice,
    relative_entropy,
)

__all__ = [
    "EntropyInitialCost",
    "GibbsModel",
    "Lattice",
    "LatticeDistribution",
    "LatticeMeasure",
    "PointInitialCost",
    "RateFamily",
    "affine_model",
    "build_generator",
    "curie_weiss",
    "drift",
    "empirical_measure",
    "entropy_curve_Ft",
    "entropy_descent_rate",
    "enumerate_lattice",
    "find_fixed_points",
    "gibbs_constant_C",
    "hamiltonian",
    "limit_rate_family",
    "lln_gap",
    "local_lagrangian",
    "lyapunov_F",
    "minimize_action_Jt",
    "prelimit_rate_family",
    "quasipotential",
    "relative_entropy",
    "scaled_product_entropy",
    "simulate_empirical",
    "simulate_tagged",
    "solve_forward",
    "stationary_distribution",
    "transient_distribution",
]
