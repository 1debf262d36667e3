"""Random sums of independent summands: error bounds for their limit laws and numeric checks."""

__version__ = "0.1.0"

from .index_models import IndexModel, ScaledIndexLimit, inv_sqrt_moment, exact_dk_scaled_index
from .summands import SummandDist, SummandModel, lattice_partial_pmf
from .limits import LimitLaw, laplace_for_sigma
from .bounds import (BoundValue, ConstantsRegistry, Metric, geometric_laplace_bound,
                     normal_limit_bound, general_bound, variance_of_w)
from .distances import (DistanceEstimate, empirical_dk, empirical_w1, exact_dk_lattice,
                        exact_w1_lattice, random_sum_exact_pmf)

__all__ = [
    "IndexModel", "ScaledIndexLimit", "inv_sqrt_moment", "exact_dk_scaled_index",
    "SummandDist", "SummandModel", "lattice_partial_pmf",
    "LimitLaw", "laplace_for_sigma",
    "BoundValue", "ConstantsRegistry", "Metric", "geometric_laplace_bound",
    "normal_limit_bound", "general_bound", "variance_of_w",
    "DistanceEstimate", "empirical_dk", "empirical_w1", "exact_dk_lattice",
    "exact_w1_lattice", "random_sum_exact_pmf",
]
