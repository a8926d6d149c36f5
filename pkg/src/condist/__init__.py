"""Local linear estimation of conditional distribution functions.

Kernels, synthetic DGPs with analytic truth, the estimator, a quadrature
oracle for its deterministic target, and a seeded Monte Carlo harness.
"""

from .kernels import KernelSpec, UnivariateKernel, make_spec
from .dgp import DomainError, draw, get_dgp, truth
from .llr import Bandwidths, Sample, SingularDesign, fit_smoothed, fit_unsmoothed, surface

__version__ = "0.1.0"

__all__ = ["KernelSpec", "UnivariateKernel", "make_spec", "DomainError", "draw", "get_dgp",
           "truth", "Bandwidths", "Sample", "SingularDesign", "fit_smoothed", "fit_unsmoothed",
           "surface", "__version__"]
