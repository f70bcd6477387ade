"""Deterministic side: self-consistent equation, kernels, density and flow."""

from .density import DistributionFunction, density_rho, density_table, quantiles, support_bound
from .flow import FlowState, FlowTrajectory, crossing_time, flow_integrate
from .kernels import (TwoPointKernel, circulancy_deviation, kernel_K, kernel_K3, mhat, mhat_eigenvalues,
                      three_m_trace, two_point_kernel)
from .semicircle import m_semicircle, rho_semicircle, semicircle_cdf
from .solver import DysonModel, DysonSolution, as_model, residual, solve_m

__all__ = [
    "DistributionFunction", "DysonModel", "DysonSolution", "FlowState", "FlowTrajectory",
    "TwoPointKernel", "as_model", "circulancy_deviation", "crossing_time", "density_rho",
    "density_table", "flow_integrate", "kernel_K", "kernel_K3", "m_semicircle", "mhat",
    "mhat_eigenvalues", "quantiles", "residual", "rho_semicircle", "semicircle_cdf", "solve_m",
    "support_bound", "three_m_trace", "two_point_kernel",
]
