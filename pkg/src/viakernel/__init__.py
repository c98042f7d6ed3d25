"""Conic comparison of viability kernels for controlled ODE systems."""

from .cone import ConvexCone
from .dynamics import (Box, ControlledSystem, Finite, Reduction, Report, SamplingPlan,
                       check_general_quasimonotone, check_orthant_quasimonotone,
                       check_reduction, jacobian_fd)
from .flow import ControlPath, Trajectory, integrate, reduce_path
from .comparison import ComparisonReport, compare_controlled, compare_flows, epsilon_diagnostic
from .viability import (DesirableSet, GridSpec, KernelGrid, check_equality_condition,
                        compute_kernel, extend_desirable, kernel_inclusion, reduced_dynamics)

__version__ = "0.1.0"
