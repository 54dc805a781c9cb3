"""measureproj: project target densities onto structured measure sets.

Stippling (uniform N-point measures), constructive quantization, and
continuous line drawing (occupation measures of kinematically constrained
curves), with exact small-scale Wasserstein-1 verification throughout.
"""

__version__ = "0.1.0"

from .constraints import (CurveConstraintSpec, DiffOperator, ProjectionError,
                          apply_diff, feasibility_residuals, mixed_norm,
                          project_box, project_curve_set)
from .curves import (PolyStep, SampledCurve, SerpentineCurve,
                     build_serpentine_curve, curve_to_npoint, npoint_to_curve,
                     occupation_proxy, serpentine_w1_bound)
from .energy import (AttractionField, EnergyReport, attraction, energy_report,
                     fast_energy, grad_J, grad_J_fast, nh_energy_fourier,
                     repulsion, torus_pair_energy, torus_target_constant)
from .experiments import (RateFit, curve_sweep, fit_rate, quantizer_sweep,
                          random_blob_measure, run_curve_rate, run_quantizer_rate)
from .kernels import FilterSpec, KernelSpec, eval_H, grad_H, lipschitz_of_grad
from .measure import (DegenerateTargetError, DiscreteMeasure, GridDensity,
                      Point, ValidationError, from_image, load_grayscale,
                      tv_norm, uniform_npoint)
from .quantize import (CubePartition, cell_masses, cube_quantize,
                       quantizer_bound, rounding_recursion, serpentine_order)
from .solver import (DivergenceError, SolverConfig, SolverTrace, default_step,
                     init_points, run)
from .transport import (CouplingPlan, LipschitzViolationError, consolidate,
                        make_lipschitz, w1_1d, w1_dual_lower_bound, w1_exact)
