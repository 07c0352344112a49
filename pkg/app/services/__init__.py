"""
Services package for CarbonShift.
"""

from .dcopf import solve_dcopf
from .emissions import compute_lmce, compute_signals
from .experiments import compare_models, run_pipeline_m1
from .lp_solver import extract_optimal_basis, solve_basis_system, solve_lp
from .network_loader import build_network, designate_data_centers, load_network
from .shifting import solve_model1, solve_model2, solve_model3

__all__ = [
    'solve_dcopf',
    'compute_lmce', 'compute_signals',
    'compare_models', 'run_pipeline_m1',
    'extract_optimal_basis', 'solve_basis_system', 'solve_lp',
    'build_network', 'designate_data_centers', 'load_network',
    'solve_model1', 'solve_model2', 'solve_model3',
]
