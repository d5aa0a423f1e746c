"""
核心模块初始化
"""

from .lattice import (
    Site,
    LatticeDomain,
    ScalarField,
    BondField,
    ZeroClamp,
    FieldClamp,
    site_near,
    sites_in_ball,
    site_count_report,
    stencil,
    mirror,
    grad,
    grad_field,
    divergence,
    hdot1_norm,
)
from .potential import GaussianPotential, QuadraticPotential, EnergyAssembly, get_potential, forces
from .predictors import PredictorSpec, SinclairSeries, omega, predictor_field, sinclair_field
from .solver import SolveSettings, SolveReport, SolverError, minimize, solve_linear_masked, stability_check
from .analysis import (
    CalibrationError,
    DecayReport,
    ConvergenceReport,
    SinclairReport,
    make_spec,
    solve_corrector,
    decay_reports,
    shell_decay,
    calibrate_c2,
    convergence_study,
    sinclair_experiment,
    stability_scan,
)
from .greens import (
    CutoffProfile,
    GreensColumn,
    g_hom_diff,
    g_hat0,
    g_hat1,
    g_hat1_amplitude,
    g_hat1_m,
    g_hat1_mu_field,
    gbar1_mu,
    solve_crack_green,
    gbar1_diagnostic,
    gbar1_scaling,
    greens_symmetry_report,
)

__all__ = [
    'Site',
    'LatticeDomain',
    'ScalarField',
    'BondField',
    'ZeroClamp',
    'FieldClamp',
    'site_near',
    'sites_in_ball',
    'site_count_report',
    'stencil',
    'mirror',
    'grad',
    'grad_field',
    'divergence',
    'hdot1_norm',
    'GaussianPotential',
    'QuadraticPotential',
    'EnergyAssembly',
    'get_potential',
    'forces',
    'PredictorSpec',
    'SinclairSeries',
    'omega',
    'predictor_field',
    'sinclair_field',
    'SolveSettings',
    'SolveReport',
    'SolverError',
    'minimize',
    'solve_linear_masked',
    'stability_check',
    'CalibrationError',
    'DecayReport',
    'ConvergenceReport',
    'SinclairReport',
    'make_spec',
    'solve_corrector',
    'decay_reports',
    'shell_decay',
    'calibrate_c2',
    'convergence_study',
    'sinclair_experiment',
    'stability_scan',
    'CutoffProfile',
    'GreensColumn',
    'g_hom_diff',
    'g_hat0',
    'g_hat1',
    'g_hat1_amplitude',
    'g_hat1_m',
    'g_hat1_mu_field',
    'gbar1_mu',
    'solve_crack_green',
    'gbar1_diagnostic',
    'gbar1_scaling',
    'greens_symmetry_report',
]
