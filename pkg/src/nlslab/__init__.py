"""Pseudospectral laboratory for the 3D focusing cubic Schrodinger equation
with a repulsive inverse-power potential: ground-state certification,
functional identities, threshold dynamics, and the study harnesses."""

__version__ = "0.1.0"

from .fields import (
    CartesianGrid,
    ComplexField,
    RadialGrid,
    apply_laplacian,
    gradient_norm_sq,
    integrate_field,
    load_snapshot,
    sample_profile,
    save_snapshot,
)
from .functionals import (
    PotentialSpec,
    VirialWeight,
    adapted_norm_sq,
    action,
    cauchy_schwarz_gap,
    delta,
    energy,
    hardy_check,
    localized_virial,
    localized_virial_rate,
    mass,
    nehari,
    variance,
    variance_flux,
    virial,
    weight_tail_correction,
    weighted_mass,
)
from .groundstate import (
    GroundState,
    certified_ground_state,
    gn_constant,
    gn_inequality_check,
    solve_ground_state_fixedpoint,
    solve_ground_state_shooting,
)
from .dynamics import (
    DiagnosticsRecord,
    SolverSettings,
    Trajectory,
    evolve,
    strang_step,
    variance_convexity_check,
    virial_identity_check,
)
from .modulation import ModulationFit, fit_modulation, modulation_track
from .experiments import (
    DataFamily,
    Verdict,
    classify,
    l5_norm,
    make_threshold_scaling,
    make_translated_family,
    rescale_to_threshold_mass,
    run_threshold_growth_study,
    soliton_residual_decay,
    zero_virial_action_sweep,
)
