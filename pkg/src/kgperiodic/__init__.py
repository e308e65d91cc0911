"""Small-amplitude time- and space-periodic solutions of nonlinear
Klein-Gordon equations, computed by a spectral Galerkin continuation
pipeline: planar limit orbit, partial normal form, small-divisor exclusion,
nested-truncation Newton solve, and shooting closure."""

from .fourier import (
    AliasingError,
    EvenField,
    SpaceTimeField,
    SpatialField,
    apply_J_eps,
    invert_J_eps,
    j_eps_symbol,
    multiply_to_even,
    project_P,
    project_Q,
)
from .nonlinearity import Nonlinearity, TrustRadiusError, tilde_f, tilde_fg, tilde_g
from .planar import (
    MonodromyReport,
    NoPeriodicOrbitError,
    PlanarOrbit,
    PlanarState,
    VTrajectory,
    find_orbit,
    h_star,
    limit_rhs,
    monodromy,
)
from .normalform import (
    TransformedSystem,
    identity_system,
    nf_sequence,
    nf_step,
)
from .divisors import (
    CoverageError,
    DivisorTable,
    HillSpectrum,
    ResonanceError,
    ResonanceParams,
    ResonanceReport,
    averaged_potential,
    divisor_min,
    epsilon_kj,
    hill_eigs,
    is_resonant,
    measure_exponent_fit,
    window_measure,
)
from .solver import (
    NearSingularError,
    NonConvergenceError,
    SolverConfig,
    SolverRun,
    assemble_F,
    assemble_L,
    invert_L_N,
    nash_moser_solve,
    oracle_newton_solve,
    resonance_gate,
)
from .closure import (
    ClosureConsistencyError,
    ClosureResult,
    DegenerateOrbitError,
    OuterLoopError,
    check_closure,
    hamiltonian_H,
    integrate_v,
    solve_delta1,
    time_p_map,
)
from .assembly import (
    AssembledSolution,
    AssemblyError,
    SweepReport,
    SweepRow,
    assemble_u,
    epsilon_sweep,
    pde_residual,
    tail_norm,
)
from .properties import PropertyResult, run_all

__version__ = "0.1.0"
