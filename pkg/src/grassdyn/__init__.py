"""Orbit dynamics on truncated sequence spaces and Grassmannians.

A computational laboratory for strong n-supercyclicity: truncated
operators with explicit leak accounting, gap-metric subspace orbits,
seeded density experiments, and an exact-arithmetic layer (rational
polynomial enumerations, perturbed forward shifts, linear functionals)
for auditing the counterexample machinery at finite scale.
"""

from __future__ import annotations

from .construction import (
    ConstructionParams,
    PerturbedForwardShift,
    Polynomial,
    admissible_for_p,
    admissible_polynomial,
    build_direct_sum,
    build_operator,
    check_f_bound,
    controlled_by,
    defining_relation_check,
    derive_control_sequence,
    enumerate_S,
    epsilon_f,
    index_b,
    locate_polynomial,
    locate_repetition,
    orbit_vector_coords,
    polynomial_at,
    polynomial_index,
    q_sequence,
    rational_at,
    rational_index,
    verify_claim,
    weight,
)
from .dynamics import (
    DensityReport,
    ObstructionCertificate,
    OrbitTrace,
    SCWitness,
    backward_forward_seed,
    graph_span_for_targets,
    identity_block_obstruction_witness,
    projective_orbit_min_distance,
    sample_target_subspaces,
    sc_criterion_witness,
    strong_n_supercyclicity_score,
    subspace_orbit_min_distance,
    transitivity_probe,
    vector_orbit_min_distance,
)
from .errors import (
    ConfigError,
    DimensionDropError,
    DimensionMismatchError,
    GrassdynError,
    KernelHitError,
    MassLossError,
    RankDeficiencyError,
    SchemeInconsistencyError,
    SpectrumUnsupportedError,
    TruncationError,
)
from .functionals import (
    FunctionalTable,
    criterion_report,
    m_l_bound,
    model_product,
    phi_kronecker_check,
    phi_on_polynomial,
    phi_value,
    summability_partial,
    y_value,
)
from .grassmann import (
    Subspace,
    grassmann_distance,
    perturb_to_independent,
    pi_n,
    push_forward,
    sphere_deviation,
)
from .operators import (
    AdjointMultiplication,
    BackwardShift,
    Diagonal,
    DirectSum,
    ForwardShift,
    Operator,
    Scaled,
    analytic_spectrum,
    circle_intersects_all_components,
    mixing_commutation_check,
    operator_from_json,
    operator_norm_estimate,
    radial_intersection,
)
from .space import DirectSumVector, Vector, l1_norm, l2_norm, sample_vector

__version__ = "0.1.0"
