"""oscilab: mean-oscillation seminorm workbench and elasticity uniqueness lab."""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    ALL,
    CELL,
    DIRICHLET,
    DYADIC,
    FAMILY_ALL,
    FAMILY_DYADIC,
    FAMILY_SHIFTED,
    MATRIX,
    NODE,
    SCALAR,
    SHIFTED_DYADIC,
    SYMMETRIC,
    TRACTION,
    VECTOR,
    Cube,
    CubeFamily,
    Field,
    Grid,
    InvalidCubeError,
    PrefixSums,
    active_max_norm,
    active_mean,
    cube_average,
    enumerate_cubes,
    mean_oscillation,
)
from .bmo import (  # noqa: F401
    ConstantEstimate,
    SeminormReport,
    bmo_norm,
    bmo_seminorm,
    default_family,
    interpolation_ratio,
    j1_ratio,
    jn_equivalence_ratio,
    linfty_domination_check,
    lq_norm,
    star_seminorm,
)
from .fileio import (  # noqa: F401
    FileFormatError,
    read_field,
    read_mask,
    write_field,
    write_mask,
)
from .kinematics import (  # noqa: F401
    DeformationField,
    best_fit_rotation,
    cauchy_green,
    distance_to_rotations,
    gradient,
    green_st_venant,
    identity_map,
    jacobian,
    min_jacobian,
    polar_rotation,
    rigidity_probe,
    sym_gradient,
)
from .materials import (  # noqa: F401
    MaterialModel,
    NeoHookean,
    SpdBoxSampler,
    StVenantKirchhoff,
    TaylorConstants,
    cauchy_stress,
    derivative_check,
    elasticity_matrix,
    elasticity_tensor_apply,
    first_pk,
    make_material,
    positivity_margin,
    principal_stresses,
    second_pk,
    spatial_identity_check,
    spatial_tensor_quadratic,
    sym_basis,
    taylor_constants,
)
from .korn import (  # noqa: F401
    DomainSpec,
    KornReport,
    LSHAPE,
    ROOMS_AND_PASSAGES,
    SQUARE,
    generate_domain,
    korn_ratio_bmo,
    korn_ratio_lp,
    korn_search,
)
from .energy import (  # noqa: F401
    BarrierStallError,
    EnergyProblem,
    InadmissibleError,
    SolveResult,
    equilibrium_identity_check,
    node_to_cell,
    psd_quadratic_check,
    solve_equilibrium,
)
from .uniqueness import (  # noqa: F401
    CompetitorRecord,
    DeltaReport,
    ExperimentResult,
    GateReport,
    SinePerturbations,
    check_hypothesis_gates,
    perturbation_positivity_check,
    rescale_to_band,
    strain_bmo_l1_distance,
    uniqueness_experiment,
)
