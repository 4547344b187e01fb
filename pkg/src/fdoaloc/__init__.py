"""FDOA/TDOA emitter geolocation via polynomial homotopy continuation.

Measurement equations are lifted to polynomial systems with auxiliary
range unknowns, solved completely by homotopy continuation (total-degree
or parameter homotopy), filtered down to physically feasible emitter
candidates, and ranked by measurement consensus.
"""

from .errors import (
    DegeneratePairError,
    DimensionMismatchError,
    FdoalocError,
    InvalidSystemError,
    NoFeasibleSolutionError,
    ScenarioFormatError,
    SingularGeometryError,
)
from .geometry import (
    SPEED_OF_LIGHT,
    Emitter,
    FdoaMeasurement,
    ReceiverState,
    Scenario,
    TdoaMeasurement,
    fdoa_forward,
    tdoa_forward,
)
from .polynomials import (
    ConcreteSystem,
    Monomial,
    ParameterizedSystem,
    Polynomial,
    total_degree,
)
from .systems import (
    FDOA_THREE_EPOCH_GENERIC_ROOT_COUNT,
    GeoSystem,
    GeoSystemSpec,
    TABLE1_MINIMUM,
    UnknownLayout,
    add_altitude_constraint,
    build_fdoa,
    build_fdoa_family,
    build_geo_system,
    build_tdoa,
    table1_minimum,
)
from .tracking import (
    ParameterHomotopy,
    PathResult,
    SolveResult,
    TrackerConfig,
    parameter_solve,
    solve,
    start_system,
    track_path,
)
from .filtering import (
    FeasibleCandidate,
    Rejection,
    extract_real,
    fdoa_bound_check,
    feasibility_gate,
    feasible_candidates,
    gate_measurements,
)
from .ransac import (
    RansacConfig,
    RansacEstimate,
    count_inliers,
    run_fdoar,
    solve_family_basis,
)
from .simulate import (
    ExperimentConfig,
    TrialRecord,
    add_noise,
    generate_scenario,
    run_noise_sweep,
    run_trial,
    verify_measurement_bounds,
)
from .scenario_io import load_scenario, save_scenario

__version__ = "0.1.0"
