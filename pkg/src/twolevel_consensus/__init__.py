"""Output average consensus of heterogeneous SISO agents.

Each agent is abstracted by a single integrator; the integrators run a
neighbour-averaging protocol over the communication graph and every agent
tracks its own integrator through a local interface.
"""

from .abstraction import (
    Interface,
    SimCertificate,
    build_certificate,
    build_interface,
    interface_input,
    simulation_value,
    tracking_bound,
    verify_decrease,
)
from .controllers import (
    ControllerKind,
    ControllerSpec,
    StaticCertificate,
    controller_rates,
    heuristic_static_certificate,
    make_output_feedback,
    make_state_feedback,
    make_static_output_feedback,
    verify_static_certificate,
)
from .errors import (
    CertificateInvalid,
    ConsensusError,
    DimensionMismatch,
    InvalidScenario,
    NonFinite,
    NotHurwitz,
    ParseError,
    SingularSystem,
    Uncontrollable,
    Unobservable,
    ValidationError,
)
from .graph import (
    Digraph,
    SwitchingSchedule,
    active_graph,
    consensus_input,
    is_strongly_connected_balanced,
    is_undirected_connected,
    laplacian,
)
from .plant import (
    Plant,
    ValidationReport,
    check_minimal,
    check_no_origin_zero,
    observer_gain,
    place_poles,
    solve_lyapunov,
    solve_regulator,
    validate_plant,
)
from .scenario import Scenario, demo_scenario, parse_scenario, scenario_from_dict, scenario_to_dict
from .simulator import RunMetrics, Trajectory, ave, compute_metrics, init_network, run, step_rk4

__version__ = "0.1.0"
