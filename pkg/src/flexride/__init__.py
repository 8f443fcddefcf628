"""Dial-a-ride scheduling with flexible appointments.

Patients request paired outbound/inbound trips to their GP. Chronic patients
only agree on a rough range; the scheduler fixes their exact appointment,
which lets it pool rides aggressively. Two construction heuristics (a
link-and-split pipeline and a rolling-horizon matcher) are compared against a
plain greedy insertion baseline on synthetic rural instances.
"""

from .model import (
    CHRONIC,
    WALKIN,
    FeasibilityReport,
    FleetParams,
    Instance,
    Location,
    RequestPair,
    Schedule,
    ServiceParams,
    Stop,
    TimeWindow,
    TravelMatrix,
    ValidationReport,
    implicit_pickup_window,
    served_count,
    validate_instance,
    verify_schedules,
)
from .clustering import DisjointSet, PairCost, build_miniclusters, pair_cost
from .intra_route import IntraRoute, optimal_route, route_duration
from .gih import (
    InsertionCandidate,
    InsertionEngine,
    enumerate_insertions,
    insert_best,
    time_slack,
    vehicle_position_at,
)
from .assignment import (
    AssignmentProblem,
    InfeasibleW1,
    VehicleAssignment,
    build_costs,
    hungarian,
    solve_vehicle_rescheduling,
    transform_costs,
)
from .mclih import LinkingGraph, build_linking_graph, run_mclih, solve_atsp, split_tour
from .mcma import HorizonState, init_mcma, recover_failure, run_mcma, step
from .harness import (
    ExperimentConfig,
    GeneratorConfig,
    Overrides,
    RunResult,
    generate_instance,
    run_algorithm,
    run_baseline_gih,
    run_experiment,
)
from .instance_io import load_instance, load_schedules, save_instance, save_schedules
from .kernels import BACKEND

__version__ = "0.1.0"
