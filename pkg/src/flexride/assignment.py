"""Vehicle rescheduling as minimum-weight bipartite matching.

Vehicles are matched against two job kinds: waiting inbound trips that MUST be
served within their window (W1) and open outbound mini-clusters that MAY be
started (W2). Edge costs are transition times; unreachable inbound edges are
excluded structurally rather than encoded as large numbers. Shifting every
vehicle-to-cluster edge by |W| * (max finite cost + 1) turns "serve all W1
first, then minimize cost" into a plain min-weight maximum matching, which the
Hungarian solver handles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import SchedulingError, TimeWindow, TravelMatrix


class InfeasibleW1(SchedulingError):
    """No finite-weight matching saturates the must-serve inbound jobs."""


@dataclass(frozen=True)
class VehicleSlot:
    """A vehicle's availability at the horizon: where it ends up and when."""

    vehicle: int
    location: int
    busy_for: int = 0  # remaining committed seconds at the horizon


@dataclass(frozen=True)
class InboundJob:
    pair_id: int
    node: int
    window: TimeWindow


@dataclass(frozen=True)
class ClusterJob:
    cluster_id: int
    node: int  # first pickup of the cluster route


@dataclass
class AssignmentProblem:
    vehicles: list[VehicleSlot]
    must_serve: list[InboundJob]
    may_serve: list[ClusterJob]
    horizon: int
    costs: np.ndarray  # int64 (|V|, |W|); entries under `excluded` are meaningless
    excluded: frozenset[tuple[int, int]]

    @property
    def job_count(self) -> int:
        return len(self.must_serve) + len(self.may_serve)


@dataclass(frozen=True)
class VehicleAssignment:
    """Matching edges as (vehicle index, job index) with cost in original weights."""

    edges: tuple[tuple[int, int], ...]
    total_cost: int


def build_costs(vehicles: Sequence[VehicleSlot], must_serve: Sequence[InboundJob],
                may_serve: Sequence[ClusterJob], horizon: int,
                matrix: TravelMatrix) -> AssignmentProblem:
    """Transition-time cost matrix between vehicles and jobs.

    For an inbound job the cost is the travel time or, if larger, the wait
    until its window opens; the edge is excluded when the vehicle cannot reach
    the job before the window closes. Cluster edges are plain travel times.
    """
    n_w1 = len(must_serve)
    costs = np.zeros((len(vehicles), n_w1 + len(may_serve)), dtype=np.int64)
    excluded = set()
    for vi, veh in enumerate(vehicles):
        free_at = horizon + veh.busy_for
        for ji, job in enumerate(must_serve):
            travel = matrix.t(veh.location, job.node)
            if free_at + travel > job.window.latest:
                excluded.add((vi, ji))
            else:
                costs[vi, ji] = max(travel, job.window.earliest - free_at)
        for ji, job in enumerate(may_serve):
            costs[vi, n_w1 + ji] = matrix.t(veh.location, job.node)
    return AssignmentProblem(list(vehicles), list(must_serve), list(may_serve),
                             horizon, costs, frozenset(excluded))


def hungarian(costs: np.ndarray, excluded: frozenset[tuple[int, int]] = frozenset()
              ) -> tuple[tuple[tuple[int, int], ...], int]:
    """Min-weight maximum matching on a rectangular cost matrix.

    Excluded cells never appear in the result. Internally forbidden cells get
    a derived constant larger than the sum of all finite costs, which makes
    the optimum lexicographic: maximum cardinality on allowed cells first,
    minimum cost second. Returns (edges, cost) with edges sorted by row.
    """
    costs = np.asarray(costs, dtype=np.int64)
    if costs.size == 0:
        return (), 0
    big = int(np.abs(costs).sum()) + 1
    work = costs.astype(np.float64).copy()
    for i, j in excluded:
        work[i, j] = big
    rows, cols = linear_sum_assignment(work)
    edges = tuple(
        (int(i), int(j)) for i, j in zip(rows, cols) if (int(i), int(j)) not in excluded
    )
    total = int(sum(costs[i, j] for i, j in edges))
    return edges, total


def transform_costs(problem: AssignmentProblem) -> np.ndarray:
    """Theorem-style shift of cluster edges so must-serve jobs always win.

    Raises InfeasibleW1 unless some finite matching saturates the must-serve
    side (checked structurally with a matching on the restricted submatrix).
    """
    n_w1 = len(problem.must_serve)
    if n_w1 > len(problem.vehicles):
        raise InfeasibleW1(
            f"{n_w1} must-serve jobs but only {len(problem.vehicles)} vehicles"
        )
    if n_w1:
        sub = problem.costs[:, :n_w1]
        edges, _ = hungarian(sub, problem.excluded)
        if len(edges) < n_w1:
            raise InfeasibleW1("a must-serve job is unreachable by every vehicle")
    finite = [
        int(problem.costs[i, j])
        for i in range(problem.costs.shape[0])
        for j in range(problem.costs.shape[1])
        if (i, j) not in problem.excluded
    ]
    upper = (max(finite) if finite else 0) + 1
    shifted = problem.costs.copy()
    shifted[:, n_w1:] += problem.job_count * upper
    return shifted


def solve_vehicle_rescheduling(problem: AssignmentProblem) -> VehicleAssignment:
    """Optimal matching that saturates all must-serve jobs, at minimum cost.

    Cost is reported in the original weights. Propagates InfeasibleW1 so
    callers can run their failure-recovery path.
    """
    shifted = transform_costs(problem)
    edges, _ = hungarian(shifted, problem.excluded)
    total = int(sum(problem.costs[i, j] for i, j in edges))
    n_w1 = len(problem.must_serve)
    matched_w1 = sum(1 for _, j in edges if j < n_w1)
    assert matched_w1 == n_w1, "transformed matching failed to saturate must-serve jobs"
    return VehicleAssignment(edges, total)
