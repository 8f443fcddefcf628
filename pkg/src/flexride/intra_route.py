"""Optimal single-vehicle routes inside a mini-cluster.

A cluster holds only flexible outbound rides, so there are no time windows:
the route must visit every pickup before its delivery, keep each passenger's
ride within their limit, and minimize total travel time. Clusters are capped
at the seat capacity, which keeps exact search cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import kernels
from .model import DELIVERY, OUT, PICKUP, Instance, SchedulingError


class InfeasibleCluster(SchedulingError):
    pass


@dataclass(frozen=True)
class IntraRoute:
    """Timed visit order for one cluster; times start at 0 at the first stop."""

    pair_ids: tuple[int, ...]
    visits: tuple[tuple[int, str, int, int], ...]  # (pair id, action, node, time)
    duration: int

    @property
    def first_node(self) -> int:
        return self.visits[0][2]

    @property
    def last_node(self) -> int:
        return self.visits[-1][2]


def optimal_route(inst: Instance, cluster: list[int]) -> IntraRoute:
    """Exact minimum-duration route serving all outbound rides of a cluster.

    Depth-first enumeration over precedence-feasible visit orders with
    cost/ride-time pruning; equivalent to exhaustive search because pruning
    only discards dominated or infeasible prefixes. Raises InfeasibleCluster
    when no order satisfies the ride limits (callers then split the cluster
    into singletons, which are always feasible).
    """
    ids = sorted(cluster)
    pairs = [inst.pair(pid) for pid in ids]
    picks = [p.home for p in pairs]
    drops = [p.gp for p in pairs]
    limits = [inst.ride_limit(p, OUT) for p in pairs]

    found = kernels.search_cluster_route(picks, drops, limits, inst.matrix.times)
    if found is None:
        raise InfeasibleCluster(f"no feasible order for cluster {ids}")
    slots, times, cost = found
    k = len(ids)
    visits = tuple(
        (ids[s % k], PICKUP if s < k else DELIVERY,
         picks[s] if s < k else drops[s - k], int(t))
        for s, t in zip(slots, times)
    )
    return IntraRoute(tuple(ids), visits, int(cost))


def route_duration(route: IntraRoute) -> int:
    return route.duration


def singleton_routes(inst: Instance, cluster: list[int]) -> list[IntraRoute]:
    """Fallback split of an infeasible cluster into always-feasible singletons."""
    return [optimal_route(inst, [pid]) for pid in sorted(cluster)]


def routes_for_clusters(inst: Instance, clusters: list[list[int]]) -> tuple[list[list[int]], list[IntraRoute]]:
    """Solve every cluster, splitting the (rare) ride-time-infeasible ones."""
    out_clusters: list[list[int]] = []
    out_routes: list[IntraRoute] = []
    for cluster in clusters:
        try:
            out_routes.append(optimal_route(inst, cluster))
            out_clusters.append(sorted(cluster))
        except InfeasibleCluster:
            for pid in sorted(cluster):
                out_routes.append(optimal_route(inst, [pid]))
                out_clusters.append([pid])
    return out_clusters, out_routes
