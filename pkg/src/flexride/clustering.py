"""Greedy mini-clustering of flexible outbound requests.

Two outbound rides are bundled when one vehicle can serve both on a short
shared path. The pairwise cost is the cheapest of the three ways to serve
rides (i, j) starting at i's pickup; edges cheaper than
proximity_factor * (sum of the direct times) are merged Kruskal-style under a
cluster size cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import OUT, Instance, RequestPair, TravelMatrix

PATH_CHAIN = "P1"  # i, drop i, j, drop j
PATH_NEST = "P2"  # i, j, drop i, drop j
PATH_ONION = "P3"  # i, j, drop j, drop i


@dataclass(frozen=True)
class PairCost:
    i: int
    j: int
    cost: int
    best_path: str


class DisjointSet:
    """Union-find over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        return True


def ride_pair_cost(matrix: TravelMatrix, a_start: int, a_end: int,
                   b_start: int, b_end: int) -> tuple[int, str]:
    """Cheapest shared service of two rides, starting at ride a's start."""
    t = matrix.t
    chain = t(a_start, a_end) + t(a_end, b_start) + t(b_start, b_end)
    nest = t(a_start, b_start) + t(b_start, a_end) + t(a_end, b_end)
    onion = t(a_start, b_start) + t(b_start, b_end) + t(b_end, a_end)
    best = min(chain, nest, onion)
    if best == chain:
        return best, PATH_CHAIN
    if best == nest:
        return best, PATH_NEST
    return best, PATH_ONION


def pair_cost(i: RequestPair, j: RequestPair, matrix: TravelMatrix) -> PairCost:
    cost, path = ride_pair_cost(matrix, i.home, i.gp, j.home, j.gp)
    return PairCost(i.id, j.id, cost, path)


def pair_cost_table(pairs: list[RequestPair], matrix: TravelMatrix) -> np.ndarray:
    """Dense (n, n) table of shared-service costs over outbound rides."""
    homes = np.array([p.home for p in pairs], dtype=np.intp)
    gps = np.array([p.gp for p in pairs], dtype=np.intp)
    t = matrix.times
    direct = t[homes, gps]
    chain = direct[:, None] + t[np.ix_(gps, homes)] + direct[None, :]
    nest = t[np.ix_(homes, homes)] + t[np.ix_(homes, gps)].T + t[np.ix_(gps, gps)]
    onion = t[np.ix_(homes, homes)] + direct[None, :] + t[np.ix_(gps, gps)].T
    return np.minimum(chain, np.minimum(nest, onion))


def build_miniclusters(pairs: list[RequestPair], matrix: TravelMatrix,
                       seat_capacity: int, proximity_factor: float) -> list[list[int]]:
    """Partition outbound request ids into profitable mini-clusters.

    Scans profitable directed edges in non-decreasing cost order (ties broken
    by the id pair) and merges when the merged size stays within the seat
    capacity. Every input id ends up in exactly one cluster; clusters are
    returned sorted by their smallest member id.
    """
    pairs = sorted(pairs, key=lambda p: p.id)
    n = len(pairs)
    if n == 0:
        return []
    costs = pair_cost_table(pairs, matrix)
    direct = np.array([matrix.t(p.home, p.gp) for p in pairs], dtype=np.int64)
    budget = proximity_factor * (direct[:, None] + direct[None, :])
    ii, jj = np.nonzero(costs <= budget)
    keep = ii != jj
    edges = sorted(zip(costs[ii[keep], jj[keep]].tolist(),
                       ii[keep].tolist(), jj[keep].tolist()))

    ds = DisjointSet(n)
    for _, a, b in edges:
        ra, rb = ds.find(a), ds.find(b)
        if ra != rb and ds.size[ra] + ds.size[rb] <= seat_capacity:
            ds.union(a, b)

    groups: dict[int, list[int]] = {}
    for idx, p in enumerate(pairs):
        groups.setdefault(ds.find(idx), []).append(p.id)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def chronic_clusters(inst: Instance) -> list[list[int]]:
    chronic = [p for p in inst.pairs if p.is_chronic]
    return build_miniclusters(chronic, inst.matrix, inst.fleet.seat_capacity,
                              inst.service.proximity_factor)


def is_close(inst: Instance, a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    """Mini-cluster proximity criterion applied to two arbitrary rides."""
    cost, _ = ride_pair_cost(inst.matrix, a_start, a_end, b_start, b_end)
    direct = inst.matrix.t(a_start, a_end) + inst.matrix.t(b_start, b_end)
    return cost <= inst.service.proximity_factor * direct


def dump_clusters(clusters: list[list[int]]) -> str:
    return "\n".join(f"{i}: {' '.join(map(str, c))}" for i, c in enumerate(clusters))
