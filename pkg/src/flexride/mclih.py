"""Mini-cluster linking and insertion heuristic.

Pipeline: cluster the flexible outbound rides, solve each cluster exactly,
link the clusters with an asymmetric TSP giant tour, split the tour optimally
into vehicle routes under the drive-time budget, fix appointments at the
scheduled arrivals, insert the return trips greedily, then serve walk-ins
online.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import clustering, intra_route
from .gih import FIXED, FLEX, Accepted, InsertionEngine, Rejected
from .intra_route import IntraRoute
from .model import DELIVERY, INF, OUT, Instance, Schedule, SchedulingError


class Unsplittable(SchedulingError):
    def __init__(self, covered: list[list[int]], uncovered: list[int]):
        super().__init__(f"no feasible split; {len(uncovered)} clusters uncovered")
        self.covered = covered
        self.uncovered = uncovered


@dataclass(frozen=True)
class LinkingGraph:
    """Complete directed graph over mini-clusters.

    Arc cost (i, j) is the travel time from the last drop-off of cluster i's
    route to the first pickup of cluster j's; the intra-cluster duration acts
    as a service time at each vertex.
    """

    costs: np.ndarray
    durations: tuple[int, ...]
    first_nodes: tuple[int, ...]
    last_nodes: tuple[int, ...]

    def __len__(self):
        return len(self.durations)


@dataclass
class MclihConfig:
    aco_iterations: int = 200
    aco_ants: Optional[int] = None  # None: vertex count, capped at 50
    aco_alpha: float = 1.0
    aco_beta: float = 2.0
    aco_evaporation: float = 0.5
    depot_cost_mult: float = 1.0
    cluster_gap: int = 0
    retry_budget: int = 3


def build_linking_graph(inst: Instance, routes: list[IntraRoute]) -> LinkingGraph:
    lasts = np.array([r.last_node for r in routes], dtype=np.intp)
    firsts = np.array([r.first_node for r in routes], dtype=np.intp)
    costs = inst.matrix.times[np.ix_(lasts, firsts)].astype(np.int64)
    return LinkingGraph(costs, tuple(r.duration for r in routes),
                        tuple(int(f) for f in firsts), tuple(int(x) for x in lasts))


def solve_atsp(costs: np.ndarray, seed: int, iterations: int = 200,
               ants: Optional[int] = None, alpha: float = 1.0, beta: float = 2.0,
               evaporation: float = 0.5) -> list[int]:
    """Heuristic giant tour over the linking graph, deterministic per seed.

    An ant-colony search builds cycles; the returned order is the best cycle
    cut at its most expensive arc. Small graphs (<= 7 vertices) are solved by
    exact enumeration instead, which is cheaper than the colony at that size.
    """
    k = len(costs)
    if k <= 1:
        return list(range(k))
    costs = np.asarray(costs, dtype=np.int64)
    if k <= 7:
        cycle = _exact_cycle(costs)
    else:
        cycle = _aco_cycle(costs, seed, iterations, ants, alpha, beta, evaporation)
    return _cut_cycle(cycle, costs)


def _exact_cycle(costs: np.ndarray) -> list[int]:
    from itertools import permutations

    k = len(costs)
    best = None
    for perm in permutations(range(1, k)):
        cycle = (0, *perm)
        total = sum(int(costs[cycle[i], cycle[(i + 1) % k]]) for i in range(k))
        if best is None or total < best[0]:
            best = (total, list(cycle))
    return best[1]


def _aco_cycle(costs: np.ndarray, seed: int, iterations: int, ants: Optional[int],
               alpha: float, beta: float, evaporation: float) -> list[int]:
    k = len(costs)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xAC0]))
    n_ants = min(k, 50) if ants is None else ants
    heur = 1.0 / np.maximum(costs, 1)
    heur_b = heur ** beta

    # Nearest-neighbour incumbent doubles as the iteration-0 fallback.
    best_cycle = _nearest_neighbour_cycle(costs)
    best_len = _cycle_length(best_cycle, costs)
    deposit_scale = float(max(best_len, 1))

    tau = np.ones((k, k), dtype=np.float64)
    for _ in range(iterations):
        paths = np.empty((n_ants, k), dtype=np.intp)
        paths[:, 0] = rng.integers(0, k, size=n_ants)
        visited = np.zeros((n_ants, k), dtype=bool)
        visited[np.arange(n_ants), paths[:, 0]] = True
        for step in range(1, k):
            cur = paths[:, step - 1]
            weights = (tau[cur] ** alpha) * heur_b[cur]
            weights[visited] = 0.0
            totals = weights.sum(axis=1)
            dead = totals <= 0.0
            if dead.any():  # numeric underflow guard: fall back to uniform
                weights[dead] = (~visited[dead]).astype(np.float64)
                totals = weights.sum(axis=1)
            draws = rng.random(n_ants) * totals
            nxt = (weights.cumsum(axis=1) < draws[:, None]).sum(axis=1)
            nxt = np.minimum(nxt, k - 1)
            paths[:, step] = nxt
            visited[np.arange(n_ants), nxt] = True

        arc_from = paths
        arc_to = np.roll(paths, -1, axis=1)
        lengths = costs[arc_from, arc_to].sum(axis=1)
        i_best = int(lengths.argmin())
        if int(lengths[i_best]) < best_len:
            best_len = int(lengths[i_best])
            best_cycle = [int(x) for x in paths[i_best]]

        tau *= 1.0 - evaporation
        contrib = deposit_scale / np.maximum(lengths.astype(np.float64), 1.0)
        np.add.at(tau, (arc_from.ravel(), arc_to.ravel()),
                  np.repeat(contrib, k))
        np.add.at(tau, (np.array(best_cycle), np.roll(best_cycle, -1)),
                  deposit_scale / max(best_len, 1))
        np.clip(tau, 1e-12, None, out=tau)
    return best_cycle


def _nearest_neighbour_cycle(costs: np.ndarray) -> list[int]:
    k = len(costs)
    cycle = [0]
    seen = {0}
    while len(cycle) < k:
        cur = cycle[-1]
        best = min((int(costs[cur, j]), j) for j in range(k) if j not in seen)
        cycle.append(best[1])
        seen.add(best[1])
    return cycle


def _cycle_length(cycle: list[int], costs: np.ndarray) -> int:
    return sum(int(costs[cycle[i], cycle[(i + 1) % len(cycle)]])
               for i in range(len(cycle)))


def _cut_cycle(cycle: list[int], costs: np.ndarray) -> list[int]:
    k = len(cycle)
    if k <= 1:
        return cycle
    arc_costs = [int(costs[cycle[i], cycle[(i + 1) % k]]) for i in range(k)]
    cut = max(range(k), key=lambda i: (arc_costs[i], -i))
    return cycle[cut + 1:] + cycle[:cut + 1]


def split_tour(tour: list[int], graph: LinkingGraph, inst: Instance, max_vehicles: int,
               depot_cost_mult: float = 1.0) -> list[list[int]]:
    """Optimal contiguous split of the giant tour into vehicle routes.

    Shortest path with at most `max_vehicles` arcs on the auxiliary DAG whose
    arc (i, j) is one vehicle serving tour positions i..j-1 (depot legs
    included in the drive budget). Raises Unsplittable with the coverable
    prefix attached when the tour does not fit.
    """
    K = len(tour)
    if K == 0:
        return []
    depot = inst.fleet.depot
    mat = inst.matrix.times
    budget = inst.fleet.route_drive_limit
    INFC = float("inf")

    arcs: list[list[tuple[int, int]]] = [[] for _ in range(K)]  # arcs[i] = (j, weight)
    for i in range(K):
        dep_out = int(mat[depot, graph.first_nodes[tour[i]]])
        inner = 0
        for j in range(i + 1, K + 1):
            c = tour[j - 1]
            inner += graph.durations[c]
            if j > i + 1:
                inner += int(graph.costs[tour[j - 2], c])
            if dep_out + inner > budget:
                break
            dep_back = int(mat[graph.last_nodes[c], depot])
            if dep_out + inner + dep_back <= budget:
                weight = depot_cost_mult * (dep_out + dep_back) + inner
                arcs[i].append((j, weight))

    dp = [[INFC] * (K + 1) for _ in range(max_vehicles + 1)]
    back = [[-1] * (K + 1) for _ in range(max_vehicles + 1)]
    dp[0][0] = 0.0
    for r in range(1, max_vehicles + 1):
        dp[r][0] = 0.0
        for i in range(K):
            if dp[r - 1][i] == INFC:
                continue
            for j, w in arcs[i]:
                cand = dp[r - 1][i] + w
                if cand < dp[r][j]:
                    dp[r][j] = cand
                    back[r][j] = i

    best_r = None
    for r in range(1, max_vehicles + 1):
        if dp[r][K] < INFC and (best_r is None or dp[r][K] < dp[best_r][K]):
            best_r = r

    def reconstruct(r: int, j: int) -> list[list[int]]:
        routes = []
        while j > 0:
            i = back[r][j]
            routes.append([tour[x] for x in range(i, j)])
            j = i
            r -= 1
        routes.reverse()
        return routes

    if best_r is not None:
        return reconstruct(best_r, K)

    covered_upto = max(
        (j for r in range(1, max_vehicles + 1) for j in range(K + 1)
         if dp[r][j] < INFC),
        default=0,
    )
    best_prefix = None
    for r in range(1, max_vehicles + 1):
        if dp[r][covered_upto] < INFC and (best_prefix is None
                                           or dp[r][covered_upto] < dp[best_prefix][covered_upto]):
            best_prefix = r
    covered = reconstruct(best_prefix, covered_upto) if best_prefix else []
    raise Unsplittable(covered, [tour[x] for x in range(covered_upto, K)])


@dataclass
class HeuristicResult:
    schedules: list[Schedule]
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rejected_ids(self) -> list[int]:
        return [pid for pid, _ in self.rejected]


def place_cluster(engine: InsertionEngine, vid: int, route: IntraRoute,
                  earliest: int, max_attempts: int = 200) -> Optional[list[tuple[int, int]]]:
    """Append a cluster route to a vehicle, as early as possible.

    The whole cluster must fit inside one session, and its GP arrivals are
    delayed until they cause no congestion. Returns the (pair id, arrival)
    list of its deliveries, or None when no slot exists before close.
    """
    inst = engine.inst
    state = engine.states[vid]
    prev_node, prev_time = state.nodes[-2], state.B[-2]
    t0 = max(prev_time + inst.matrix.t(prev_node, route.first_node), earliest)
    dur = route.duration

    for _ in range(max_attempts):
        fitted = _session_fit(inst, t0, dur)
        if fitted is None:
            return None
        t0 = fitted
        bump = _congestion_bump(engine, route, t0)
        if bump == 0:
            break
        t0 += bump
    else:
        return None

    day_start = inst.fleet.day_start
    rows = []
    arrivals = []
    for pid, action, node, rel in route.visits:
        t = t0 + rel
        if action == DELIVERY:
            rows.append((node, day_start, inst.fleet.day_end, t, 1, pid, OUT, action))
            arrivals.append((pid, t))
        else:
            rows.append((node, day_start, INF, t, 0, pid, OUT, action))
    engine.append_visits(vid, rows)
    return arrivals


def _session_fit(inst: Instance, start: int, dur: int) -> Optional[int]:
    for s in inst.fleet.sessions:
        t = max(start, s.earliest)
        if t + dur <= s.latest:
            return t
    return None


def _congestion_bump(engine: InsertionEngine, route: IntraRoute, t0: int) -> int:
    """Minimal extra delay of the cluster start to avoid GP congestion (0 = clear)."""
    service = engine.inst.service
    own: dict[int, list[int]] = {}
    for pid, action, node, rel in route.visits:
        if action == DELIVERY:
            own.setdefault(node, []).append(t0 + rel)
    for gp in sorted(own):
        times = sorted(engine.gp_arrivals_at(gp) + own[gp])
        limit, window = service.congestion_limit, service.congestion_window
        for i in range(len(times) - limit):
            if times[i + limit] - times[i] <= window:
                in_window = [t for t in own[gp] if times[i] <= t <= times[i] + window]
                if in_window:
                    return times[i] + window + 1 - min(in_window)
    return 0


def run_mclih(inst: Instance, seed: int, config: MclihConfig | None = None) -> HeuristicResult:
    """Full pipeline: chronic phase via link-and-split, then online walk-ins."""
    config = config or MclihConfig()
    engine = InsertionEngine(inst)
    rejected: list[tuple[int, str]] = []

    chronic = [p for p in inst.pairs if p.is_chronic]
    if chronic:
        clusters = clustering.chronic_clusters(inst)
        clusters, routes = intra_route.routes_for_clusters(inst, clusters)
        graph = build_linking_graph(inst, routes)

        usable = []
        for ci in range(len(routes)):
            if _fits_alone(graph, inst, ci):
                usable.append(ci)
            else:
                for pid in clusters[ci]:
                    rejected.append((pid, "cluster exceeds route drive budget"))

        tour = solve_atsp(graph.costs[np.ix_(usable, usable)], seed,
                          config.aco_iterations, config.aco_ants, config.aco_alpha,
                          config.aco_beta, config.aco_evaporation)
        tour = [usable[i] for i in tour]
        try:
            vehicle_routes = split_tour(tour, graph, inst, inst.fleet.vehicle_count,
                                        config.depot_cost_mult)
        except Unsplittable as exc:
            vehicle_routes = exc.covered
            for ci in exc.uncovered:
                for pid in clusters[ci]:
                    rejected.append((pid, "no vehicle left within drive budget"))

        pending: list[tuple[int, int]] = []  # (arrival, pair id) heap
        for vid, croute in enumerate(vehicle_routes):
            earliest = inst.fleet.day_start
            for ci in croute:
                arrivals = place_cluster(engine, vid, routes[ci], earliest)
                if arrivals is None:
                    for pid in clusters[ci]:
                        rejected.append((pid, "no congestion-free slot in sessions"))
                    continue
                for pid, arr in arrivals:
                    heapq.heappush(pending, (arr, pid))
                state = engine.states[vid]
                earliest = state.B[-2] + config.cluster_gap

        _insert_inbounds(inst, engine, pending, rejected, config.retry_budget)

    _online_walkins(inst, engine, rejected, config.retry_budget)
    return HeuristicResult(engine.to_schedules(), rejected)


def _fits_alone(graph: LinkingGraph, inst: Instance, ci: int) -> bool:
    depot = inst.fleet.depot
    total = (inst.matrix.t(depot, graph.first_nodes[ci]) + graph.durations[ci]
             + inst.matrix.t(graph.last_nodes[ci], depot))
    return total <= inst.fleet.route_drive_limit


def _insert_inbounds(inst: Instance, engine: InsertionEngine,
                     pending: list[tuple[int, int]], rejected: list[tuple[int, str]],
                     retry_budget: int) -> None:
    """Fix appointments in arrival order and insert the return trips.

    A pair whose return trip does not fit is removed and re-inserted whole at
    the cheapest remaining slot (bounded retries), then rejected.
    """
    while pending:
        arr, pid = heapq.heappop(pending)
        found = _outbound_arrival(engine, pid)
        if found is None:
            continue  # removed by an earlier retry
        vid, actual = found
        if actual != arr:
            heapq.heappush(pending, (actual, pid))  # stale entry: re-queue once
            continue
        pair = inst.pair(pid)
        engine.pin_appointment(pid, vid)
        in_spec = engine.inbound_spec(pair, actual, FLEX)
        if isinstance(engine.insert_ride(in_spec), Accepted):
            continue
        engine.remove_leg(pid, OUT)
        engine._pins.pop(pid, None)
        result = engine.insert_pair(pair, FLEX, retry_budget=retry_budget)
        if isinstance(result, Rejected):
            rejected.append((pid, "return trip does not fit"))


def _outbound_arrival(engine: InsertionEngine, pid: int) -> Optional[tuple[int, int]]:
    for vid, state in enumerate(engine.states):
        for k in range(len(state)):
            if state.pair[k] == pid and state.leg[k] == OUT \
                    and state.action[k] == DELIVERY:
                return vid, state.B[k]
    return None


def _online_walkins(inst: Instance, engine: InsertionEngine,
                    rejected: list[tuple[int, str]], retry_budget: int) -> None:
    walkins = sorted((p for p in inst.pairs if not p.is_chronic),
                     key=lambda p: (p.release, p.id))
    for pair in walkins:
        result = engine.insert_pair(pair, FIXED, frozen_until=pair.release,
                                    retry_budget=retry_budget)
        if isinstance(result, Rejected):
            rejected.append((pair.id, "no online slot"))
