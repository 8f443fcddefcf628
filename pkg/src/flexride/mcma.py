"""Rolling-horizon mini-cluster matching.

Vehicle schedules grow from the start of the service day. Every fixed
delivery is a horizon: an outbound drop derives the patient's return window
and tries to slip the return trip into a nearby vehicle plan; whenever a
vehicle runs empty, free vehicles are matched against the waiting return
trips (which must be served) and the open clusters (which may be started).
Failed return trips trigger removal of the outbound and a greedy re-insertion
of the whole pair.

Committed (fixed) stops are never altered or shifted; the single exception is
the removal performed by failure recovery. Return trips slipped into the
uncommitted tail of a busy vehicle stay tentative until that vehicle reaches
the end of its committed work, at which point they are promoted and their
drop-offs start generating horizons.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import clustering, intra_route
from .assignment import (
    ClusterJob,
    InboundJob,
    InfeasibleW1,
    VehicleSlot,
    build_costs,
    solve_vehicle_rescheduling,
)
from .gih import FLEX, Accepted, InsertionEngine
from .intra_route import IntraRoute
from .mclih import HeuristicResult, _online_walkins, place_cluster
from .model import (
    DELIVERY,
    IN,
    INF,
    OUT,
    PICKUP,
    Instance,
    TimeWindow,
    in_any_session,
)

LONGEST = "longest"
RANDOM = "random"


@dataclass
class McmaConfig:
    init_policy: str = LONGEST
    fairness_margin: float = 0.05
    retry_budget: int = 3
    recovery_budget: int = 2


@dataclass
class HorizonState:
    """Mutable state of one rolling-horizon run."""

    inst: Instance
    engine: InsertionEngine
    config: McmaConfig
    drop_queue: list = field(default_factory=list)  # (time, seq, vid, pair, leg)
    seq: int = 0
    fixed_len: list[int] = field(default_factory=list)
    unpopped: list[int] = field(default_factory=list)
    waiting: dict[int, InboundJob] = field(default_factory=dict)  # must-serve pool
    open_clusters: dict[int, tuple[IntraRoute, tuple[int, ...]]] = field(default_factory=dict)
    next_cluster_id: int = 0
    recovery_count: dict[int, int] = field(default_factory=dict)
    rejected: list[tuple[int, str]] = field(default_factory=list)
    events_processed: int = 0
    wakes: int = 0
    fairness_wake_at: Optional[int] = None
    n_chronic: int = 0

    def push_drop(self, time: int, vid: int, pair_id: int, leg: str) -> None:
        heapq.heappush(self.drop_queue, (time, self.seq, vid, pair_id, leg))
        self.seq += 1
        self.unpopped[vid] += 1

    def push_wake(self, time: int) -> None:
        heapq.heappush(self.drop_queue, (time, self.seq, -1, -1, ""))
        self.seq += 1
        self.wakes += 1


def init_mcma(inst: Instance, clusters: list[list[int]], routes: list[IntraRoute],
              seed: int, config: McmaConfig | None = None) -> HorizonState:
    """Seed each vehicle with one mini-cluster; the rest wait in the open pool."""
    config = config or McmaConfig()
    engine = InsertionEngine(inst)
    state = HorizonState(inst, engine, config)
    state.fixed_len = [1] * inst.fleet.vehicle_count
    state.unpopped = [0] * inst.fleet.vehicle_count
    state.n_chronic = sum(p.is_chronic for p in inst.pairs)

    order = list(range(len(routes)))
    if config.init_policy == RANDOM:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1417]))
        order = [int(i) for i in rng.permutation(len(routes))]
    else:
        order.sort(key=lambda ci: (-routes[ci].duration, ci))

    for ci in order:
        state.open_clusters[state.next_cluster_id] = (routes[ci], tuple(clusters[ci]))
        state.next_cluster_id += 1

    for vid in range(inst.fleet.vehicle_count):
        if not state.open_clusters:
            break
        cid = next(iter(state.open_clusters))
        members = state.open_clusters[cid][1]
        if not _realize_cluster(state, vid, cid, inst.fleet.day_start):
            state.open_clusters.pop(cid)
            for pid in members:
                state.rejected.append((pid, "seed cluster does not fit the day"))
    return state


def _commit_tail(state: HorizonState, vid: int) -> None:
    """Promote a vehicle's tentative tail to fixed, queueing its drop-offs."""
    veh = state.engine.states[vid]
    for k in range(state.fixed_len[vid], len(veh) - 1):
        if veh.action[k] == DELIVERY:
            state.push_drop(veh.B[k], vid, veh.pair[k], veh.leg[k])
    state.fixed_len[vid] = len(veh) - 1


def _realize_cluster(state: HorizonState, vid: int, cid: int, horizon: int) -> bool:
    """Fix an open cluster onto a free vehicle."""
    route, _members = state.open_clusters[cid]
    arrivals = place_cluster(state.engine, vid, route, horizon)
    if arrivals is None:
        return False
    state.open_clusters.pop(cid)
    _commit_tail(state, vid)
    return True


def _realize_inbound(state: HorizonState, vid: int, job: InboundJob, horizon: int) -> bool:
    """Append a matched return trip to a free vehicle and commit it."""
    inst = state.inst
    eng = state.engine
    veh = eng.states[vid]
    prev_node, prev_time = veh.nodes[-2], veh.B[-2]
    depart = max(horizon, prev_time)
    pick = max(job.window.earliest, depart + inst.matrix.t(prev_node, job.node))
    if pick > job.window.latest:
        return False
    pair = inst.pair(job.pair_id)
    drop = pick + inst.matrix.t(job.node, pair.home)
    added_drive = (inst.matrix.t(prev_node, job.node)
                   + inst.matrix.t(job.node, pair.home)
                   + inst.matrix.t(pair.home, inst.fleet.depot)
                   - inst.matrix.t(prev_node, inst.fleet.depot))
    if veh.drive + added_drive > eng.drive_limit:
        return False
    eng.append_visits(vid, [
        (job.node, job.window.earliest, job.window.latest, pick, 0,
         job.pair_id, IN, PICKUP),
        (pair.home, job.window.earliest, INF, drop, 0, job.pair_id, IN, DELIVERY),
    ])
    _commit_tail(state, vid)
    return True


def _promote_ready(state: HorizonState) -> None:
    """Commit tentative tails of vehicles that exhausted their fixed work."""
    for vid in range(len(state.engine.states)):
        veh = state.engine.states[vid]
        if state.unpopped[vid] == 0 and state.fixed_len[vid] < len(veh) - 1:
            for k in range(state.fixed_len[vid], len(veh) - 1):
                if veh.action[k] == DELIVERY:
                    state.push_drop(veh.B[k], vid, veh.pair[k], veh.leg[k])
            state.fixed_len[vid] = len(veh) - 1


def _try_interim_insertion(state: HorizonState, pair_id: int, window: TimeWindow) -> bool:
    """Slip a due return trip into an uncommitted tail near a close request.

    Success needs window feasibility plus the mini-cluster proximity criterion
    against a neighbouring request at the insertion point.
    """
    inst = state.inst
    eng = state.engine
    pair = inst.pair(pair_id)
    spec = eng.inbound_spec(pair, window.earliest - inst.service.gp_stay, FLEX)
    for cand in eng.ride_candidates(spec, frozen_pos=state.fixed_len):
        veh = eng.states[cand.vehicle]
        if not _close_to_neighbour(state, veh, cand.pickup_pos, pair):
            continue
        if not eng.congestion_ok(cand, spec):
            continue
        eng.apply(cand, spec)
        return True
    return False


def _close_to_neighbour(state: HorizonState, veh, pos: int, pair) -> bool:
    inst = state.inst
    for k in (pos - 1, pos):
        if 0 <= k < len(veh) and veh.pair[k] is not None:
            other = inst.pair(veh.pair[k])
            a, b = inst.leg_nodes(other, veh.leg[k])
            if clustering.is_close(inst, pair.gp, pair.home, a, b):
                return True
    return False


def _fairness_blocks(state: HorizonState, t: int) -> bool:
    """Withhold new outbound work while chronic service runs ahead of time."""
    if state.n_chronic == 0:
        return False
    fleet = state.inst.fleet
    committed = 0
    for vid, veh in enumerate(state.engine.states):
        committed += sum(1 for k in range(1, state.fixed_len[vid])
                         if veh.action[k] == DELIVERY)
    served_frac = committed / (2 * state.n_chronic)
    span = fleet.day_end - fleet.day_start
    elapsed_frac = (t - fleet.day_start) / span if span else 1.0
    margin = state.config.fairness_margin
    if served_frac <= elapsed_frac + margin:
        return False
    wake = fleet.day_start + math.ceil((served_frac - margin) * span)
    if wake > t and (state.fairness_wake_at is None or state.fairness_wake_at <= t):
        state.push_wake(wake)
        state.fairness_wake_at = wake
    return True


def _in_break(state: HorizonState, t: int) -> Optional[int]:
    """Next session open when t falls inside a lunch break, else None."""
    fleet = state.inst.fleet
    if t < fleet.day_start or t > fleet.day_end or in_any_session(fleet.sessions, t):
        return None
    for s in fleet.sessions:
        if s.earliest > t:
            return s.earliest
    return None


def recover_failure(state: HorizonState, pair_id: int, horizon: int) -> None:
    """Drop the outbound of an unservable return trip and replan the pair.

    The outbound stops are spliced out of the committed schedule (the one
    sanctioned exception to immutability); the pair is re-inserted whole into
    the uncommitted tails, or its outbound returns to the open pool as a
    single-ride cluster, or - past the recovery budget - the pair is denied.
    """
    inst = state.inst
    eng = state.engine
    state.waiting.pop(pair_id, None)

    for vid, veh in enumerate(eng.states):
        removed_fixed = sum(1 for k in range(len(veh))
                            if veh.pair[k] == pair_id and veh.leg[k] == OUT
                            and k < state.fixed_len[vid])
        state.fixed_len[vid] -= removed_fixed
    eng.remove_leg(pair_id, OUT)
    eng._pins.pop(pair_id, None)

    tries = state.recovery_count.get(pair_id, 0)
    state.recovery_count[pair_id] = tries + 1
    if tries >= state.config.recovery_budget:
        state.rejected.append((pair_id, "return trip unservable after retries"))
        return

    pair = inst.pair(pair_id)
    result = eng.insert_pair(pair, FLEX, frozen_until=horizon,
                             retry_budget=state.config.retry_budget,
                             frozen_pos=state.fixed_len)
    if isinstance(result, Accepted):
        for vid in sorted({result.outbound.vehicle, result.inbound.vehicle}):
            _commit_tail(state, vid)
        return

    route = intra_route.optimal_route(inst, [pair_id])
    state.open_clusters[state.next_cluster_id] = (route, (pair_id,))
    state.next_cluster_id += 1


def _free_vehicles(state: HorizonState) -> list[int]:
    return [vid for vid in range(len(state.engine.states))
            if state.unpopped[vid] == 0
            and state.fixed_len[vid] == len(state.engine.states[vid]) - 1]


def _run_matching(state: HorizonState, t: int) -> None:
    """Match free vehicles against waiting return trips and open clusters.

    Failure recovery can mutate vehicle tails, so the problem is rebuilt from
    scratch whenever a job had to be recovered before solving.
    """
    inst = state.inst
    eng = state.engine

    expired = sorted(pid for pid, job in state.waiting.items()
                     if job.window.latest < t)
    for pid in expired:
        recover_failure(state, pid, t)

    allow_clusters = True
    resume = _in_break(state, t)
    if resume is not None:
        allow_clusters = False
        state.push_wake(resume)
    elif _fairness_blocks(state, t):
        allow_clusters = False

    skip: set[int] = set()  # jobs deferred within this horizon (Hall violations)
    while True:
        free = _free_vehicles(state)
        if not free:
            return
        vehicles = [VehicleSlot(vid, eng.states[vid].nodes[-2],
                                max(0, eng.states[vid].B[-2] - t)) for vid in free]
        jobs = sorted((j for pid, j in state.waiting.items() if pid not in skip),
                      key=lambda j: (j.window.latest, j.pair_id))
        jobs = jobs[:len(free)]  # transient surplus waits for the next horizon
        cluster_jobs = []
        if allow_clusters:
            cluster_jobs = [ClusterJob(cid, route.first_node)
                            for cid, (route, _m) in sorted(state.open_clusters.items())]
        if not jobs and not cluster_jobs:
            return

        problem = build_costs(vehicles, jobs, cluster_jobs, t, inst.matrix)
        unreachable = [ji for ji in range(len(jobs))
                       if all((vi, ji) in problem.excluded
                              for vi in range(len(vehicles)))]
        if unreachable:
            for ji in unreachable:
                recover_failure(state, jobs[ji].pair_id, t)
            continue  # recovery may have changed tails; rebuild
        try:
            match = solve_vehicle_rescheduling(problem)
        except InfeasibleW1:
            # Hall violation: the least urgent job waits for a later horizon.
            skip.add(jobs[-1].pair_id)
            continue
        break

    for vi, ji in sorted(match.edges):
        vid = vehicles[vi].vehicle
        if ji < len(jobs):
            job = jobs[ji]
            if _realize_inbound(state, vid, job, t):
                state.waiting.pop(job.pair_id, None)
            else:
                recover_failure(state, job.pair_id, t)
        else:
            cid = cluster_jobs[ji - len(jobs)].cluster_id
            members = state.open_clusters[cid][1]
            if not _realize_cluster(state, vid, cid, t):
                state.open_clusters.pop(cid)
                for pid in members:
                    state.rejected.append((pid, "no session slot left for cluster"))


def step(state: HorizonState) -> None:
    """Process the next horizon: one drop-off (or wake-up) event."""
    t, _seq, vid, pair_id, leg = heapq.heappop(state.drop_queue)
    state.events_processed += 1

    if vid < 0:
        if state.fairness_wake_at == t:
            state.fairness_wake_at = None
        _promote_ready(state)
        _run_matching(state, t)
        return

    state.unpopped[vid] -= 1
    veh = state.engine.states[vid]
    hit = None
    for k in range(len(veh)):
        if (veh.pair[k] == pair_id and veh.leg[k] == leg
                and veh.action[k] == DELIVERY and veh.B[k] == t):
            hit = k
            break
    if hit is None:
        _promote_ready(state)
        return  # stop was removed by failure recovery; stale event

    pair = state.inst.pair(pair_id)
    if leg == OUT and pair.is_chronic:
        service = state.inst.service
        window = TimeWindow(t + service.gp_stay, t + service.gp_stay + service.max_window)
        if not _try_interim_insertion(state, pair_id, window):
            state.waiting[pair_id] = InboundJob(pair_id, pair.gp, window)

    _promote_ready(state)
    if veh.load_after[hit] == 0:
        _run_matching(state, t)


def run_mcma(inst: Instance, seed: int, config: McmaConfig | None = None) -> HeuristicResult:
    """Full pipeline: rolling-horizon chronic phase, then online walk-ins."""
    config = config or McmaConfig()
    chronic = [p for p in inst.pairs if p.is_chronic]

    if chronic:
        clusters = clustering.chronic_clusters(inst)
        clusters, routes = intra_route.routes_for_clusters(inst, clusters)
        state = init_mcma(inst, clusters, routes, seed, config)
        guard = 20 * len(inst.pairs) + 500
        while state.drop_queue:
            step(state)
            assert state.events_processed <= guard, "rolling horizon failed to terminate"
        _drain(state)
        engine = state.engine
        rejected = state.rejected
    else:
        engine = InsertionEngine(inst)
        rejected = []

    _online_walkins(inst, engine, rejected, config.retry_budget)
    return HeuristicResult(engine.to_schedules(), rejected)


def _drain(state: HorizonState) -> None:
    """Serve or deny whatever is still open once the event stream dries up."""
    for _ in range(len(state.waiting) + len(state.open_clusters) + 2):
        _promote_ready(state)
        if state.drop_queue:
            while state.drop_queue:
                step(state)
            continue
        if not state.waiting and not state.open_clusters:
            break
        t = max(max((veh.B[-2] for veh in state.engine.states),
                    default=state.inst.fleet.day_start),
                state.inst.fleet.day_start)
        before = (len(state.waiting), len(state.open_clusters))
        _run_matching(state, t)
        if state.drop_queue:
            continue
        if (len(state.waiting), len(state.open_clusters)) == before:
            break
    for pid in sorted(state.waiting):
        recover_failure(state, pid, state.inst.fleet.day_end)
    while state.drop_queue:
        step(state)
    for cid in sorted(state.open_clusters):
        for pid in state.open_clusters[cid][1]:
            if _outbound_present(state.engine, pid):
                continue
            state.rejected.append((pid, "denied at end of service"))
    state.open_clusters.clear()


def _outbound_present(engine: InsertionEngine, pid: int) -> bool:
    return any(veh.pair[k] == pid and veh.leg[k] == OUT
               for veh in engine.states for k in range(len(veh)))
