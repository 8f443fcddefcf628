"""Greedy insertion engine for rides and request pairs.

This is the shared machinery behind the standalone baseline, the inbound
phase of the linking heuristic, the recovery path of the matching heuristic,
and the online walk-in phase of all three. It explores feasible insertion
positions across all vehicle schedules and applies the candidate with the
smallest drive-time increase. Pairs are inserted atomically: either both legs
fit or the schedules stay untouched.

Online mode freezes every stop planned before the request's release time; a
vehicle that is already driving toward a stop cannot divert, so its current
leg end is frozen as well.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .model import (
    BREAK,
    CHRONIC,
    DELIVERY,
    DEPOT,
    IN,
    INF,
    OUT,
    PICKUP,
    Instance,
    RequestPair,
    Schedule,
    Stop,
    TimeWindow,
    congestion_violation,
)

FLEX = "flex"  # chronic pair, appointment chosen by the scheduler
FIXED = "fixed"  # walk-in pair, both windows fixed by the instance
ANCHORED = "anchored"  # chronic pair in the standard setting, windows around the booked slot


@dataclass(frozen=True)
class RideSpec:
    """One leg to insert, with its operative windows and constraints."""

    pair_id: int
    leg: str
    pickup_node: int
    delivery_node: int
    pickup_window: TimeWindow
    delivery_window: TimeWindow
    ride_limit: int
    delivery_snaps: bool  # GP arrivals must land inside opening hours
    counts_gp_arrival: bool


@dataclass(frozen=True)
class InsertionCandidate:
    vehicle: int
    pickup_pos: int
    delivery_pos: int
    delta_cost: int
    pickup_time: int
    delivery_time: int

    @property
    def sort_key(self):
        return (self.delta_cost, self.vehicle, self.pickup_pos, self.delivery_pos)


@dataclass(frozen=True)
class PairCandidate:
    outbound: InsertionCandidate
    inbound: InsertionCandidate
    delta_cost: int


@dataclass
class Rejected:
    reason: str = ""


@dataclass
class Accepted:
    outbound: InsertionCandidate
    inbound: Optional[InsertionCandidate] = None


class _VehState:
    """Mutable per-vehicle schedule state with kernel-ready array caches."""

    __slots__ = ("nodes", "e", "l", "B", "load_after", "snap", "pair", "leg",
                 "action", "drive", "_arrays", "_gp_times")

    def __init__(self, depot: int, start: int):
        self.nodes = [depot, depot]
        self.e = [start, 0]
        self.l = [INF, INF]
        self.B = [start, start]
        self.load_after = [0, 0]
        self.snap = [0, 0]
        self.pair: list[Optional[int]] = [None, None]
        self.leg: list[Optional[str]] = [None, None]
        self.action = [DEPOT, DEPOT]
        self.drive = 0
        self._arrays = None
        self._gp_times: Optional[dict[int, list[int]]] = None

    def __len__(self):
        return len(self.nodes)

    def copy(self) -> "_VehState":
        other = _VehState.__new__(_VehState)
        for name in ("nodes", "e", "l", "B", "load_after", "snap", "pair", "leg", "action"):
            setattr(other, name, list(getattr(self, name)))
        other.drive = self.drive
        other._arrays = None
        other._gp_times = None
        return other

    def dirty(self):
        self._arrays = None
        self._gp_times = None

    def rebuild(self, matrix) -> None:
        """Recompute loads, drive time and caches after a structural edit."""
        load = 0
        for k, act in enumerate(self.action):
            if act == PICKUP:
                load += 1
            elif act == DELIVERY:
                load -= 1
            self.load_after[k] = load
        self.drive = sum(
            int(matrix[a, b]) for a, b in zip(self.nodes, self.nodes[1:])
        )
        self.dirty()

    def partner_arrays(self, ride_limits) -> tuple[list[int], list[int]]:
        """Per-stop pickup index and ride limit for delivery stops."""
        partner = [-1] * len(self)
        limit = [0] * len(self)
        open_picks: dict[tuple, int] = {}
        for k in range(len(self)):
            if self.action[k] == PICKUP:
                open_picks[(self.pair[k], self.leg[k])] = k
            elif self.action[k] == DELIVERY:
                idx = open_picks.get((self.pair[k], self.leg[k]), -1)
                partner[k] = idx
                limit[k] = ride_limits(self.pair[k], self.leg[k])
        return partner, limit

    def arrays(self, ride_limits):
        if self._arrays is None:
            partner, limit = self.partner_arrays(ride_limits)
            self._arrays = (
                np.array(self.nodes, dtype=np.int64),
                np.array(self.e, dtype=np.int64),
                np.array(self.l, dtype=np.int64),
                np.array(self.B, dtype=np.int64),
                np.array(self.load_after, dtype=np.int64),
                np.array(self.snap, dtype=np.int64),
                np.array(partner, dtype=np.int64),
                np.array(limit, dtype=np.int64),
            )
        return self._arrays

    def gp_times(self) -> dict[int, list[int]]:
        """This vehicle's GP arrival times (outbound deliveries) by node."""
        if self._gp_times is None:
            out: dict[int, list[int]] = {}
            for k in range(len(self)):
                if self.action[k] == DELIVERY and self.leg[k] == OUT:
                    out.setdefault(self.nodes[k], []).append(self.B[k])
            self._gp_times = out
        return self._gp_times


class InsertionEngine:
    """Holds the evolving schedules of one run and performs insertions."""

    def __init__(self, inst: Instance):
        self.inst = inst
        fleet = inst.fleet
        self.states = [
            _VehState(fleet.depot, fleet.day_start) for _ in range(fleet.vehicle_count)
        ]
        self.sess_open = np.array([s.earliest for s in fleet.sessions], dtype=np.int64)
        self.sess_close = np.array([s.latest for s in fleet.sessions], dtype=np.int64)
        self.drive_limit = fleet.route_drive_limit
        self._pins: dict[int, int] = {}  # chronic pair id -> pinned arrival

    # -- construction ------------------------------------------------------

    @classmethod
    def from_schedules(cls, inst: Instance, schedules: Sequence[Schedule]) -> "InsertionEngine":
        """Rebuild engine state from bare schedules.

        Stop windows are re-derived conservatively: walk-in stops get their
        instance windows, chronic outbound deliveries are pinned at their
        scheduled arrival (the appointment), and chronic inbound pickups get
        the coupling window of that arrival.
        """
        eng = cls(inst)
        arrivals: dict[int, int] = {}
        for sched in schedules:
            for stop in sched.stops:
                if stop.leg == OUT and stop.action == DELIVERY:
                    arrivals[stop.pair_id] = stop.time
        for sched in schedules:
            state = eng.states[sched.vehicle]
            rows = []
            for stop in sched.stops:
                if stop.action == DEPOT:
                    continue
                pair = inst.pair(stop.pair_id)
                e, l, snap = eng._stop_window(pair, stop.leg, stop.action,
                                              arrivals.get(stop.pair_id))
                rows.append((stop.node, e, l, stop.time, snap, stop.pair_id,
                             stop.leg, stop.action))
            if rows:
                first = sched.stops[0]
                last = sched.stops[-1]
                state.B[0] = first.time
                state.B[1] = last.time
            for node, e, l, t, snap, pid, leg, action in rows:
                k = len(state.nodes) - 1
                state.nodes.insert(k, node)
                state.e.insert(k, e)
                state.l.insert(k, l)
                state.B.insert(k, t)
                state.load_after.insert(k, 0)
                state.snap.insert(k, snap)
                state.pair.insert(k, pid)
                state.leg.insert(k, leg)
                state.action.insert(k, action)
            state.rebuild(inst.matrix.times)
        for pid, arr in arrivals.items():
            if inst.pair(pid).is_chronic:
                eng._pins[pid] = arr
        return eng

    def _stop_window(self, pair: RequestPair, leg: str, action: str,
                     arrival: Optional[int]) -> tuple[int, int, int]:
        service = self.inst.service
        day_start = self.inst.fleet.day_start
        if not pair.is_chronic:
            if leg == OUT:
                tw = pair.outbound_delivery_window(service)
                if action == DELIVERY:
                    return tw.earliest, tw.latest, 1
                limit = self.inst.ride_limit(pair, OUT)
                return tw.earliest - limit, tw.latest - self.inst.direct_time(pair, OUT), 0
            tw = pair.inbound_pickup_window(service)
            if action == PICKUP:
                return tw.earliest, tw.latest, 0
            return pair.release, INF, 0
        if leg == OUT:
            if action == DELIVERY:
                return arrival, arrival, 1
            return arrival - self.inst.ride_limit(pair, OUT), \
                arrival - self.inst.direct_time(pair, OUT), 0
        lo = arrival + service.gp_stay
        if action == PICKUP:
            return lo, lo + service.max_window, 0
        return day_start, INF, 0

    # -- ride specs --------------------------------------------------------

    def outbound_spec(self, pair: RequestPair, mode: str) -> RideSpec:
        inst = self.inst
        limit = inst.ride_limit(pair, OUT)
        direct = inst.direct_time(pair, OUT)
        if mode == FLEX:
            dtw = TimeWindow(inst.fleet.day_start, inst.fleet.day_end)
            ptw = TimeWindow(inst.fleet.day_start, inst.fleet.day_end)
        else:
            if mode == ANCHORED:
                dtw = TimeWindow(pair.appointment - inst.service.max_window,
                                 pair.appointment)
            else:
                dtw = pair.outbound_delivery_window(inst.service)
            ptw = TimeWindow(dtw.earliest - limit, dtw.latest - direct)
        return RideSpec(pair.id, OUT, pair.home, pair.gp, ptw, dtw, limit,
                        delivery_snaps=True, counts_gp_arrival=True)

    def inbound_spec(self, pair: RequestPair, arrival: int, mode: str) -> RideSpec:
        service = self.inst.service
        if mode == FIXED:
            ptw = pair.inbound_pickup_window(service)
        elif mode == ANCHORED:
            # GP sees the patient at the booked slot even if dropped off early.
            ptw = TimeWindow(pair.appointment + service.gp_stay,
                             arrival + service.gp_stay + service.max_window)
        else:
            ptw = TimeWindow(arrival + service.gp_stay,
                             arrival + service.gp_stay + service.max_window)
        dtw = TimeWindow(ptw.earliest, INF)
        return RideSpec(pair.id, IN, pair.gp, pair.home, ptw, dtw,
                        self.inst.ride_limit(pair, IN),
                        delivery_snaps=False, counts_gp_arrival=False)

    # -- frozen prefix -----------------------------------------------------

    def first_mutable(self, vid: int, frozen_until: Optional[int]) -> int:
        """First insertable position under the online frozen-prefix rule."""
        state = self.states[vid]
        K = len(state)
        if frozen_until is None or frozen_until <= 0:
            return 1
        j0 = None
        for j in range(K - 1):  # the trailing depot stop is never frozen
            if state.B[j] >= frozen_until:
                j0 = j
                break
        if j0 is None:
            return K - 1
        if j0 == 0:
            return 1
        if j0 == K - 1:
            return K - 1  # only the empty leg home remains; diverting is fine
        departure = state.B[j0] - int(self.inst.matrix.times[state.nodes[j0 - 1],
                                                             state.nodes[j0]])
        if departure < frozen_until:
            return min(j0 + 1, K - 1)  # already en route: current leg end is committed
        return j0

    # -- candidate generation ---------------------------------------------

    def _scan(self, vid: int, spec: RideSpec, p_lo: int,
              frozen_until: Optional[int]) -> list[tuple]:
        state = self.states[vid]
        arrays = state.arrays(self.inst.ride_limit_by_id)
        pe, pl = spec.pickup_window.earliest, spec.pickup_window.latest
        de, dl = spec.delivery_window.earliest, spec.delivery_window.latest
        if frozen_until:
            pe = max(pe, frozen_until)
            de = max(de, frozen_until)
        if pe > pl or de > dl:
            return []
        return kernels.scan_ride_insertions(
            *arrays, self.inst.matrix.times, self.sess_open, self.sess_close,
            spec.pickup_node, spec.delivery_node, pe, pl, de, dl,
            spec.ride_limit, 0, 1 if spec.delivery_snaps else 0,
            self.inst.fleet.seat_capacity, state.drive, self.drive_limit, p_lo,
        )

    def ride_candidates(self, spec: RideSpec, frozen_until: Optional[int] = None,
                        frozen_pos: Optional[Sequence[int]] = None) -> list[InsertionCandidate]:
        """All feasible candidates across vehicles, sorted by the greedy key.

        `frozen_pos`, when given, fixes the first insertable position per
        vehicle directly (used by the rolling-horizon scheduler); otherwise it
        is derived from `frozen_until`.
        """
        raw: list[InsertionCandidate] = []
        for vid in range(len(self.states)):
            p_lo = self.first_mutable(vid, frozen_until)
            if frozen_pos is not None:
                p_lo = max(p_lo, frozen_pos[vid])
            for p, q, delta, bp, bd in self._scan(vid, spec, p_lo, frozen_until):
                raw.append(InsertionCandidate(vid, int(p), int(q), int(delta),
                                              int(bp), int(bd)))
        return sorted(raw, key=lambda c: c.sort_key)

    def feasible_candidates(self, spec: RideSpec, frozen_until: Optional[int] = None,
                            frozen_pos: Optional[Sequence[int]] = None) -> list[InsertionCandidate]:
        """Candidates that also pass the exact GP congestion check."""
        return [c for c in self.ride_candidates(spec, frozen_until, frozen_pos)
                if self.congestion_ok(c, spec)]

    def best_candidate(self, spec: RideSpec, frozen_until: Optional[int] = None,
                       frozen_pos: Optional[Sequence[int]] = None) -> Optional[InsertionCandidate]:
        """Cheapest feasible candidate; congestion is checked lazily in order."""
        for cand in self.ride_candidates(spec, frozen_until, frozen_pos):
            if self.congestion_ok(cand, spec):
                return cand
        return None

    # -- congestion --------------------------------------------------------

    def _shifted_times(self, vid: int, p: int, q: int, spec: RideSpec,
                       bp: int, bd: int) -> list[tuple[int, int]]:
        """(original index, new time) for stops affected by an insertion."""
        state = self.states[vid]
        mat = self.inst.matrix.times
        so, sc = self.sess_open, self.sess_close
        out = []
        prev_node, prev_time = spec.pickup_node, bp
        for j in range(p, q):
            x = prev_time + int(mat[prev_node, state.nodes[j]])
            nb = state.B[j] if state.B[j] >= x else x
            if state.snap[j] and nb > state.B[j]:
                nb = _snap_time(nb, so, sc)
            out.append((j, nb))
            prev_node, prev_time = state.nodes[j], nb
        prev_node, prev_time = spec.delivery_node, bd
        for j in range(q, len(state)):
            x = prev_time + int(mat[prev_node, state.nodes[j]])
            nb = state.B[j] if state.B[j] >= x else x
            if state.snap[j] and nb > state.B[j]:
                nb = _snap_time(nb, so, sc)
            if nb == state.B[j]:
                break
            out.append((j, nb))
            prev_node, prev_time = state.nodes[j], nb
        return out

    def congestion_ok(self, cand: InsertionCandidate, spec: RideSpec) -> bool:
        """Exact sliding-window check on the schedules as they would look."""
        service = self.inst.service
        state = self.states[cand.vehicle]
        shifted = dict(self._shifted_times(cand.vehicle, cand.pickup_pos,
                                           cand.delivery_pos, spec,
                                           cand.pickup_time, cand.delivery_time))
        hypothetical: dict[int, list[int]] = {}
        for k in range(len(state)):
            if state.action[k] == DELIVERY and state.leg[k] == OUT:
                hypothetical.setdefault(state.nodes[k], []).append(
                    shifted.get(k, state.B[k]))
        if spec.counts_gp_arrival:
            hypothetical.setdefault(spec.delivery_node, []).append(cand.delivery_time)

        affected = set()
        if spec.counts_gp_arrival:
            affected.add(spec.delivery_node)
        for k in shifted:
            if state.action[k] == DELIVERY and state.leg[k] == OUT:
                affected.add(state.nodes[k])
        for gp in affected:
            times = list(hypothetical.get(gp, []))
            for vid, other in enumerate(self.states):
                if vid != cand.vehicle:
                    times.extend(other.gp_times().get(gp, []))
            if congestion_violation(times, service.congestion_limit,
                                    service.congestion_window):
                return False
        return True

    def gp_arrivals_at(self, gp: int) -> list[int]:
        times = []
        for state in self.states:
            times.extend(state.gp_times().get(gp, []))
        return sorted(times)

    # -- mutation ----------------------------------------------------------

    def apply(self, cand: InsertionCandidate, spec: RideSpec) -> None:
        state = self.states[cand.vehicle]
        shifted = self._shifted_times(cand.vehicle, cand.pickup_pos,
                                      cand.delivery_pos, spec,
                                      cand.pickup_time, cand.delivery_time)
        p, q = cand.pickup_pos, cand.delivery_pos
        for j, t in shifted:
            state.B[j] = t
        pick_row = (spec.pickup_node, spec.pickup_window.earliest,
                    spec.pickup_window.latest, cand.pickup_time, 0,
                    spec.pair_id, spec.leg, PICKUP)
        drop_row = (spec.delivery_node, spec.delivery_window.earliest,
                    spec.delivery_window.latest, cand.delivery_time,
                    1 if spec.delivery_snaps else 0, spec.pair_id, spec.leg, DELIVERY)
        self._insert_row(state, q, drop_row)
        self._insert_row(state, p, pick_row)
        state.rebuild(self.inst.matrix.times)

    @staticmethod
    def _insert_row(state: _VehState, pos: int, row: tuple) -> None:
        node, e, l, t, snap, pid, leg, action = row
        state.nodes.insert(pos, node)
        state.e.insert(pos, e)
        state.l.insert(pos, l)
        state.B.insert(pos, t)
        state.load_after.insert(pos, 0)
        state.snap.insert(pos, snap)
        state.pair.insert(pos, pid)
        state.leg.insert(pos, leg)
        state.action.insert(pos, action)

    def remove_leg(self, pair_id: int, leg: str) -> None:
        """Splice a leg's stops out; remaining times stay valid (triangle inequality)."""
        for state in self.states:
            idxs = [k for k in range(len(state))
                    if state.pair[k] == pair_id and state.leg[k] == leg]
            for k in reversed(idxs):
                for name in ("nodes", "e", "l", "B", "load_after", "snap",
                             "pair", "leg", "action"):
                    del getattr(state, name)[k]
            if idxs:
                state.rebuild(self.inst.matrix.times)

    def remove_pair(self, pair_id: int) -> None:
        self.remove_leg(pair_id, OUT)
        self.remove_leg(pair_id, IN)
        self._pins.pop(pair_id, None)

    def pin_appointment(self, pair_id: int, vehicle: int) -> int:
        """Fix a flexible pair's appointment at its scheduled arrival time."""
        state = self.states[vehicle]
        pair = self.inst.pair(pair_id)
        arrival = None
        for k in range(len(state)):
            if state.pair[k] == pair_id and state.leg[k] == OUT:
                if state.action[k] == DELIVERY:
                    arrival = state.B[k]
                    state.e[k] = state.l[k] = arrival
        assert arrival is not None
        for k in range(len(state)):
            if state.pair[k] == pair_id and state.leg[k] == OUT \
                    and state.action[k] == PICKUP:
                state.e[k] = arrival - self.inst.ride_limit(pair, OUT)
                state.l[k] = arrival - self.inst.direct_time(pair, OUT)
        state.dirty()
        self._pins[pair_id] = arrival
        return arrival

    def append_visits(self, vid: int, rows: Iterable[tuple]) -> None:
        """Splice pre-timed stop rows in front of the trailing depot stop.

        Rows are (node, e, l, time, snap, pair_id, leg, action) and must
        already be time-consistent; the depot return is pushed if needed.
        """
        state = self.states[vid]
        for row in rows:
            self._insert_row(state, len(state) - 1, row)
        back = state.B[-2] + int(self.inst.matrix.times[state.nodes[-2],
                                                        state.nodes[-1]])
        if back > state.B[-1]:
            state.B[-1] = back
        state.rebuild(self.inst.matrix.times)

    def snapshot(self, vid: int) -> _VehState:
        return self.states[vid].copy()

    def restore(self, vid: int, saved: _VehState) -> None:
        self.states[vid] = saved

    # -- pair insertion ----------------------------------------------------

    def insert_pair(self, pair: RequestPair, mode: str,
                    frozen_until: Optional[int] = None,
                    retry_budget: int = 3,
                    frozen_pos: Optional[Sequence[int]] = None) -> Accepted | Rejected:
        """Insert both legs atomically, or neither.

        The cheapest `retry_budget` outbound candidates are each completed
        with their best inbound candidate; the best total wins. For flexible
        pairs the accepted appointment is pinned at the realized arrival.
        """
        out_spec = self.outbound_spec(pair, mode)
        best: Optional[tuple[int, InsertionCandidate, InsertionCandidate]] = None
        tried = 0
        for out_cand in self.ride_candidates(out_spec, frozen_until, frozen_pos):
            if tried >= retry_budget:
                break
            if not self.congestion_ok(out_cand, out_spec):
                continue
            tried += 1
            saved = self.snapshot(out_cand.vehicle)
            self.apply(out_cand, out_spec)
            in_spec = self.inbound_spec(pair, out_cand.delivery_time, mode)
            in_cand = self.best_candidate(in_spec, frozen_until, frozen_pos)
            self.restore(out_cand.vehicle, saved)
            if in_cand is not None:
                total = out_cand.delta_cost + in_cand.delta_cost
                if best is None or total < best[0]:
                    best = (total, out_cand, in_cand)
        if best is None:
            return Rejected("no coupled insertion found")
        _, out_cand, _ = best
        self.apply(out_cand, out_spec)
        in_spec = self.inbound_spec(pair, out_cand.delivery_time, mode)
        in_cand = self.best_candidate(in_spec, frozen_until, frozen_pos)
        assert in_cand is not None
        self.apply(in_cand, in_spec)
        if mode == FLEX:
            self.pin_appointment(pair.id, out_cand.vehicle)
        return Accepted(out_cand, in_cand)

    def insert_ride(self, spec: RideSpec, frozen_until: Optional[int] = None,
                    frozen_pos: Optional[Sequence[int]] = None) -> Accepted | Rejected:
        cand = self.best_candidate(spec, frozen_until, frozen_pos)
        if cand is None:
            return Rejected("no feasible position")
        self.apply(cand, spec)
        return Accepted(cand)

    # -- slack ---------------------------------------------------------------

    def slack(self, vid: int, pos: int) -> int:
        """Largest delay of the stop at `pos` that keeps everything feasible.

        Waiting downstream absorbs delay; window headroom, ride limits of
        passengers picked up earlier, and session closes (for snapped stops)
        bound it.
        """
        state = self.states[vid]
        mat = self.inst.matrix.times
        slack = self._headroom(state, pos)
        wait = 0
        for k in range(pos + 1, len(state)):
            wait += state.B[k] - (state.B[k - 1]
                                  + int(mat[state.nodes[k - 1], state.nodes[k]]))
            head = self._headroom(state, k, shift_start=pos)
            if head >= INF:
                continue
            slack = min(slack, head + wait)
        return min(slack, INF)

    def _headroom(self, state: _VehState, k: int, shift_start: Optional[int] = None) -> int:
        head = state.l[k] - state.B[k] if state.l[k] < INF else INF
        if state.snap[k]:
            for s in self.inst.fleet.sessions:
                if s.contains(state.B[k]):
                    head = min(head, s.latest - state.B[k])
                    break
        if state.action[k] == DELIVERY:
            start = shift_start if shift_start is not None else k
            for j in range(k):
                if state.pair[j] == state.pair[k] and state.leg[j] == state.leg[k] \
                        and state.action[j] == PICKUP and j < start:
                    limit = self.inst.ride_limit_by_id(state.pair[k], state.leg[k])
                    head = min(head, limit - (state.B[k] - state.B[j]))
        return head

    # -- materialization -----------------------------------------------------

    def to_schedules(self) -> list[Schedule]:
        out = []
        for vid, state in enumerate(self.states):
            stops = [
                Stop(state.nodes[k], state.action[k], state.pair[k], state.leg[k],
                     state.B[k], state.load_after[k])
                for k in range(len(state))
            ]
            out.append(Schedule(vid, stops, fixed_prefix_len=len(stops)))
        return out

    def total_drive(self) -> int:
        return sum(state.drive for state in self.states)


def _snap_time(t: int, sess_open, sess_close) -> int:
    for i in range(len(sess_open)):
        if t <= int(sess_close[i]):
            return t if t >= int(sess_open[i]) else int(sess_open[i])
    return INF


# -- spec-level functional API ------------------------------------------------


def time_slack(inst: Instance, schedule: Schedule, position: int) -> int:
    """Maximum delay applicable at a schedule position without any violation."""
    eng = InsertionEngine.from_schedules(inst, [schedule])
    return eng.slack(schedule.vehicle, position)


def enumerate_insertions(inst: Instance, schedules: Sequence[Schedule],
                         item: RequestPair | RideSpec,
                         frozen_until: int = 0):
    """All feasible insertion candidates for a ride or a request pair.

    For pairs, each of the cheapest outbound candidates is combined with its
    best inbound completion under the coupling window. Returns candidates
    sorted by increasing cost; an empty list means no feasible insertion.
    """
    eng = InsertionEngine.from_schedules(inst, schedules)
    if isinstance(item, RideSpec):
        return [c for c in eng.ride_candidates(item, frozen_until or None)
                if eng.congestion_ok(c, item)]
    mode = FLEX if item.is_chronic else FIXED
    out_spec = eng.outbound_spec(item, mode)
    combos = []
    for out_cand in eng.feasible_candidates(out_spec, frozen_until or None):
        saved = eng.snapshot(out_cand.vehicle)
        eng.apply(out_cand, out_spec)
        in_spec = eng.inbound_spec(item, out_cand.delivery_time, mode)
        in_cand = eng.best_candidate(in_spec, frozen_until or None)
        eng.restore(out_cand.vehicle, saved)
        if in_cand is not None:
            combos.append(PairCandidate(out_cand, in_cand,
                                        out_cand.delta_cost + in_cand.delta_cost))
    return sorted(combos, key=lambda c: (c.delta_cost, c.outbound.sort_key))


def insert_best(inst: Instance, schedules: Sequence[Schedule],
                item: RequestPair | RideSpec, frozen_until: int = 0):
    """Apply the cheapest feasible insertion; Rejected leaves schedules as-is.

    Returns (Accepted | Rejected, schedules). The input schedules are never
    mutated; on acceptance a new schedule list is returned.
    """
    eng = InsertionEngine.from_schedules(inst, schedules)
    if isinstance(item, RideSpec):
        result = eng.insert_ride(item, frozen_until or None)
    else:
        mode = FLEX if item.is_chronic else FIXED
        result = eng.insert_pair(item, mode, frozen_until or None)
    if isinstance(result, Rejected):
        return result, list(schedules)
    return result, eng.to_schedules()


def vehicle_position_at(inst: Instance, schedule: Schedule, t: int):
    """(from_node, to_node, fraction) of a vehicle's position at time t.

    Vehicles wait at their current stop and depart as late as possible, so the
    position interpolates linearly along the active leg only while driving.
    """
    stops = schedule.stops
    if not stops or t <= stops[0].time:
        node = stops[0].node if stops else inst.fleet.depot
        return node, node, 0.0
    for j in range(1, len(stops)):
        if t < stops[j].time:
            travel = inst.matrix.t(stops[j - 1].node, stops[j].node)
            departure = stops[j].time - travel
            if t <= departure or travel == 0:
                return stops[j - 1].node, stops[j - 1].node, 0.0
            return stops[j - 1].node, stops[j].node, (t - departure) / travel
    return stops[-1].node, stops[-1].node, 0.0
