"""Domain model for paired-trip dial-a-ride scheduling.

A request pair is one patient's day: an outbound ride from home to a GP and an
inbound ride back. Chronic patients have no preset appointment; the scheduler
chooses the arrival time and the return trip must depart within
[arrival + gp_stay, arrival + gp_stay + max_window]. Walk-in patients carry a
fixed appointment and a release time (when the operator learns about them).

All times are integer seconds since midnight of the service day. Window
boundaries are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

INF = 2**60

CHRONIC = "chronic"
WALKIN = "walkin"

PICKUP = "pickup"
DELIVERY = "delivery"
DEPOT = "depot"
BREAK = "break"

OUT = "out"
IN = "in"


class SchedulingError(Exception):
    pass


class MalformedWindow(SchedulingError):
    pass


@dataclass(frozen=True)
class TimeWindow:
    earliest: int
    latest: int

    def __post_init__(self):
        if self.earliest > self.latest:
            raise MalformedWindow(f"empty window [{self.earliest}, {self.latest}]")

    def contains(self, t: int) -> bool:
        return self.earliest <= t <= self.latest

    @property
    def length(self) -> int:
        return self.latest - self.earliest


@dataclass(frozen=True)
class Location:
    id: int
    x: float = 0.0
    y: float = 0.0


class TravelMatrix:
    """Dense travel-time lookup in seconds, indexed by node id."""

    def __init__(self, times: Sequence[Sequence[int]] | np.ndarray):
        self.times = np.asarray(times, dtype=np.int64)
        if self.times.ndim != 2 or self.times.shape[0] != self.times.shape[1]:
            raise ValueError("travel matrix must be square")

    def __len__(self) -> int:
        return self.times.shape[0]

    def t(self, a: int, b: int) -> int:
        return int(self.times[a, b])


@dataclass(frozen=True)
class RequestPair:
    """One patient's linked outbound/inbound trip.

    `appointment` is the GP arrival time: fixed for walk-ins, and for chronic
    patients the originally booked slot that only the standard-setting baseline
    uses (flexible schedulers discard it). `release` is 0 for chronic pairs.
    """

    id: int
    patient_class: str
    home: int
    gp: int
    appointment: int
    release: int = 0

    def __post_init__(self):
        if self.patient_class not in (CHRONIC, WALKIN):
            raise ValueError(f"unknown patient class {self.patient_class!r}")

    @property
    def is_chronic(self) -> bool:
        return self.patient_class == CHRONIC

    def outbound_delivery_window(self, service: "ServiceParams") -> Optional[TimeWindow]:
        """Fixed GP-arrival window for walk-ins; None (flexible) for chronic."""
        if self.is_chronic:
            return None
        return TimeWindow(self.appointment - service.max_window, self.appointment)

    def inbound_pickup_window(self, service: "ServiceParams") -> Optional[TimeWindow]:
        """Fixed GP-departure window for walk-ins; derived at schedule time for chronic."""
        if self.is_chronic:
            return None
        start = self.appointment + service.gp_stay
        return TimeWindow(start, start + service.max_window)


@dataclass(frozen=True)
class FleetParams:
    vehicle_count: int
    seat_capacity: int
    depot: int
    sessions: tuple[TimeWindow, ...]
    max_route_drive: Optional[int] = None  # None: span of the service day

    @property
    def day_start(self) -> int:
        return self.sessions[0].earliest

    @property
    def day_end(self) -> int:
        return self.sessions[-1].latest

    @property
    def route_drive_limit(self) -> int:
        if self.max_route_drive is not None:
            return self.max_route_drive
        return self.day_end - self.day_start


@dataclass(frozen=True)
class ServiceParams:
    gp_stay: int = 1800
    max_window: int = 1200
    proximity_factor: float = 1.5
    ride_factor: float = 1.5
    congestion_limit: int = 6
    congestion_window: int = 1800


@dataclass
class Stop:
    node: int
    action: str
    pair_id: Optional[int] = None
    leg: Optional[str] = None
    time: int = 0
    load_after: int = 0

    def key(self) -> tuple:
        return (self.node, self.action, self.pair_id, self.leg, self.time, self.load_after)


@dataclass
class Schedule:
    vehicle: int
    stops: list[Stop] = field(default_factory=list)
    fixed_prefix_len: int = 0

    def drive_time(self, matrix: TravelMatrix) -> int:
        return sum(
            matrix.t(a.node, b.node) for a, b in zip(self.stops, self.stops[1:])
        )


@dataclass(frozen=True)
class Instance:
    name: str
    locations: tuple[Location, ...]
    matrix: TravelMatrix
    pairs: tuple[RequestPair, ...]
    fleet: FleetParams
    service: ServiceParams

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {p.id: p for p in self.pairs})

    def pair(self, pair_id: int) -> RequestPair:
        return self._by_id[pair_id]

    def leg_nodes(self, pair: RequestPair, leg: str) -> tuple[int, int]:
        """(pickup node, delivery node) of a leg; inbound runs GP -> home."""
        return (pair.home, pair.gp) if leg == OUT else (pair.gp, pair.home)

    def direct_time(self, pair: RequestPair, leg: str) -> int:
        a, b = self.leg_nodes(pair, leg)
        return self.matrix.t(a, b)

    def ride_limit(self, pair: RequestPair, leg: str) -> int:
        direct = self.direct_time(pair, leg)
        return max(direct, int(self.service.ride_factor * direct))

    def ride_limit_by_id(self, pair_id: int, leg: str) -> int:
        return self.ride_limit(self.pair(pair_id), leg)

    @property
    def chronic_fraction(self) -> float:
        if not self.pairs:
            return 0.0
        return sum(p.is_chronic for p in self.pairs) / len(self.pairs)

    def with_params(self, fleet: FleetParams = None, service: ServiceParams = None) -> "Instance":
        return replace(self, fleet=fleet or self.fleet, service=service or self.service)


class Report:
    """Accumulates human-readable constraint violations; empty means valid."""

    def __init__(self):
        self.violations: list[str] = []

    def add(self, message: str) -> None:
        self.violations.append(message)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)

    def __repr__(self):
        if self.ok:
            return "Report(ok)"
        return "Report(\n  " + "\n  ".join(self.violations) + "\n)"


ValidationReport = Report
FeasibilityReport = Report


def implicit_pickup_window(delivery_window: TimeWindow, direct_time: int, ride_limit: int) -> TimeWindow:
    """Pickup window implied by a delivery window and the ride-time limit.

    The earliest useful pickup is ride_limit before the earliest delivery, the
    latest is direct_time before the latest delivery; anything outside cannot
    produce a feasible ride.
    """
    if ride_limit < direct_time:
        raise MalformedWindow(
            f"ride limit {ride_limit} below direct travel time {direct_time}"
        )
    return TimeWindow(delivery_window.earliest - ride_limit,
                      delivery_window.latest - direct_time)


def validate_instance(inst: Instance) -> ValidationReport:
    """Structural checks on an instance: ids, matrix metric, window lengths."""
    report = ValidationReport()
    n = len(inst.matrix)
    ids = [loc.id for loc in inst.locations]
    if sorted(ids) != list(range(n)):
        report.add(f"location ids must be 0..{n - 1} and unique")
        return report

    times = inst.matrix.times
    if (np.diag(times) != 0).any():
        bad = int(np.flatnonzero(np.diag(times))[0])
        report.add(f"t[{bad}][{bad}] != 0")
    if (times < 0).any():
        report.add("negative travel time")
    # Triangle inequality, middle node swept one at a time to bound memory.
    for mid in range(n):
        via = times[:, mid : mid + 1] + times[mid : mid + 1, :]
        mask = times > via
        if mask.any():
            a, b = np.argwhere(mask)[0]
            report.add(f"triangle inequality at ({int(a)},{mid},{int(b)})")
            break

    w = inst.service.max_window
    for pair in inst.pairs:
        if not (0 <= pair.home < n and 0 <= pair.gp < n):
            report.add(f"pair {pair.id}: dangling node reference")
            continue
        for tw in (pair.outbound_delivery_window(inst.service),
                   pair.inbound_pickup_window(inst.service)):
            if tw is not None and tw.length > w:
                report.add(f"pair {pair.id}: window exceeds max length {w}")
        if pair.is_chronic and pair.release != 0:
            report.add(f"pair {pair.id}: chronic pair with nonzero release")
        if pair.release < 0:
            report.add(f"pair {pair.id}: negative release time")

    seen = set()
    for pair in inst.pairs:
        if pair.id in seen:
            report.add(f"duplicate pair id {pair.id}")
        seen.add(pair.id)

    f = inst.fleet
    if f.vehicle_count < 1:
        report.add("fleet must have at least one vehicle")
    if f.seat_capacity < 1:
        report.add("seat capacity must be at least 1")
    if not (0 <= f.depot < n):
        report.add("dangling depot node")
    for a, b in zip(f.sessions, f.sessions[1:]):
        if a.latest >= b.earliest:
            report.add("sessions overlap or are unordered")
    return report


def in_any_session(sessions: Iterable[TimeWindow], t: int) -> bool:
    return any(s.contains(t) for s in sessions)


def congestion_violation(times: Sequence[int], limit: int, window: int) -> Optional[tuple[int, int]]:
    """First (start, count) sliding-window overload among arrival times, if any.

    An overload is limit+1 or more arrivals within any closed interval of the
    given window length.
    """
    ts = sorted(times)
    for i in range(len(ts) - limit):
        if ts[i + limit] - ts[i] <= window:
            return ts[i], limit + 1
    return None


def _leg_stops(schedules: Sequence[Schedule]):
    """Index stop occurrences: (pair, leg, action) -> (vehicle, position, stop)."""
    where: dict[tuple, list[tuple[int, int, Stop]]] = {}
    for sched in schedules:
        for pos, stop in enumerate(sched.stops):
            if stop.pair_id is None:
                continue
            where.setdefault((stop.pair_id, stop.leg, stop.action), []).append(
                (sched.vehicle, pos, stop)
            )
    return where


def verify_schedules(inst: Instance, schedules: Sequence[Schedule]) -> FeasibilityReport:
    """Ground-truth feasibility check, independent of any solver state.

    Verifies depot framing, precedence, capacity, travel-time consistency,
    per-leg ride limits, route drive budget, chronic coupling windows, walk-in
    fixed windows, release times, pair completeness, session membership of
    appointments, and GP congestion.
    """
    report = FeasibilityReport()
    matrix = inst.matrix
    fleet = inst.fleet
    service = inst.service

    for sched in schedules:
        v = sched.vehicle
        stops = sched.stops
        if not stops:
            continue
        if stops[0].action != DEPOT or stops[-1].action != DEPOT:
            report.add(f"vehicle {v}: schedule must start and end at the depot")
        elif stops[0].node != fleet.depot or stops[-1].node != fleet.depot:
            report.add(f"vehicle {v}: depot stop at wrong node")

        load = 0
        for pos, stop in enumerate(stops):
            if stop.action == PICKUP:
                load += 1
            elif stop.action == DELIVERY:
                load -= 1
            if load < 0 or load > fleet.seat_capacity:
                report.add(f"vehicle {v}: capacity violated at stop {pos}")
            if stop.load_after != load:
                report.add(f"vehicle {v}: load_after inconsistent at stop {pos}")
            if pos > 0:
                prev = stops[pos - 1]
                if stop.time < prev.time + matrix.t(prev.node, stop.node):
                    report.add(f"vehicle {v}: time consistency violated at stop {pos}")
        if load != 0:
            report.add(f"vehicle {v}: passengers left on board")

        drive = sched.drive_time(matrix)
        if drive > fleet.route_drive_limit:
            report.add(
                f"vehicle {v}: route drive time {drive} exceeds {fleet.route_drive_limit}"
            )

    where = _leg_stops(schedules)
    pair_ids = sorted({key[0] for key in where})
    for pid in pair_ids:
        if pid not in inst._by_id:
            report.add(f"unknown pair id {pid} in schedules")
            continue
        pair = inst.pair(pid)
        legs = {}
        complete = True
        for leg in (OUT, IN):
            entries = {}
            for action in (PICKUP, DELIVERY):
                hits = where.get((pid, leg, action), [])
                if len(hits) > 1:
                    report.add(f"pair {pid}: {leg} {action} served more than once")
                    complete = False
                elif not hits:
                    complete = False
                else:
                    entries[action] = hits[0]
            legs[leg] = entries
        present = any(legs[leg] for leg in (OUT, IN))
        if not complete:
            if present:
                report.add(f"pair {pid}: partially served (pairs are all-or-nothing)")
            continue

        for leg in (OUT, IN):
            pv, ppos, pstop = legs[leg][PICKUP]
            dv, dpos, dstop = legs[leg][DELIVERY]
            a, b = inst.leg_nodes(pair, leg)
            if pstop.node != a or dstop.node != b:
                report.add(f"pair {pid}: {leg} leg visits wrong nodes")
            if pv != dv:
                report.add(f"pair {pid}: {leg} pickup and delivery on different vehicles")
            elif dpos <= ppos:
                report.add(f"pair {pid}: precedence violated at stop {dpos}")
            ride = dstop.time - pstop.time
            if ride > inst.ride_limit(pair, leg):
                report.add(f"pair {pid}: {leg} ride time {ride} exceeds limit")

        arrival = legs[OUT][DELIVERY][2].time
        departure = legs[IN][PICKUP][2].time
        if not in_any_session(fleet.sessions, arrival):
            report.add(f"pair {pid}: appointment at {arrival} outside opening hours")
        if pair.is_chronic:
            lo = arrival + service.gp_stay
            if not (lo <= departure <= lo + service.max_window):
                report.add(f"pair {pid}: coupling window violated")
        else:
            dtw = pair.outbound_delivery_window(service)
            ptw = pair.inbound_pickup_window(service)
            if not dtw.contains(arrival):
                report.add(f"pair {pid}: outbound delivery outside fixed window")
            if not ptw.contains(departure):
                report.add(f"pair {pid}: inbound pickup outside fixed window")
            for leg in (OUT, IN):
                for action in (PICKUP, DELIVERY):
                    if legs[leg][action][2].time < pair.release:
                        report.add(f"pair {pid}: stop before release time")

    arrivals_by_gp: dict[int, list[int]] = {}
    for (pid, leg, action), hits in where.items():
        if leg == OUT and action == DELIVERY and len(hits) == 1:
            if (pid, IN, PICKUP) in where:  # only fully served pairs count
                arrivals_by_gp.setdefault(hits[0][2].node, []).append(hits[0][2].time)
    for gp, times in sorted(arrivals_by_gp.items()):
        hit = congestion_violation(times, service.congestion_limit, service.congestion_window)
        if hit is not None:
            report.add(
                f"gp {gp}: {hit[1]} arrivals within {service.congestion_window}s from {hit[0]}"
            )
    return report


def served_count(inst: Instance, schedules: Sequence[Schedule]) -> tuple[int, int, int]:
    """(served pairs, served rides, total drive seconds) over verified schedules."""
    where = _leg_stops(schedules)
    pairs = 0
    for pid in {key[0] for key in where}:
        needed = [(pid, leg, action) for leg in (OUT, IN) for action in (PICKUP, DELIVERY)]
        if all(len(where.get(k, [])) == 1 for k in needed):
            pairs += 1
    drive = sum(s.drive_time(inst.matrix) for s in schedules)
    return pairs, 2 * pairs, drive
