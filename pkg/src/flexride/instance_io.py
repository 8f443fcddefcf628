"""Self-describing text formats for instances and schedule output.

The instance format is line-oriented and canonical: saving a loaded instance
reproduces the file byte for byte. Coordinates use Python's shortest
round-trip float repr; everything else is integers.

    flexride-instance v1
    [name] <token>
    [fleet] m=<int> q_cap=<int> depot=<node> l_route=<int|day>
    [service] d_gp=<s> w=<s> rho=<float> ride_factor=<float> congestion_c=<int> congestion_w=<s>
    [sessions] count=<k>
    <open> <close>          (k lines)
    [locations] count=<n>
    <id> <x> <y>            (n lines)
    [matrix] size=<n>
    <n ints per line>       (n lines, seconds)
    [requests] count=<r>
    <id> <chronic|walkin> <home> <gp> <appointment> <release>

Schedule output is a CSV with one record per stop:
    vehicle,seq,node,action,request,leg,time,load
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import (
    CHRONIC,
    WALKIN,
    FleetParams,
    Instance,
    Location,
    RequestPair,
    Schedule,
    ServiceParams,
    Stop,
    TimeWindow,
    TravelMatrix,
)

MAGIC = "flexride-instance v1"

SCHEDULE_HEADER = "vehicle,seq,node,action,request,leg,time,load"


class ParseError(Exception):
    def __init__(self, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    return loads_instance(Path(path).read_text(encoding="utf-8"))


def dumps_instance(inst: Instance) -> str:
    out = io.StringIO()
    w = out.write
    f, s = inst.fleet, inst.service
    w(MAGIC + "\n")
    w(f"[name] {inst.name}\n")
    l_route = "day" if f.max_route_drive is None else str(f.max_route_drive)
    w(f"[fleet] m={f.vehicle_count} q_cap={f.seat_capacity} depot={f.depot} "
      f"l_route={l_route}\n")
    w(f"[service] d_gp={s.gp_stay} w={s.max_window} rho={s.proximity_factor!r} "
      f"ride_factor={s.ride_factor!r} congestion_c={s.congestion_limit} "
      f"congestion_w={s.congestion_window}\n")
    w(f"[sessions] count={len(f.sessions)}\n")
    for tw in f.sessions:
        w(f"{tw.earliest} {tw.latest}\n")
    w(f"[locations] count={len(inst.locations)}\n")
    for loc in inst.locations:
        w(f"{loc.id} {loc.x!r} {loc.y!r}\n")
    w(f"[matrix] size={len(inst.matrix)}\n")
    for row in inst.matrix.times:
        w(" ".join(str(int(x)) for x in row) + "\n")
    w(f"[requests] count={len(inst.pairs)}\n")
    for p in inst.pairs:
        w(f"{p.id} {p.patient_class} {p.home} {p.gp} {p.appointment} {p.release}\n")
    return out.getvalue()


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ParseError(f"unexpected end of file, expected {what}", self.pos)
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def section(self, name: str) -> dict[str, str]:
        line = self.next(f"[{name}] section")
        tag = f"[{name}]"
        if not line.startswith(tag):
            raise ParseError(f"expected {tag} section, got {line!r}", self.pos)
        fields = {}
        for token in line[len(tag):].split():
            if "=" in token:
                key, _, value = token.partition("=")
                fields[key] = value
            else:
                fields[""] = token
        return fields


def loads_instance(text: str) -> Instance:
    src = _Lines(text)
    if src.next("header") != MAGIC:
        raise ParseError(f"missing header {MAGIC!r}", 1)
    name = src.section("name").get("", "unnamed")

    try:
        fleet_raw = src.section("fleet")
        service_raw = src.section("service")
        m = int(fleet_raw["m"])
        q_cap = int(fleet_raw["q_cap"])
        depot = int(fleet_raw["depot"])
        l_route = None if fleet_raw["l_route"] == "day" else int(fleet_raw["l_route"])
        service = ServiceParams(
            gp_stay=int(service_raw["d_gp"]),
            max_window=int(service_raw["w"]),
            proximity_factor=float(service_raw["rho"]),
            ride_factor=float(service_raw["ride_factor"]),
            congestion_limit=int(service_raw["congestion_c"]),
            congestion_window=int(service_raw["congestion_w"]),
        )
    except KeyError as exc:
        raise ParseError(f"missing field {exc} in fleet/service section") from exc

    n_sessions = int(src.section("sessions")["count"])
    sessions = []
    for _ in range(n_sessions):
        parts = src.next("session line").split()
        if len(parts) != 2:
            raise ParseError("session line must be '<open> <close>'", src.pos)
        sessions.append(TimeWindow(int(parts[0]), int(parts[1])))

    n_loc = int(src.section("locations")["count"])
    locations = []
    for _ in range(n_loc):
        parts = src.next("location line").split()
        if len(parts) != 3:
            raise ParseError("location line must be '<id> <x> <y>'", src.pos)
        locations.append(Location(int(parts[0]), float(parts[1]), float(parts[2])))

    size = int(src.section("matrix")["size"])
    if size != n_loc:
        raise ParseError(f"matrix dimension {size} != location count {n_loc}")
    rows = []
    for _ in range(size):
        row = [int(x) for x in src.next("matrix row").split()]
        if len(row) != size:
            raise ParseError(f"matrix row has {len(row)} entries, expected {size}",
                             src.pos)
        rows.append(row)

    n_req = int(src.section("requests")["count"])
    pairs = []
    for _ in range(n_req):
        parts = src.next("request line").split()
        if len(parts) != 6:
            raise ParseError("request line must have 6 fields", src.pos)
        cls = parts[1]
        if cls not in (CHRONIC, WALKIN):
            raise ParseError(f"unknown patient class {cls!r}", src.pos)
        pairs.append(RequestPair(int(parts[0]), cls, int(parts[2]), int(parts[3]),
                                 int(parts[4]), int(parts[5])))

    fleet = FleetParams(m, q_cap, depot, tuple(sessions), l_route)
    return Instance(name, tuple(locations), TravelMatrix(np.array(rows, dtype=np.int64)),
                    tuple(pairs), fleet, service)


def dumps_schedules(schedules: Sequence[Schedule]) -> str:
    lines = [SCHEDULE_HEADER]
    for sched in sorted(schedules, key=lambda s: s.vehicle):
        for seq, stop in enumerate(sched.stops):
            req = "" if stop.pair_id is None else str(stop.pair_id)
            leg = "" if stop.leg is None else stop.leg
            lines.append(f"{sched.vehicle},{seq},{stop.node},{stop.action},"
                         f"{req},{leg},{stop.time},{stop.load_after}")
    return "\n".join(lines) + "\n"


def save_schedules(schedules: Sequence[Schedule], path: str | Path) -> None:
    Path(path).write_text(dumps_schedules(schedules), encoding="utf-8")


def load_schedules(path: str | Path) -> list[Schedule]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != SCHEDULE_HEADER:
        raise ParseError("missing schedule header", 1)
    by_vehicle: dict[int, list[Stop]] = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise ParseError("schedule line must have 8 fields", ln)
        vehicle = int(parts[0])
        stop = Stop(
            node=int(parts[2]),
            action=parts[3],
            pair_id=None if parts[4] == "" else int(parts[4]),
            leg=None if parts[5] == "" else parts[5],
            time=int(parts[6]),
            load_after=int(parts[7]),
        )
        by_vehicle.setdefault(vehicle, []).append(stop)
    return [Schedule(v, stops, fixed_prefix_len=len(stops))
            for v, stops in sorted(by_vehicle.items())]
