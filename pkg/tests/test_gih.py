import numpy as np
import pytest

from flexride.gih import (
    ANCHORED,
    FIXED,
    FLEX,
    Accepted,
    InsertionEngine,
    Rejected,
    RideSpec,
    enumerate_insertions,
    insert_best,
    time_slack,
    vehicle_position_at,
)
from flexride.instance_io import dumps_schedules
from flexride.model import (
    CHRONIC,
    DELIVERY,
    IN,
    INF,
    OUT,
    PICKUP,
    RequestPair,
    ServiceParams,
    TimeWindow,
    congestion_violation,
    in_any_session,
    verify_schedules,
)

from conftest import MORNING, line_matrix, make_instance


def oracle_scan(engine, vid, spec, p_lo):
    """Naive re-implementation of the insertion scan for one vehicle.

    Same push-only as-early-as-possible timing rule, but every constraint is
    checked directly on the rebuilt stop list, with no incremental shortcuts.
    """
    inst = engine.inst
    state = engine.states[vid]
    mat = inst.matrix.times
    sessions = inst.fleet.sessions
    K = len(state)
    found = []
    for p in range(p_lo, K):
        for q in range(p, K):
            rows = []
            for k in range(K):
                rows.append({
                    "node": state.nodes[k], "e": state.e[k], "l": state.l[k],
                    "B": state.B[k], "snap": state.snap[k],
                    "pair": state.pair[k], "leg": state.leg[k],
                    "action": state.action[k], "new": False,
                })
            pick = {"node": spec.pickup_node, "e": spec.pickup_window.earliest,
                    "l": spec.pickup_window.latest, "B": None, "snap": 0,
                    "pair": spec.pair_id, "leg": spec.leg, "action": PICKUP,
                    "new": True}
            drop = {"node": spec.delivery_node, "e": spec.delivery_window.earliest,
                    "l": spec.delivery_window.latest, "B": None,
                    "snap": 1 if spec.delivery_snaps else 0,
                    "pair": spec.pair_id, "leg": spec.leg, "action": DELIVERY,
                    "new": True}
            rows.insert(q, drop)
            rows.insert(p, pick)

            ok = True
            prev = None
            for row in rows:
                if prev is None:
                    t = row["B"]
                else:
                    arrive = prev["B"] + int(mat[prev["node"], row["node"]])
                    if row["new"]:
                        t = max(row["e"], arrive)
                    else:
                        t = max(row["B"], arrive)
                if row["snap"] and not in_any_session(sessions, t):
                    nxt = [s.earliest for s in sessions if s.earliest > t]
                    t = nxt[0] if nxt else INF
                if t > row["l"] or t >= INF:
                    ok = False
                    break
                row["B"] = t
                prev = row
            if not ok:
                continue

            load = 0
            picked_at = {}
            for row in rows:
                if row["action"] == PICKUP:
                    load += 1
                    picked_at[(row["pair"], row["leg"])] = row["B"]
                elif row["action"] == DELIVERY:
                    load -= 1
                    limit = (spec.ride_limit if row["new"]
                             else inst.ride_limit_by_id(row["pair"], row["leg"]))
                    start = picked_at.get((row["pair"], row["leg"]))
                    if start is None or row["B"] - start > limit:
                        ok = False
                        break
                if load > inst.fleet.seat_capacity:
                    ok = False
                    break
            if not ok:
                continue

            drive = sum(int(mat[a["node"], b["node"]])
                        for a, b in zip(rows, rows[1:]))
            if drive > inst.fleet.route_drive_limit:
                continue
            delta = drive - state.drive
            bp = rows[p]["B"]
            bd = rows[q + 1]["B"]
            found.append((p, q, delta, bp, bd))
    return found


def small_engine(seed, n_existing=4, vehicles=2, seat_capacity=2):
    """Engine with a few random walk-in rides already inserted."""
    rng = np.random.default_rng(seed)
    n = n_existing + 1
    xs = rng.integers(0, 15, size=1 + 2 * n)
    pairs = []
    for i in range(n):
        appt = 28800 + 60 * int(rng.integers(10, 180))
        pairs.append(RequestPair(i, "walkin", home=1 + 2 * i, gp=2 + 2 * i,
                                 appointment=appt, release=0))
    inst = make_instance(xs, pairs, vehicles=vehicles, seat_capacity=seat_capacity)
    engine = InsertionEngine(inst)
    for pair in pairs[:-1]:
        engine.insert_pair(pair, FIXED)
    return inst, engine, pairs[-1]


class TestScanAgainstOracle:
    def test_randomized_schedules(self):
        rng = np.random.default_rng(2024)
        checked = 0
        for seed in range(40):
            inst, engine, pair = small_engine(seed)
            for spec in (engine.outbound_spec(pair, FIXED),
                         engine.inbound_spec(pair, pair.appointment, FIXED)):
                for vid in range(len(engine.states)):
                    got = engine._scan(vid, spec, 1, None)
                    want = oracle_scan(engine, vid, spec, 1)
                    assert sorted(got) == sorted(want), (seed, vid, spec.leg)
                    checked += len(want)
        assert checked > 50  # the comparison must actually bite

    def test_chronic_flexible_scan(self):
        rng = np.random.default_rng(7)
        for seed in range(10):
            inst, engine, _ = small_engine(seed)
            pair = RequestPair(99, CHRONIC, home=1, gp=2, appointment=30000)
            object.__setattr__(inst, "_by_id", {**inst._by_id, 99: pair})
            spec = engine.outbound_spec(pair, FLEX)
            for vid in range(len(engine.states)):
                got = engine._scan(vid, spec, 1, None)
                want = oracle_scan(engine, vid, spec, 1)
                assert sorted(got) == sorted(want)


class TestTimeSlack:
    def build(self, windows, times, xs=None):
        # one vehicle; one stop per window at a distinct node
        n = len(windows)
        xs = xs or [0] * (n + 1)
        pairs = [RequestPair(i, "walkin", home=1, gp=1, appointment=30000)
                 for i in range(1)]
        inst = make_instance(xs, pairs, vehicles=1)
        engine = InsertionEngine(inst)
        state = engine.states[0]
        for i, ((e, l), t) in enumerate(zip(windows, times)):
            engine._insert_row(state, len(state) - 1,
                               (xs[i + 1] if i + 1 < len(xs) else 0, e, l, t, 0,
                                None, None, PICKUP))
        state.rebuild(inst.matrix.times)
        return engine

    def test_single_stop_scheduled_at_earliest(self):
        engine = self.build([(29000, 29500)], [29000])
        assert engine.slack(0, 1) == 500

    def test_downstream_at_latest_blocks(self):
        # no waiting in between and the next stop is at its latest time
        engine = self.build([(29000, 30000), (29000, 29200)], [29200, 29200])
        assert engine.slack(0, 1) == 0

    def test_downstream_bound_propagates(self):
        engine = self.build([(29000, 30000), (29100, 29105)], [29100, 29100])
        # local window allows 900, downstream only 5, no waiting in between
        assert engine.slack(0, 1) == 5

    def test_waiting_absorbs_delay(self):
        engine = self.build([(29000, 29012), (29500, 29505)], [29000, 29500])
        # 500s of waiting downstream: local bound 12 is the binding one
        assert engine.slack(0, 1) == 12

    def test_functional_wrapper(self, toy4):
        from test_model import build_feasible_toy4_schedules
        scheds = build_feasible_toy4_schedules(toy4)
        # vehicle 0 inbound pickup at 31800, window [31800, 33000]; delaying it
        # keeps everything else feasible up to the coupling end
        assert time_slack(toy4, scheds[0], 3) == 1200


class TestInsertBest:
    def test_argmin_applied(self):
        inst, engine, pair = small_engine(11)
        spec = engine.outbound_spec(pair, FIXED)
        cands = engine.feasible_candidates(spec)
        if not cands:
            pytest.skip("no candidates for this seed")
        best = min(cands, key=lambda c: c.sort_key)
        result = engine.insert_ride(spec)
        assert isinstance(result, Accepted)
        assert result.outbound == best

    def test_tie_break_prefers_lower_vehicle(self):
        # symmetric empty vehicles: both deltas equal, vehicle 0 must win
        pair = RequestPair(0, "walkin", home=1, gp=2, appointment=30000, release=0)
        inst = make_instance([0, 3, 6], [pair], vehicles=3)
        engine = InsertionEngine(inst)
        result = engine.insert_ride(engine.outbound_spec(pair, FIXED))
        assert isinstance(result, Accepted)
        assert result.outbound.vehicle == 0

    def test_rejection_leaves_schedules_identical(self):
        pair = RequestPair(0, "walkin", home=1, gp=2, appointment=30000, release=0)
        # ride limit cannot be met: direct time 3*3600s swamps the morning
        inst = make_instance([0, 100, 300], [pair], vehicles=1, seat_capacity=1)
        engine = InsertionEngine(inst)
        before = dumps_schedules(engine.to_schedules())
        result = engine.insert_pair(pair, FIXED)
        assert isinstance(result, Rejected)
        assert dumps_schedules(engine.to_schedules()) == before

    def test_empty_schedules_accept_every_idle_vehicle(self):
        pair = RequestPair(0, "walkin", home=1, gp=2, appointment=30000, release=0)
        inst = make_instance([0, 1, 3], [pair], vehicles=3)
        engine = InsertionEngine(inst)
        cands = engine.feasible_candidates(engine.outbound_spec(pair, FIXED))
        assert {c.vehicle for c in cands} == {0, 1, 2}

    def test_full_vehicle_blocks(self):
        # capacity 1 and an incompatible passenger across the whole window
        p0 = RequestPair(0, "walkin", home=1, gp=2, appointment=30000, release=0)
        p1 = RequestPair(1, "walkin", home=1, gp=2, appointment=30000, release=0)
        inst = make_instance([0, 1, 9], [p0, p1], vehicles=1, seat_capacity=1)
        engine = InsertionEngine(inst)
        assert isinstance(engine.insert_pair(p0, FIXED), Accepted)
        ride = engine.outbound_spec(p1, FIXED)
        # pairwise insertion of the second pair may still fit around the first,
        # but with capacity 1 the overlapping outbound window forces sequencing;
        # check the enumeration agrees with the oracle either way
        got = engine._scan(0, ride, 1, None)
        want = oracle_scan(engine, 0, ride, 1)
        assert sorted(got) == sorted(want)

    def test_pair_all_or_nothing_even_rides(self):
        rng = np.random.default_rng(5)
        inst, engine, pair = small_engine(5)
        total = sum(1 for st in engine.states for k in range(len(st))
                    if st.action[k] in (PICKUP, DELIVERY))
        assert total % 4 == 0  # two stops per leg, two legs per pair


class TestFrozenPrefix:
    def test_stops_before_release_untouched(self):
        rng = np.random.default_rng(31)
        for seed in range(15):
            inst, engine, pair = small_engine(seed, n_existing=3, vehicles=2)
            release = 29400
            frozen_before = [
                [tuple(st.B[k] for k in range(len(st))),
                 tuple(st.nodes[k] for k in range(len(st)))]
                for st in engine.states
            ]
            # the trailing depot stop is the open future, never frozen
            frozen_keys = [
                [(st.nodes[k], st.B[k]) for k in range(len(st) - 1)
                 if st.B[k] < release]
                for st in engine.states
            ]
            pair = RequestPair(pair.id, pair.patient_class, pair.home, pair.gp,
                               appointment=31200, release=release)
            result = engine.insert_pair(pair, FIXED, frozen_until=release)
            after_keys = [
                [(st.nodes[k], st.B[k]) for k in range(len(st) - 1)
                 if st.B[k] < release]
                for st in engine.states
            ]
            # every stop that was planned before the release time is unchanged
            for before, after in zip(frozen_keys, after_keys):
                assert after[: len(before)] == before

    def test_mid_leg_commitment(self):
        # vehicle drives 1->2 between 29100 and 29700; mid-leg the leg end is
        # committed, so the first mutable position is after it
        pair = RequestPair(0, "walkin", home=1, gp=2, appointment=30000, release=0)
        inst = make_instance([0, 5, 15], [pair], vehicles=1)
        engine = InsertionEngine(inst)
        assert isinstance(engine.insert_pair(pair, FIXED), Accepted)
        state = engine.states[0]
        # stops: depot, pickup@29000..ish, delivery, depot
        pick_time = state.B[1]
        drop_time = state.B[2]
        mid = (pick_time + drop_time) // 2
        assert engine.first_mutable(0, mid) == 3

    def test_idle_vehicle_fully_replannable(self):
        pair = RequestPair(0, "walkin", home=1, gp=2, appointment=40000, release=0)
        inst = make_instance([0, 5, 15], [pair], vehicles=1)
        engine = InsertionEngine(inst)
        assert engine.first_mutable(0, 29000) == 1


class TestSpecLevelApi:
    def test_enumerate_matches_engine(self, toy4_walkins):
        engine = InsertionEngine(toy4_walkins)
        pair0 = toy4_walkins.pairs[0]
        assert isinstance(engine.insert_pair(pair0, FIXED), Accepted)
        schedules = engine.to_schedules()
        combos = enumerate_insertions(toy4_walkins, schedules, toy4_walkins.pairs[1])
        assert combos, "expected feasible pair insertions"
        assert combos[0].delta_cost <= combos[-1].delta_cost

    def test_insert_best_returns_new_schedules(self, toy4_walkins):
        engine = InsertionEngine(toy4_walkins)
        schedules = engine.to_schedules()
        result, updated = insert_best(toy4_walkins, schedules, toy4_walkins.pairs[0])
        assert isinstance(result, Accepted)
        assert verify_schedules(toy4_walkins, updated).ok
        # inputs untouched
        assert all(len(s.stops) == 2 for s in schedules)

    def test_vehicle_position_interpolation(self, toy4):
        from test_model import build_feasible_toy4_schedules
        sched = build_feasible_toy4_schedules(toy4)[1]
        # driving 2 -> 4 (x=1 to x=9) arriving 31200; departure 30720
        a, b, f = vehicle_position_at(toy4, sched, 30960)
        assert (a, b) == (2, 4)
        assert f == pytest.approx(0.5)
        a, b, f = vehicle_position_at(toy4, sched, 29000)
        assert a == b == 0  # still at the depot


class TestCongestionInScan:
    def test_candidates_respect_gp_limit(self):
        # congestion limit 1 per hour at one gp: second arrival must be pushed
        service = ServiceParams(congestion_limit=1, congestion_window=3600)
        pairs = [
            RequestPair(0, "walkin", home=1, gp=3, appointment=30000, release=0),
            RequestPair(1, "walkin", home=2, gp=3, appointment=30300, release=0),
        ]
        inst = make_instance([0, 1, 2, 5], pairs, vehicles=2, service=service)
        engine = InsertionEngine(inst)
        assert isinstance(engine.insert_pair(pairs[0], FIXED), Accepted)
        cands = engine.feasible_candidates(engine.outbound_spec(pairs[1], FIXED))
        arrivals = engine.gp_arrivals_at(3)
        for cand in cands:
            merged = sorted(arrivals + [cand.delivery_time])
            assert congestion_violation(merged, 1, 3600) is None
        # and the unchecked enumeration must contain violating positions,
        # otherwise this test proves nothing
        raw = engine.ride_candidates(engine.outbound_spec(pairs[1], FIXED))
        assert len(raw) > len(cands)
