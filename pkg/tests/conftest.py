import numpy as np
import pytest

from flexride.model import (
    CHRONIC,
    WALKIN,
    FleetParams,
    Instance,
    Location,
    RequestPair,
    ServiceParams,
    TimeWindow,
    TravelMatrix,
)

MORNING = TimeWindow(28800, 43200)  # 08:00-12:00


def line_matrix(xs, scale=60):
    """Metric travel times on a line: |dx| * scale seconds."""
    xs = np.asarray(xs, dtype=np.int64)
    return TravelMatrix(np.abs(xs[:, None] - xs[None, :]) * scale)


def make_instance(xs, pairs, *, vehicles=2, seat_capacity=4, sessions=(MORNING,),
                  service=None, name="toy"):
    locations = tuple(Location(i, float(x), 0.0) for i, x in enumerate(xs))
    fleet = FleetParams(vehicles, seat_capacity, depot=0, sessions=tuple(sessions))
    return Instance(name, locations, line_matrix(xs), tuple(pairs), fleet,
                    service or ServiceParams())


@pytest.fixture
def toy4():
    """Two chronic pairs on a line; depot at x=0.

    Nodes: 0 depot(x=0), 1 home A(x=0), 2 home B(x=1), 3 gp A(x=10), 4 gp B(x=9).
    Direct times: A 600s, B 480s. The cheapest shared outbound route is
    A, B, drop B, drop A... actually A(0) B(1) dropB(9) dropA(10), 600s total.
    """
    pairs = [
        RequestPair(0, CHRONIC, home=1, gp=3, appointment=30000),
        RequestPair(1, CHRONIC, home=2, gp=4, appointment=31200),
    ]
    return make_instance([0, 0, 1, 10, 9], pairs)


@pytest.fixture
def toy4_walkins():
    """The same geometry with both pairs as walk-ins (fixed appointments)."""
    pairs = [
        RequestPair(0, WALKIN, home=1, gp=3, appointment=30000, release=28800),
        RequestPair(1, WALKIN, home=2, gp=4, appointment=31200, release=28800),
    ]
    return make_instance([0, 0, 1, 10, 9], pairs)


def random_geometric_instance(rng, n_pairs, *, chronic=True, vehicles=3,
                              seat_capacity=4, extent=20, sessions=(MORNING,)):
    """Small random instance on a line grid; used by fuzz tests."""
    n_nodes = 1 + 2 * n_pairs
    xs = rng.integers(0, extent + 1, size=n_nodes)
    pairs = []
    for i in range(n_pairs):
        appt = 28800 + 60 * int(rng.integers(20, 60))
        cls = CHRONIC if chronic else WALKIN
        release = 0 if chronic else max(0, appt - 3600)
        pairs.append(RequestPair(i, cls, home=1 + 2 * i, gp=2 + 2 * i,
                                 appointment=appt, release=release))
    return make_instance(xs, pairs, vehicles=vehicles, seat_capacity=seat_capacity,
                         sessions=sessions)
