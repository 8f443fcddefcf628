"""Instance generation, baseline runner, and experiment orchestration.

Instances mimic a rural primary-care region: patient homes scatter along a
few main-road corridors between (sub-)urban hubs, GP practices cluster at the
hubs, and travel times are metric (Euclidean distance at constant speed,
rounded up to whole seconds, which preserves the triangle inequality).
"""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .gih import ANCHORED, InsertionEngine, Rejected
from .mclih import HeuristicResult, MclihConfig, _online_walkins, run_mclih
from .mcma import McmaConfig, run_mcma
from .model import (
    CHRONIC,
    WALKIN,
    FleetParams,
    Instance,
    Location,
    RequestPair,
    Schedule,
    ServiceParams,
    TimeWindow,
    TravelMatrix,
    verify_schedules,
    served_count,
)

ALGORITHMS = ("gih", "mclih", "mcma")

MORNING = TimeWindow(8 * 3600, 12 * 3600)
AFTERNOON = TimeWindow(13 * 3600, 17 * 3600)


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    n_pairs: tuple[int, int] = (1100, 1350)
    chronic_fraction: tuple[float, float] = (0.10, 0.21)
    gp_count: int = 20
    extent_km: float = 24.0
    speed_kmh: float = 40.0
    afternoon: bool = False
    release_lead_minutes: tuple[int, int] = (30, 120)
    vehicles: int = 10
    seat_capacity: int = 4

    def validate(self) -> None:
        if self.n_pairs[0] > self.n_pairs[1] or self.n_pairs[0] < 1:
            raise ConfigError(f"empty pair-count range {self.n_pairs}")
        lo, hi = self.chronic_fraction
        if not (0.0 <= lo <= hi <= 1.0):
            raise ConfigError(f"chronic fraction range {self.chronic_fraction}")
        if self.release_lead_minutes[0] > self.release_lead_minutes[1]:
            raise ConfigError("empty release lead range")
        if self.gp_count < 1 or self.extent_km <= 0 or self.speed_kmh <= 0:
            raise ConfigError("gp_count, extent and speed must be positive")


def default_config(seed: int, afternoon: Optional[bool] = None) -> GeneratorConfig:
    """Day templates: short days carry 1100-1350 pairs, full days 1600-2000."""
    if afternoon is None:
        afternoon = bool(np.random.default_rng(
            np.random.SeedSequence([seed, 0xDA])).integers(0, 2))
    n_range = (1600, 2000) if afternoon else (1100, 1350)
    return GeneratorConfig(seed=seed, n_pairs=n_range, afternoon=afternoon)


def generate_instance(cfg: GeneratorConfig) -> Instance:
    """Deterministic synthetic instance for one service day."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x9E4]))
    extent = cfg.extent_km

    hubs = rng.uniform(0.3 * extent, 0.7 * extent, size=(3, 2))
    corridors = [(hubs[0], hubs[1]), (hubs[1], hubs[2]), (hubs[0], hubs[2])]

    gp_pos = np.empty((cfg.gp_count, 2))
    for g in range(cfg.gp_count):
        hub = hubs[g % len(hubs)]
        gp_pos[g] = hub + rng.normal(0.0, 0.6, size=2)

    n = int(rng.integers(cfg.n_pairs[0], cfg.n_pairs[1] + 1))
    frac = rng.uniform(cfg.chronic_fraction[0], cfg.chronic_fraction[1])
    n_chronic = int(round(n * frac))
    chronic_ids = set(int(i) for i in rng.permutation(n)[:n_chronic])

    home_pos = np.empty((n, 2))
    which = rng.integers(0, len(corridors), size=n)
    along = rng.uniform(0.0, 1.0, size=n)
    jitter = rng.normal(0.0, 1.0, size=(n, 2))
    for i in range(n):
        a, b = corridors[which[i]]
        home_pos[i] = a + along[i] * (b - a) + jitter[i]

    depot_pos = hubs.mean(axis=0)
    coords = np.vstack([depot_pos[None, :], gp_pos, home_pos])
    coords = np.clip(coords, -0.25 * extent, 1.25 * extent)

    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    times = np.ceil(dist / cfg.speed_kmh * 3600.0).astype(np.int64)
    np.fill_diagonal(times, 0)

    sessions = (MORNING, AFTERNOON) if cfg.afternoon else (MORNING,)
    weights = np.array([s.length for s in sessions], dtype=np.float64)
    weights /= weights.sum()

    # Patients visit a GP near their home.
    home_to_gp = np.hypot(
        home_pos[:, None, 0] - gp_pos[None, :, 0],
        home_pos[:, None, 1] - gp_pos[None, :, 1],
    )
    gp_weights = np.exp(-home_to_gp / 4.0)
    gp_weights /= gp_weights.sum(axis=1, keepdims=True)

    lead_lo, lead_hi = cfg.release_lead_minutes
    pairs = []
    for i in range(n):
        gp = int(rng.choice(cfg.gp_count, p=gp_weights[i]))
        sess = sessions[int(rng.choice(len(sessions), p=weights))]
        minutes = (sess.latest - sess.earliest) // 60
        appt = sess.earliest + 60 * int(rng.integers(0, minutes + 1))
        if i in chronic_ids:
            pairs.append(RequestPair(i, CHRONIC, home=1 + cfg.gp_count + i,
                                     gp=1 + gp, appointment=appt, release=0))
        else:
            lead = 60 * int(rng.integers(lead_lo, lead_hi + 1))
            pairs.append(RequestPair(i, WALKIN, home=1 + cfg.gp_count + i,
                                     gp=1 + gp, appointment=appt,
                                     release=max(0, appt - lead)))

    locations = tuple(
        Location(j, float(coords[j, 0]), float(coords[j, 1]))
        for j in range(len(coords))
    )
    fleet = FleetParams(cfg.vehicles, cfg.seat_capacity, depot=0, sessions=sessions)
    tag = "a" if cfg.afternoon else "m"
    return Instance(f"inst-{cfg.seed:05d}{tag}", locations, TravelMatrix(times),
                    tuple(pairs), fleet, ServiceParams())


# -- algorithm runners ---------------------------------------------------------


def run_baseline_gih(inst: Instance, seed: int, retry_budget: int = 3) -> HeuristicResult:
    """Standard setting: booked appointments are kept, windows framed around
    them, chronic pairs inserted offline in release order, walk-ins online."""
    del seed  # the baseline is deterministic; kept for a uniform signature
    engine = InsertionEngine(inst)
    rejected: list[tuple[int, str]] = []
    chronic = sorted((p for p in inst.pairs if p.is_chronic),
                     key=lambda p: (p.release, p.appointment, p.id))
    for pair in chronic:
        result = engine.insert_pair(pair, ANCHORED, retry_budget=retry_budget)
        if isinstance(result, Rejected):
            rejected.append((pair.id, "no slot around booked appointment"))
    _online_walkins(inst, engine, rejected, retry_budget)
    return HeuristicResult(engine.to_schedules(), rejected)


def run_algorithm(inst: Instance, algo: str, seed: int,
                  mclih_config: MclihConfig | None = None,
                  mcma_config: McmaConfig | None = None) -> HeuristicResult:
    if algo == "gih":
        return run_baseline_gih(inst, seed)
    if algo == "mclih":
        return run_mclih(inst, seed, mclih_config)
    if algo == "mcma":
        return run_mcma(inst, seed, mcma_config)
    raise ConfigError(f"unknown algorithm {algo!r}")


# -- experiments ---------------------------------------------------------------

RESULTS_HEADER = ("instance,algorithm,q_cap,ride_factor,rho,served_pairs,"
                  "served_rides,rejected_pairs,total_drive_s,wall_ms,seed")
SUMMARY_HEADER = ("algorithm,q_cap,ride_factor,rho,runs,"
                  "served_pairs_mean,served_pairs_median")


@dataclass(frozen=True)
class Overrides:
    """Parameter deviations from an instance's stored defaults."""

    q_cap: Optional[int] = None
    ride_factor: Optional[float] = None
    rho: Optional[float] = None
    w: Optional[int] = None
    d_gp: Optional[int] = None
    m: Optional[int] = None

    def apply(self, inst: Instance) -> Instance:
        fleet, service = inst.fleet, inst.service
        if self.q_cap is not None or self.m is not None:
            fleet = replace(fleet,
                            seat_capacity=self.q_cap or fleet.seat_capacity,
                            vehicle_count=self.m or fleet.vehicle_count)
        service = replace(
            service,
            ride_factor=self.ride_factor if self.ride_factor is not None else service.ride_factor,
            proximity_factor=self.rho if self.rho is not None else service.proximity_factor,
            max_window=self.w if self.w is not None else service.max_window,
            gp_stay=self.d_gp if self.d_gp is not None else service.gp_stay,
        )
        return inst.with_params(fleet=fleet, service=service)


@dataclass
class ExperimentConfig:
    seeds: Sequence[int]
    algorithms: Sequence[str] = ALGORITHMS
    overrides: Sequence[Overrides] = (Overrides(),)
    generator: Optional[dict] = None  # GeneratorConfig field overrides
    out_dir: Optional[str] = None
    wall_clock: bool = True
    workers: int = 1

    def validate(self) -> None:
        if not self.algorithms:
            raise ConfigError("at least one algorithm required")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {algo!r}")


@dataclass(frozen=True)
class RunResult:
    instance: str
    algorithm: str
    q_cap: int
    ride_factor: float
    rho: float
    served_pairs: int
    served_rides: int
    rejected_pairs: int
    total_drive_s: int
    wall_ms: int
    seed: int
    ok: bool = True

    def row(self) -> str:
        return (f"{self.instance},{self.algorithm},{self.q_cap},"
                f"{self.ride_factor},{self.rho},{self.served_pairs},"
                f"{self.served_rides},{self.rejected_pairs},"
                f"{self.total_drive_s},{self.wall_ms},{self.seed}")


def _make_instance(seed: int, generator: Optional[dict]) -> Instance:
    if generator is None:
        return generate_instance(default_config(seed))
    fields = dict(generator)
    afternoon = fields.pop("afternoon", None)
    if fields:
        base = default_config(seed, afternoon=bool(afternoon) if afternoon is not None else False)
        cfg = replace(base, **fields)
        if afternoon is not None:
            cfg = replace(cfg, afternoon=bool(afternoon))
        return generate_instance(cfg)
    return generate_instance(default_config(seed, afternoon))


def _run_cell(args) -> tuple[RunResult, list[Schedule]]:
    seed, algo, over, generator, wall_clock = args
    inst = _make_instance(seed, generator)
    inst = over.apply(inst)
    algo_seed = int(np.random.SeedSequence(
        [seed, ALGORITHMS.index(algo)]).generate_state(1)[0])
    started = time.perf_counter()
    outcome = run_algorithm(inst, algo, algo_seed)
    wall_ms = int((time.perf_counter() - started) * 1000) if wall_clock else 0
    report = verify_schedules(inst, outcome.schedules)
    pairs, rides, drive = served_count(inst, outcome.schedules)
    ok = report.ok
    if not ok:
        pairs, rides, drive = -1, -1, -1
    result = RunResult(
        instance=inst.name, algorithm=algo,
        q_cap=inst.fleet.seat_capacity, ride_factor=inst.service.ride_factor,
        rho=inst.service.proximity_factor, served_pairs=pairs, served_rides=rides,
        rejected_pairs=len(inst.pairs) - pairs if ok else -1,
        total_drive_s=drive, wall_ms=wall_ms, seed=seed, ok=ok,
    )
    return result, outcome.schedules


def run_experiment(cfg: ExperimentConfig) -> list[RunResult]:
    """Run every (instance, algorithm, override) cell and emit CSV artifacts.

    Every schedule set is independently verified before being recorded; a
    verification failure is recorded as a failure row (served counts -1), it
    never passes silently.
    """
    cfg.validate()
    cells = [(seed, algo, over, cfg.generator, cfg.wall_clock)
             for seed in cfg.seeds
             for over in cfg.overrides
             for algo in cfg.algorithms]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = [r for r, _ in pool.map(_run_cell, cells)]
    else:
        results = [_run_cell(cell)[0] for cell in cells]
    results.sort(key=lambda r: (r.instance, r.algorithm, r.q_cap,
                                r.ride_factor, r.rho, r.seed))
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(results_csv(results), encoding="utf-8")
        (out / "summary.csv").write_text(summary_csv(results), encoding="utf-8")
    return results


def results_csv(results: Sequence[RunResult]) -> str:
    return "\n".join([RESULTS_HEADER] + [r.row() for r in results]) + "\n"


def summary_csv(results: Sequence[RunResult]) -> str:
    """Per-algorithm (and per parameter point) mean/median of served pairs."""
    groups: dict[tuple, list[int]] = {}
    for r in results:
        if r.ok:
            groups.setdefault((r.algorithm, r.q_cap, r.ride_factor, r.rho),
                              []).append(r.served_pairs)
    lines = [SUMMARY_HEADER]
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        vals = groups[key]
        lines.append(f"{key[0]},{key[1]},{key[2]},{key[3]},{len(vals)},"
                     f"{statistics.mean(vals):.2f},{statistics.median(vals):.2f}")
    return "\n".join(lines) + "\n"


def capacity_sweep(seeds: Sequence[int], **kwargs) -> ExperimentConfig:
    return ExperimentConfig(seeds=seeds,
                            overrides=[Overrides(q_cap=q) for q in (3, 4, 5, 6)],
                            **kwargs)


def ride_factor_sweep(seeds: Sequence[int], **kwargs) -> ExperimentConfig:
    return ExperimentConfig(
        seeds=seeds,
        overrides=[Overrides(ride_factor=f) for f in (1.25, 1.5, 1.75, 2.0)],
        **kwargs)


def rho_sweep(seeds: Sequence[int], **kwargs) -> ExperimentConfig:
    return ExperimentConfig(
        seeds=seeds,
        overrides=[Overrides(rho=r, q_cap=5) for r in (1.0, 1.25, 1.5, 1.75, 2.0)],
        **kwargs)
