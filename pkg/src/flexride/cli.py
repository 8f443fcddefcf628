"""Command-line interface.

Subcommands:
    generate  write a synthetic instance file
    run       solve one instance with one algorithm, write schedule CSV
    sweep     run an experiment suite, write results/summary CSVs
    verify    check a schedule CSV against an instance (exit 1 on violations)
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

from . import harness, instance_io
from .harness import ExperimentConfig, GeneratorConfig, Overrides
from .mclih import MclihConfig
from .mcma import McmaConfig
from .model import served_count, verify_schedules


def _parse_congestion(text: str) -> tuple[int, int]:
    try:
        count, _, minutes = text.partition(":")
        return int(count), int(minutes) * 60
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            "congestion must be 'C:Wmin', e.g. 6:30") from exc


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, help="fleet size")
    p.add_argument("--q-cap", type=int, help="vehicle seat capacity")
    p.add_argument("--w-minutes", type=int, help="max time-window length")
    p.add_argument("--d-gp-minutes", type=int, help="duration of the GP stay")
    p.add_argument("--ride-factor", type=float, help="max ride time as a factor of the direct time")
    p.add_argument("--rho", type=float, help="mini-cluster proximity factor")
    p.add_argument("--congestion", type=_parse_congestion, metavar="C:Wmin",
                   help="max arrivals per sliding window at one GP")


def _overrides_from_args(args) -> Overrides:
    return Overrides(
        q_cap=args.q_cap, ride_factor=args.ride_factor, rho=args.rho,
        w=args.w_minutes * 60 if args.w_minutes else None,
        d_gp=args.d_gp_minutes * 60 if args.d_gp_minutes else None,
        m=args.m,
    )


def cmd_generate(args) -> int:
    cfg = GeneratorConfig(
        seed=args.seed,
        n_pairs=(args.n_min, args.n_max),
        chronic_fraction=(args.chronic_min, args.chronic_max),
        gp_count=args.gps,
        extent_km=args.extent_km,
        speed_kmh=args.speed_kmh,
        afternoon=args.afternoon,
    )
    inst = harness.generate_instance(cfg)
    instance_io.save_instance(inst, args.out)
    print(f"wrote {args.out}: {len(inst.pairs)} pairs "
          f"({inst.chronic_fraction:.1%} chronic), {len(inst.locations)} nodes")
    return 0


def cmd_run(args) -> int:
    inst = instance_io.load_instance(args.instance)
    inst = _overrides_from_args(args).apply(inst)
    if args.congestion:
        inst = inst.with_params(service=replace(
            inst.service, congestion_limit=args.congestion[0],
            congestion_window=args.congestion[1]))
    mclih_cfg = MclihConfig(aco_iterations=args.aco_iters,
                            depot_cost_mult=args.depot_cost_mult)
    mcma_cfg = McmaConfig(init_policy=args.init_policy,
                          fairness_margin=args.fairness_margin)
    result = harness.run_algorithm(inst, args.algo, args.seed, mclih_cfg, mcma_cfg)
    report = verify_schedules(inst, result.schedules)
    pairs, rides, drive = served_count(inst, result.schedules)
    if args.out:
        instance_io.save_schedules(result.schedules, args.out)
    print(f"{args.algo}: served {pairs} pairs ({rides} rides), "
          f"rejected {len(inst.pairs) - pairs}, drive {drive}s")
    if not report.ok:
        for line in report:
            print(f"VIOLATION: {line}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    seeds = list(range(args.seed, args.seed + args.instances))
    kwargs = dict(algorithms=tuple(args.algo), out_dir=args.out,
                  workers=args.workers, wall_clock=not args.no_wall_clock)
    if args.scale:
        kwargs["generator"] = {"n_pairs": (args.scale, args.scale)}
    if args.which == "capacity":
        cfg = harness.capacity_sweep(seeds, **kwargs)
    elif args.which == "ride":
        cfg = harness.ride_factor_sweep(seeds, **kwargs)
    elif args.which == "rho":
        cfg = harness.rho_sweep(seeds, **kwargs)
    else:
        cfg = ExperimentConfig(seeds=seeds, **kwargs)
    results = harness.run_experiment(cfg)
    bad = [r for r in results if not r.ok]
    print(f"{len(results)} cells -> {args.out} "
          f"({len(bad)} verification failures)")
    return 1 if bad else 0


def cmd_verify(args) -> int:
    inst = instance_io.load_instance(args.instance)
    schedules = instance_io.load_schedules(args.schedules)
    report = verify_schedules(inst, schedules)
    pairs, rides, _ = served_count(inst, schedules)
    print(f"{pairs} pairs / {rides} rides served")
    if not report.ok:
        for line in report:
            print(f"VIOLATION: {line}", file=sys.stderr)
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexride",
                                     description="Dial-a-ride scheduling with flexible appointments")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-min", type=int, default=1100)
    g.add_argument("--n-max", type=int, default=1350)
    g.add_argument("--chronic-min", type=float, default=0.10)
    g.add_argument("--chronic-max", type=float, default=0.21)
    g.add_argument("--gps", type=int, default=20)
    g.add_argument("--extent-km", type=float, default=24.0)
    g.add_argument("--speed-kmh", type=float, default=40.0)
    g.add_argument("--afternoon", action="store_true",
                   help="include an afternoon session")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="solve one instance")
    r.add_argument("--instance", required=True)
    r.add_argument("--algo", choices=harness.ALGORITHMS, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="schedule CSV path")
    r.add_argument("--aco-iters", type=int, default=60,
                   help="ant-colony iterations for the giant tour")
    r.add_argument("--depot-cost-mult", type=float, default=1.0,
                   help="scale depot legs in the split to use fewer vehicles")
    r.add_argument("--init-policy", choices=("longest", "random"), default="longest")
    r.add_argument("--fairness-margin", type=float, default=0.05)
    _add_param_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run an experiment suite")
    s.add_argument("--which", choices=("main", "capacity", "ride", "rho"),
                   default="main")
    s.add_argument("--seed", type=int, default=0, help="first generator seed")
    s.add_argument("--instances", type=int, default=20)
    s.add_argument("--algo", nargs="+", choices=harness.ALGORITHMS,
                   default=list(harness.ALGORITHMS))
    s.add_argument("--scale", type=int,
                   help="fixed pair count per instance (smoke tests)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--no-wall-clock", action="store_true",
                   help="emit wall_ms=0 for byte-reproducible CSVs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="check schedules against an instance")
    v.add_argument("--instance", required=True)
    v.add_argument("--schedules", required=True)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
