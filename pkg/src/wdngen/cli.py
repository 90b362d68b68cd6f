"""Command line entry point: ``wdngen {profile,optimize,generate,validate,plot}``.

Failures exit non-zero with a single line ``wdngen: error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .inp_io import convert_to_si, read_inp
from .profiler import format_profile, merge_global, profile_network

DURATIONS = {"24h": 24.0, "1y": 8760.0}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wdngen", description="Scenario generation for water distribution networks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("profile", help="statistics of the hydraulic parameters of one or more networks")
    s.add_argument("inp", nargs="+")
    s.add_argument("--out", help="write the table here instead of stdout")

    s = sub.add_parser("optimize", help="tune sampling bounds with the particle swarm")
    s.add_argument("inp")
    s.add_argument("--config", required=True, help="YAML run configuration (created if missing)")
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-cases", type=int, default=None)
    s.add_argument("--swarm-size", type=int, default=None)
    s.add_argument("--out", help="tuned YAML path (default: overwrite --config)")

    s = sub.add_parser("generate", help="generate a dataset of valid scenarios")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, required=True, dest="num")
    s.add_argument("--duration", choices=sorted(DURATIONS), default="24h")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--inp", help="network file (overrides inp_paths in the config)")

    s = sub.add_parser("validate", help="check layout and rule compliance of a dataset")
    s.add_argument("dir")

    s = sub.add_parser("plot", help="diagnostic figures of a dataset")
    s.add_argument("dir")
    s.add_argument("--what", required=True, choices=("demand-corr", "pressure-demand", "demand-ts"))
    s.add_argument("--out")
    return p


def _profile(args) -> int:
    profiles = [profile_network(convert_to_si(read_inp(p))) for p in args.inp]
    text = "".join(format_profile(pr) if i == 0 else format_profile(pr).split("\n", 1)[1] for i, pr in enumerate(profiles))
    if len(profiles) > 1:
        text += format_profile(merge_global(profiles)).split("\n", 1)[1]
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _optimize(args) -> int:
    from .hspo import SwarmConfig, hspo_run
    from .pipeline import RunConfig
    from .strategies import default_blueprint

    cfg_path = Path(args.config)
    run = RunConfig.read_yaml(cfg_path) if cfg_path.exists() else RunConfig()
    run.inp_paths = [str(args.inp)]
    model = convert_to_si(read_inp(args.inp))
    blueprint = run.sampling if run.sampling.entries else default_blueprint(model)
    swarm = SwarmConfig()
    if args.n_cases:
        swarm.n_cases = args.n_cases
    if args.swarm_size:
        swarm.swarm_size = args.swarm_size
    result = hspo_run(model, blueprint, swarm, args.epochs, np.random.default_rng(args.seed),
                      adg=run.adg_config(), num_steps=run.num_steps)
    run.sampling = result.config
    out = Path(args.out) if args.out else cfg_path
    out.write_text(run.to_yaml())
    f = result.fitness
    print(f"f_pso={f.f_pso:.6f} f_success={f.f_success:.6f} f_ubiqr={f.f_ubiqr:.6f} f_range={f.f_range:.6f} config={out}")
    return 0


def _generate(args) -> int:
    from .pipeline import RunConfig, generate_dataset

    run = RunConfig.read_yaml(args.config)
    run.num_samples = args.num
    run.duration = DURATIONS[args.duration]
    run.output_path = args.out
    if args.seed is not None:
        run.seed = args.seed
    if args.workers is not None:
        run.num_cpus = args.workers
    if args.inp:
        run.inp_paths = [args.inp]
    root = generate_dataset(run)
    print(f"dataset={root}")
    return 0


def _validate(args) -> int:
    from .pipeline import validate_dataset

    problems = validate_dataset(args.dir)
    if problems:
        raise DatasetInvalid("; ".join(problems))
    print(f"ok {args.dir}")
    return 0


def _plot(args) -> int:
    from .plots import plot

    path, info = plot(args.dir, args.what, args.out)
    extra = " ".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
    print(f"image={path} {extra}")
    return 0


class DatasetInvalid(RuntimeError):
    pass


COMMANDS = {"profile": _profile, "optimize": _optimize, "generate": _generate, "validate": _validate, "plot": _plot}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one parseable line
        msg = " ".join(str(exc).split())
        print(f"wdngen: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
