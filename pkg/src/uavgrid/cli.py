"""Command-line entry point.

Commands: train, eval, gridsearch, bench-speedup, export-maps. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error. Existing
output files are never clobbered unless --overwrite is given. UAVSIM_THREADS
caps grid-search worker parallelism.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
from dataclasses import replace

from .config import (ConfigError, RunConfig, config_from_dict, config_to_dict,
                     load_config, validate_run, apply_overrides)
from .evaluation import (DEFAULT_GLOBAL_SCALINGS, DEFAULT_LOCAL_SIZES,
                         evaluate, grid_search, speedup_benchmark)
from .mapproc import ObservationSpec
from .network import CheckpointError, load_checkpoint, load_checkpoint_meta
from .scenarios import BUNDLED_MAPS, MapFormatError, load_map
from .training import train
from .world import Mission


def _workers_from_env() -> int:
    raw = os.environ.get("UAVSIM_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"UAVSIM_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"UAVSIM_THREADS must be >= 1, got {value}")
    return value


def _prepare_outputs(out_dir: str, paths: list[str], overwrite: bool):
    """Create the output directory; refuse to clobber existing outputs."""
    if not overwrite:
        for path in paths:
            if os.path.exists(path):
                raise ConfigError(
                    f"refusing to overwrite existing {path}; pass --overwrite")
    os.makedirs(out_dir, exist_ok=True)


def _parse_int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _parse_spec(text: str, flag: str) -> ObservationSpec:
    values = _parse_int_list(text, flag)
    if len(values) != 2:
        raise ConfigError(f"{flag} expects 'l,g', got {text!r}")
    try:
        return ObservationSpec(local_size=values[0], global_scaling=values[1])
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def cmd_train(args) -> int:
    config = load_config(args.config, args.set)
    if args.steps is not None:
        config = replace(config, train=replace(config.train, total_steps=args.steps))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.output is not None:
        config = replace(config, output_dir=args.output)
    env = load_map(config.map_name)
    validate_run(config, env.size)
    out = config.output_dir
    config_path = os.path.join(out, "config.json")
    log_path = os.path.join(out, "training_log.csv")
    checkpoint_path = os.path.join(out, "checkpoint.npz")
    _prepare_outputs(out, [config_path, log_path, checkpoint_path], args.overwrite)
    with open(config_path, "w", newline="") as f:
        f.write(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")
    result = train(env, config.scenario, config.observation, config.network,
                   config.train, config.seed, rewards=config.rewards,
                   channel_params=config.channel, log_path=log_path,
                   checkpoint_path=checkpoint_path,
                   checkpoint_extra={"run_config": config_to_dict(config)})
    print(f"trained {result.steps} steps over {result.episodes} completed episodes")
    print(f"wrote {log_path} and {checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    network = load_checkpoint(args.checkpoint)
    if args.config is not None:
        config = load_config(args.config, args.set)
    else:
        stored = load_checkpoint_meta(args.checkpoint).get("extra", {}).get("run_config")
        if stored is None:
            raise ConfigError("checkpoint carries no run config; pass --config")
        config = config_from_dict(apply_overrides(stored, args.set))
    if args.episodes is not None:
        config = replace(config, eval=replace(config.eval, episodes=args.episodes))
    if args.export_trajectories:
        config = replace(config, eval=replace(config.eval, export_trajectories=True))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.map is not None:
        config = replace(config, map_name=args.map)
    env = load_map(config.map_name)
    if env.size != network.map_size:
        raise ConfigError(f"checkpoint was trained on map size {network.map_size}, "
                          f"but {config.map_name} has size {env.size}")
    out = args.output if args.output is not None else os.path.join(
        os.path.dirname(os.path.abspath(args.checkpoint)), "eval")
    csv_path = os.path.join(out, "eval_metrics.csv")
    summary_path = os.path.join(out, "eval_summary.json")
    paths = [csv_path, summary_path]
    trajectory_dir = None
    if config.eval.export_trajectories:
        trajectory_dir = os.path.join(out, "trajectories")
        paths.append(trajectory_dir)
    _prepare_outputs(out, paths, args.overwrite)
    if trajectory_dir is not None:
        os.makedirs(trajectory_dir, exist_ok=True)
    summary = evaluate(network, env, config.scenario, config.eval.episodes,
                       config.seed, channel_params=config.channel,
                       rewards=config.rewards, csv_path=csv_path,
                       summary_path=summary_path, trajectory_dir=trajectory_dir)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def cmd_gridsearch(args) -> int:
    config = load_config(args.config, args.set)
    if args.repeats < 1:
        raise ConfigError(f"--repeats must be >= 1, got {args.repeats}")
    local_sizes = (DEFAULT_LOCAL_SIZES if args.l_values is None
                   else _parse_int_list(args.l_values, "--l-values"))
    global_scalings = (DEFAULT_GLOBAL_SCALINGS if args.g_values is None
                       else _parse_int_list(args.g_values, "--g-values"))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.output is not None:
        config = replace(config, output_dir=args.output)
    env = load_map(config.map_name)
    steps = args.steps if args.steps is not None else config.train.total_steps
    episodes = args.episodes if args.episodes is not None else config.eval.episodes
    out = config.output_dir
    csv_path = os.path.join(out, "grid_results.csv")
    _prepare_outputs(out, [csv_path], args.overwrite)
    rows = grid_search(env, config.scenario, local_sizes, global_scalings,
                       repeats=args.repeats, steps=steps, eval_episodes=episodes,
                       seed=config.seed, net_config=config.network,
                       train_config=config.train, channel_params=config.channel,
                       rewards=config.rewards, csv_path=csv_path,
                       workers=_workers_from_env())
    print(f"wrote {len(rows)} result rows to {csv_path}")
    return 0


def cmd_bench_speedup(args) -> int:
    if args.config is not None:
        config = load_config(args.config, args.set)
    else:
        config = config_from_dict(apply_overrides({}, args.set))
    if args.map is not None:
        config = replace(config, map_name=args.map)
    if args.mission is not None:
        config = config_from_dict(
            apply_overrides(config_to_dict(config), [f"mission={args.mission}"]))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    spec_a = _parse_spec(args.spec_a, "--spec-a")
    spec_b = _parse_spec(args.spec_b, "--spec-b")
    env = load_map(config.map_name)
    ratio = speedup_benchmark(spec_a, spec_b, env, config.scenario,
                              steps=args.steps, batch_size=args.batch_size,
                              seed=config.seed, net_config=config.network,
                              channel_params=config.channel,
                              rewards=config.rewards)
    report = {
        "map": config.map_name, "mission": config.mission.value,
        "spec_a": {"local_size": spec_a.local_size,
                   "global_scaling": spec_a.global_scaling},
        "spec_b": {"local_size": spec_b.local_size,
                   "global_scaling": spec_b.global_scaling},
        "steps": args.steps, "batch_size": args.batch_size,
        "throughput_ratio": ratio,
    }
    print(json.dumps(report, sort_keys=True, indent=2))
    if args.output is not None:
        path = os.path.join(args.output, "bench_speedup.json")
        _prepare_outputs(args.output, [path], args.overwrite)
        with open(path, "w", newline="") as f:
            f.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_export_maps(args) -> int:
    out = args.output
    paths = [os.path.join(out, f"{name}.json") for name in BUNDLED_MAPS]
    _prepare_outputs(out, paths, args.overwrite)
    for name, path in zip(BUNDLED_MAPS, paths):
        text = (importlib.resources.files("uavgrid") / "maps" / f"{name}.json").read_text()
        with open(path, "w", newline="") as f:
            f.write(text)
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavgrid",
        description="Grid-world UAV path planning: train, evaluate, and "
                    "benchmark double-DQN agents for coverage and data "
                    "harvesting missions.")
    sub = parser.add_subparsers(dest="command")

    def common(p, config_required=True):
        p.add_argument("-c", "--config", required=config_required,
                       help="run configuration JSON file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. train.total_steps=1000")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--overwrite", action="store_true",
                       help="allow clobbering existing output files")

    p = sub.add_parser("train", help="train an agent")
    common(p)
    p.add_argument("--steps", type=int, help="override train.total_steps")
    p.add_argument("-o", "--output", help="override output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on Monte Carlo scenarios")
    common(p, config_required=False)
    p.add_argument("--checkpoint", required=True, help="checkpoint .npz file")
    p.add_argument("--episodes", type=int, help="number of evaluation episodes")
    p.add_argument("--map", help="override the map (bundled name or JSON path)")
    p.add_argument("--export-trajectories", action="store_true",
                   help="write one trajectory JSONL file per episode")
    p.add_argument("-o", "--output", help="output directory (default: <ckpt dir>/eval)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch",
                       help="train agents over the (l, g) grid and tabulate CRAL")
    common(p)
    p.add_argument("--l-values", help="comma-separated local map sizes")
    p.add_argument("--g-values", help="comma-separated global scaling factors")
    p.add_argument("--repeats", type=int, default=3, help="agents per grid cell")
    p.add_argument("--steps", type=int, help="training steps per agent")
    p.add_argument("--episodes", type=int, help="evaluation episodes per agent")
    p.add_argument("-o", "--output", help="override output directory")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("bench-speedup",
                       help="compare gradient-step throughput of two observation specs")
    common(p, config_required=False)
    p.add_argument("--spec-a", default="17,3", metavar="L,G",
                   help="observation spec under test (default 17,3)")
    p.add_argument("--spec-b", default="0,1", metavar="L,G",
                   help="baseline observation spec (default 0,1 = disabled)")
    p.add_argument("--steps", type=int, default=1000, help="measured steps per spec")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--map", help="bundled map name or JSON path")
    p.add_argument("--mission", choices=[m.value for m in Mission])
    p.add_argument("-o", "--output", help="also write the report JSON here")
    p.set_defaults(func=cmd_bench_speedup)

    p = sub.add_parser("export-maps", help="write the bundled maps as JSON files")
    p.add_argument("-o", "--output", default="maps", help="output directory")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_export_maps)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (ConfigError, MapFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else exc
        print(f"error: file not found: {name}", file=sys.stderr)
        return 2
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: exit 1, message out
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
