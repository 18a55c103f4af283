"""Train a small coverage agent end to end and watch it beat random flight.

The map is a deliberately tiny 8x8 open field with a 2x2 landing block, so
the whole loop (train, evaluate, compare against a random baseline, replay
one greedy flight as ASCII art) finishes in about a minute on one core.
Numbers will not match any benchmark; the point is the workflow.

    python3 demos/train_coverage.py [--steps 20000] [--seed 0]
"""

import argparse
import sys
import time

import numpy as np

from uavgrid.evaluation import (evaluate, evaluate_random_policy,
                                greedy_policy, rollout)
from uavgrid.mapproc import ObservationSpec
from uavgrid.network import NetworkConfig
from uavgrid.scenarios import ScenarioConfig, new_episode, parse_map
from uavgrid.training import TrainConfig, train
from uavgrid.world import Mission


def open_map8():
    grid = [["."] * 8 for _ in range(8)]
    for r in range(2):
        for c in range(2):
            grid[r][c] = "L"
    return parse_map({"name": "open8", "size": 8, "cell_size_m": 10.0,
                      "grid": grid})


def draw_flight(env, initial, records):
    """ASCII snapshot: path cells 'o', start 'S', final cell 'E'."""
    canvas = [["L" if env.landing[r, c] else "."
               for c in range(env.size)] for r in range(env.size)]
    for r, c in np.argwhere(initial.target.values > 0):
        canvas[r][c] = "*"
    for rec in records:
        r, c = rec["position"]
        canvas[r][c] = "o"
    canvas[initial.position[0]][initial.position[1]] = "S"
    r, c = records[-1]["position"]
    canvas[r][c] = "E"
    return "\n".join(" ".join(row) for row in canvas)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    env = open_map8()
    scenario = ScenarioConfig(mission=Mission.CPP,
                              movement_budget_range=(20, 30))
    spec = ObservationSpec(local_size=7, global_scaling=2)
    net_config = NetworkConfig(n_kernels=8, kernel_size=3,
                               hidden_sizes=(64, 64), time_scale=30.0)
    train_config = TrainConfig(total_steps=args.steps, batch_size=32,
                               replay_capacity=10_000, learning_rate=1e-3)

    print(f"map: {env.size}x{env.size} open field, "
          f"budget 20..30 steps, observation spec "
          f"(l={spec.local_size}, g={spec.global_scaling})")
    print(f"training {args.steps} steps (seed {args.seed}) ...")
    t0 = time.time()
    result = train(env, scenario, spec, net_config, train_config, args.seed)
    print(f"  done in {time.time() - t0:.0f}s, "
          f"{result.episodes} episodes completed")
    tail = [row["cral"] for row in result.rows[-50:]]
    print(f"  mean score over last 50 training episodes: {np.mean(tail):.3f}")

    print("evaluating 100 scenarios, greedy policy vs. uniform random ...")
    summary = evaluate(result.network, env, scenario, 100, args.seed)
    baseline = evaluate_random_policy(env, scenario, 100, args.seed)
    print(f"  {'':14s}{'mean CR':>9s}{'mean CRAL':>11s}{'landed':>8s}")
    for name, s in (("trained", summary), ("random", baseline)):
        print(f"  {name:14s}{s['mean_cr']:9.3f}{s['mean_cral']:11.3f}"
              f"{s['landed_pct']:7.0f}%")

    print("\none greedy flight (S start, E end, o path, * uncovered target):")
    state = new_episode(env, scenario, np.random.default_rng(args.seed + 1))
    initial = state
    metrics, final, records = rollout(greedy_policy(result.network), state,
                                      record=True)
    print(draw_flight(env, initial, records))
    print(f"covered {metrics.cr:.0%} of the target, "
          f"{'landed' if metrics.landed else 'did not land'} "
          f"after {metrics.steps_used}/{initial.budget} steps")
    return 0


if __name__ == "__main__":
    sys.exit(main())
