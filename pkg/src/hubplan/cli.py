"""Command-line surface.

Subcommands: gen-demos, train-low, build-topology, train-high,
train-policies, plan, eval, ablate, run-all. Exit codes: 0 success,
1 stage failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, apply_env_overrides, parse_config
from .pipeline import (
    STAGE_ORDER,
    STAGES,
    StageError,
    ablate_bfs,
    ablate_no_memory,
    run_pipeline,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hubplan",
                                     description="hub-topology behavior composition pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="run seed (overrides config)")

    for name in STAGE_ORDER:
        common(sub.add_parser(name, help=f"run the {name} stage"))
    common(sub.add_parser("run-all", help="run every stage in order"))

    p_plan = sub.add_parser("plan", help="search a plan for one start-goal pair")
    common(p_plan)
    p_plan.add_argument("--start", type=int, required=True, choices=(0, 1, 2))
    p_plan.add_argument("--goal", required=True, help="ordered pair, e.g. red,blue")

    p_abl = sub.add_parser("ablate", help="run an ablation")
    common(p_abl)
    p_abl.add_argument("--kind", required=True, choices=("bfs", "no-memory"))
    return parser


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    return apply_env_overrides(cfg)


def _cmd_plan(cfg: RunConfig, args) -> None:
    from .hub_dynamics import CachedDist
    from .maze.env import Goal
    from .pipeline import _load_topology, _plan_for, load_high_model, make_encoder, make_env
    from .planning import format_plan, match_start_hub

    goal = Goal.parse(args.goal)
    _ds, topo = _load_topology(cfg, "plan")
    model = load_high_model(cfg, "plan", len(topo.hubs))
    env = make_env(cfg)
    encoder = make_encoder(cfg, Path(cfg.out_dir))
    state, obs = env.reset(env.starts[args.start], goal)
    encoder.begin_episode()
    z0 = encoder.encode(obs, state)
    start_hub = match_start_hub(z0, topo, cfg.effective_match_tol)
    plan = _plan_for(cfg, topo, CachedDist(model, topo), start_hub, goal)
    sys.stdout.write(format_plan(plan, topo))


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2

    try:
        if args.command == "run-all":
            run_pipeline(cfg)
        elif args.command == "plan":
            _cmd_plan(cfg, args)
        elif args.command == "ablate":
            if args.kind == "bfs":
                ablate_bfs(cfg)
            else:
                ablate_no_memory(cfg)
        else:
            STAGES[args.command](cfg)
    except StageError as e:
        print(f"stage failure: {e}", file=sys.stderr)
        return 1
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - surface anything else as a stage failure
        print(f"stage failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
