#!/usr/bin/env python3
"""Full pipeline with the ground-truth feature map; exact end-to-end check.

Trains the hub dynamics model and all edge policies from the scripted
demonstration dataset, then evaluates every seen and held-out start-goal
pair. Finishes in a few minutes on a laptop.
"""

import argparse
import sys

from hubplan.config import RunConfig, apply_env_overrides
from hubplan.pipeline import run_pipeline


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/oracle")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    cfg = apply_env_overrides(RunConfig(out_dir=args.out, seed=args.seed,
                                        encoder_backend="oracle"))
    agg = run_pipeline(cfg)
    print(f"seen {agg['seen_successes']}/{agg['seen_total']}, "
          f"unseen {agg['unseen_successes']}/{agg['unseen_total']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
