#!/usr/bin/env python3
"""Full pipeline with the learned encoder-dynamics-decoder latent model.

The low-level model trains for 300 epochs over the whole demonstration
dataset on the pure-python engine; expect this to take on the order of an
hour. Pass --low-epochs to shorten exploratory runs.
"""

import argparse
import sys

from hubplan.config import RunConfig, apply_env_overrides
from hubplan.pipeline import run_pipeline


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/learned")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--low-epochs", type=int, default=300)
    args = parser.parse_args()
    cfg = apply_env_overrides(RunConfig(out_dir=args.out, seed=args.seed,
                                        encoder_backend="learned",
                                        low_epochs=args.low_epochs))
    agg = run_pipeline(cfg)
    print(f"seen {agg['seen_successes']}/{agg['seen_total']}, "
          f"unseen {agg['unseen_successes']}/{agg['unseen_total']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
