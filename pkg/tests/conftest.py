import time
from pathlib import Path

import pytest

from hubplan.config import RunConfig
from hubplan.pipeline import derive_no_memory_config, run_pipeline


def quiet(*_args, **_kwargs):
    pass


@pytest.fixture(scope="session")
def oracle_run(tmp_path_factory):
    """Full oracle-backend pipeline run shared across the whole session."""
    out = tmp_path_factory.mktemp("oracle_run")
    cfg = RunConfig(out_dir=str(out), seed=0, encoder_backend="oracle")
    t0 = time.time()
    agg = run_pipeline(cfg, log=quiet)
    return {"cfg": cfg, "out": out, "agg": agg, "runtime": time.time() - t0}


@pytest.fixture(scope="session")
def no_memory_run(oracle_run):
    cfg = derive_no_memory_config(oracle_run["cfg"])
    agg = run_pipeline(cfg, log=quiet)
    return {"cfg": cfg, "out": Path(cfg.out_dir), "agg": agg}
