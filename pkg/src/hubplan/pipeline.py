"""Pipeline stages: demos -> (low-level) -> topology -> hub model -> policies -> eval.

Every stage reads its inputs from the run directory and persists its outputs
there, so stages can be re-run individually; a missing upstream artifact is
reported with the stage that produces it. All randomness is derived from the
run seed, making whole runs bit-reproducible.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import nn
from .config import RunConfig, save_config
from .demos.dataset import DemoDataset, build_dataset, load_dataset, save_dataset
from .edge_policies import PolicyBank, PolicyTrainConfig, load_bank, save_bank, train_policies
from .execution import ExecutionResult, execute
from .hub_dynamics import (
    CachedDist,
    HighTrainConfig,
    HubDynamicsModel,
    pretrain_on_traversals,
    train_high,
)
from .latent.model import LearnedEncoder, LowLevelModel
from .latent.oracle import OracleEncoder
from .latent.training import LowTrainConfig, train_low_level
from .maze.env import Goal, MazeEnv
from .metrics import TaskRecord, save_metrics
from .planning import (
    NoPlanError,
    Plan,
    SearchConfig,
    bfs_plan,
    format_plan,
    goal_hub_set,
    match_start_hub,
    search,
)
from .topology import (
    BehaviorTopology,
    build_topology,
    collapse_to_hub_sequence,
    detect_hubs,
    encode_dataset,
    load_topology,
    save_topology,
)

LOW_KIND = "lowlevel"
HIGH_KIND = "highlevel"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _require(path: Path, stage: str, produced_by: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing artifact {path.name!r}; run stage {produced_by} first")
    return path


def make_env(cfg: RunConfig) -> MazeEnv:
    return MazeEnv(wrong_key_penalty=cfg.wrong_key_penalty)


def make_encoder(cfg: RunConfig, out: Path):
    if cfg.encoder_backend == "oracle":
        return OracleEncoder(latent_dim=cfg.latent_dim, epsilon=cfg.epsilon,
                             fields=cfg.oracle_field_tuple())
    path = _require(out / "lowlevel.bin", "make-encoder", "train-low")
    _kind, tensors = nn.load_params(path, expect_kind=LOW_KIND)
    memoryless = not any(name.startswith("enc.gru") for name in tensors)
    model = LowLevelModel(np.random.default_rng(0), latent_dim=cfg.latent_dim,
                          memoryless=memoryless)
    model.load_tensors(tensors)
    return LearnedEncoder(model, history_len=cfg.history_len)


def stage_gen_demos(cfg: RunConfig, log=print) -> DemoDataset:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.txt")
    env = make_env(cfg)
    ds_dir = out / "dataset"
    if (ds_dir / "manifest.json").exists():
        ds = load_dataset(ds_dir)
        if ds.seed == cfg.seed and len(ds.failures) == cfg.n_failures:
            log(f"gen-demos: reusing dataset in {ds_dir}")
            return ds
    ds = build_dataset(env, seed=cfg.seed, n_failures=cfg.n_failures)
    save_dataset(ds, ds_dir)
    log(f"gen-demos: {len(ds.successes)} successes, {len(ds.failures)} failures")
    return ds


def stage_train_low(cfg: RunConfig, log=print) -> None:
    out = Path(cfg.out_dir)
    if cfg.encoder_backend != "learned":
        log("train-low: oracle backend, nothing to train")
        return
    _require(out / "dataset" / "manifest.json", "train-low", "gen-demos")
    ds = load_dataset(out / "dataset")
    model = LowLevelModel(np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x10])),
                          latent_dim=cfg.latent_dim)
    tcfg = LowTrainConfig(epochs=cfg.low_epochs, lr=cfg.lr_low, history_len=cfg.history_len,
                          seed=cfg.seed)
    losses = train_low_level(model, ds.trajectories, tcfg)
    nn.save_params(out / "lowlevel.bin", LOW_KIND, model.tensors())
    (out / "lowlevel_loss.txt").write_text(
        "".join(f"epoch {i} loss {v!r}\n" for i, v in enumerate(losses)))
    log(f"train-low: {len(losses)} epochs, loss {losses[0]:.4f} -> {losses[-1]:.4f}")


def stage_build_topology(cfg: RunConfig, log=print) -> BehaviorTopology:
    out = Path(cfg.out_dir)
    _require(out / "dataset" / "manifest.json", "build-topology", "gen-demos")
    ds = load_dataset(out / "dataset")
    env = make_env(cfg)
    encoder = make_encoder(cfg, out)
    latent = encode_dataset(env, ds, encoder)
    hubs = detect_hubs(latent, cfg.epsilon)
    topo = build_topology(ds, latent, hubs, cfg.epsilon)
    save_topology(topo, out / "topology.txt")
    log(f"build-topology: {len(topo.hubs)} hubs, {len(topo.edges)} edges")
    return topo


def _load_topology(cfg: RunConfig, stage: str) -> tuple[DemoDataset, BehaviorTopology]:
    out = Path(cfg.out_dir)
    _require(out / "dataset" / "manifest.json", stage, "gen-demos")
    ds = load_dataset(out / "dataset")
    path = _require(out / "topology.txt", stage, "build-topology")
    return ds, load_topology(path, ds.trajectories)


def stage_train_high(cfg: RunConfig, log=print) -> HubDynamicsModel:
    out = Path(cfg.out_dir)
    ds, topo = _load_topology(cfg, "train-high")
    env = make_env(cfg)
    encoder = make_encoder(cfg, out)
    latent = encode_dataset(env, ds, encoder)
    sequences = [[h for h, _t in collapse_to_hub_sequence(lt, topo, cfg.epsilon)]
                 for lt in latent]
    model = HubDynamicsModel(np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x41])),
                             n_hubs=len(topo.hubs), emb_dim=cfg.hub_emb_dim)
    pre = pretrain_on_traversals(model, topo, cfg.pretrain_traversals, cfg.pretrain_max_len,
                                 seed=cfg.seed, lr=cfg.lr_high, epochs=cfg.pretrain_epochs)
    hcfg = HighTrainConfig(lr=cfg.lr_high, epochs=cfg.high_epochs)
    losses = train_high(model, sequences, topo, hcfg)
    nn.save_params(out / "highlevel.bin", HIGH_KIND, model.tensors())
    with open(out / "high_loss.txt", "w") as fh:
        for i, v in enumerate(pre):
            fh.write(f"pretrain {i} loss {v!r}\n")
        for i, v in enumerate(losses):
            fh.write(f"epoch {i} loss {v!r}\n")
    log(f"train-high: pretrain {pre[0]:.4f} -> {pre[-1]:.4f}, "
        f"train {losses[0]:.4f} -> {losses[-1]:.4f}" if pre else "train-high: done")
    return model


def load_high_model(cfg: RunConfig, stage: str, n_hubs: int) -> HubDynamicsModel:
    out = Path(cfg.out_dir)
    path = _require(out / "highlevel.bin", stage, "train-high")
    _kind, tensors = nn.load_params(path, expect_kind=HIGH_KIND)
    model = HubDynamicsModel(np.random.default_rng(0), n_hubs=n_hubs, emb_dim=cfg.hub_emb_dim)
    model.load_tensors(tensors)
    return model


def stage_train_policies(cfg: RunConfig, log=print) -> PolicyBank:
    out = Path(cfg.out_dir)
    ds, topo = _load_topology(cfg, "train-policies")
    model = load_high_model(cfg, "train-policies", len(topo.hubs))
    pcfg = PolicyTrainConfig(
        lr=cfg.lr_policy, epochs=cfg.policy_epochs, p_canonical=cfg.p_canonical,
        p_truncated=cfg.p_truncated, p_preroll=cfg.p_preroll,
        max_perturbation=cfg.max_perturbation, obs_noise=cfg.obs_noise,
        label_smoothing=cfg.label_smoothing, max_segments_per_edge=cfg.max_segments_per_edge,
        seed=cfg.seed)
    lines: list[str] = []
    bank = train_policies(topo, ds.trajectories, model.embeddings(), pcfg, log=lines.append)
    save_bank(bank, out / "policies")
    (out / "policy_loss.txt").write_text("".join(line + "\n" for line in lines))
    log(f"train-policies: {len(bank.policies)} policies")
    return bank


def _plan_for(cfg: RunConfig, topo: BehaviorTopology, dist, start_hub: int,
              goal: Goal) -> Plan:
    goal_set = goal_hub_set(goal, topo)
    if cfg.planner_backend == "bfs":
        return bfs_plan(topo, start_hub, goal_set)
    scfg = SearchConfig(p_min=cfg.p_min, eta=cfg.eta, depth_limit=cfg.depth_limit,
                        match_tol=cfg.effective_match_tol)
    return search(topo, dist, start_hub, goal_set, scfg)


def evaluate(cfg: RunConfig, pairs: list[tuple[int, Goal, bool]], log=print,
             plans_subdir: str = "plans") -> list[TaskRecord]:
    """One episode per (start, goal, seen-flag); plans dumped next to metrics."""
    out = Path(cfg.out_dir)
    ds, topo = _load_topology(cfg, "eval")
    model = load_high_model(cfg, "eval", len(topo.hubs))
    _require(out / "policies" / "index.json", "eval", "train-policies")
    bank = load_bank(out / "policies")
    env = make_env(cfg)
    encoder = make_encoder(cfg, out)
    embeddings = model.embeddings()
    plans_dir = out / plans_subdir
    plans_dir.mkdir(parents=True, exist_ok=True)

    records: list[TaskRecord] = []
    for start_id, goal, seen in pairs:
        state, obs = env.reset(env.starts[start_id], goal)
        encoder.begin_episode()
        z0 = encoder.encode(obs, state)
        dump: list[str] = []
        try:
            start_hub = match_start_hub(z0, topo, cfg.effective_match_tol)
            plan = _plan_for(cfg, topo, CachedDist(model, topo), start_hub, goal)
        except NoPlanError as e:
            dump.append(f"no plan: {e}\n")
            result = ExecutionResult(False, 0, 0, 0, [], failure_reason="no-plan")
            plan = None
        if plan is not None:
            dump.append(format_plan(plan, topo))
            result = execute(plan, env, state, obs, bank, encoder, embeddings, topo,
                             match_tol=cfg.effective_match_tol)
            dump.append(result.format())
        (plans_dir / f"plan_{start_id}_{goal.first}{goal.second}.txt").write_text("".join(dump))
        records.append(TaskRecord(
            start_id=start_id, goal=str(goal), seen=seen, success=result.success,
            steps=result.steps, edges_crossed=result.edges_crossed,
            planned_edges=result.planned_edges,
            plan_cost=plan.cost if plan is not None else float("nan"),
            failure_reason=result.failure_reason))
        log(f"eval: start={start_id} goal={goal} seen={int(seen)} "
            f"success={int(result.success)} steps={result.steps}")
    return records


def stage_eval(cfg: RunConfig, log=print) -> dict:
    out = Path(cfg.out_dir)
    ds, _topo = _load_topology(cfg, "eval")
    pairs = [(sid, g, True) for sid, g in ds.seen] + [(sid, g, False) for sid, g in ds.unseen]
    records = evaluate(cfg, pairs, log=log)
    agg = save_metrics(records, out)
    log(f"eval: seen {agg['seen_successes']}/{agg['seen_total']}, "
        f"unseen {agg['unseen_successes']}/{agg['unseen_total']}")
    return agg


STAGES = {
    "gen-demos": stage_gen_demos,
    "train-low": stage_train_low,
    "build-topology": stage_build_topology,
    "train-high": stage_train_high,
    "train-policies": stage_train_policies,
    "eval": stage_eval,
}

STAGE_ORDER = ["gen-demos", "train-low", "build-topology", "train-high", "train-policies", "eval"]


def run_pipeline(cfg: RunConfig, log=print) -> dict:
    t0 = time.time()
    agg = None
    for name in STAGE_ORDER:
        result = STAGES[name](cfg, log=log)
        if name == "eval":
            agg = result
    log(f"run-all: finished in {time.time() - t0:.1f}s")
    return agg


def derive_no_memory_config(cfg: RunConfig) -> RunConfig:
    """Ablation: hub discovery from the current observation only. The oracle
    analogue keeps pose and drops the history-dependent fields."""
    import dataclasses

    return dataclasses.replace(
        cfg,
        out_dir=str(Path(cfg.out_dir) / "ablate_no_memory"),
        oracle_fields="position,orientation",
    )


def ablate_no_memory(cfg: RunConfig, log=print) -> dict:
    return run_pipeline(derive_no_memory_config(cfg), log=log)


def ablate_bfs(cfg: RunConfig, log=print) -> dict:
    """Ablation: hop-count planning over the same trained artifacts."""
    import dataclasses

    bcfg = dataclasses.replace(cfg, planner_backend="bfs")
    out = Path(cfg.out_dir)
    ds, _ = _load_topology(bcfg, "ablate-bfs")
    pairs = [(sid, g, True) for sid, g in ds.seen] + [(sid, g, False) for sid, g in ds.unseen]
    bdir = out / "ablate_bfs"
    bdir.mkdir(parents=True, exist_ok=True)
    records = evaluate(bcfg, pairs, log=log, plans_subdir="ablate_bfs/plans")
    agg = save_metrics(records, bdir)
    log(f"ablate-bfs: seen {agg['seen_successes']}/{agg['seen_total']}, "
        f"unseen {agg['unseen_successes']}/{agg['unseen_total']}")
    return agg
