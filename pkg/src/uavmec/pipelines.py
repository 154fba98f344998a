"""Experiment pipelines: pure functions of (run config, seed) writing CSVs and checkpoints."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import AgentConfig, PetoAgent, agent_policy, evaluate_policy, train_peto
from .baselines import MODEL_KINDS, build_model, run_ruec
from .env import ConfigError, Scenario, load_scenario, make_env
from .geo import SyntheticTraceParams, build_dataset, gen_synthetic_traces, load_trace_csv, stack_windows
from .io import load_checkpoint, read_sidecar, save_checkpoint, stream_seed, write_metrics
from .predictor import TrajectoryModel, evaluate_rmse

LOSS_SCHEMA = ["epoch", "train_rmse", "val_rmse"]
PRED_EVAL_SCHEMA = ["method", "split", "windows", "rmse"]
AGENT_TRAIN_SCHEMA = ["episode", "weighted_avg_completion", "remaining_energy", "violations"]
AGENT_EVAL_SCHEMA = ["method", "objective_mean", "objective_std", "violation_rate", "energy_used",
                     "reward_mean"]
BASELINE_KINDS = {"RUEC", "PAWP", "LSTM_PRED", "VANILLA_PRED"}


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    scenario: Scenario | None = None
    predictor: dict = field(default_factory=dict)
    agent: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    known = {"seed", "output_dir", "scenario", "predictor", "agent", "baseline"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
    run = RunConfig(seed=int(data.get("seed", 0)), output_dir=str(data.get("output_dir", "out")),
                    predictor=dict(data.get("predictor", {})), agent=dict(data.get("agent", {})),
                    baseline=dict(data.get("baseline", {})), base_dir=path.parent)
    sc = data.get("scenario")
    if isinstance(sc, str):
        run.scenario = load_scenario(run.resolve(sc))
    elif isinstance(sc, dict):
        run.scenario = Scenario.from_dict(sc)
        src = run.scenario.traces.get("path")
        if src is not None:
            if not run.resolve(src).exists():
                raise ConfigError(f"scenario trace file {src} does not exist")
            run.scenario.traces = {"path": str(run.resolve(src))}
    elif sc is not None:
        raise ConfigError("scenario must be a path or an object")
    for section, key in (("predictor", "data"),):
        src = getattr(run, section).get(key, {}).get("path")
        if src is not None and not run.resolve(src).exists():
            raise ConfigError(f"{section}.{key}.path {src} does not exist")
    ck = run.agent.get("predictor_checkpoint")
    if ck is not None and not run.resolve(ck).exists():
        raise ConfigError(f"agent.predictor_checkpoint {ck} does not exist")
    return run


# ---------------------------------------------------------------------------
# predictor pipelines
# ---------------------------------------------------------------------------

def _predictor_traces(run: RunConfig):
    data = run.predictor.get("data", {"synthetic": {}})
    if "path" in data:
        return [t.points for t in load_trace_csv(str(run.resolve(data["path"])))]
    syn = dict(data.get("synthetic", {}))
    users = int(syn.pop("users", 10))
    length = int(syn.pop("length", 2000))
    seed = int(syn.pop("seed", run.seed))
    return [t.points for t in gen_synthetic_traces(users, length, seed, SyntheticTraceParams(**syn))]


def predictor_dataset(run: RunConfig, T_h: int, T_p: int):
    stride = int(run.predictor.get("data", {}).get("stride", 1))
    return build_dataset(_predictor_traces(run), T_h, T_p, stride)


SHARED_PREDICTOR_KEYS = ("T_h", "T_p", "learning_rate", "batch_size", "max_epochs", "patience")


def predictor_config(run: RunConfig, kind: str) -> dict:
    """Config dict for ``kind``.

    ``baseline.<kind>`` wins when present.  Otherwise a baseline inherits the
    training keys of the main predictor config; the vanilla transformer also
    keeps its width and stacks all encoder layers in a single stage.
    """
    if kind in run.baseline:
        return dict(run.baseline[kind])
    main = dict(run.predictor.get("config", {}))
    if kind == run.predictor.get("kind", "hmt"):
        return main
    shared = {k: main[k] for k in SHARED_PREDICTOR_KEYS if k in main}
    if kind == "vanilla":
        for k in ("d_model", "h", "d_ff", "use_pe"):
            if k in main:
                shared[k] = main[k]
        shared.update(M=1, w=[1], L_enc=[int(sum(main.get("L_enc", (2, 2, 2))))])
    return shared


def make_predictor(run: RunConfig, kind: str | None = None) -> TrajectoryModel:
    kind = kind or run.predictor.get("kind", "hmt")
    cfg = predictor_config(run, kind)
    try:
        return build_model(kind, cfg, seed=stream_seed(run.seed, f"predictor.{kind}.init"))
    except TypeError as exc:
        raise ConfigError(f"bad predictor config: {exc}") from exc


def save_predictor(model: TrajectoryModel, path: Path) -> None:
    save_checkpoint(model.state_arrays(), path, {"kind": model.kind, "config": model.cfg.to_dict()})


def load_predictor(path: Path) -> TrajectoryModel:
    meta = read_sidecar(path)
    model = build_model(meta["kind"], meta["config"])
    model.load_arrays(load_checkpoint(path))
    return model


def run_train_predictor(run: RunConfig, out: Path, kind: str | None = None, method: str | None = None) -> dict:
    model = make_predictor(run, kind)
    split = predictor_dataset(run, model.T_h, model.T_p)
    from .predictor import train_predictor
    result = train_predictor(model, split, seed=stream_seed(run.seed, f"predictor.{model.kind}.shuffle"))
    rows = [{"epoch": e, "train_rmse": tr, "val_rmse": va} for e, tr, va in result.history]
    schema = LOSS_SCHEMA
    if method is not None:
        rows = [{"method": method, **r} for r in rows]
        schema = ["method"] + LOSS_SCHEMA
    write_metrics(rows, schema, out / f"predictor_{model.kind}_loss.csv")
    ckpt = out / f"predictor_{model.kind}.amec"
    save_predictor(model, ckpt)
    test = float("nan")
    if split.test:
        test = evaluate_rmse(model, *stack_windows(split.test))
    return {"kind": model.kind, "epochs": len(result.history), "best_epoch": result.best_epoch,
            "best_val_rmse": result.best_val, "test_rmse": test, "checkpoint": str(ckpt)}


def run_eval_predictor(run: RunConfig, checkpoint: Path, out: Path) -> dict:
    model = load_predictor(checkpoint)
    split = predictor_dataset(run, model.T_h, model.T_p)
    rows = []
    for name in ("train", "validation", "test"):
        windows = getattr(split, name)
        if windows:
            rows.append({"method": model.kind, "split": name, "windows": len(windows),
                         "rmse": evaluate_rmse(model, *stack_windows(windows))})
    write_metrics(rows, PRED_EVAL_SCHEMA, out / "predictor_eval.csv")
    return {r["split"]: r["rmse"] for r in rows}


# ---------------------------------------------------------------------------
# agent pipelines
# ---------------------------------------------------------------------------

def _require_scenario(run: RunConfig) -> Scenario:
    if run.scenario is None:
        raise ConfigError("this command needs a 'scenario' entry in the run config")
    return run.scenario


def agent_config(run: RunConfig, pawp: bool = False) -> AgentConfig:
    d = {k: v for k, v in run.agent.items() if k not in ("predictor_checkpoint", "eval_episodes")}
    if pawp:
        d["T_p"] = 0
    try:
        return AgentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(f"bad agent config: {exc}") from exc


def eval_seeds(run: RunConfig) -> list[int]:
    n = int(run.agent.get("eval_episodes", 10))
    rng = np.random.default_rng(stream_seed(run.seed, "eval.episodes"))
    return [int(x) for x in rng.integers(0, 2**31, size=n)]


def run_train_agent(run: RunConfig, out: Path, pawp: bool = False,
                    predictor_ckpt: Path | None = None) -> dict:
    scenario = _require_scenario(run)
    cfg = agent_config(run, pawp)
    method = "PAWP" if pawp else "PETO"
    predictor = None
    if cfg.T_p > 0:
        ck = predictor_ckpt or (run.resolve(run.agent["predictor_checkpoint"])
                                if "predictor_checkpoint" in run.agent else None)
        if ck is None:
            raise ConfigError("PETO needs agent.predictor_checkpoint or --predictor")
        predictor = load_predictor(Path(ck))
    env = make_env(scenario, seed=stream_seed(run.seed, "env.train"))
    agent = PetoAgent((scenario.env.U, scenario.env.N), cfg, predictor,
                      seed=stream_seed(run.seed, "agent.init"))
    log = train_peto(env, agent, seed=stream_seed(run.seed, "agent.train"))
    rows = [{"episode": m.episode, "weighted_avg_completion": m.weighted_avg_completion,
             "remaining_energy": m.remaining_energy, "violations": m.violations} for m in log.episodes]
    name = "agent" if not pawp else "pawp"
    write_metrics(rows, AGENT_TRAIN_SCHEMA, out / f"{name}_train.csv")
    tensors = {n: t.data for n, t in agent.named_parameters()}
    meta = {"method": method, "agent": cfg.to_dict(), "U": scenario.env.U, "N": scenario.env.N}
    if predictor is not None:
        tensors.update({f"predictor.{k}": v for k, v in predictor.state_arrays().items()})
        meta["predictor"] = {"kind": predictor.kind, "config": predictor.cfg.to_dict()}
    ckpt = out / f"{name}.amec"
    save_checkpoint(tensors, ckpt, meta)
    return {"method": method, "episodes": len(rows), "checkpoint": str(ckpt),
            "final_objective": rows[-1]["weighted_avg_completion"] if rows else float("nan")}


def load_agent(path: Path) -> tuple[PetoAgent, str]:
    meta = read_sidecar(path)
    arrays = load_checkpoint(path)
    predictor = None
    if "predictor" in meta:
        predictor = build_model(meta["predictor"]["kind"], meta["predictor"]["config"])
        predictor.load_arrays({k[len("predictor."):]: v for k, v in arrays.items()
                               if k.startswith("predictor.")})
    agent = PetoAgent((meta["U"], meta["N"]), AgentConfig.from_dict(meta["agent"]), predictor)
    for name, t in agent.named_parameters():
        if name not in arrays or arrays[name].shape != t.shape:
            raise ConfigError(f"agent checkpoint tensor {name} missing or mis-shaped")
        t.data = arrays[name].copy()
    return agent, meta["method"]


def run_eval_agent(run: RunConfig, checkpoint: Path, out: Path, filename: str = "agent_eval.csv") -> dict:
    scenario = _require_scenario(run)
    agent, method = load_agent(checkpoint)
    if (agent.U, agent.N) != (scenario.env.U, scenario.env.N):
        raise ConfigError("agent checkpoint was trained for a different U x N")
    env = make_env(scenario, seed=stream_seed(run.seed, "env.eval"))
    summary = evaluate_policy(env, agent_policy(agent), eval_seeds(run)).to_dict()
    row = {"method": method, **summary}
    write_metrics([row], AGENT_EVAL_SCHEMA, out / filename)
    return row


def run_baseline(run: RunConfig, kind: str, out: Path) -> dict:
    if kind not in BASELINE_KINDS:
        raise ConfigError(f"unknown baseline {kind!r}; expected one of {sorted(BASELINE_KINDS)}")
    if kind == "RUEC":
        scenario = _require_scenario(run)
        env = make_env(scenario, seed=stream_seed(run.seed, "env.eval"))
        summary = run_ruec(env, eval_seeds(run), rng_seed=stream_seed(run.seed, "ruec.policy"))
        row = {"method": "RUEC", **summary}
        write_metrics([row], AGENT_EVAL_SCHEMA, out / "ruec_eval.csv")
        return row
    if kind == "PAWP":
        info = run_train_agent(run, out, pawp=True)
        return run_eval_agent(run, Path(info["checkpoint"]), out, "pawp_eval.csv")
    model_kind = {"LSTM_PRED": "lstm", "VANILLA_PRED": "vanilla"}[kind]
    return run_train_predictor(run, out, kind=model_kind, method=kind)
