from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..geo import SyntheticTraceParams, gen_synthetic_traces, load_trace_csv
from .config import ConfigError, EnvConfig, Scenario
from .wban import WBANEnv


def load_scenario(path: str | Path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    scenario = Scenario.from_dict(data)
    src = scenario.traces.get("path")
    if src is not None:
        src = Path(src)
        if not src.is_absolute():
            src = Path(path).parent / src
        if not src.exists():
            raise ConfigError(f"trace file {src} does not exist")
        scenario.traces = {"path": str(src)}
    return scenario


def scenario_traces(scenario: Scenario) -> np.ndarray:
    cfg = scenario.env
    if "path" in scenario.traces:
        traces = load_trace_csv(scenario.traces["path"])
        if len(traces) < cfg.U:
            raise ConfigError(f"trace file has {len(traces)} users, scenario needs {cfg.U}")
        length = min(len(t) for t in traces[:cfg.U])
        return np.stack([t.points[:length] for t in traces[:cfg.U]])
    spec = dict(scenario.traces["synthetic"])
    seed = int(spec.pop("seed", 0))
    length = int(spec.pop("length", 2000))
    stationary = bool(spec.pop("stationary", False))
    params = SyntheticTraceParams(**spec)
    traces = gen_synthetic_traces(cfg.U, length, seed, params)
    pts = np.stack([t.points for t in traces])
    if stationary:
        pts = np.repeat(pts[:, :1], length, axis=1)
    return pts


def make_env(scenario: Scenario, seed: int = 0) -> WBANEnv:
    return WBANEnv(scenario.env, scenario_traces(scenario), scenario.phi, scenario.rho, seed)


def desk_scenario(U: int = 3, N: int = 2, T: int = 30, trace_seed: int = 0,
                  length: int = 2000, extent: float = 400.0, stationary: bool = False,
                  **env_overrides) -> Scenario:
    """Small scenario with shrunk task sizes (see :func:`desk_config`)."""
    from .config import desk_config
    cfg = desk_config(U=U, N=N, T=T, **env_overrides)
    synth = {"seed": trace_seed, "length": length, "extent": extent}
    if stationary:
        synth["stationary"] = True
    return Scenario(cfg, {"synthetic": synth})
