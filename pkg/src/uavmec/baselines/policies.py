from __future__ import annotations

import math

import numpy as np

from ..env import Action, EnvConfig, WBANEnv


def ruec_policy(cfg: EnvConfig, rng: np.random.Generator) -> Action:
    """Random speed and heading; every task offloaded."""
    v = float(rng.uniform(0.0, cfg.V_max))
    sigma = float(rng.uniform(0.0, 2 * math.pi))
    return Action(v, sigma, np.ones((cfg.U, cfg.N), dtype=int))


def run_ruec(env: WBANEnv, seeds, rng_seed: int = 0) -> dict:
    """Evaluate RUEC with its own rollout loop, one episode per seed.

    Returns the same summary keys as the agent evaluator.
    """
    rng = np.random.default_rng(rng_seed)
    objectives, violations, slots, energy, rewards = [], 0, 0, [], []
    for seed in seeds:
        env.reset(seed=int(seed))
        psi, total = [], 0.0
        while True:
            action = ruec_policy(env.cfg, rng)
            assert np.all(action.z == 1), "RUEC must offload every task"
            _, out = env.step(action)
            psi.append(out.weighted_completion)
            violations += int(out.violated)
            total += out.reward
            slots += 1
            if out.done:
                break
        objectives.append(float(np.mean(psi)))
        energy.append(env.cfg.E_uav - env.state.E_remain)
        rewards.append(total)
    obj = np.array(objectives)
    return {"objective_mean": float(obj.mean()), "objective_std": float(obj.std()),
            "violation_rate": violations / slots, "energy_used": float(np.mean(energy)),
            "reward_mean": float(np.mean(rewards))}
