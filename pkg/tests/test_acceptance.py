"""Acceptance criteria 1-9.  Each test records one pass/fail line (see conftest)."""
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import CRITERIA
from cli_config import run_all, write_config
from protocols import compare_agents, compare_predictors, grid_oracle_episode, scenario_predictor
from straightline import slot
from test_env import _params, _random_state, _rel
from test_tensorcore import PRIMITIVES, param
from uavmec.agent import AgentConfig, BetaActor, PetoAgent, agent_policy, evaluate_policy, train_peto
from uavmec.cli import main
from uavmec.env import Action, EnvConfig, decode_action, desk_scenario, make_env, slot_outcome
from uavmec.predictor import PredictorConfig, hierarchical_forward, init_hmt, multi_head_attention, rmse, stage_ledger
from uavmec.tensorcore import Tensor
from uavmec.tensorcore.gradcheck import check_gradients


def record(k: int, ok: bool, detail: str) -> None:
    CRITERIA[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


# 1 ------------------------------------------------------------------------

def _bandwidth_share(R, gain, cfg):
    f = lambda s: s * cfg.W_u * math.log2(1 + s * cfg.P_u * gain / cfg.N0) - R
    return brentq(f, 1e-12, 1.0, xtol=1e-16, rtol=1e-15)


def test_criterion_1_equation_suite():
    rng = np.random.default_rng(1)
    draws = []
    for _ in range(100):
        sizes = {} if rng.random() < 0.3 else dict(data_bits=(1e4, 5e4), cycles=(1e7, 2e8))
        cfg = EnvConfig(H=rng.uniform(50, 150), varsigma=rng.uniform(2, 3), E_uav=rng.uniform(50, 1e3),
                        **sizes)
        U, N = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        s = _random_state(rng, U, N, cfg)
        z = rng.integers(0, 2, size=(U, N))
        draws.append((cfg, s, z, rng.uniform(0, cfg.V_max), rng.uniform(0, 2 * math.pi)))
    t0 = time.perf_counter()
    outs = [slot_outcome(cfg, s, Action(v, sg, z)) for cfg, s, z, v, sg in draws]
    elapsed = time.perf_counter() - t0

    worst, share_err = 0.0, 0.0
    for (cfg, s, z, v, sg), out in zip(draws, outs):
        ref = slot(_params(cfg), s.user_pos.tolist(), s.uav_pos.tolist(), v, sg, s.I.tolist(),
                   s.D.tolist(), s.C.tolist(), z.tolist(), s.E_remain)
        pairs = [(out.E_fly, ref["E_fly"]), (out.weighted_completion, ref["objective"]),
                 (out.reward, ref["reward"])]
        U, N = z.shape
        for u in range(U):
            pairs.append((out.gain[u], ref["gain"][u]))
            for n in range(N):
                for key in ("f_loc", "T_loc", "R", "T_trans", "f_uav", "T_comp"):
                    want = ref[key][u][n]
                    assert (want is None) == bool(np.isnan(getattr(out, key)[u, n]))
                    if want is not None:
                        pairs.append((getattr(out, key)[u, n], want))
                for key in ("E_comp", "T_total", "Psi"):
                    pairs.append((getattr(out, key)[u, n], ref[key][u][n]))
        worst = max([worst] + [_rel(a, b) if b != 0 else abs(a) for a, b in pairs])
        # resource shares
        for u in range(U):
            if np.any(z[u] == 0):
                share_err = max(share_err, _rel(np.nansum(out.f_loc[u]), cfg.V_u))
            if np.any(z[u] == 1):
                shares = [_bandwidth_share(out.R[u, n], out.gain[u], cfg) for n in range(N) if z[u, n]]
                share_err = max(share_err, abs(math.fsum(shares) - 1.0))
        if np.any(z == 1):
            share_err = max(share_err, _rel(np.nansum(out.f_uav), cfg.F_v))
    ok = worst < 1e-9 and share_err < 1e-12 and elapsed < 1.0
    record(1, ok, f"max rel err {worst:.2e}, share err {share_err:.1e}, {elapsed * 1e3:.0f} ms for 100 draws")
    assert ok


# 2 ------------------------------------------------------------------------

def test_criterion_2_gradient_suite():
    t0 = time.perf_counter()
    worst = {}
    for name, fn in PRIMITIVES.items():
        for seed in range(10):
            rng = np.random.default_rng(seed)
            a, b = param(rng, 3, 4), param(rng, 3, 4)
            r = Tensor(rng.normal(size=(3, 4)))
            worst[name] = max(worst.get(name, 0.0), check_gradients(lambda: fn(a, b, r), [a, b]))
    cfg = PredictorConfig(M=2, w=(2, 2), d_model=8, h=2, L_enc=(1, 1), T_h=8, T_p=3)
    rng = np.random.default_rng(4)
    params = init_hmt(cfg, rng)
    x, y = rng.normal(size=(3, 8, 2)), rng.normal(size=(3, 3, 2))
    worst["tiny_hierarchical"] = check_gradients(
        lambda: rmse(hierarchical_forward(Tensor(x), cfg, params), Tensor(y)), params.tensors())
    elapsed = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    ok = max(worst.values()) < 1e-3 and elapsed < 30
    record(2, ok, f"{len(worst)} checks, worst {top} {worst[top]:.1e}, {elapsed:.1f} s")
    assert ok


# 3 ------------------------------------------------------------------------

def test_criterion_3_shapes_and_invariants():
    led = stage_ledger(PredictorConfig())
    ledger_ok = ([(s.K, s.G, s.j, s.pad) for s in led] == [(30, 4, 2, 0), (15, 128, 64, 0), (8, 128, 64, 1)])
    rng = np.random.default_rng(0)
    row_err = 0.0
    for K, d, h in ((30, 64, 4), (15, 64, 4), (8, 64, 4), (1, 8, 2), (7, 16, 2)):
        p = {k: Tensor(rng.normal(0, 0.5, size=(d, d))) for k in ("W_q", "W_k", "W_v", "W_o")}
        _, A = multi_head_attention(Tensor(rng.normal(size=(3, K, d)) * 3), p, h, return_weights=True)
        W = A.data if isinstance(A, Tensor) else A
        row_err = max(row_err, float(np.max(np.abs(W.sum(-1) - 1.0))))
    actor = BetaActor(10, 4, 32, np.random.default_rng(1))
    S = np.random.default_rng(2).normal(size=(25_000, 10)) * 5
    x, _ = actor.sample(S, np.random.default_rng(3))
    beta_ok = x.shape == (25_000, 4) and bool(np.all((x >= 0) & (x <= 1)))
    ok = ledger_ok and row_err <= 1e-12 and beta_ok
    record(3, ok, f"ledger {'ok' if ledger_ok else 'WRONG'}, attention row err {row_err:.1e}, "
                  f"1e5 Beta draws in [0,1]: {beta_ok}")
    assert ok


# 4, 5 ---------------------------------------------------------------------

PREDICTOR_SEEDS = range(10)
_predictor_runs: dict = {}


def _predictor_run(seed):
    if seed not in _predictor_runs:
        _predictor_runs[seed] = compare_predictors(seed)
    return _predictor_runs[seed]


@pytest.mark.slow
def test_criterion_4_predictor_ordering():
    t0 = time.perf_counter()
    rows = []
    for seed in PREDICTOR_SEEDS:
        r = _predictor_run(seed)
        rows.append((r["hmt"]["rmse"], r["vanilla"]["rmse"], r["lstm"]["rmse"]))
        print(f"  seed {seed}: hmt {rows[-1][0]:.3f} vanilla {rows[-1][1]:.3f} lstm {rows[-1][2]:.3f}")
    elapsed = time.perf_counter() - t0
    rows = np.array(rows)
    ordered = int(np.sum((rows[:, 0] <= rows[:, 1]) & (rows[:, 1] <= rows[:, 2])))
    gain = 1.0 - rows[:, 0].mean() / rows[:, 2].mean()
    ok = ordered >= 7 and gain >= 0.2 and elapsed < 15 * 60 * 4
    record(4, ok, f"ordering hmt<=vanilla<=lstm in {ordered}/10 seeds, mean RMSE hmt "
                  f"{rows[:, 0].mean():.3f} vanilla {rows[:, 1].mean():.3f} lstm {rows[:, 2].mean():.3f} "
                  f"(hmt {100 * gain:.1f}% below lstm), {elapsed / 60:.1f} core-min")
    assert ok


@pytest.mark.slow
def test_criterion_5_convergence():
    run = _predictor_run(0)["hmt"]
    hist = run["history"]
    first = hist[0][1]
    below = [e for e, tr, _ in hist if tr < 0.2 * first]
    ok = bool(below) and below[0] <= 50 and run["stopped_early"] and len(hist) < 200
    record(5, ok, f"epoch-1 train RMSE {first:.3f}; below 20% at epoch "
                  f"{below[0] if below else 'never'}; stopped after {len(hist)} epochs "
                  f"(early={run['stopped_early']})")
    assert ok


# 6 ------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_agent_ordering():
    t0 = time.perf_counter()
    res = {k: [] for k in ("PETO", "PAWP", "RUEC")}
    viol = {k: [] for k in res}
    for seed in range(5):
        r = compare_agents(seed)
        for k in res:
            res[k].append(r[k]["objective_mean"])
            viol[k].append(r[k]["violation_rate"])
        print(f"  seed {seed}: " + " ".join(f"{k} {r[k]['objective_mean']:.4f}" for k in res))
    elapsed = time.perf_counter() - t0
    m = {k: float(np.mean(v)) for k, v in res.items()}
    v = {k: float(np.mean(x)) for k, x in viol.items()}
    drop = 1.0 - m["PETO"] / m["RUEC"]
    ok = (m["PETO"] < m["PAWP"] < m["RUEC"] and drop >= 0.2 and v["PETO"] <= v["RUEC"]
          and elapsed < 30 * 60 * 4)
    record(6, ok, f"mean weighted completion PETO {m['PETO']:.4f} PAWP {m['PAWP']:.4f} RUEC "
                  f"{m['RUEC']:.4f} (PETO {100 * drop:.1f}% below RUEC); violation rate PETO "
                  f"{v['PETO']:.3f} RUEC {v['RUEC']:.3f}; {elapsed / 60:.1f} core-min")
    assert ok


# 7 ------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_toy_optimality():
    t0 = time.perf_counter()
    scenario = desk_scenario(U=1, N=1, T=30, stationary=True)
    seeds = range(1000, 1010)
    oracle = float(np.mean([grid_oracle_episode(make_env(scenario), s) for s in seeds]))
    predictor = scenario_predictor(scenario, seed=0, max_epochs=5)
    agent = PetoAgent((1, 1), AgentConfig(), predictor, seed=0)
    train_peto(make_env(scenario, seed=1), agent, seed=2)
    learned = evaluate_policy(make_env(scenario), agent_policy(agent), seeds).reward_mean
    elapsed = time.perf_counter() - t0
    ratio = learned / oracle
    ok = ratio >= 0.9 and elapsed < 300
    record(7, ok, f"trained reward {learned:.3f} vs grid optimum {oracle:.3f} (ratio {ratio:.3f}), "
                  f"{elapsed:.0f} s")
    assert ok


# 8 ------------------------------------------------------------------------

def test_criterion_8_ledger_exactness():
    worst, zero_ok, violated = 0.0, True, 0
    for seed in range(20):
        E_uav = [50.0, 500.0, 2500.0, 5e5][seed % 4]
        env = make_env(desk_scenario(U=3, N=2, T=30, E_uav=E_uav, trace_seed=seed), seed=seed)
        s = env.reset()
        rng = np.random.default_rng(seed)
        energies = []
        done = False
        while not done:
            s, out = env.step(decode_action(rng.random(env.action_dim), 3, 2, env.cfg.V_max))
            energies.append(out.E_fly + math.fsum(out.E_comp.ravel()))
            if out.violated:
                violated += 1
                zero_ok &= out.reward == 0.0 and math.copysign(1.0, out.reward) == 1.0
            done = out.done
        expected = E_uav - math.fsum(energies)
        worst = max(worst, abs(s.E_remain - expected) / max(abs(expected), 1e-300))
    ok = worst <= 1e-9 and zero_ok and violated > 0
    record(8, ok, f"20 episodes, max rel ledger err {worst:.1e}, {violated} violated slots all reward 0")
    assert ok


# 9 ------------------------------------------------------------------------

def test_criterion_9_cli_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("AMEC_OUT", raising=False)
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    codes = run_all(main, cfg, a) + run_all(main, cfg, b)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    same = [f for f in files if (a / f).read_bytes() == (b / f).read_bytes()]
    listing_same = files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    ok = codes == [0] * len(codes) and listing_same and len(same) == len(files) and len(files) >= 15
    record(9, ok, f"{len(same)}/{len(files)} output files byte-identical across reruns")
    assert ok
