import math

import numpy as np
import pytest

from straightline import crit, slot
from uavmec.env import (ALPHA_HIGH, ALPHA_LOW, Action, ConfigError, CriticalityChain, EnvConfig,
                        EnvState, EpisodeFinished, Scenario, WBANEnv, channel_model,
                        criticality_index, decode_action, desk_scenario, fly_and_energy,
                        load_scenario, local_compute, make_env, slot_outcome, state_vector,
                        step_criticality, transmission, uav_compute)
from uavmec.env.config import PHI_LEVELS, RHO_LEVELS
from uavmec.tensorcore import ContractError

CFG = EnvConfig()


def test_criticality_examples():
    assert criticality_index(1, 1, 1) == 1.0
    assert criticality_index(0.25, 0.2, 0.5) == pytest.approx(0.95 / 3, rel=1e-15)
    assert criticality_index(0.5, 0.2, 0.5) > criticality_index(0.25, 0.2, 0.5)
    with pytest.raises(ContractError):
        criticality_index(0.3, 0.2, 0.5)


def test_chain_stay_fraction():
    rng = np.random.default_rng(0)
    chain = CriticalityChain()
    a, stays = ALPHA_LOW, 0
    n = 100_000
    for _ in range(n):
        b = step_criticality(chain, a, rng)
        stays += b == a
        a = b
    assert abs(stays / n - 0.7) < 0.01


def test_chain_identity_and_determinism():
    chain = CriticalityChain(np.eye(2))
    alpha = np.array([ALPHA_LOW, ALPHA_HIGH, ALPHA_LOW])
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert np.array_equal(step_criticality(chain, alpha, rng), alpha)
    seq = lambda: [step_criticality(CriticalityChain(), alpha, r) for r in [np.random.default_rng(5)] * 20]
    assert all(np.array_equal(x, y) for x, y in zip(seq(), seq()))
    with pytest.raises(ContractError):
        step_criticality(CriticalityChain(), 0.7, rng)


def test_channel_examples():
    beta, p, g = channel_model(np.array([[3.0, 4.0], [103.0, 4.0]]), np.array([3.0, 4.0]), CFG)
    assert beta[0] == 90.0
    assert beta[1] == pytest.approx(45.0, rel=1e-14)
    from uavmec.env.formulas import los_probability
    assert los_probability(15.0, 10, 0.6) == pytest.approx(1 / (1 + 10 * math.exp(-3)), rel=1e-14)
    assert los_probability(15.0, 10, 0.6) == pytest.approx(0.6676, abs=1e-4)
    d0 = CFG.H
    expected = (p[0] * CFG.g0 + (1 - p[0]) * CFG.kappa * CFG.g0) / d0 ** CFG.varsigma
    assert g[0] == pytest.approx(expected, rel=1e-14)


def test_transmission_examples():
    cfg = EnvConfig(P_u=1.0, N0=1.0)
    I = np.array([[0.6, 0.9]])
    R, T = transmission(I, np.array([[8e6, 8e6]]), np.array([[1, 0]]), np.array([1.0]), cfg)
    assert R[0, 0] == pytest.approx(1e6, rel=1e-14)
    assert T[0, 0] == pytest.approx(8.0, rel=1e-14)
    assert math.isnan(R[0, 1])
    I = np.array([[0.5, 0.5]])
    R, _ = transmission(I, np.ones((1, 2)), np.ones((1, 2)), np.array([1.0]), cfg)
    assert R[0, 0] == R[0, 1]
    assert R[0, 0] == pytest.approx(0.5e6 * math.log2(1.5), rel=1e-14)
    # no offloaded tasks for a user: nothing computed, no error
    R, T = transmission(I, np.ones((1, 2)), np.zeros((1, 2)), np.array([1.0]), cfg)
    assert np.all(np.isnan(R))


def test_local_examples():
    f, T = local_compute(np.array([[0.5]]), np.array([[1e9]]), np.array([[0]]), CFG)
    assert f[0, 0] == CFG.V_u and T[0, 0] == 1.0
    f, T = local_compute(np.array([[0.5, 0.5]]), np.full((1, 2), 1e9), np.zeros((1, 2)), CFG)
    np.testing.assert_array_equal(T, [[2.0, 2.0]])
    rng = np.random.default_rng(0)
    I = rng.choice([0.4, 0.55, 0.7, 0.85], size=(4, 5))
    z = rng.integers(0, 2, size=(4, 5))
    z[:, 0] = 0
    f, _ = local_compute(I, np.ones_like(I), z, CFG)
    np.testing.assert_allclose(np.nansum(f, axis=1), CFG.V_u, rtol=1e-15)


def test_uav_examples():
    f, T, E = uav_compute(np.array([[0.5]]), np.array([[1e9]]), np.array([[1]]), CFG)
    assert f[0, 0] == CFG.F_v and T[0, 0] == pytest.approx(0.1, rel=1e-15)
    f, T, E = uav_compute(np.array([[0.5], [0.5]]), np.full((2, 1), 1e9), np.ones((2, 1)), CFG)
    np.testing.assert_allclose(f, 5e9, rtol=1e-15)
    np.testing.assert_allclose(T, 0.2, rtol=1e-15)
    np.testing.assert_allclose(E, 25.0, rtol=1e-12)
    f, T, E = uav_compute(np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2)), CFG)
    assert np.all(np.isnan(f)) and np.all(E == 0)


def test_fly_examples():
    pos, E = fly_and_energy((0.0, 0.0), 10.0, 0.0, CFG)
    np.testing.assert_array_equal(pos, [10.0, 0.0])
    assert E == pytest.approx(9.0, rel=1e-14)
    pos, _ = fly_and_energy((0.0, 0.0), 10.0, math.pi / 2, CFG)
    np.testing.assert_allclose(pos, [0.0, 10.0], atol=1e-12)
    _, E0 = fly_and_energy((0.0, 0.0), 0.0, 0.0, CFG)
    assert E0 == CFG.gamma2 / CFG.v_hover * CFG.t_fly
    pos, _ = fly_and_energy((0.0, 0.0), 50.0, 0.0, CFG, arena=np.array([-10, -10, 20, 20]))
    np.testing.assert_array_equal(pos, [20.0, 0.0])
    with pytest.raises(ContractError):
        fly_and_energy((0, 0), 51.0, 0.0, CFG)


def _params(cfg):
    return {k: getattr(cfg, k) for k in ("t_fly", "v_hover", "gamma1", "gamma2", "H", "a", "b",
                                         "g0", "kappa", "varsigma", "W_u", "P_u", "N0", "F_v",
                                         "V_u", "eta", "tau_c")}


def _random_state(rng, U, N, cfg):
    phi = rng.choice(PHI_LEVELS, size=U)
    rho = rng.choice(RHO_LEVELS, size=(U, N))
    alpha = rng.choice([ALPHA_LOW, ALPHA_HIGH], size=(U, N))
    D = rng.uniform(*cfg.data_bits, size=(U, N))
    C = rng.uniform(*cfg.cycles, size=(U, N))
    return EnvState(1, rng.uniform(-300, 300, size=(U, 2)), rng.uniform(-300, 300, size=2),
                    cfg.E_uav * rng.uniform(0.0, 1.0), phi, rho, alpha, D, C)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_matches_straightline_oracle():
    rng = np.random.default_rng(2024)
    positive = 0
    for _ in range(100):
        sizes = {} if rng.random() < 0.3 else dict(data_bits=(1e4, 5e4), cycles=(1e7, 2e8))
        cfg = EnvConfig(H=rng.uniform(50, 150), varsigma=rng.uniform(2, 3),
                        E_uav=rng.uniform(50, 1e3), **sizes)
        U, N = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        s = _random_state(rng, U, N, cfg)
        z = rng.integers(0, 2, size=(U, N))
        v, sigma = rng.uniform(0, cfg.V_max), rng.uniform(0, 2 * math.pi)
        out = slot_outcome(cfg, s, Action(v, sigma, z))
        ref = slot(_params(cfg), s.user_pos.tolist(), s.uav_pos.tolist(), v, sigma,
                   s.I.tolist(), s.D.tolist(), s.C.tolist(), z.tolist(), s.E_remain)
        assert _rel(out.E_fly, ref["E_fly"]) < 1e-9
        for u in range(U):
            assert _rel(out.gain[u], ref["gain"][u]) < 1e-9
            for n in range(N):
                assert _rel(s.I[u, n], crit(s.phi[u], s.rho[u, n], s.alpha[u, n])) < 1e-12
                for key in ("f_loc", "T_loc", "R", "T_trans", "f_uav", "T_comp"):
                    mine, want = getattr(out, key)[u, n], ref[key][u][n]
                    assert (want is None) == bool(np.isnan(mine))
                    if want is not None:
                        assert _rel(mine, want) < 1e-9
                for key in ("E_comp", "T_total", "Psi"):
                    assert _rel(getattr(out, key)[u, n], ref[key][u][n]) < 1e-9
        assert out.weighted_completion == pytest.approx(ref["objective"], rel=1e-9)
        if ref["reward"] == 0:
            assert out.reward == 0.0
        else:
            assert _rel(out.reward, ref["reward"]) < 1e-9
            positive += 1
    assert positive >= 10


def test_single_task_reward_closed_form():
    cfg = EnvConfig(data_bits=(4e4, 4e4), cycles=(1e8, 1e8))
    s = EnvState(1, np.zeros((1, 2)), np.zeros(2), cfg.E_uav, np.array([1.0]), np.array([[1.0]]),
                 np.array([[1.0]]), np.array([[4e4]]), np.array([[1e8]]))
    out = slot_outcome(cfg, s, Action(0.0, 0.0, np.array([[1]])))
    g = (1 / (1 + 10 * math.exp(-0.6 * 80)) * (1 - 0.2) + 0.2) * cfg.g0 / 100 ** 2.3
    T_tr = 4e4 / (cfg.W_u * math.log2(1 + cfg.P_u * g / cfg.N0))
    T_c = 1e8 / cfg.F_v
    assert out.reward == pytest.approx(1.0 * (cfg.tau_c - T_tr - T_c), rel=1e-12)
    assert out.omega_time == 1 and out.omega_uav == 1


def test_violation_gives_exact_zero():
    cfg = EnvConfig()  # table task sizes cannot meet the budget
    rng = np.random.default_rng(0)
    s = _random_state(rng, 3, 2, cfg)
    out = slot_outcome(cfg, s, Action(5.0, 1.0, np.ones((3, 2), int)))
    assert out.omega_time == 0
    assert out.reward == 0.0 and math.copysign(1, out.reward) == 1


def test_scaling_criticality_leaves_allocations_unchanged():
    rng = np.random.default_rng(7)
    I = rng.uniform(0.3, 1.0, size=(3, 4))
    z = rng.integers(0, 2, size=(3, 4))
    z[:, 0], z[:, 1] = 0, 1
    D, C, g = rng.uniform(1, 2, (3, 4)), rng.uniform(1e8, 2e8, (3, 4)), rng.uniform(1e-8, 1e-7, 3)
    for k in (0.5, 3.0):
        for fn, args in ((local_compute, (C, z, CFG)), (uav_compute, (C, z, CFG)),
                         (transmission, (D, z, g, CFG))):
            a, b = fn(I, *args)[:2], fn(k * I, *args)[:2]
            for x, y in zip(a, b):
                np.testing.assert_allclose(x, y, rtol=1e-12)


def test_episode_ledger_and_finish():
    env = make_env(desk_scenario(U=3, N=2, T=30, E_uav=2500.0), seed=3)
    s = env.reset()
    rng = np.random.default_rng(0)
    energies, prev = [], s.E_remain
    for _ in range(30):
        raw = rng.random(env.action_dim)
        s, out = env.step(decode_action(raw, 3, 2, env.cfg.V_max))
        energies.append(out.energy)
        assert s.E_remain <= prev
        prev = s.E_remain
        if out.violated:
            assert out.reward == 0.0
        else:
            assert out.reward > 0.0
    assert out.done
    expected = env.cfg.E_uav - math.fsum(energies)
    assert abs(s.E_remain - expected) <= 1e-9 * abs(expected)
    with pytest.raises(EpisodeFinished):
        env.step(decode_action(rng.random(env.action_dim), 3, 2, env.cfg.V_max))


def test_state_vector_layout():
    env = make_env(Scenario(), seed=0)
    s = env.reset()
    vec = env.state_vector()
    assert len(vec) == env.state_dim == 73
    assert vec[-1] == 1.0
    s.user_pos[:] = env.arena[:2]
    assert np.all(state_vector(s, env.arena, env.cfg)[50:70] == 0.0)


def test_env_determinism():
    def run():
        env = make_env(desk_scenario(), seed=9)
        env.reset()
        rng = np.random.default_rng(1)
        rows = []
        for _ in range(env.cfg.T):
            s, out = env.step(decode_action(rng.random(env.action_dim), 3, 2, 50.0))
            rows.append(np.concatenate([env.state_vector(), [out.reward]]))
        return np.array(rows)
    assert np.array_equal(run(), run())


def test_uav_starts_at_user_centroid():
    env = make_env(desk_scenario(), seed=0)
    s = env.reset()
    np.testing.assert_allclose(s.uav_pos, s.user_pos.mean(0))


def test_decode_action_bounds():
    a = decode_action(np.zeros(4), 1, 2, 50.0)
    assert a.v == 0.0 and a.sigma == 0.0 and a.z.tolist() == [[0, 0]]
    a = decode_action(np.ones(4), 1, 2, 50.0)
    assert a.v == 50.0 and a.sigma == 2 * math.pi and a.z.tolist() == [[1, 1]]
    assert decode_action(np.full(4, 0.5), 1, 2, 50.0).z.tolist() == [[1, 1]]
    with pytest.raises(ContractError):
        decode_action(np.full(4, 1.5), 1, 2, 50.0)


def test_scenario_file_round_trip(tmp_path):
    sc = desk_scenario(U=2, N=2, T=10, length=300)
    path = tmp_path / "s.json"
    import json
    path.write_text(json.dumps(sc.to_dict()))
    back = load_scenario(path)
    assert back.to_dict() == sc.to_dict()
    bad = sc.to_dict()
    bad["warp_drive"] = 1
    path.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_scenario(path)
    with pytest.raises(ConfigError):
        EnvConfig(H=-1)


def test_observed_history_padding():
    env = make_env(desk_scenario(), seed=0)
    s = env.reset()
    h = env.observed_history(5)
    assert h.shape == (3, 5, 2)
    assert np.all(h == s.user_pos[:, None, :])
    s2, _ = env.step(Action(0.0, 0.0, np.zeros((3, 2), int)))
    h = env.observed_history(5)
    np.testing.assert_array_equal(h[:, -1], s2.user_pos)
    np.testing.assert_array_equal(h[:, 0], s.user_pos)
