import json

import numpy as np
import pytest

from pnsynth import trainer
from pnsynth.coupling import named_map
from pnsynth.env import SynthEnv
from pnsynth.pauli import weight
from pnsynth.synthesizer import brute_force_optimal, verify
from pnsynth.trainer import (ConfigError, Difficulty, PPOConfig, TrainConfig, Trajectory, build_net,
                             collect_rollouts, curriculum_loop, gae, random_target)


def small_cfg(**kw):
    base = dict(cmap="2qL", conv_channels=16, hidden=64, seed=0,
                ppo=PPOConfig(rollout_steps=256, minibatch_size=64, lr=1e-3, n_envs=32))
    base.update(kw)
    return TrainConfig(**base)


@pytest.mark.parametrize("d_c,d_p", [(1, 0), (7, 0), (8, 1), (16, 2), (23, 2)])
def test_difficulty_d_p(d_c, d_p):
    assert Difficulty(d_c).d_p == d_p


def test_difficulty_and_config_validation():
    with pytest.raises(ConfigError):
        Difficulty(1, delta=0)
    with pytest.raises(ConfigError):
        Difficulty(0)
    with pytest.raises(ConfigError):
        TrainConfig(delta=-1.0)
    with pytest.raises(ConfigError):
        PPOConfig(clip_eps=1.5)
    with pytest.raises(ConfigError, match="unknown"):
        TrainConfig.from_dict({"cmap": "2qL", "bogus": 1})


def test_config_load_toml_and_json(tmp_path):
    t = tmp_path / "c.toml"
    t.write_text('cmap = "3qL"\nwindow = 5\n[ppo]\nlr = 0.001\n')
    cfg = TrainConfig.load(t)
    assert cfg.cmap == "3qL" and cfg.window == 5 and cfg.ppo.lr == 0.001
    j = tmp_path / "c.json"
    j.write_text(json.dumps(cfg.to_dict()))
    assert TrainConfig.load(j) == cfg


def test_random_target_shape():
    cm = named_map("4qL")
    rng = np.random.default_rng(0)
    pn = random_target(4, cm, Difficulty(16), rng)
    assert pn.m == 2 and all(weight(r.pauli) > 0 for r in pn.rotations)
    iz = random_target(4, cm, Difficulty(24), rng, paulis="iz")
    assert all(r.pauli.x == 0 for r in iz.rotations)
    with pytest.raises(ConfigError):
        random_target(3, cm, Difficulty(1), rng)


@pytest.mark.parametrize("d_c", [8, 16])
def test_inverse_word_clears_clifford_part(d_c):
    # the generating word, inverted, always clears the tableau in <= d_C actions
    cm = named_map("2qL")
    env = SynthEnv(cm)
    rng = np.random.default_rng(d_c)
    for _ in range(100):
        word = []
        pn = random_target(2, cm, Difficulty(d_c), rng, word_out=word)
        s = env.reset(pn)
        used = 0
        for g in reversed(word):
            if s.done:
                break
            s, _, _ = env.step(s, env.actions.index(g.inverse()))
            used += 1
        assert used <= d_c
        # identity up to signs; the sign frame is emitted as Pauli gates on termination
        rows = s.to_network().clifford.rows
        assert [(r.z, r.x) for r in rows] == [(1 << q, 0) for q in range(2)] + [(0, 1 << q) for q in range(2)]


def test_rotations_need_not_reduce_under_inverse_frame():
    # counterexample to "every rotation becomes weight 1": after the inverse
    # word the tableau is identity but weight-2 rotations can stay live
    cm = named_map("2qL")
    env = SynthEnv(cm)
    rng = np.random.default_rng(1)
    stuck = 0
    for _ in range(100):
        word = []
        pn = random_target(2, cm, Difficulty(16), rng, word_out=word)
        s = env.reset(pn)
        for g in reversed(word):
            if s.done:
                break
            s, _, _ = env.step(s, env.actions.index(g.inverse()))
        stuck += not s.done
    assert stuck > 0


@pytest.mark.parametrize("d_c", [8, 16])
def test_random_targets_are_solvable(d_c):
    cm = named_map("2qL")
    rng = np.random.default_rng(100 + d_c)
    for _ in range(100):
        pn = random_target(2, cm, Difficulty(d_c), rng)
        gates = brute_force_optimal(pn, cm, 16)
        assert gates is not None and verify(pn, gates, "replay")


def test_gae_closed_form():
    r = np.array([1.0, 0.0, 2.0])
    v = np.array([0.5, 0.2, 0.1])
    adv, ret = gae(r, v, gamma=1.0, lam=1.0)
    # lambda = gamma = 1 gives Monte Carlo returns
    assert np.allclose(ret, [3.0, 2.0, 2.0])
    assert np.allclose(adv, ret - v)
    adv0, _ = gae(r, v, gamma=0.9, lam=0.0)
    assert np.allclose(adv0, r + 0.9 * np.append(v[1:], 0.0) - v)


def test_collect_rollouts_deterministic_and_nontrivial():
    cm = named_map("2qL")
    env = SynthEnv(cm)
    net = build_net(small_cfg(), env)
    a = collect_rollouts(net, env, Difficulty(1), np.random.default_rng(5), count=300)
    b = collect_rollouts(net, env, Difficulty(1), np.random.default_rng(5), count=300)
    assert [t.actions.tolist() for t in a] == [t.actions.tolist() for t in b]
    assert all(np.array_equal(x.obs, y.obs) for x, y in zip(a, b))
    rate = np.mean([t.success for t in a])
    assert rate > 0
    for t in a:
        assert t.dones[-1] and not t.dones[:-1].any()
    with pytest.raises(ValueError):
        collect_rollouts(net, env, Difficulty(1), np.random.default_rng(0))


def _fake_loop(monkeypatch, rate):
    def fake_collect(net, env, diff, rng, count=None, min_steps=None, n_envs=64, paulis="ixyz", greedy=False):
        k = 20
        ok = int(round(rate * k))
        return [Trajectory(np.zeros((1, 1, 1), np.uint8), np.zeros(1, int), np.zeros(1), np.zeros(1),
                           np.zeros(1), np.ones(1, bool), i < ok, 1) for i in range(k)]

    monkeypatch.setattr(trainer, "collect_rollouts", fake_collect)
    monkeypatch.setattr(trainer, "ppo_update", lambda net, trajs, cfg, opt=None, rng=None: (net, {}))


def test_curriculum_increments_every_window(monkeypatch):
    _fake_loop(monkeypatch, 1.0)
    res = curriculum_loop(small_cfg(window=5, max_iterations=20))
    assert [r["d_c"] for r in res.log] == [1] * 5 + [2] * 5 + [3] * 5 + [4] * 5
    assert res.d_c == 5
    assert all(r["d_p"] == r["d_c"] // 8 for r in res.log)


def test_curriculum_stuck_never_increments(monkeypatch):
    _fake_loop(monkeypatch, 0.5)
    res = curriculum_loop(small_cfg(window=5, max_iterations=30))
    assert res.d_c == 1 and {r["d_c"] for r in res.log} == {1}


def test_curriculum_target_and_stop_condition(monkeypatch):
    _fake_loop(monkeypatch, 1.0)
    res = curriculum_loop(small_cfg(window=2, target_d_c=3))
    assert res.reached_target and res.d_c == 4
    res = curriculum_loop(small_cfg(window=2), stop_condition=lambda rec: rec["iteration"] >= 3)
    assert res.iterations == 3


def test_learning_signal_on_toy_task():
    # fixed d_C (window never fills) so success must come from learning
    cfg = small_cfg(start_d_c=4, window=10**6, max_iterations=60)
    res = curriculum_loop(cfg)
    s = [r["success_rate"] for r in res.log]
    assert np.mean(s[-10:]) > np.mean(s[:10]) + 0.3


def test_training_is_deterministic():
    a = curriculum_loop(small_cfg(max_iterations=3))
    b = curriculum_loop(small_cfg(max_iterations=3))
    for k in a.net.params:
        assert np.array_equal(a.net.params[k], b.net.params[k])


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    full = curriculum_loop(small_cfg(max_iterations=4))
    ck = tmp_path / "ck"
    curriculum_loop(small_cfg(max_iterations=2), checkpoint_dir=ck, log_path=tmp_path / "log.jsonl")
    res = curriculum_loop(small_cfg(max_iterations=4), checkpoint_dir=ck, log_path=tmp_path / "log.jsonl",
                          resume=True)
    assert res.iterations == 4
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert [json.loads(x)["iteration"] for x in lines] == [1, 2, 3, 4]
    for k in full.net.params:
        assert np.allclose(full.net.params[k], res.net.params[k], atol=1e-6)
