"""PPO training with a Clifford/rotation difficulty curriculum."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .angles import SymbolAngle
from .coupling import CouplingMap, legal_couplings, resolve_map
from .env import RewardConfig, SynthEnv
from .network import PauliNetwork, Rotation
from .pauli import CliffordTableau, PauliVec, tableau_apply
from .policy import PARAM_NAMES, PolicyConfig, PolicyNet, load_weights, log_softmax, sample_batch, save_weights

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Difficulty:
    d_c: int
    delta: float = 8.0

    def __post_init__(self):
        if self.d_c < 1:
            raise ConfigError("d_C must be >= 1")
        if not self.delta > 0:
            raise ConfigError("delta must be > 0")

    @property
    def d_p(self) -> int:
        return math.floor(self.d_c / self.delta)


@dataclass
class PPOConfig:
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs_per_iter: int = 4
    minibatch_size: int = 256
    lr: float = 3e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    rollout_steps: int = 8192
    success_threshold: float = 0.95
    max_grad_norm: float = 0.5
    n_envs: int = 64

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ConfigError("clip_eps must be in (0, 1)")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ConfigError("gamma and gae_lambda must be in (0, 1]")
        if self.minibatch_size < 1 or self.epochs_per_iter < 1 or self.rollout_steps < 1:
            raise ConfigError("minibatch_size, epochs_per_iter and rollout_steps must be >= 1")


def random_pauli(n: int, rng: np.random.Generator, paulis: str = "ixyz") -> PauliVec:
    """Uniform non-identity Pauli string over ``{I,X,Y,Z}`` or ``{I,Z}``."""
    while True:
        z = int(rng.integers(0, 1 << n))
        x = int(rng.integers(0, 1 << n)) if paulis == "ixyz" else 0
        if z or x:
            return PauliVec(n, z, x)


def random_clifford_word(cmap: CouplingMap, length: int, rng: np.random.Generator):
    actions = legal_couplings(cmap)
    return [actions[int(i)] for i in rng.integers(0, len(actions), size=length)]


def random_target(n: int, cmap: CouplingMap, difficulty: Difficulty, rng: np.random.Generator,
                  paulis: str = "ixyz", n_rotations: int | None = None, word_out: list | None = None) -> PauliNetwork:
    """Identity tableau advanced by ``d_C`` random legal gates plus ``d_P`` random rotations.

    ``n_rotations`` overrides ``d_P``.  The generating gate word is appended to
    ``word_out`` when given.
    """
    if n != cmap.n_qubits:
        raise ConfigError("qubit count does not match coupling map")
    tab = CliffordTableau.identity(n)
    word = random_clifford_word(cmap, difficulty.d_c, rng)
    for g in word:
        tab = tableau_apply(tab, g)
    if word_out is not None:
        word_out.extend(word)
    m = difficulty.d_p if n_rotations is None else n_rotations
    rots = [Rotation(random_pauli(n, rng, paulis), SymbolAngle(f"t{i}")) for i in range(m)]
    return PauliNetwork(n, tab, rots)


@dataclass
class Trajectory:
    obs: np.ndarray
    actions: np.ndarray
    logps: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    success: bool
    count2q: int

    def __len__(self):
        return len(self.actions)


def collect_rollouts(net: PolicyNet, env: SynthEnv, difficulty: Difficulty, rng: np.random.Generator,
                     count: int | None = None, min_steps: int | None = None, n_envs: int = 64,
                     paulis: str = "ixyz", greedy: bool = False) -> list[Trajectory]:
    """Run episodes on fresh random targets in lock-step batches.

    Stops launching new episodes once ``count`` episodes have started (or
    ``min_steps`` steps were taken) and returns every finished episode in
    launch order.
    """
    if count is None and min_steps is None:
        raise ValueError("give count or min_steps")
    n = env.n
    shape = (2 * n, 2 * n + env.horizon)
    launched = steps = 0
    slots: list[dict | None] = [None] * n_envs
    done: dict[int, Trajectory] = {}

    def want_more():
        if count is not None and launched >= count:
            return False
        if min_steps is not None and count is None and steps >= min_steps:
            return False
        return True

    def launch():
        nonlocal launched
        while True:
            pn = random_target(n, env.cmap, difficulty, rng, paulis)
            s = env.reset(pn)
            idx = launched
            launched += 1
            if not s.done:
                return {"id": idx, "s": s, "obs": [], "a": [], "lp": [], "r": [], "v": []}
            # already solved by extraction alone; nothing to learn from
            if not want_more():
                return None

    for i in range(n_envs):
        if want_more():
            slots[i] = launch()
    obs = np.zeros((n_envs,) + shape, dtype=np.float32)
    while any(slots):
        active = [i for i, sl in enumerate(slots) if sl is not None]
        for j, i in enumerate(active):
            env.observation(slots[i]["s"], obs[j])
        logits, values = net.forward(obs[: len(active)])
        if greedy:
            acts = np.argmax(logits, axis=1)
            lps = log_softmax(logits.astype(np.float64))[np.arange(len(acts)), acts]
        else:
            acts, lps = sample_batch(logits, rng)
        for j, i in enumerate(active):
            sl = slots[i]
            sl["obs"].append(obs[j].astype(np.uint8))
            sl["a"].append(int(acts[j]))
            sl["lp"].append(float(lps[j]))
            sl["v"].append(float(values[j]))
            r, fin = env.step_inplace(sl["s"], int(acts[j]))
            sl["r"].append(r)
            steps += 1
            if fin:
                s = sl["s"]
                t = len(sl["a"])
                dones = np.zeros(t, dtype=bool)
                dones[-1] = True
                done[sl["id"]] = Trajectory(
                    np.stack(sl["obs"]), np.array(sl["a"]), np.array(sl["lp"]), np.array(sl["r"]),
                    np.array(sl["v"]), dones, s.success, sum(1 for g in s.emitted if g.name == "cx"),
                )
                slots[i] = launch() if want_more() else None
    return [done[k] for k in sorted(done)]


def gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns for one episode that ends in a terminal state."""
    t = len(rewards)
    adv = np.zeros(t)
    last = 0.0
    for k in range(t - 1, -1, -1):
        nv = values[k + 1] if k + 1 < t else 0.0
        delta = rewards[k] + gamma * nv - values[k]
        last = delta + gamma * lam * last
        adv[k] = last
    return adv, adv + values


def ppo_loss(net: PolicyNet, obs, actions, old_logp, adv, returns, cfg: PPOConfig, grad: bool = True):
    """Clipped-surrogate loss, value loss and entropy bonus; optionally with gradients."""
    logits, values, cache = net.forward(obs, cache=True)
    b = len(actions)
    lp_all = log_softmax(logits)
    probs = np.exp(lp_all)
    idx = np.arange(b)
    logp = lp_all[idx, actions]
    ratio = np.exp(logp - old_logp)
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1 - cfg.clip_eps, 1 + cfg.clip_eps) * adv
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    value_loss = 0.5 * np.mean((values - returns) ** 2)
    ent_each = -(probs * lp_all).sum(axis=1)
    entropy = ent_each.mean()
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "kl": float(np.mean(old_logp - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1) > cfg.clip_eps)),
    }
    if not grad:
        return loss, None, stats
    d_logp = np.where(surr1 <= surr2, -adv * ratio, 0.0) / b
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    d_logits = d_logp[:, None] * (onehot - probs)
    d_logits += cfg.entropy_coef * probs * (lp_all + ent_each[:, None]) / b
    d_values = cfg.value_coef * (values - returns) / b
    grads = net.backward(cache, d_logits.astype(net.dtype), d_values.astype(net.dtype))
    return loss, grads, stats


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, betas=(0.9, 0.999), eps=1e-5):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.betas
        c1 = 1 - b1**self.t
        c2 = 1 - b2**self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] -= (self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)).astype(params[k].dtype)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"t": np.array(self.t)}
        out.update({f"m_{k}": v for k, v in self.m.items()})
        out.update({f"v_{k}": v for k, v in self.v.items()})
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["t"])
        for k in self.m:
            self.m[k] = arrays[f"m_{k}"].astype(self.m[k].dtype)
            self.v[k] = arrays[f"v_{k}"].astype(self.v[k].dtype)


def ppo_update(net: PolicyNet, trajectories: list[Trajectory], cfg: PPOConfig,
               optimizer: Adam | None = None, rng: np.random.Generator | None = None) -> tuple[PolicyNet, dict]:
    """Run ``epochs_per_iter`` passes of minibatch PPO over the batch; updates ``net`` in place."""
    if not trajectories:
        raise ValueError("empty trajectory batch")
    rng = rng or np.random.default_rng(0)
    optimizer = optimizer or Adam(net.params, cfg.lr)
    advs, rets = [], []
    for tr in trajectories:
        a, r = gae(tr.rewards, tr.values, cfg.gamma, cfg.gae_lambda)
        advs.append(a)
        rets.append(r)
    obs = np.concatenate([t.obs for t in trajectories]).astype(net.dtype)
    actions = np.concatenate([t.actions for t in trajectories])
    old_logp = np.concatenate([t.logps for t in trajectories])
    adv = np.concatenate(advs)
    ret = np.concatenate(rets)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    total = len(actions)
    agg: dict[str, list] = {}
    for _ in range(cfg.epochs_per_iter):
        perm = rng.permutation(total)
        for start in range(0, total, cfg.minibatch_size):
            mb = perm[start : start + cfg.minibatch_size]
            loss, grads, stats = ppo_loss(net, obs[mb], actions[mb], old_logp[mb], adv[mb], ret[mb], cfg)
            if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDiverged("non-finite PPO loss or gradient", {"stats": stats, "batch_size": len(mb)})
            norm = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
            if cfg.max_grad_norm and norm > cfg.max_grad_norm:
                scale = cfg.max_grad_norm / (norm + 1e-12)
                grads = {k: g * scale for k, g in grads.items()}
            optimizer.step(net.params, grads)
            for k, v in stats.items():
                agg.setdefault(k, []).append(v)
            agg.setdefault("grad_norm", []).append(norm)
    return net, {k: float(np.mean(v)) for k, v in agg.items()}


@dataclass
class TrainConfig:
    cmap: str = "2qL"
    seed: int = 0
    delta: float = 8.0
    start_d_c: int = 1
    window: int = 20
    max_iterations: int = 100000
    time_limit_s: float | None = None
    target_d_c: int | None = None
    horizon: int = 8
    conv_channels: int = 64
    kernel_width: int = 1
    hidden: int = 256
    paulis: str = "ixyz"
    checkpoint_every: int = 50
    ppo: PPOConfig = field(default_factory=PPOConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if isinstance(self.ppo, dict):
            self.ppo = PPOConfig(**self.ppo)
        if isinstance(self.reward, dict):
            self.reward = RewardConfig(**self.reward)
        Difficulty(self.start_d_c, self.delta)
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.paulis not in ("ixyz", "iz"):
            raise ConfigError("paulis must be 'ixyz' or 'iz'")

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> TrainConfig:
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def build_net(cfg: TrainConfig, env: SynthEnv) -> PolicyNet:
    pc = PolicyConfig(env.n, env.n_actions, cfg.horizon, cfg.conv_channels, cfg.kernel_width, cfg.hidden)
    meta = {
        "n_qubits": env.n,
        "cmap_name": env.cmap.name,
        "cmap": env.cmap.to_json(),
        "horizon": cfg.horizon,
        "action_hash": env.action_hash,
    }
    return PolicyNet(pc, metadata=meta, seed=cfg.seed)


@dataclass
class TrainResult:
    net: PolicyNet
    log: list[dict]
    d_c: int
    reached_target: bool
    iterations: int
    elapsed_s: float


def _save_checkpoint(ckdir: Path, net: PolicyNet, opt: Adam, state: dict):
    ckdir.mkdir(parents=True, exist_ok=True)
    (ckdir / "policy.pnw").write_bytes(save_weights(net))
    np.savez(ckdir / "optimizer.npz", **opt.state_arrays())
    (ckdir / "state.json").write_text(json.dumps(state))


def curriculum_loop(cfg: TrainConfig, cmap: CouplingMap | None = None,
                    stop_condition: Callable[[dict], bool] | None = None,
                    checkpoint_dir: str | Path | None = None, log_path: str | Path | None = None,
                    resume: bool = False) -> TrainResult:
    """Train until ``target_d_c`` is passed, the time limit expires, or ``stop_condition`` fires.

    ``d_C`` goes up by one once the pooled success rate over the last
    ``window`` iterations at the current level reaches ``success_threshold``.
    """
    cmap = cmap or resolve_map(cfg.cmap)
    env = SynthEnv(cmap, cfg.reward, cfg.horizon)
    net = build_net(cfg, env)
    opt = Adam(net.params, cfg.ppo.lr)
    rng = np.random.default_rng(cfg.seed)
    d_c, iteration, history = cfg.start_d_c, 0, []
    elapsed0 = 0.0
    ckdir = Path(checkpoint_dir) if checkpoint_dir else None
    if resume and ckdir and (ckdir / "state.json").exists():
        state = json.loads((ckdir / "state.json").read_text())
        net = load_weights((ckdir / "policy.pnw").read_bytes(), env.action_hash)
        opt = Adam(net.params, cfg.ppo.lr)
        opt.load_state_arrays(np.load(ckdir / "optimizer.npz"))
        d_c, iteration, history = state["d_c"], state["iteration"], [tuple(h) for h in state["window"]]
        elapsed0 = state.get("elapsed_s", 0.0)
        rng.bit_generator.state = state["rng"]
        log.info("resumed at iteration %d, d_C=%d", iteration, d_c)
    logf = open(log_path, "a" if resume else "w") if log_path else None
    records: list[dict] = []
    reached = False
    t0 = time.perf_counter() - elapsed0

    def checkpoint():
        if ckdir:
            _save_checkpoint(ckdir, net, opt, {
                "d_c": d_c, "iteration": iteration, "window": history,
                "elapsed_s": time.perf_counter() - t0, "rng": rng.bit_generator.state,
                "config": cfg.to_dict(),
            })

    try:
        while iteration < cfg.max_iterations:
            if cfg.time_limit_s is not None and time.perf_counter() - t0 > cfg.time_limit_s:
                break
            diff = Difficulty(d_c, cfg.delta)
            trajs = collect_rollouts(net, env, diff, rng, min_steps=cfg.ppo.rollout_steps,
                                     n_envs=cfg.ppo.n_envs, paulis=cfg.paulis)
            snapshot = {k: v.copy() for k, v in net.params.items()}
            try:
                _, stats = ppo_update(net, trajs, cfg.ppo, opt, rng)
            except TrainingDiverged as exc:
                log.error("PPO update diverged at iteration %d: %s", iteration, exc.dump)
                net.params.update(snapshot)
                stats = {"diverged": True}
            iteration += 1
            succ = sum(t.success for t in trajs)
            history.append((succ, len(trajs)))
            history = history[-cfg.window :]
            win_rate = sum(h[0] for h in history) / max(1, sum(h[1] for h in history))
            ok = [t.count2q for t in trajs if t.success]
            rec = {
                "iteration": iteration,
                "d_c": d_c,
                "d_p": diff.d_p,
                "success_rate": succ / max(1, len(trajs)),
                "window_success": win_rate,
                "mean_count2q": float(np.mean(ok)) if ok else None,
                "episodes": len(trajs),
                "steps": int(sum(len(t) for t in trajs)),
                "elapsed_s": round(time.perf_counter() - t0, 3),
                **{k: v for k, v in stats.items() if k in ("policy_loss", "value_loss", "entropy", "kl", "diverged")},
            }
            records.append(rec)
            if logf:
                logf.write(json.dumps(rec) + "\n")
                logf.flush()
            log.info("it %d d_C=%d succ=%.3f win=%.3f", iteration, d_c, rec["success_rate"], win_rate)
            advanced = False
            if len(history) >= cfg.window and win_rate >= cfg.ppo.success_threshold:
                if cfg.target_d_c is not None and d_c >= cfg.target_d_c:
                    reached = True
                d_c += 1
                history = []
                advanced = True
            if advanced or (cfg.checkpoint_every and iteration % cfg.checkpoint_every == 0):
                checkpoint()
            if reached or (stop_condition and stop_condition(rec)):
                break
    finally:
        if logf:
            logf.close()
    checkpoint()
    return TrainResult(net, records, d_c, reached, iteration, time.perf_counter() - t0)

