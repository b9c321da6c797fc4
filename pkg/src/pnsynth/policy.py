"""Gate-selection network in plain numpy.

Layout: a 1-d convolution that slides over the columns of the
``2n x (2n + H)`` bit matrix (the ``2n`` rows are input channels), flatten,
two ReLU dense layers, then a logit head and a value head sharing that trunk.
Backward passes are written by hand so training needs nothing beyond numpy.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

MAGIC = b"PNSW"
FORMAT_VERSION = 1
PARAM_NAMES = ("conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b", "pi_w", "pi_b", "v_w", "v_b")


class WeightsFormatError(ValueError):
    pass


class ActionSpaceMismatch(WeightsFormatError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    n_qubits: int
    n_actions: int
    horizon: int = 8
    conv_channels: int = 64
    kernel_width: int = 1
    hidden: int = 256

    @property
    def in_channels(self) -> int:
        return 2 * self.n_qubits

    @property
    def width(self) -> int:
        return 2 * self.n_qubits + self.horizon

    @property
    def positions(self) -> int:
        return self.width - self.kernel_width + 1


def _orthogonal(rng, shape, gain):
    a = rng.standard_normal((max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def _patches(x: np.ndarray, k: int) -> np.ndarray:
    """``(B, C, L)`` -> ``(B, P, C*k)`` sliding windows over the last axis."""
    if k == 1:
        return x.transpose(0, 2, 1)
    b, c, length = x.shape
    p = length - k + 1
    win = np.lib.stride_tricks.sliding_window_view(x, k, axis=2)  # (B, C, P, k)
    return win.transpose(0, 2, 1, 3).reshape(b, p, c * k)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class PolicyNet:
    def __init__(self, config: PolicyConfig, params: dict[str, np.ndarray] | None = None,
                 metadata: dict | None = None, seed: int = 0, dtype=np.float32):
        self.config = config
        self.metadata = dict(metadata or {})
        if params is None:
            params = self._init_params(np.random.default_rng(seed))
        self.params = {k: np.asarray(params[k], dtype=dtype) for k in PARAM_NAMES}

    def _init_params(self, rng) -> dict[str, np.ndarray]:
        c = self.config
        flat = c.positions * c.conv_channels
        g = np.sqrt(2.0)
        return {
            "conv_w": _orthogonal(rng, (c.in_channels * c.kernel_width, c.conv_channels), g),
            "conv_b": np.zeros(c.conv_channels),
            "fc1_w": _orthogonal(rng, (flat, c.hidden), g),
            "fc1_b": np.zeros(c.hidden),
            "fc2_w": _orthogonal(rng, (c.hidden, c.hidden), g),
            "fc2_b": np.zeros(c.hidden),
            "pi_w": _orthogonal(rng, (c.hidden, c.n_actions), 0.01),
            "pi_b": np.zeros(c.n_actions),
            "v_w": _orthogonal(rng, (c.hidden, 1), 1.0),
            "v_b": np.zeros(1),
        }

    @property
    def dtype(self):
        return self.params["fc1_w"].dtype

    def astype(self, dtype) -> PolicyNet:
        return PolicyNet(self.config, self.params, self.metadata, dtype=dtype)

    def copy(self) -> PolicyNet:
        return PolicyNet(self.config, {k: v.copy() for k, v in self.params.items()}, self.metadata, dtype=self.dtype)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        c = self.config
        if x.ndim == 2:
            x = x[None]
        if x.shape[1:] != (c.in_channels, c.width):
            raise ValueError(f"input shape {x.shape[1:]} does not match ({c.in_channels}, {c.width})")
        return x.astype(self.dtype, copy=False)

    def forward(self, x: np.ndarray, cache: bool = False):
        """Return ``(logits, values)`` for a single ``(2n, W)`` input or a batch ``(B, 2n, W)``."""
        single = x.ndim == 2
        x = self._check_input(x)
        p, c = self.params, self.config
        b = x.shape[0]
        pat = _patches(x, c.kernel_width)
        a0 = pat @ p["conv_w"] + p["conv_b"]
        h0 = np.maximum(a0, 0).reshape(b, -1)
        a1 = h0 @ p["fc1_w"] + p["fc1_b"]
        h1 = np.maximum(a1, 0)
        a2 = h1 @ p["fc2_w"] + p["fc2_b"]
        h2 = np.maximum(a2, 0)
        logits = h2 @ p["pi_w"] + p["pi_b"]
        values = (h2 @ p["v_w"] + p["v_b"])[:, 0]
        if cache:
            return logits, values, (x, pat, a0, h0, a1, h1, a2, h2)
        if single:
            return logits[0], values[0]
        return logits, values

    def backward(self, cache, d_logits: np.ndarray, d_values: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        x, pat, a0, h0, a1, h1, a2, h2 = cache
        g = {}
        g["pi_w"] = h2.T @ d_logits
        g["pi_b"] = d_logits.sum(0)
        dv = d_values[:, None]
        g["v_w"] = h2.T @ dv
        g["v_b"] = dv.sum(0)
        dh2 = d_logits @ p["pi_w"].T + dv @ p["v_w"].T
        da2 = dh2 * (a2 > 0)
        g["fc2_w"] = h1.T @ da2
        g["fc2_b"] = da2.sum(0)
        da1 = (da2 @ p["fc2_w"].T) * (a1 > 0)
        g["fc1_w"] = h0.T @ da1
        g["fc1_b"] = da1.sum(0)
        dh0 = (da1 @ p["fc1_w"].T).reshape(a0.shape)
        da0 = dh0 * (a0 > 0)
        g["conv_w"] = np.einsum("bpi,bpo->io", pat, da0)
        g["conv_b"] = da0.sum((0, 1))
        return g

    def param_count(self) -> int:
        return sum(v.size for v in self.params.values())


def sample(logits: np.ndarray, rng: np.random.Generator | int | None = None,
           temperature: float = 1.0, greedy: bool = False) -> tuple[int, float]:
    """Draw one action from ``softmax(logits / temperature)``; return it and its log-probability.

    The log-probability is always taken under the temperature-scaled
    distribution, so greedy picks report the argmax's probability.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if not greedy and temperature <= 0:
        raise ValueError("temperature must be positive")
    lp = log_softmax(logits / (temperature if temperature > 0 else 1.0))
    if greedy:
        a = int(np.argmax(logits))
    else:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        cdf = np.cumsum(np.exp(lp))
        a = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(cdf) - 1))
    return a, float(lp[a])


def sample_batch(logits: np.ndarray, rng: np.random.Generator, temperature: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`sample` over rows of ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    lp = log_softmax(logits / temperature)
    cdf = np.cumsum(np.exp(lp), axis=1)
    u = rng.random(len(logits))[:, None] * cdf[:, -1:]
    a = np.minimum((cdf <= u).sum(axis=1), logits.shape[1] - 1)
    return a, lp[np.arange(len(a)), a]


def save_weights(net: PolicyNet) -> bytes:
    """Serialize as ``MAGIC | u32 header_len | JSON header | float32 LE tensors``."""
    tensors, blobs, offset = [], [], 0
    for name in PARAM_NAMES:
        arr = np.ascontiguousarray(net.params[name], dtype="<f4")
        raw = arr.tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format": "pnsynth-policy",
        "version": FORMAT_VERSION,
        "config": asdict(net.config),
        "metadata": net.metadata,
        "tensors": tensors,
    }
    hb = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<I", len(hb)) + hb + b"".join(blobs)


def load_weights(data: bytes, expected_action_hash: str | None = None, dtype=np.float32) -> PolicyNet:
    if len(data) < 8 or data[:4] != MAGIC:
        raise WeightsFormatError("not a policy weight file (bad magic)")
    (hlen,) = struct.unpack("<I", data[4:8])
    if 8 + hlen > len(data):
        raise WeightsFormatError("truncated header")
    try:
        header = json.loads(data[8 : 8 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightsFormatError(f"corrupt header: {exc}") from None
    if header.get("format") != "pnsynth-policy" or header.get("version") != FORMAT_VERSION:
        raise WeightsFormatError(f"unsupported format/version {header.get('format')}/{header.get('version')}")
    meta = header.get("metadata", {})
    if expected_action_hash is not None and meta.get("action_hash") != expected_action_hash:
        raise ActionSpaceMismatch(
            f"weights were trained for action space {meta.get('action_hash')} "
            f"({meta.get('cmap_name')}), environment has {expected_action_hash}"
        )
    body = data[8 + hlen :]
    params = {}
    for t in header["tensors"]:
        end = t["offset"] + t["nbytes"]
        if end > len(body):
            raise WeightsFormatError(f"truncated tensor {t['name']}")
        arr = np.frombuffer(body[t["offset"] : end], dtype="<f4").reshape(t["shape"])
        params[t["name"]] = arr.copy()
    missing = set(PARAM_NAMES) - params.keys()
    if missing:
        raise WeightsFormatError(f"missing tensors {sorted(missing)}")
    return PolicyNet(PolicyConfig(**header["config"]), params, meta, dtype=dtype)
