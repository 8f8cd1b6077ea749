"""WaveGAN-shaped generator and critic trained with WGAN-GP.

The generator maps ``z ~ U(-1, 1)^latent_dim`` through a dense layer to
``[batch, d * 2^(n-1), 16]`` and then through ``n`` stride-4 transposed
convolutions to ``[batch, 1, 16 * 4^n]``. The critic mirrors it with strided
convolutions, leaky ReLU and phase shuffle, ending in a dense layer to one
unbounded score.

The gradient penalty needs ``d D / d x`` as a function of the critic's
weights. Rather than general higher-order autodiff, :func:`critic_input_gradient`
writes that gradient out as an explicit graph (dense transposed, activation
slopes, phase-shift adjoints, transposed convolutions), which the ordinary
reverse pass can then differentiate.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .corpus.clip import Label, WaveformClip
from .errors import ConfigError, DivergedError, EmptyCorpus, ShapeError

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["step", "critic_loss", "gen_loss", "wasserstein_estimate", "wallclock_s"]


@dataclass(frozen=True)
class GanConfig:
    latent_dim: int = 100
    output_len: int = 16384
    model_dim: int = 16
    n_layers: int = 5
    batch_size: int = 64
    critic_iters: int = 5
    gp_lambda: float = 10.0
    total_steps: int = 2000
    seed: int = 0
    phase_shuffle_n: int = 2
    kernel_size: int = 25
    stride: int = 4
    leaky_slope: float = 0.2
    alpha: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    checkpoint_every: int = 500
    dtype: str = "float32"

    @property
    def start_len(self) -> int:
        return 16

    @property
    def padding(self) -> int:
        return (self.kernel_size - self.stride + 1) // 2

    def channels(self):
        """Channel counts from the dense output down to the waveform."""
        top = self.model_dim * 2 ** (self.n_layers - 1)
        return [top // 2 ** i for i in range(self.n_layers)] + [1]

    def validate(self) -> None:
        for name in ("latent_dim", "model_dim", "n_layers", "batch_size", "critic_iters", "stride",
                     "kernel_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if self.output_len != self.start_len * self.stride ** self.n_layers:
            raise ConfigError(
                f"output_len {self.output_len} != {self.start_len} * {self.stride}^{self.n_layers}")
        if self.kernel_size < self.stride:
            raise ConfigError("kernel_size must be >= stride for exact upsampling")
        if self.phase_shuffle_n < 0:
            raise ConfigError("phase_shuffle_n must be >= 0")
        if self.gp_lambda < 0:
            raise ConfigError("gp_lambda must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def params_hash(params: dict) -> str:
    h = hashlib.sha256()
    for k in sorted(params):
        arr = np.ascontiguousarray(params[k].data if isinstance(params[k], T.Tensor) else params[k])
        h.update(k.encode())
        h.update(str(arr.dtype).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


# ---- parameters ---------------------------------------------------------------

def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def init_generator(cfg: GanConfig, rng) -> dict:
    dt = np.dtype(cfg.dtype)
    ch = cfg.channels()
    k = cfg.kernel_size
    p = {
        "dense.w": _glorot(rng, (cfg.latent_dim, ch[0] * cfg.start_len), cfg.latent_dim,
                           ch[0] * cfg.start_len, dt),
        "dense.b": np.zeros(ch[0] * cfg.start_len, dt),
    }
    for i in range(cfg.n_layers):
        # transposed-conv weights use the layout [in, out, k]
        p[f"up{i}.w"] = _glorot(rng, (ch[i], ch[i + 1], k), ch[i] * k, ch[i + 1] * k, dt)
        p[f"up{i}.b"] = np.zeros(ch[i + 1], dt)
    return {name: T.Tensor(v, requires_grad=True, name=name) for name, v in p.items()}


def init_critic(cfg: GanConfig, rng) -> dict:
    dt = np.dtype(cfg.dtype)
    ch = cfg.channels()[::-1]
    k = cfg.kernel_size
    p = {}
    for i in range(cfg.n_layers):
        p[f"conv{i}.w"] = _glorot(rng, (ch[i + 1], ch[i], k), ch[i] * k, ch[i + 1] * k, dt)
        p[f"conv{i}.b"] = np.zeros(ch[i + 1], dt)
    flat = ch[-1] * cfg.start_len
    p["dense.w"] = _glorot(rng, (flat, 1), flat, 1, dt)
    p["dense.b"] = np.zeros(1, dt)
    return {name: T.Tensor(v, requires_grad=True, name=name) for name, v in p.items()}


# ---- networks -----------------------------------------------------------------

def generator_forward(params: dict, z, cfg: GanConfig) -> T.Tensor:
    z = T.as_tensor(z)
    if z.ndim != 2 or z.shape[1] != cfg.latent_dim:
        raise ShapeError(f"latent batch must be [batch, {cfg.latent_dim}], got {z.shape}")
    ch = cfg.channels()
    h = T.dense(z, params["dense.w"], params["dense.b"])
    h = T.relu(T.reshape(h, (z.shape[0], ch[0], cfg.start_len)))
    for i in range(cfg.n_layers):
        h = T.conv1d_transpose(h, params[f"up{i}.w"], cfg.stride, cfg.padding, output_padding=_out_pad(cfg))
        h = T.add_bias(h, params[f"up{i}.b"])
        h = T.tanh(h) if i == cfg.n_layers - 1 else T.relu(h)
    return h


def _out_pad(cfg: GanConfig) -> int:
    """Extra output samples making each transposed conv upsample by exactly ``stride``."""
    return cfg.stride - cfg.kernel_size + 2 * cfg.padding


def draw_shifts(cfg: GanConfig, batch: int, rng):
    """Per-layer, per-item phase-shuffle offsets in ``[-n, n]`` (None when disabled)."""
    if cfg.phase_shuffle_n == 0:
        return None
    n = cfg.phase_shuffle_n
    return rng.integers(-n, n + 1, size=(cfg.n_layers - 1, batch))


@dataclass
class CriticTrace:
    """What the input gradient needs from a forward pass: activation slopes and shifts."""

    slopes: list
    shifts: object


def critic_forward(params: dict, x, cfg: GanConfig, shifts=None):
    """Scores ``[batch]`` and the :class:`CriticTrace` of this pass."""
    x = T.as_tensor(x)
    if x.ndim != 3 or x.shape[1:] != (1, cfg.output_len):
        raise ShapeError(f"critic input must be [batch, 1, {cfg.output_len}], got {x.shape}")
    batch = x.shape[0]
    h = x
    slopes = []
    for i in range(cfg.n_layers):
        pre = T.add_bias(T.conv1d(h, params[f"conv{i}.w"], cfg.stride, cfg.padding), params[f"conv{i}.b"])
        s = T.leaky_relu_slopes(pre.data, cfg.leaky_slope)
        slopes.append(s)
        h = T.mul_const(pre, s)
        if shifts is not None and i < cfg.n_layers - 1:
            h = T.phase_shift(h, shifts[i])
    flat = T.reshape(h, (batch, -1))
    score = T.dense(flat, params["dense.w"], params["dense.b"])
    return T.reshape(score, (batch,)), CriticTrace(slopes, shifts)


def critic_input_gradient(params: dict, trace: CriticTrace, cfg: GanConfig, batch: int) -> T.Tensor:
    """``d/dx sum_b D(x)_b`` at the traced input, as a graph over the critic weights.

    Leaky ReLU slopes are piecewise constant, so treating them as fixed is
    exact wherever the derivative exists.
    """
    dt = params["dense.w"].dtype
    ones = T.Tensor(np.ones((batch, 1), dtype=dt))
    g = T.matmul(ones, T.transpose(params["dense.w"]))
    last = trace.slopes[-1].shape
    g = T.reshape(g, last)
    length = cfg.output_len
    in_lens = [length // cfg.stride ** i for i in range(cfg.n_layers)]
    for i in reversed(range(cfg.n_layers)):
        if trace.shifts is not None and i < cfg.n_layers - 1:
            g = T.phase_shift_adjoint(g, trace.shifts[i])
        g = T.mul_const(g, trace.slopes[i])
        out_len = T.conv1d_transpose_out_len(g.shape[2], cfg.kernel_size, cfg.stride, cfg.padding)
        g = T.conv1d_transpose(g, params[f"conv{i}.w"], cfg.stride, cfg.padding,
                               output_padding=in_lens[i] - out_len)
    return g


class WaveCritic:
    """The convolutional critic bound to its parameters and config."""

    def __init__(self, params, cfg: GanConfig):
        self.params, self.cfg = params, cfg

    def score(self, x, rng=None):
        shifts = draw_shifts(self.cfg, x.shape[0], rng) if rng is not None else None
        return critic_forward(self.params, x, self.cfg, shifts)[0]

    def input_gradient(self, x, rng=None):
        x = np.asarray(x)
        shifts = draw_shifts(self.cfg, x.shape[0], rng) if rng is not None else None
        _, trace = critic_forward(self.params, T.Tensor(x), self.cfg, shifts)
        return critic_input_gradient(self.params, trace, self.cfg, x.shape[0])


class LinearCritic:
    """``D(x) = c * <w, x>``; its input gradient ``c * w`` is known in closed form."""

    def __init__(self, w, c=1.0):
        self.w = T.Tensor(np.asarray(w, dtype=np.float64), requires_grad=True, name="w")
        self.c = float(c)

    def score(self, x, rng=None):
        x = T.as_tensor(x)
        flat = T.reshape(x, (x.shape[0], -1))
        return T.scale(T.reshape(T.matmul(flat, T.reshape(self.w, (-1, 1))), (x.shape[0],)), self.c)

    def input_gradient(self, x, rng=None):
        x = np.asarray(x)
        ones = T.Tensor(np.ones((x.shape[0], 1)))
        g = T.matmul(ones, T.reshape(self.w, (1, -1)))
        return T.scale(T.reshape(g, x.shape), self.c)


def gradient_penalty(critic, x_real, x_fake, rng, gp_lambda=10.0) -> T.Tensor:
    """``lambda * mean_b (||grad_x D(x_hat_b)|| - 1)^2`` at random interpolates.

    ``x_hat = eps * x_real + (1 - eps) * x_fake`` with one ``eps ~ U(0, 1)``
    per item. The result is a graph over the critic's parameters.
    """
    x_real, x_fake = np.asarray(x_real), np.asarray(x_fake)
    if x_real.shape != x_fake.shape:
        raise ShapeError(f"real {x_real.shape} and fake {x_fake.shape} batches differ")
    batch = x_real.shape[0]
    eps = rng.uniform(0.0, 1.0, size=(batch,) + (1,) * (x_real.ndim - 1)).astype(x_real.dtype)
    x_hat = eps * x_real + (1.0 - eps) * x_fake
    g = critic.input_gradient(x_hat, rng)
    norms = T.sqrt(T.sum(T.square(T.reshape(g, (batch, -1))), axis=1))
    return T.scale(T.mean(T.square(T.sub(norms, 1.0))), gp_lambda)


# ---- training -----------------------------------------------------------------

@dataclass
class ModelCheckpoint:
    cfg: GanConfig
    generator: dict
    critic: dict
    gen_opt: T.AdamState
    critic_opt: T.AdamState
    step: int = 0
    rng_state: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return self.cfg.hash()

    def copy(self) -> "ModelCheckpoint":
        def dup(params):
            return {k: T.Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in params.items()}

        return ModelCheckpoint(self.cfg, dup(self.generator), dup(self.critic),
                               copy.deepcopy(self.gen_opt), copy.deepcopy(self.critic_opt),
                               self.step, copy.deepcopy(self.rng_state))

    def generator_hash(self) -> str:
        return params_hash(self.generator)

    def critic_hash(self) -> str:
        return params_hash(self.critic)


def _streams(seed):
    """Independent RNG streams for initialization, data order and training noise."""
    init, data, noise = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(data), np.random.default_rng(noise)


def init_checkpoint(cfg: GanConfig) -> ModelCheckpoint:
    cfg.validate()
    init_rng, _, _ = _streams(cfg.seed)
    gen = init_generator(cfg, init_rng)
    crit = init_critic(cfg, init_rng)

    def opt():
        return T.AdamState(alpha=cfg.alpha, beta1=cfg.beta1, beta2=cfg.beta2)

    return ModelCheckpoint(cfg, gen, crit, opt(), opt(), 0)


def sample_latent(cfg: GanConfig, n: int, rng) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, cfg.latent_dim)).astype(cfg.dtype)


def _set_requires_grad(params, flag):
    for p in params.values():
        p.requires_grad = flag
        p.grad = None


def _grads(params):
    return {k: p.grad for k, p in params.items()}


def _finite(*values):
    return all(np.isfinite(v) for v in values)


def _params_finite(params):
    return all(np.all(np.isfinite(p.data)) for p in params.values())


def train_step(ckpt: ModelCheckpoint, real_batches, rng) -> dict:
    """One generator update preceded by ``critic_iters`` critic updates.

    ``real_batches`` is either ``[critic_iters, batch, 1, len]`` (a fresh real
    batch per critic update) or a single ``[batch, 1, len]`` batch reused by
    every critic update. Updates ``ckpt`` in place and returns its metrics.
    On a non-finite loss or parameter the checkpoint is restored to its state
    at entry and DivergedError carries a copy of it.
    """
    cfg = ckpt.cfg
    real_batches = np.asarray(real_batches, dtype=cfg.dtype)
    if real_batches.ndim == 3:
        real_batches = np.broadcast_to(real_batches, (cfg.critic_iters,) + real_batches.shape)
    if real_batches.shape[1:] != (cfg.batch_size, 1, cfg.output_len) or real_batches.shape[0] != cfg.critic_iters:
        raise ShapeError(f"real batches must be [{cfg.critic_iters}, {cfg.batch_size}, 1, {cfg.output_len}], "
                         f"got {real_batches.shape}")
    snapshot = ckpt.copy()
    B = cfg.batch_size

    def diverged(what):
        _restore(ckpt, snapshot)
        raise DivergedError(f"non-finite {what} at step {snapshot.step + 1}", checkpoint=snapshot.copy(),
                            step=snapshot.step + 1)

    # critic updates, generator frozen
    _set_requires_grad(ckpt.generator, False)
    _set_requires_grad(ckpt.critic, True)
    critic = WaveCritic(ckpt.critic, cfg)
    for it in range(cfg.critic_iters):
        x_real = real_batches[it]
        x_fake = generator_forward(ckpt.generator, sample_latent(cfg, B, rng), cfg).data
        d_real = critic.score(x_real, rng)
        d_fake = critic.score(x_fake, rng)
        wdist = T.sub(T.mean(d_real), T.mean(d_fake))
        gp = gradient_penalty(critic, x_real, x_fake, rng, cfg.gp_lambda)
        loss = T.add(T.scale(wdist, -1.0), gp)
        c_loss, w_est, gp_val = float(loss.data), float(wdist.data), float(gp.data)
        if not _finite(c_loss, w_est):
            diverged("critic loss")
        T.backward(loss)
        T.adam_step(ckpt.critic, _grads(ckpt.critic), ckpt.critic_opt)
        if not _params_finite(ckpt.critic):
            diverged("critic parameters")

    # generator update, critic frozen
    _set_requires_grad(ckpt.critic, False)
    _set_requires_grad(ckpt.generator, True)
    fake = generator_forward(ckpt.generator, sample_latent(cfg, B, rng), cfg)
    g_loss_t = T.scale(T.mean(critic.score(fake, rng)), -1.0)
    g_loss = float(g_loss_t.data)
    if not _finite(g_loss):
        diverged("generator loss")
    T.backward(g_loss_t)
    T.adam_step(ckpt.generator, _grads(ckpt.generator), ckpt.gen_opt)
    if not _params_finite(ckpt.generator):
        diverged("generator parameters")
    _set_requires_grad(ckpt.critic, True)
    for p in list(ckpt.generator.values()) + list(ckpt.critic.values()):
        p.grad = None
    ckpt.step += 1
    return {"step": ckpt.step, "critic_loss": c_loss, "gen_loss": g_loss,
            "wasserstein_estimate": w_est, "gradient_penalty": gp_val}


def _restore(ckpt: ModelCheckpoint, snap: ModelCheckpoint) -> None:
    s = snap.copy()
    ckpt.generator, ckpt.critic = s.generator, s.critic
    ckpt.gen_opt, ckpt.critic_opt, ckpt.step = s.gen_opt, s.critic_opt, s.step


class BatchStream:
    """Endless shuffled passes over ``n`` items; a batch may straddle two passes."""

    def __init__(self, n: int, batch_size: int, rng):
        self.n, self.batch_size, self.rng = n, batch_size, rng
        self.consumed = 0
        self._order = np.empty(0, dtype=np.int64)

    @property
    def epochs(self) -> int:
        return self.consumed // self.n

    def next(self) -> np.ndarray:
        while self._order.size < self.batch_size:
            self._order = np.concatenate([self._order, self.rng.permutation(self.n)])
        idx, self._order = self._order[: self.batch_size], self._order[self.batch_size:]
        self.consumed += self.batch_size
        return idx


def epochs_after(total_steps: int, batch_size: int, corpus_size: int, critic_iters: int = 5) -> int:
    """Completed passes over the corpus after ``total_steps`` training steps.

    Each step draws one real batch per critic update.
    """
    return (total_steps * critic_iters * batch_size) // corpus_size


def clips_to_array(clips, cfg: GanConfig) -> np.ndarray:
    if len(clips) == 0:
        raise EmptyCorpus("training corpus is empty")
    arr = np.stack([np.asarray(c.samples, dtype=cfg.dtype) for c in clips])
    if arr.shape[1] != cfg.output_len:
        raise ShapeError(f"clips have {arr.shape[1]} samples, model expects {cfg.output_len}")
    return arr[:, None, :]


@dataclass
class TrainResult:
    checkpoint: ModelCheckpoint
    metrics: list
    epochs: int
    init_generator_hash: str


def train(corpus, cfg: GanConfig, *, checkpoint_dir=None, metrics_path=None, record_wallclock=False,
          progress=None, progress_every=100) -> TrainResult:
    """Train a fresh generator/critic pair for ``cfg.total_steps`` steps.

    ``corpus`` is a sequence of clips or an array ``[n, 1, len]``. With
    ``checkpoint_dir`` a checkpoint is written every ``cfg.checkpoint_every``
    steps and at the end (``final.npz``). ``metrics_path`` receives one CSV
    row per step; wall-clock time is left blank unless ``record_wallclock``,
    so that identical seeds give byte-identical logs.
    """
    cfg.validate()
    data = corpus if isinstance(corpus, np.ndarray) else clips_to_array(corpus, cfg)
    if data.shape[0] == 0:
        raise EmptyCorpus("training corpus is empty")
    data = data.astype(cfg.dtype, copy=False)
    ckpt = init_checkpoint(cfg)
    init_hash = ckpt.generator_hash()
    _, data_rng, noise_rng = _streams(cfg.seed)
    stream = BatchStream(data.shape[0], cfg.batch_size, data_rng)
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
    writer = fh = None
    if metrics_path is not None:
        Path(metrics_path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(metrics_path, "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
    metrics = []
    t0 = time.perf_counter()
    try:
        for _ in range(cfg.total_steps):
            batches = np.stack([data[stream.next()] for _ in range(cfg.critic_iters)])
            try:
                m = train_step(ckpt, batches, noise_rng)
            except DivergedError as exc:
                if checkpoint_dir is not None and exc.checkpoint is not None:
                    save_checkpoint(exc.checkpoint, checkpoint_dir / "last_good.npz")
                raise
            m["wallclock_s"] = round(time.perf_counter() - t0, 3) if record_wallclock else None
            metrics.append(m)
            if writer is not None:
                writer.writerow([m["step"], _num(m["critic_loss"]), _num(m["gen_loss"]),
                                 _num(m["wasserstein_estimate"]),
                                 "" if m["wallclock_s"] is None else m["wallclock_s"]])
                fh.flush()
            if progress is not None and (ckpt.step % progress_every == 0 or ckpt.step == cfg.total_steps):
                progress(m)
            if (checkpoint_dir is not None and cfg.checkpoint_every
                    and ckpt.step % cfg.checkpoint_every == 0 and ckpt.step < cfg.total_steps):
                save_checkpoint(ckpt, checkpoint_dir / f"step{ckpt.step:06d}.npz")
    finally:
        if fh is not None:
            fh.close()
    ckpt.rng_state = {"data": data_rng.bit_generator.state, "noise": noise_rng.bit_generator.state}
    if checkpoint_dir is not None:
        save_checkpoint(ckpt, checkpoint_dir / "final.npz")
    return TrainResult(ckpt, metrics, stream.epochs, init_hash)


def estimate_wasserstein(generator: dict, data, cfg: GanConfig, *, critic_steps=200, seed=0,
                         eval_batches=4) -> float:
    """Wasserstein-1 estimate between ``data`` and a frozen generator.

    A freshly initialized critic is trained alone (with the gradient
    penalty) for ``critic_steps`` updates, then ``mean D(real) - mean
    D(fake)`` is averaged over ``eval_batches`` new batches. Using the same
    seed and budget for two generators makes their estimates comparable,
    which the critic inside a training run is not: it starts untrained.
    """
    data = np.asarray(data, dtype=cfg.dtype)
    init_rng, data_rng, noise_rng = _streams([seed, 7])
    critic_params = init_critic(cfg, init_rng)
    opt = T.AdamState(alpha=cfg.alpha, beta1=cfg.beta1, beta2=cfg.beta2)
    gen = _frozen(generator)
    critic = WaveCritic(critic_params, cfg)
    stream = BatchStream(data.shape[0], cfg.batch_size, data_rng)
    for _ in range(critic_steps):
        x_real = data[stream.next()]
        x_fake = generator_forward(gen, sample_latent(cfg, cfg.batch_size, noise_rng), cfg).data
        wdist = T.sub(T.mean(critic.score(x_real, noise_rng)), T.mean(critic.score(x_fake, noise_rng)))
        loss = T.add(T.scale(wdist, -1.0), gradient_penalty(critic, x_real, x_fake, noise_rng, cfg.gp_lambda))
        T.backward(loss)
        T.adam_step(critic_params, _grads(critic_params), opt)
        for p in critic_params.values():
            p.grad = None
    frozen = WaveCritic(_frozen(critic_params), cfg)
    vals = []
    for _ in range(eval_batches):
        x_real = data[stream.next()]
        x_fake = generator_forward(gen, sample_latent(cfg, cfg.batch_size, noise_rng), cfg).data
        vals.append(float(np.mean(frozen.score(x_real, noise_rng).data)
                          - np.mean(frozen.score(x_fake, noise_rng).data)))
    return float(np.mean(vals))


def _num(v):
    return repr(float(v))


def generate_batch(ckpt: ModelCheckpoint, n: int, rng, *, id_prefix="g", chunk=64):
    """``n`` clips from independent uniform latent draws, clamped to [-1, 1]."""
    if n <= 0:
        raise ConfigError("n must be positive")
    cfg = ckpt.cfg
    z = sample_latent(cfg, n, rng)
    out = []
    for a in range(0, n, chunk):
        y = generator_forward(_frozen(ckpt.generator), z[a: a + chunk], cfg).data[:, 0, :]
        y = np.clip(y, -1.0, 1.0)
        for i, row in enumerate(y):
            out.append(WaveformClip(row, id=f"{id_prefix}{a + i:05d}", label=Label.UNKNOWN))
    return out


def _frozen(params):
    return {k: T.Tensor(v.data) for k, v in params.items()}


# ---- checkpoint files ---------------------------------------------------------

def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    arrays = {}
    for k, v in ckpt.generator.items():
        arrays[f"generator.{k}"] = v.data
    for k, v in ckpt.critic.items():
        arrays[f"critic.{k}"] = v.data
    for tag, opt in (("gen_opt", ckpt.gen_opt), ("critic_opt", ckpt.critic_opt)):
        for k, v in opt.m.items():
            arrays[f"{tag}.m.{k}"] = v
        for k, v in opt.v.items():
            arrays[f"{tag}.v.{k}"] = v
    meta = {
        "step": ckpt.step,
        "config": ckpt.cfg.to_dict(),
        "config_hash": ckpt.config_hash,
        "gen_opt_step": ckpt.gen_opt.step,
        "critic_opt_step": ckpt.critic_opt.step,
        "rng_state": ckpt.rng_state,
    }
    T.save_arrays(path, arrays, meta)


def load_checkpoint(path) -> ModelCheckpoint:
    arrays, meta = T.load_arrays(path)
    cfg = GanConfig(**meta["config"])
    if cfg.hash() != meta.get("config_hash"):
        raise ValueError(f"{path}: config hash mismatch")
    gen, crit = {}, {}
    opts = {"gen_opt": T.AdamState(cfg.alpha, cfg.beta1, cfg.beta2, step=meta["gen_opt_step"]),
            "critic_opt": T.AdamState(cfg.alpha, cfg.beta1, cfg.beta2, step=meta["critic_opt_step"])}
    for key, arr in arrays.items():
        head, rest = key.split(".", 1)
        if head == "generator":
            gen[rest] = T.Tensor(arr, requires_grad=True, name=rest)
        elif head == "critic":
            crit[rest] = T.Tensor(arr, requires_grad=True, name=rest)
        else:
            kind, name = rest.split(".", 1)
            getattr(opts[head], kind)[name] = arr
    expected = init_checkpoint(cfg)
    for mine, ref in ((gen, expected.generator), (crit, expected.critic)):
        if set(mine) != set(ref) or any(mine[k].shape != ref[k].shape for k in ref):
            raise ValueError(f"{path}: parameter set does not match its config")
    return ModelCheckpoint(cfg, gen, crit, opts["gen_opt"], opts["critic_opt"], meta["step"],
                           meta.get("rng_state", {}))
