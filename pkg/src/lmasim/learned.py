"""Learned transmit/receive chains wrapped around the fixed link.

Two variants share one forward/backward machinery:

``neural``
    Per-user encoder networks map zero-centered bits to complex stream
    symbols, the frozen block-diagonalizing precoder and the sum-power
    normalization shape the transmit vector, and per-user decoder networks
    recover soft bits from the raw antenna observations.

``e2e``
    A single transmitter network replaces the encoders *and* the precoder,
    emitting the pre-normalization transmit vector directly.  Decoders,
    normalization, channel, and noise are identical to ``neural``.

Complex quantities travel through the networks in block-real form: a
complex n-vector becomes the 2n real vector ``[real parts; imaginary
parts]``, and a complex matrix acts on it as ``[[Ar, -Ai], [Ai, Ar]]``.
This is also the wire convention for checkpoints.

Training follows the weighted multi-user recipe: every mini-batch step
draws one SNR uniformly in dB from the configured range, pushes a batch
through the chain in train mode, combines per-user Huber losses with the
current weights, re-derives the weights from the losses, and applies one
Adam update.  Labels equal inputs; the receiver is supervised to echo the
transmitted bits.  One model is trained per channel realization; the
estimate handed to :func:`build` drives both the precoder and the in-graph
channel layer, while evaluation transmits over the true channel.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateSignalError,
    DimensionError,
    TrainingError,
)
from .link import DEGENERATE_NORM_SQ, CONVENTIONS, NoiseConfig
from .neural import (
    DENSE,
    DENSE_BN_RELU,
    LayerSpec,
    backward,
    forward,
    huber,
    huber_grad,
    init_adam,
    init_network,
    adam_step,
    uniform_weights,
    weighted_loss,
    WeightedLossState,
)
from .numerics import derived_seed, rng_from
from .precoding import PrecoderSet

VARIANT_NEURAL = "neural"
VARIANT_E2E = "e2e"
VARIANTS = (VARIANT_NEURAL, VARIANT_E2E)

#: Named training recipes.  All share the layer sizing, batch size,
#: learning rate, and the 0..15 dB SNR window; they differ in user count,
#: training-set size, and epoch budget.
SETS = {
    "set1": {"n_users": 2, "sample_count": 1_000, "epochs": 200},
    "set2": {"n_users": 3, "sample_count": 10_000, "epochs": 300},
    "set3": {"n_users": 4, "sample_count": 10_000, "epochs": 300},
    "set4": {"n_users": 2, "sample_count": 10_000, "epochs": 400},
}

_SET_BASE = {
    "n_h": 128,
    "h_enc": 3,
    "h_dec": 2,
    "batch_size": 100,
    "learning_rate": 1e-3,
    "snr_lo_db": 0.0,
    "snr_hi_db": 15.0,
}


@dataclass(frozen=True)
class TrainParams:
    """One column of the training recipe table, plus a seed."""

    set_id: str
    n_users: int
    n_h: int
    h_enc: int
    h_dec: int
    batch_size: int
    sample_count: int
    epochs: int
    learning_rate: float
    snr_lo_db: float
    snr_hi_db: float
    seed: int = 0

    def __post_init__(self):
        for name in ("n_users", "n_h", "h_enc", "h_dec", "batch_size",
                     "sample_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not self.snr_lo_db <= self.snr_hi_db:
            raise ConfigError("SNR range is empty")


def train_params_for(set_id, seed=0, **overrides):
    """Build a :class:`TrainParams` from a named set, with field overrides."""
    if set_id not in SETS:
        raise ConfigError(f"unknown parameter set {set_id!r}; "
                          f"choose from {sorted(SETS)}")
    fields = dict(_SET_BASE)
    fields.update(SETS[set_id])
    fields.update(overrides)
    return TrainParams(set_id=set_id, seed=seed, **fields)


@dataclass(frozen=True)
class DlArchitecture:
    """Layer sizing for one system: who encodes, who decodes, how wide.

    ``stream_counts[k]`` complex symbols are produced for user k from
    ``stream_counts[k]`` bits; ``rx_counts[k]`` is that user's antenna
    count.  Encoders and the transmitter exist depending on ``variant``;
    decoders always exist.
    """

    variant: str
    stream_counts: tuple
    rx_counts: tuple
    n_tx: int
    n_h: int
    h_enc: int
    h_dec: int

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "stream_counts",
                           tuple(int(n) for n in self.stream_counts))
        object.__setattr__(self, "rx_counts",
                           tuple(int(n) for n in self.rx_counts))
        if len(self.stream_counts) != len(self.rx_counts):
            raise DimensionError("one stream count and one antenna count "
                                 "per user")
        if not self.stream_counts:
            raise ConfigError("need at least one user")
        if min(self.stream_counts) < 1 or min(self.rx_counts) < 1:
            raise ConfigError("stream and antenna counts must be >= 1")
        for name in ("n_tx", "n_h", "h_enc", "h_dec"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def n_users(self):
        return len(self.stream_counts)

    @property
    def total_streams(self):
        return sum(self.stream_counts)

    def encoder_specs(self, k):
        """Bits of user k in, block-real stream symbols out."""
        n = self.stream_counts[k]
        hidden = [LayerSpec(DENSE_BN_RELU, self.n_h, self.n_h)
                  for _ in range(self.h_enc - 1)]
        return tuple([LayerSpec(DENSE_BN_RELU, n, self.n_h)] + hidden
                     + [LayerSpec(DENSE, self.n_h, 2 * n)])

    def decoder_specs(self, k):
        """Block-real antenna observation in, soft bits out."""
        hidden = [LayerSpec(DENSE_BN_RELU, self.n_h, self.n_h)
                  for _ in range(self.h_dec - 1)]
        return tuple([LayerSpec(DENSE_BN_RELU, 2 * self.rx_counts[k],
                                self.n_h)] + hidden
                     + [LayerSpec(DENSE, self.n_h, self.stream_counts[k])])

    def transmitter_specs(self):
        """All users' bits in, block-real transmit vector out.

        The first layer widens the bit vector to twice its length before
        the usual hidden stack; the output covers both real and imaginary
        parts of every transmit antenna.
        """
        n_all = self.total_streams
        layers = [LayerSpec(DENSE_BN_RELU, n_all, 2 * n_all),
                  LayerSpec(DENSE_BN_RELU, 2 * n_all, self.n_h)]
        layers += [LayerSpec(DENSE_BN_RELU, self.n_h, self.n_h)
                   for _ in range(self.h_enc - 1)]
        layers.append(LayerSpec(DENSE, self.n_h, 2 * self.n_tx))
        return tuple(layers)


def architecture_from(params, variant, channel_config, stream_counts):
    """Convenience: pair a training recipe with a concrete link geometry."""
    return DlArchitecture(
        variant=variant,
        stream_counts=tuple(stream_counts),
        rx_counts=tuple(channel_config.users),
        n_tx=channel_config.n_tx,
        n_h=params.n_h,
        h_enc=params.h_enc,
        h_dec=params.h_dec,
    )


@dataclass
class DlSystem:
    """Networks plus the frozen link pieces they are trained against.

    ``channel`` is the (possibly error-perturbed) estimate used inside the
    training graph and for the precoder; ``true_channel`` is what the air
    actually does, used when evaluating.  They coincide under perfect CSI.
    """

    arch: DlArchitecture
    channel: ChannelRealization
    true_channel: ChannelRealization
    precoders: PrecoderSet | None
    power: float
    noise_convention: str
    encoders: list | None
    enc_specs: list | None
    decoders: list
    dec_specs: list
    transmitter: list | None
    tx_specs: tuple | None
    seed: int


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch weighted loss, final loss weights, per-epoch seconds."""

    epoch_losses: tuple
    final_state: WeightedLossState
    epoch_seconds: tuple

    def __post_init__(self):
        object.__setattr__(self, "epoch_losses",
                           tuple(float(v) for v in self.epoch_losses))
        object.__setattr__(self, "epoch_seconds",
                           tuple(float(v) for v in self.epoch_seconds))
        if len(self.epoch_losses) != len(self.epoch_seconds):
            raise ConfigError("one wall-clock entry per epoch")
        for v in self.epoch_losses:
            if not np.isfinite(v) or v < 0:
                raise ConfigError("epoch losses must be finite and >= 0")


@dataclass(frozen=True)
class TrainedModel:
    """A system after training, with the recipe and final loss weights."""

    system: DlSystem
    params: TrainParams | None
    loss_state: WeightedLossState


@dataclass(frozen=True)
class BerCurve:
    """Bit error rate per SNR point with the underlying counts."""

    snr_db: tuple
    ber: tuple
    bits: tuple
    errors: tuple

    def __post_init__(self):
        n = len(self.snr_db)
        if not (len(self.ber) == len(self.bits) == len(self.errors) == n):
            raise ConfigError("all curve columns must have equal length")
        for b, total, err in zip(self.ber, self.bits, self.errors):
            if not (0.0 <= b <= 1.0) or err > total:
                raise ConfigError("inconsistent error counts")


def build(arch, channel, precoders=None, seed=0, power=None,
          true_channel=None, noise_convention="sum-power"):
    """Initialize a :class:`DlSystem` for the given architecture and link.

    The ``neural`` variant requires the precoder set it will be nested
    around; the ``e2e`` variant must not get one.  ``power`` defaults to
    one unit per transmit antenna.  The same seed always produces the
    same initialization.
    """
    if noise_convention not in CONVENTIONS:
        raise ConfigError(f"unknown noise convention {noise_convention!r}")
    if channel.config.n_tx != arch.n_tx:
        raise DimensionError(f"architecture expects {arch.n_tx} transmit "
                             f"antennas, channel has {channel.config.n_tx}")
    if tuple(channel.config.users) != arch.rx_counts:
        raise DimensionError("architecture and channel disagree on per-user "
                             "antenna counts")
    if true_channel is None:
        true_channel = channel
    elif (true_channel.config.n_tx != channel.config.n_tx
          or tuple(true_channel.config.users) != tuple(channel.config.users)):
        raise DimensionError("true channel dimensions differ from estimate")

    if arch.variant == VARIANT_NEURAL:
        if precoders is None:
            raise ConfigError("the neural variant nests around a precoder "
                              "set; none was given")
        if tuple(precoders.stream_counts) != arch.stream_counts:
            raise DimensionError("precoder stream counts do not match the "
                                 "architecture")
        if precoders.f_blocks[0].shape[0] != arch.n_tx:
            raise DimensionError("precoder transmit dimension does not "
                                 "match the architecture")
    else:
        if precoders is not None:
            raise ConfigError("the e2e variant replaces the precoder; "
                              "build it without one")

    if power is None:
        power = float(arch.n_tx)
    if not power > 0:
        raise ConfigError("power must be > 0")

    rng = rng_from(seed)
    encoders = enc_specs = transmitter = tx_specs = None
    if arch.variant == VARIANT_NEURAL:
        enc_specs = [arch.encoder_specs(k) for k in range(arch.n_users)]
        encoders = [init_network(s, rng) for s in enc_specs]
    else:
        tx_specs = arch.transmitter_specs()
        transmitter = init_network(tx_specs, rng)
    dec_specs = [arch.decoder_specs(k) for k in range(arch.n_users)]
    decoders = [init_network(s, rng) for s in dec_specs]

    return DlSystem(arch=arch, channel=channel, true_channel=true_channel,
                    precoders=precoders, power=float(power),
                    noise_convention=noise_convention,
                    encoders=encoders, enc_specs=enc_specs,
                    decoders=decoders, dec_specs=dec_specs,
                    transmitter=transmitter, tx_specs=tx_specs,
                    seed=seed if isinstance(seed, int) else -1)


def block_matrix(a):
    """Real 2m x 2n action of a complex m x n matrix on block-real vectors."""
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def _net_list(system):
    """All networks of a system in canonical (checkpoint) order."""
    nets = []
    if system.arch.variant == VARIANT_NEURAL:
        nets.extend(zip(system.encoders, system.enc_specs))
    else:
        nets.append((system.transmitter, system.tx_specs))
    nets.extend(zip(system.decoders, system.dec_specs))
    return nets


def _flat_layers(system):
    return [layer for net, _ in _net_list(system) for layer in net]


def _check_bits(parts, stream_counts):
    """Promote per-user bit arrays to 2-D and validate the +-0.5 alphabet."""
    clean = []
    batch = None
    if len(parts) != len(stream_counts):
        raise DimensionError(f"{len(parts)} bit arrays for "
                             f"{len(stream_counts)} users")
    for k, part in enumerate(parts):
        u = np.asarray(part, dtype=np.float64)
        if u.ndim == 1:
            u = u[None, :]
        if u.ndim != 2 or u.shape[1] != stream_counts[k]:
            raise DimensionError(
                f"user {k} bits have shape {np.shape(part)}, expected "
                f"(batch, {stream_counts[k]})")
        if batch is None:
            batch = u.shape[0]
        elif u.shape[0] != batch:
            raise DimensionError("all users must share one batch size")
        if not np.all(np.abs(u) == 0.5):
            raise ConfigError("bits must be zero-centered to -0.5/+0.5")
        clean.append(u)
    if batch == 0:
        raise DimensionError("empty batch")
    return clean


@dataclass
class ForwardCache:
    """Everything one forward pass leaves behind for the backward pass."""

    mode: str
    u_parts: list
    enc_caches: list | None
    tx_cache: list | None
    s_block: np.ndarray | None
    f_block: np.ndarray | None
    v: np.ndarray
    norm_sq: np.ndarray
    scale: np.ndarray
    x: np.ndarray
    h_blocks: list
    noise_parts: list
    y_parts: list
    dec_caches: list
    sigma_sq: float
    snr_db: float


def forward_link(system, bits, snr_db, mode="train", seed=0, matrices=None,
                 update_stats=True):
    """Run bits through encode/precode -> normalize -> channel -> decode.

    ``bits`` is one array of -0.5/+0.5 values per user (1-D arrays are
    treated as a batch of one).  ``matrices`` overrides the propagation
    channel (evaluation passes the true one); the default is the estimate
    the system was built with.  Returns the per-user soft-bit predictions
    and a cache for :func:`backward_link`.
    """
    arch = system.arch
    parts = _check_bits(bits, arch.stream_counts)
    batch = parts[0].shape[0]
    if matrices is None:
        matrices = system.channel.matrices
    if len(matrices) != arch.n_users:
        raise DimensionError("one channel matrix per user")

    sigma_sq = NoiseConfig(snr_db, system.noise_convention).variance(
        system.power)
    rng = rng_from(seed)
    n_all = arch.total_streams

    enc_caches = tx_cache = s_block = f_block = None
    if arch.variant == VARIANT_NEURAL:
        enc_caches = []
        s_block = np.empty((batch, 2 * n_all))
        offset = 0
        for k in range(arch.n_users):
            out, cache = forward(system.encoders[k], system.enc_specs[k],
                                 parts[k], mode=mode,
                                 update_stats=update_stats)
            enc_caches.append(cache)
            n = arch.stream_counts[k]
            s_block[:, offset:offset + n] = out[:, :n]
            s_block[:, n_all + offset:n_all + offset + n] = out[:, n:]
            offset += n
        f_block = block_matrix(system.precoders.composite())
        v = s_block @ f_block.T
    else:
        u_all = np.concatenate(parts, axis=1)
        v, tx_cache = forward(system.transmitter, system.tx_specs, u_all,
                              mode=mode, update_stats=update_stats)

    norm_sq = np.sum(v * v, axis=1)
    if np.any(norm_sq < DEGENERATE_NORM_SQ):
        raise DegenerateSignalError(
            "encoded signal has (near-)zero norm and cannot be normalized")
    scale = np.sqrt(system.power / norm_sq)
    x = v * scale[:, None]

    h_blocks, noise_parts, y_parts, dec_caches, predictions = [], [], [], [], []
    for k in range(arch.n_users):
        hb = block_matrix(np.asarray(matrices[k]))
        h_blocks.append(hb)
        noise = rng.standard_normal((batch, 2 * arch.rx_counts[k])) \
            * np.sqrt(sigma_sq / 2.0)
        noise_parts.append(noise)
        y = x @ hb.T + noise
        y_parts.append(y)
        u_hat, cache = forward(system.decoders[k], system.dec_specs[k], y,
                               mode=mode, update_stats=update_stats)
        dec_caches.append(cache)
        predictions.append(u_hat)

    cache = ForwardCache(mode=mode, u_parts=parts, enc_caches=enc_caches,
                         tx_cache=tx_cache, s_block=s_block, f_block=f_block,
                         v=v, norm_sq=norm_sq, scale=scale, x=x,
                         h_blocks=h_blocks, noise_parts=noise_parts,
                         y_parts=y_parts, dec_caches=dec_caches,
                         sigma_sq=sigma_sq, snr_db=float(snr_db))
    return predictions, cache


def backward_link(system, cache, grad_predictions):
    """Backpropagate prediction gradients to every trainable parameter.

    The path runs through the decoders, the fixed channel, the sum-power
    normalization quotient, and (variant-dependent) the fixed precoder
    into the encoders, or directly into the transmitter.  Returns one
    gradient list per network, in the order of :func:`_net_list`.
    """
    arch = system.arch
    grad_x = None
    dec_grads = []
    for k in range(arch.n_users):
        grads, g_y = backward(system.decoders[k], system.dec_specs[k],
                              cache.dec_caches[k], grad_predictions[k])
        dec_grads.append(grads)
        contrib = g_y @ cache.h_blocks[k]
        grad_x = contrib if grad_x is None else grad_x + contrib

    # x = sqrt(P) v / |v| has Jacobian sqrt(P)/|v| (I - v v^T / |v|^2).
    along = np.sum(cache.v * grad_x, axis=1) / cache.norm_sq
    grad_v = cache.scale[:, None] * (grad_x - cache.v * along[:, None])

    if arch.variant == VARIANT_NEURAL:
        grad_s = grad_v @ cache.f_block
        n_all = arch.total_streams
        enc_grads = []
        offset = 0
        for k in range(arch.n_users):
            n = arch.stream_counts[k]
            g_out = np.concatenate(
                [grad_s[:, offset:offset + n],
                 grad_s[:, n_all + offset:n_all + offset + n]], axis=1)
            grads, _ = backward(system.encoders[k], system.enc_specs[k],
                                cache.enc_caches[k], g_out)
            enc_grads.append(grads)
            offset += n
        return enc_grads + dec_grads

    tx_grads, _ = backward(system.transmitter, system.tx_specs,
                           cache.tx_cache, grad_v)
    return [tx_grads] + dec_grads


def link_grad_check(system, bits, snr_db, seed=0, eps=1e-5):
    """Max relative backprop-vs-central-difference error through the chain.

    The loss is the uniformly weighted sum of per-user Huber losses with
    labels equal to the inputs; the noise draw is pinned by the seed so
    the loss is a deterministic function of the parameters.  Batch
    statistics are used without touching the running averages, mirroring
    the network-level check (including the 1e-6 denominator floor that
    absorbs central-difference noise on dead parameters).
    """
    parts = _check_bits(bits, system.arch.stream_counts)
    weights = uniform_weights(system.arch.n_users).weights

    def run():
        return forward_link(system, parts, snr_db, mode="train", seed=seed,
                            update_stats=False)

    def loss_of(predictions):
        return float(sum(w * huber(p, u)
                         for w, p, u in zip(weights, predictions, parts)))

    predictions, cache = run()
    grad_predictions = [w * huber_grad(p, u)
                        for w, p, u in zip(weights, predictions, parts)]
    analytic = backward_link(system, cache, grad_predictions)

    worst = 0.0
    for (net, _specs), grads in zip(_net_list(system), analytic):
        for layer, grad in zip(net, grads):
            for key in grad:
                param = layer[key]
                it = np.nditer(param, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    keep = param[idx]
                    param[idx] = keep + eps
                    up = loss_of(run()[0])
                    param[idx] = keep - eps
                    down = loss_of(run()[0])
                    param[idx] = keep
                    numeric = (up - down) / (2.0 * eps)
                    a = grad[key][idx]
                    rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
                    worst = max(worst, rel)
    return worst


def make_training_bits(stream_counts, count, seed=0):
    """Uniform zero-centered bit samples, one row per frame."""
    rng = rng_from(seed)
    n_all = int(sum(stream_counts))
    return rng.integers(0, 2, size=(count, n_all)).astype(np.float64) - 0.5


def split_streams(data, stream_counts):
    """Cut stacked bit rows into the per-user arrays the chain expects."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != sum(stream_counts):
        raise DimensionError(f"data must be (frames, {sum(stream_counts)}), "
                             f"got {data.shape}")
    parts = []
    offset = 0
    for n in stream_counts:
        parts.append(data[:, offset:offset + n])
        offset += n
    return parts


def _batch_bounds(n_samples, batch_size):
    """Mini-batch boundaries; a trailing singleton joins its neighbor."""
    bounds = list(range(0, n_samples, batch_size)) + [n_samples]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        del bounds[-2]
    return bounds


def train(system, params, data):
    """Optimize the system's networks on the given bit samples.

    ``data`` holds ``params.sample_count`` stacked bit rows and doubles as
    its own label set.  Every step draws a fresh SNR uniformly in dB from
    the configured range, forms the weighted multi-user Huber loss,
    re-weights the users by their losses, and takes one Adam step over
    all trainable parameters.  The system is trained in place and comes
    back wrapped in a :class:`TrainedModel` next to its loss history.
    """
    arch = system.arch
    if params.n_users != arch.n_users:
        raise ConfigError(f"recipe is for {params.n_users} users, system "
                          f"has {arch.n_users}")
    for name in ("n_h", "h_enc", "h_dec"):
        if getattr(params, name) != getattr(arch, name):
            raise ConfigError(f"recipe and architecture disagree on {name}")
    data = np.asarray(data, dtype=np.float64)
    if data.shape != (params.sample_count, arch.total_streams):
        raise DimensionError(
            f"data must be ({params.sample_count}, {arch.total_streams}), "
            f"got {data.shape}")
    if not np.all(np.abs(data) == 0.5):
        raise ConfigError("training bits must be zero-centered to -0.5/+0.5")

    state = uniform_weights(arch.n_users)
    if params.epochs == 0:
        return (TrainedModel(system=system, params=params, loss_state=state),
                TrainReport((), state, ()))

    rng = rng_from(params.seed)
    flat = _flat_layers(system)
    adam = init_adam(flat, params.learning_rate)
    epoch_losses, epoch_seconds = [], []

    for epoch in range(params.epochs):
        started = time.perf_counter()
        order = rng.permutation(params.sample_count)
        bounds = _batch_bounds(params.sample_count, params.batch_size)
        step_losses = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            batch = data[order[lo:hi]]
            parts = split_streams(batch, arch.stream_counts)
            snr_db = rng.uniform(params.snr_lo_db, params.snr_hi_db)
            predictions, cache = forward_link(system, parts, snr_db,
                                              mode="train", seed=rng)
            per_user = np.array([huber(p, u)
                                 for p, u in zip(predictions, parts)])
            weights = state.weights
            total, state = weighted_loss(per_user, state)
            if not np.isfinite(total):
                raise TrainingError(
                    f"loss became non-finite at epoch {epoch}", epoch=epoch)
            grad_predictions = [w * huber_grad(p, u) for w, p, u
                                in zip(weights, predictions, parts)]
            grads = backward_link(system, cache, grad_predictions)
            flat_grads = [g for per_net in grads for g in per_net]
            try:
                adam_step(flat, flat_grads, adam)
            except TrainingError as exc:
                raise TrainingError(f"{exc} (epoch {epoch})",
                                    epoch=epoch) from exc
            step_losses.append(total)
        epoch_losses.append(float(np.mean(step_losses)))
        epoch_seconds.append(time.perf_counter() - started)

    report = TrainReport(tuple(epoch_losses), state, tuple(epoch_seconds))
    return TrainedModel(system=system, params=params, loss_state=state), report


def evaluate(model, snr_list, n_frames, seed=0):
    """Measure BER over the true channel at each SNR point.

    Frames are fresh random bits, the chain runs in infer mode (running
    batch statistics, noise at the given SNR), and a prediction above
    zero reads as a one.  Seeds are derived per SNR point, so the curve
    is deterministic for a given seed and independent of point order.
    """
    system = model.system
    arch = system.arch
    snr_list = [float(s) for s in snr_list]
    if not snr_list:
        raise ConfigError("need at least one SNR point")
    if n_frames < 1:
        raise ConfigError("n_frames must be >= 1")

    bers, bit_counts, error_counts = [], [], []
    for i, snr_db in enumerate(snr_list):
        bit_rng = rng_from(derived_seed(seed, "eval-bits", i))
        raw = bit_rng.integers(0, 2, size=(n_frames, arch.total_streams))
        parts = split_streams(raw.astype(np.float64) - 0.5,
                              arch.stream_counts)
        predictions, _ = forward_link(
            system, parts, snr_db, mode="infer",
            seed=derived_seed(seed, "eval-noise", i),
            matrices=system.true_channel.matrices)
        decided = np.concatenate([p > 0 for p in predictions], axis=1)
        errors = int(np.sum(decided != raw.astype(bool)))
        total = raw.size
        bers.append(errors / total)
        bit_counts.append(total)
        error_counts.append(errors)
    return BerCurve(tuple(snr_list), tuple(bers), tuple(bit_counts),
                    tuple(error_counts))


def channel_fingerprint(realization):
    """Content hash of a channel realization's matrices."""
    h = hashlib.sha256()
    h.update(repr((realization.config.n_tx,
                   tuple(realization.config.users))).encode())
    for m in realization.matrices:
        h.update(np.ascontiguousarray(m, dtype=np.complex128).tobytes())
    return h.hexdigest()


def precoder_fingerprint(pset):
    """Content hash of a precoder set's matrices."""
    h = hashlib.sha256()
    h.update(pset.mode.encode())
    for group in (pset.f_blocks, pset.combiners, pset.singular_values):
        for m in group:
            h.update(np.ascontiguousarray(m).tobytes())
    return h.hexdigest()


_CHECKPOINT_FORMAT = 1


def save_checkpoint(model, path):
    """Write a trained model to one ``.npz`` file.

    Arrays go in under ``net{i}.layer{j}.{key}`` names (running batchnorm
    statistics included); a JSON header records the architecture, power,
    noise convention, training recipe, final loss weights, and content
    hashes of the channel and precoder so loading can refuse mismatches.
    """
    system = model.system
    arch = system.arch
    arrays = {}
    for ni, (net, _specs) in enumerate(_net_list(system)):
        for li, layer in enumerate(net):
            for key, value in layer.items():
                arrays[f"net{ni}.layer{li}.{key}"] = value
    meta = {
        "format": _CHECKPOINT_FORMAT,
        "variant": arch.variant,
        "stream_counts": list(arch.stream_counts),
        "rx_counts": list(arch.rx_counts),
        "n_tx": arch.n_tx,
        "n_h": arch.n_h,
        "h_enc": arch.h_enc,
        "h_dec": arch.h_dec,
        "power": system.power,
        "noise_convention": system.noise_convention,
        "seed": system.seed,
        "channel_sha256": channel_fingerprint(system.channel),
        "precoder_sha256": (None if system.precoders is None
                            else precoder_fingerprint(system.precoders)),
        "train_params": (None if model.params is None
                         else asdict(model.params)),
        "loss_weights": [float(w) for w in model.loss_state.weights],
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path, channel, precoders=None, true_channel=None):
    """Rebuild a trained model, refusing mismatched channels or precoders.

    The caller provides the same channel estimate (and precoder set, for
    the neural variant) the model was trained against; content hashes
    must match the header.  ``true_channel`` optionally re-attaches the
    propagation channel for evaluation.
    """
    with np.load(path, allow_pickle=False) as data:
        if "meta" not in data:
            raise CheckpointError("missing checkpoint header")
        meta = json.loads(str(data["meta"]))
        arrays = {k: data[k] for k in data.files if k != "meta"}

    if meta.get("format") != _CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format "
                              f"{meta.get('format')!r}")
    if channel_fingerprint(channel) != meta["channel_sha256"]:
        raise CheckpointError("channel does not match the one the model "
                              "was trained against")
    if meta["precoder_sha256"] is None:
        if precoders is not None:
            raise CheckpointError("checkpoint was written without a "
                                  "precoder set")
    else:
        if precoders is None:
            raise CheckpointError("checkpoint needs its precoder set")
        if precoder_fingerprint(precoders) != meta["precoder_sha256"]:
            raise CheckpointError("precoder set does not match the one the "
                                  "model was trained against")

    arch = DlArchitecture(
        variant=meta["variant"],
        stream_counts=tuple(meta["stream_counts"]),
        rx_counts=tuple(meta["rx_counts"]),
        n_tx=meta["n_tx"], n_h=meta["n_h"],
        h_enc=meta["h_enc"], h_dec=meta["h_dec"])
    system = build(arch, channel, precoders=precoders, seed=meta["seed"],
                   power=meta["power"], true_channel=true_channel,
                   noise_convention=meta["noise_convention"])

    for ni, (net, _specs) in enumerate(_net_list(system)):
        for li, layer in enumerate(net):
            for key in layer:
                name = f"net{ni}.layer{li}.{key}"
                if name not in arrays:
                    raise CheckpointError(f"checkpoint is missing {name}")
                stored = arrays[name]
                if stored.shape != layer[key].shape:
                    raise CheckpointError(
                        f"{name} has shape {stored.shape}, expected "
                        f"{layer[key].shape}")
                layer[key] = stored.astype(np.float64)

    params = (None if meta["train_params"] is None
              else TrainParams(**meta["train_params"]))
    state = WeightedLossState(np.asarray(meta["loss_weights"]))
    return TrainedModel(system=system, params=params, loss_state=state)
