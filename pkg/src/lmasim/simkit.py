"""Monte Carlo experiment drivers: BER sweeps, user and robustness sweeps,
timing benchmarks, constellation dumps, and training-loss comparisons.

Every experiment is a pure function of a :class:`Scenario` plus explicit
seeds, so repeated runs are bit-identical.  Comparisons between algorithms
are paired: a shared channel configuration seed fixes the channel, and the
bit/noise streams of the classic algorithms derive from the scenario master
seed and the SNR point alone, never from the algorithm.  Results go to CSV
files with one-line header schemas plus a JSON sidecar carrying the
scenario, the seeds, and the package version.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import stats

from . import __version__
from .channel import ChannelConfig, IcsiConfig, generate, perturb
from .codebook import PmhBuildParams, build_pmh, index_to_bits
from .errors import ConfigError, DimensionError, InfeasibleDimensionError, \
    TrainingError
from .learned import (
    BerCurve,
    TrainParams,
    architecture_from,
    block_matrix,
    build,
    forward_link,
    make_training_bits,
    split_streams,
    train,
    train_params_for,
)
from .link import NoiseConfig, candidate_images, modulate_batch, \
    nearest_codewords, normalize_sum_power, stack_codewords
from .neural import forward as net_forward
from .numerics import derived_seed, rng_from
from .precoding import (
    MODE_BD,
    MODE_SUBARRAY,
    bd_precode,
    subarray_precode,
    validate_dims,
)

ALGORITHM_BD = "bd"
ALGORITHM_SUBARRAY = "subarray"
ALGORITHM_NEURAL = "neural"
ALGORITHM_E2E = "e2e"
ALGORITHMS = (ALGORITHM_BD, ALGORITHM_SUBARRAY, ALGORITHM_NEURAL,
              ALGORITHM_E2E)
CLASSIC_ALGORITHMS = (ALGORITHM_BD, ALGORITHM_SUBARRAY)
LEARNED_ALGORITHMS = (ALGORITHM_NEURAL, ALGORITHM_E2E)

#: Precoder mode behind each algorithm (the e2e variant has none).
_PRECODER_MODE = {ALGORITHM_BD: MODE_BD, ALGORITHM_SUBARRAY: MODE_SUBARRAY,
                  ALGORITHM_NEURAL: MODE_BD}

#: Default stop rule for one BER point.
MIN_ERRORS = 200
MAX_BITS = 1_000_000


@dataclass(frozen=True)
class Scenario:
    """One fully specified experiment cell.

    The channel is pinned by ``channel_config`` (including its seed, so
    algorithms compared under the same config see the same channel); the
    master ``seed`` drives everything else: bit streams, noise streams,
    codebook construction, subarray rotations, network initialization,
    and training.  ``p_t`` defaults to one power unit per transmit
    antenna.  Learned algorithms need ``train``; an ``icsi`` entry makes
    precoding and training run on a perturbed channel estimate while
    transmission stays on the true channel.
    """

    channel_config: ChannelConfig
    stream_counts: tuple
    algorithm: str
    p_t: float | None = None
    train: TrainParams | None = None
    icsi: IcsiConfig | None = None
    seed: int = 0
    noise_convention: str = "sum-power"

    def __post_init__(self):
        object.__setattr__(self, "stream_counts",
                           tuple(int(n) for n in self.stream_counts))
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; "
                              f"choose from {ALGORITHMS}")
        if len(self.stream_counts) != self.channel_config.n_users:
            raise DimensionError("one stream count per user")
        if self.algorithm in _PRECODER_MODE:
            feas = validate_dims(self.channel_config, self.stream_counts,
                                 _PRECODER_MODE[self.algorithm])
            if not feas.ok:
                raise InfeasibleDimensionError(
                    f"{self.algorithm} is infeasible here: "
                    f"{', '.join(feas.violated)}", violated=feas.violated)
        elif min(self.stream_counts) < 1:
            raise ConfigError("stream counts must be >= 1")
        if self.algorithm in LEARNED_ALGORITHMS:
            if self.train is None:
                raise ConfigError(f"{self.algorithm} needs training "
                                  "parameters")
            if self.train.n_users != self.channel_config.n_users:
                raise ConfigError("training recipe user count does not "
                                  "match the channel")
        if self.p_t is not None and not self.p_t > 0:
            raise ConfigError("p_t must be > 0")

    @property
    def power(self):
        if self.p_t is not None:
            return float(self.p_t)
        return float(self.channel_config.n_tx)


@dataclass(frozen=True)
class TimingReport:
    """Per-stream-count detection and whole-pipeline times, per user.

    ``entries`` holds (n_k, t_o_s, t_d_s) tuples; detection is a segment
    of the pipeline, so t_d can never exceed t_o.
    """

    algorithm: str
    entries: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "entries",
            tuple((int(n), float(t_o), float(t_d))
                  for n, t_o, t_d in self.entries))
        for n, t_o, t_d in self.entries:
            if not (0.0 < t_d <= t_o):
                raise ConfigError(f"detection time must sit inside the "
                                  f"pipeline time (n_k={n})")


@dataclass(frozen=True)
class RealizedLink:
    """Scenario materialized: channels, precoders, per-user codebooks."""

    truth: object
    estimate: object
    precoders: object | None
    codebooks: tuple | None


def realize(scenario):
    """Draw the channel and build the transmit side of a scenario.

    With an ``icsi`` entry the precoders (and, downstream, network
    training) see the perturbed estimate; the true realization is kept
    for propagation.  Zero error variance collapses both to the same
    matrices, reproducing the perfect-CSI chain bit for bit.
    """
    truth = generate(scenario.channel_config)
    estimate = truth if scenario.icsi is None else perturb(truth,
                                                           scenario.icsi)

    precoders = codebooks = None
    if scenario.algorithm in (ALGORITHM_BD, ALGORITHM_NEURAL):
        precoders = bd_precode(estimate, scenario.stream_counts)
    elif scenario.algorithm == ALGORITHM_SUBARRAY:
        precoders = subarray_precode(
            estimate, seed=derived_seed(scenario.seed, "subarray"))

    if scenario.algorithm in CLASSIC_ALGORITHMS:
        per_user = scenario.power / scenario.channel_config.n_users
        codebooks = tuple(
            build_pmh(n, per_user,
                      PmhBuildParams(seed=derived_seed(scenario.seed,
                                                       "codebook", k)))
            for k, n in enumerate(scenario.stream_counts))
    return RealizedLink(truth=truth, estimate=estimate,
                        precoders=precoders, codebooks=codebooks)


def prepare_model(scenario):
    """Build and train the learned system a scenario calls for.

    Initialization, training data, and the training seed all derive from
    the scenario master seed (the recipe's own seed folds in, so distinct
    recipes stay distinct).  Returns the trained model and its report.
    """
    if scenario.algorithm not in LEARNED_ALGORITHMS:
        raise ConfigError(f"{scenario.algorithm!r} has no model to train")
    link = realize(scenario)
    params = replace(scenario.train,
                     seed=derived_seed(scenario.seed, "train",
                                       scenario.train.seed))
    arch = architecture_from(params, scenario.algorithm,
                             scenario.channel_config, scenario.stream_counts)
    system = build(arch, link.estimate, precoders=link.precoders,
                   seed=derived_seed(scenario.seed, "init"),
                   power=scenario.power, true_channel=link.truth,
                   noise_convention=scenario.noise_convention)
    data = make_training_bits(scenario.stream_counts, params.sample_count,
                              seed=derived_seed(scenario.seed, "train-data"))
    return train(system, params, data)


def _popcounts(n_bits):
    return np.array([bin(i).count("1") for i in range(2 ** n_bits)])


def _chunk_frames(frame_bits):
    return max(200, 25_000 // frame_bits)


def _classic_point(scenario, link, snr_db, min_errors, max_bits):
    """Accumulate one classic BER point under the stop rule.

    Bit and noise streams are derived from (master seed, SNR, chunk), so
    any two classic algorithms with the same scenario seed and channel
    config consume identical draws.
    """
    config = scenario.channel_config
    n_users = config.n_users
    images = [candidate_images(link.precoders, link.estimate.matrices, k,
                               link.codebooks[k]) for k in range(n_users)]
    pops = [_popcounts(cb.n_bits) for cb in link.codebooks]
    sigma_sq = NoiseConfig(snr_db, scenario.noise_convention).variance(
        scenario.power)
    frame_bits = sum(scenario.stream_counts)
    per_chunk = _chunk_frames(frame_bits)
    tag = f"{float(snr_db)!r}"

    errors = bits_done = chunk = 0
    while errors < min_errors and bits_done < max_bits:
        bit_rng = rng_from(derived_seed(scenario.seed, "bits", tag, chunk))
        noise_rng = rng_from(derived_seed(scenario.seed, "noise", tag,
                                          chunk))
        n_frames = min(per_chunk,
                       -(-(max_bits - bits_done) // frame_bits))
        sent = [bit_rng.integers(0, cb.size, size=n_frames)
                for cb in link.codebooks]
        x, _ = modulate_batch(sent, link.codebooks, link.precoders,
                              scenario.power)
        for k in range(n_users):
            h = link.truth.matrices[k]
            noise = (noise_rng.standard_normal((h.shape[0], n_frames))
                     + 1j * noise_rng.standard_normal((h.shape[0],
                                                       n_frames))) \
                * np.sqrt(sigma_sq / 2.0)
            y = h @ x + noise
            z = link.precoders.combiners[k] @ y
            got = nearest_codewords(images[k], z)
            errors += int(pops[k][np.bitwise_xor(got, sent[k])].sum())
        bits_done += n_frames * frame_bits
        chunk += 1
    return errors / bits_done, bits_done, errors


def _learned_point(scenario, model, snr_db, min_errors, max_bits):
    """Accumulate one learned-system BER point under the stop rule."""
    system = model.system
    frame_bits = system.arch.total_streams
    per_chunk = _chunk_frames(frame_bits)
    tag = f"{float(snr_db)!r}"

    errors = bits_done = chunk = 0
    while errors < min_errors and bits_done < max_bits:
        bit_rng = rng_from(derived_seed(scenario.seed, "bits", tag, chunk))
        n_frames = min(per_chunk,
                       -(-(max_bits - bits_done) // frame_bits))
        raw = bit_rng.integers(0, 2, size=(n_frames, frame_bits))
        parts = split_streams(raw.astype(np.float64) - 0.5,
                              system.arch.stream_counts)
        predictions, _ = forward_link(
            system, parts, snr_db, mode="infer",
            seed=derived_seed(scenario.seed, "noise", tag, chunk),
            matrices=system.true_channel.matrices, update_stats=False)
        decided = np.concatenate([p > 0 for p in predictions], axis=1)
        errors += int(np.sum(decided != raw.astype(bool)))
        bits_done += n_frames * frame_bits
        chunk += 1
    return errors / bits_done, bits_done, errors


def ber_sweep(scenario, snr_list, min_errors=MIN_ERRORS, max_bits=MAX_BITS,
              model=None, workers=1):
    """BER at each SNR point, simulating until the stop rule fires.

    Each point runs until ``min_errors`` bit errors are seen or
    ``max_bits`` bits are simulated, whichever is first.  For learned
    algorithms a pre-trained ``model`` can be passed in; otherwise the
    scenario's training recipe is run first.  SNR points have
    independent derived random streams, so ``workers > 1`` fans them
    out over threads without changing any result.
    """
    snr_list = [float(s) for s in snr_list]
    if not snr_list:
        raise ConfigError("need at least one SNR point")
    if min_errors < 1 or max_bits < 1:
        raise ConfigError("stop rule must be positive")

    if scenario.algorithm in CLASSIC_ALGORITHMS:
        link = realize(scenario)

        def point(snr):
            return _classic_point(scenario, link, snr, min_errors, max_bits)
    else:
        if model is None:
            model, _ = prepare_model(scenario)
        fixed = model

        def point(snr):
            return _learned_point(scenario, fixed, snr, min_errors,
                                  max_bits)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(point, snr_list))
    else:
        points = [point(snr) for snr in snr_list]
    bers, bits, errors = zip(*points)
    return BerCurve(tuple(snr_list), tuple(bers), tuple(bits), tuple(errors))


def ber_interval(errors, bits, confidence=0.95):
    """Exact (Clopper-Pearson) two-sided binomial interval for one point.

    Zero-error points get a [0, upper] bound, which is how undetectably
    small BERs are compared against measured ones.
    """
    if bits < 1 or errors < 0 or errors > bits:
        raise ConfigError("need 0 <= errors <= bits with bits >= 1")
    alpha = 1.0 - confidence
    lo = 0.0 if errors == 0 else float(
        stats.beta.ppf(alpha / 2.0, errors, bits - errors + 1))
    hi = 1.0 if errors == bits else float(
        stats.beta.ppf(1.0 - alpha / 2.0, errors + 1, bits - errors))
    return lo, hi


#: Default training recipe per user count for the user sweep.
SETS_BY_USERS = {2: "set1", 3: "set2", 4: "set3"}


def user_sweep(n_tx, k_list, snr_db=10.0, n_rx_user=2, n_streams_user=2,
               n_ray=3, algorithms=(ALGORITHM_BD, ALGORITHM_SUBARRAY,
                                    ALGORITHM_NEURAL),
               seed=0, min_errors=MIN_ERRORS, max_bits=MAX_BITS,
               sets_by_users=None, train_overrides=None):
    """BER per (algorithm, user count) at one SNR.

    Every user count gets its own channel (same for all algorithms);
    algorithm/count combinations that violate the feasibility rules are
    left out of the result rather than raised.  Returns rows of
    ``(k, algorithm, ber, bits, errors)`` ready for the users CSV.
    """
    sets_by_users = dict(SETS_BY_USERS if sets_by_users is None
                         else sets_by_users)
    overrides = dict(train_overrides or {})
    rows = []
    for n_users in k_list:
        config = ChannelConfig(
            n_tx=n_tx, users=(n_rx_user,) * n_users, n_ray=n_ray,
            seed=derived_seed(seed, "channel", n_users))
        for algorithm in algorithms:
            params = None
            if algorithm in LEARNED_ALGORITHMS:
                set_id = sets_by_users.get(n_users)
                if set_id is None:
                    raise ConfigError(f"no training recipe mapped for "
                                      f"{n_users} users")
                params = train_params_for(set_id, **overrides)
            try:
                scenario = Scenario(
                    channel_config=config,
                    stream_counts=(n_streams_user,) * n_users,
                    algorithm=algorithm, train=params,
                    seed=derived_seed(seed, "cell", n_users))
            except InfeasibleDimensionError:
                continue
            curve = ber_sweep(scenario, [snr_db], min_errors=min_errors,
                              max_bits=max_bits)
            rows.append((n_users, algorithm, curve.ber[0], curve.bits[0],
                         curve.errors[0]))
    return tuple(rows)


def icsi_sweep(scenario, sigma_e_list, snr_list, min_errors=MIN_ERRORS,
               max_bits=MAX_BITS, workers=1):
    """One BER curve per estimation-error variance.

    All variances share the perturbation seed and the bit/noise streams,
    so curves differ only through the channel estimate; zero variance
    reproduces the scenario's perfect-CSI curve bit for bit.
    """
    curves = {}
    for sigma_e_sq in sigma_e_list:
        icsi = IcsiConfig(sigma_e_sq=float(sigma_e_sq),
                          seed=derived_seed(scenario.seed, "icsi"))
        perturbed = replace(scenario, icsi=icsi)
        curves[float(sigma_e_sq)] = ber_sweep(
            perturbed, snr_list, min_errors=min_errors, max_bits=max_bits,
            workers=workers)
    return curves


def _detect_exhaustive(images, z):
    """Scan every candidate image sequentially; return the best index.

    This is the canonical exhaustive receiver procedure, evaluating one
    codeword hypothesis at a time, and is what the latency benchmark
    measures; the Monte Carlo loops use the vectorized table scan
    instead.
    """
    best = np.inf
    best_i = 0
    for i in range(images.shape[0]):
        d = z - images[i]
        metric = float(np.real(np.vdot(d, d)))
        if metric < best:
            best = metric
            best_i = i
    return best_i


def _time_classic_frames(scenario, link, snr_db, repetitions):
    """Median per-frame (pipeline, detection) seconds for a classic link."""
    config = scenario.channel_config
    n_users = config.n_users
    images = [candidate_images(link.precoders, link.estimate.matrices, k,
                               link.codebooks[k]) for k in range(n_users)]
    sigma_sq = NoiseConfig(snr_db, scenario.noise_convention).variance(
        scenario.power)
    rng = rng_from(derived_seed(scenario.seed, "bench"))
    t_total, t_detect = [], []
    for _ in range(repetitions):
        sent = [int(rng.integers(0, cb.size)) for cb in link.codebooks]
        start = time.perf_counter()
        bits = [index_to_bits(sent[k], link.codebooks[k].n_bits)
                for k in range(n_users)]
        s = stack_codewords(bits, link.codebooks)
        v = link.precoders.composite() @ s
        x, _ = normalize_sum_power(v, scenario.power)
        x = x[:, 0]
        zs = []
        for k in range(n_users):
            h = link.truth.matrices[k]
            noise = (rng.standard_normal(h.shape[0])
                     + 1j * rng.standard_normal(h.shape[0])) \
                * np.sqrt(sigma_sq / 2.0)
            zs.append(link.precoders.combiners[k] @ (h @ x + noise))
        mid = time.perf_counter()
        for k in range(n_users):
            _detect_exhaustive(images[k], zs[k])
        end = time.perf_counter()
        t_total.append(end - start)
        t_detect.append(end - mid)
    return (float(np.median(t_total)) / n_users,
            float(np.median(t_detect)) / n_users)


def _time_learned_frames(model, scenario, snr_db, repetitions):
    """Median per-frame (pipeline, detection) seconds for a learned link."""
    system = model.system
    arch = system.arch
    sigma_sq = NoiseConfig(snr_db, system.noise_convention).variance(
        system.power)
    rng = rng_from(derived_seed(scenario.seed, "bench"))
    f_block = block_matrix(system.precoders.composite())
    h_blocks = [block_matrix(np.asarray(m))
                for m in system.true_channel.matrices]
    n_all = arch.total_streams
    t_total, t_detect = [], []
    for _ in range(repetitions):
        raw = rng.integers(0, 2, size=n_all)
        start = time.perf_counter()
        u = raw.astype(np.float64) - 0.5
        s_block = np.empty(2 * n_all)
        offset = 0
        for k in range(arch.n_users):
            out, _ = net_forward(system.encoders[k], system.enc_specs[k],
                                 u[None, offset:offset
                                   + arch.stream_counts[k]], mode="infer")
            n = arch.stream_counts[k]
            s_block[offset:offset + n] = out[0, :n]
            s_block[n_all + offset:n_all + offset + n] = out[0, n:]
            offset += n
        v = f_block @ s_block
        x = v * np.sqrt(system.power / np.dot(v, v))
        ys = []
        for k in range(arch.n_users):
            noise = rng.standard_normal(h_blocks[k].shape[0]) \
                * np.sqrt(sigma_sq / 2.0)
            ys.append(h_blocks[k] @ x + noise)
        mid = time.perf_counter()
        for k in range(arch.n_users):
            pred, _ = net_forward(system.decoders[k], system.dec_specs[k],
                                  ys[k][None, :], mode="infer")
            _ = pred > 0
        end = time.perf_counter()
        t_total.append(end - start)
        t_detect.append(end - mid)
    return (float(np.median(t_total)) / arch.n_users,
            float(np.median(t_detect)) / arch.n_users)


def timing_bench(n_tx=16, n_rx_user=6, n_users=2, n_k_list=(3, 4, 5, 6),
                 repetitions=300, snr_db=10.0, seed=0, n_ray=3,
                 train_overrides=None):
    """Latency contrast: exhaustive detection vs learned decoding.

    For each stream count, one classic block-diagonalized link and one
    learned link are timed frame by frame (the receiver's unit of work);
    reported numbers are the median seconds per frame per user for the
    whole pipeline (t_o) and for the detection segment alone (t_d).
    Training time is excluded by design, and the training budget can be
    cut down via ``train_overrides`` since only the inference path is
    measured.
    """
    overrides = dict(train_overrides or {})
    classic_entries, learned_entries = [], []
    for n_k in n_k_list:
        config = ChannelConfig(n_tx=n_tx, users=(n_rx_user,) * n_users,
                               n_ray=n_ray,
                               seed=derived_seed(seed, "channel", n_k))
        classic = Scenario(channel_config=config,
                           stream_counts=(n_k,) * n_users,
                           algorithm=ALGORITHM_BD,
                           seed=derived_seed(seed, "cell", n_k))
        link = realize(classic)
        t_o, t_d = _time_classic_frames(classic, link, snr_db, repetitions)
        classic_entries.append((n_k, t_o, t_d))

        params = train_params_for("set4", **overrides)
        learned = Scenario(channel_config=config,
                           stream_counts=(n_k,) * n_users,
                           algorithm=ALGORITHM_NEURAL, train=params,
                           seed=derived_seed(seed, "cell", n_k))
        model, _ = prepare_model(learned)
        t_o, t_d = _time_learned_frames(model, learned, snr_db, repetitions)
        learned_entries.append((n_k, t_o, t_d))
    return {ALGORITHM_BD: TimingReport(ALGORITHM_BD,
                                       tuple(classic_entries)),
            ALGORITHM_NEURAL: TimingReport(ALGORITHM_NEURAL,
                                           tuple(learned_entries))}


def constellation_dump(scenario, user_k, model=None):
    """Noiseless receive-side points, one per codeword of user k.

    Classic algorithms: the combined receive image of each codeword.
    Learned algorithms: the decoder input for each bit pattern of user k
    (other users pinned to the all-ones pattern), exposing the learned
    constellation.  Rows are (user, codeword_index, dim, re, im).
    """
    n_k = scenario.stream_counts[user_k]
    rows = []
    if scenario.algorithm in CLASSIC_ALGORITHMS:
        link = realize(scenario)
        images = candidate_images(link.precoders, link.truth.matrices,
                                  user_k, link.codebooks[user_k])
        for idx in range(images.shape[0]):
            for dim in range(images.shape[1]):
                val = images[idx, dim]
                rows.append((user_k, idx, dim, float(val.real),
                             float(val.imag)))
        return tuple(rows)

    if model is None:
        model, _ = prepare_model(scenario)
    system = model.system
    m = 2 ** n_k
    parts = []
    for k, n in enumerate(scenario.stream_counts):
        if k == user_k:
            patterns = np.array([index_to_bits(i, n_k) for i in range(m)],
                                dtype=np.float64) - 0.5
        else:
            patterns = np.full((m, n), 0.5)
        parts.append(patterns)
    _, cache = forward_link(system, parts, snr_db=np.inf, mode="infer",
                            matrices=system.true_channel.matrices)
    y = cache.y_parts[user_k]
    n_rx = system.arch.rx_counts[user_k]
    for idx in range(m):
        for dim in range(n_rx):
            rows.append((user_k, idx, dim, float(y[idx, dim]),
                         float(y[idx, n_rx + dim])))
    return tuple(rows)


def loss_compare(channel_config, stream_counts, params, seed=0):
    """Train both learned variants identically; return their reports.

    The channel, initialization seed, training data, and per-step SNR
    draws are shared, so the histories differ only through the
    architectures.  A diverging run fails with the variant named.
    """
    reports = {}
    for algorithm in LEARNED_ALGORITHMS:
        scenario = Scenario(channel_config=channel_config,
                            stream_counts=tuple(stream_counts),
                            algorithm=algorithm, train=params, seed=seed)
        try:
            _, report = prepare_model(scenario)
        except TrainingError as exc:
            raise TrainingError(f"{algorithm}: {exc}",
                                epoch=exc.epoch) from exc
        reports[algorithm] = report
    return reports


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ber_csv(path, curve):
    lines = ["snr_db,ber,bits,errors"]
    lines += [f"{s!r},{b!r},{n},{e}"
              for s, b, n, e in zip(curve.snr_db, curve.ber, curve.bits,
                                    curve.errors)]
    _write_lines(path, lines)


def write_loss_csv(path, reports):
    """``reports`` maps variant name -> TrainReport."""
    lines = ["epoch,loss,variant"]
    for variant in sorted(reports):
        for epoch, loss in enumerate(reports[variant].epoch_losses):
            lines.append(f"{epoch},{loss!r},{variant}")
    _write_lines(path, lines)


def write_timing_csv(path, reports):
    """``reports`` maps algorithm name -> TimingReport."""
    lines = ["n_k,t_o_s,t_d_s,algorithm"]
    for algorithm in sorted(reports):
        for n_k, t_o, t_d in reports[algorithm].entries:
            lines.append(f"{n_k},{t_o!r},{t_d!r},{algorithm}")
    _write_lines(path, lines)


def write_constellation_csv(path, rows):
    lines = ["user,codeword_index,dim,re,im"]
    lines += [f"{u},{i},{d},{re!r},{im!r}" for u, i, d, re, im in rows]
    _write_lines(path, lines)


def write_users_csv(path, rows):
    lines = ["k,algorithm,ber,bits,errors"]
    lines += [f"{k},{a},{b!r},{n},{e}" for k, a, b, n, e in rows]
    _write_lines(path, lines)


def scenario_to_dict(scenario):
    out = asdict(scenario)
    out["power"] = scenario.power
    return out


def write_sidecar(path, scenario=None, seeds=None, extra=None):
    """JSON record sufficient to regenerate the artifact next to it."""
    payload = {"version": __version__}
    if scenario is not None:
        payload["scenario"] = scenario_to_dict(scenario)
    if seeds is not None:
        payload["seeds"] = seeds
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
