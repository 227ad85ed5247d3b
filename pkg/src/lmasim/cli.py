"""Command-line front end.

Experiments are described by JSON config trees (see the shipped set1 to
set4 files for complete examples), validated against a per-command key
schema before any compute; unknown keys anywhere in the tree are
rejected.  Flags can override single keys through dotted paths, so a
shipped config plus ``--set stop.max_bits=100000`` is a complete smoke
run.  Artifacts (CSV, NPZ, checkpoints) land in the output directory
next to a JSON sidecar that records the resolved config and seeds; a
sidecar is enough to regenerate its artifacts bit for bit.

Exit codes: 0 success, 1 configuration or validation problem,
2 infeasible system dimensions (the message names the violated rules),
3 numerical or training failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .channel import ChannelConfig, IcsiConfig, generate
from .codebook import PmhBuildParams, build_pmh
from .errors import (
    ConfigError,
    ConstructionError,
    DegenerateSignalError,
    InfeasibleDimensionError,
    LmaSimError,
    NumericalError,
    TrainingError,
)
from .learned import load_checkpoint, save_checkpoint, train_params_for
from .simkit import (
    ALGORITHMS,
    CLASSIC_ALGORITHMS,
    LEARNED_ALGORITHMS,
    MAX_BITS,
    MIN_ERRORS,
    Scenario,
    ber_sweep,
    constellation_dump,
    icsi_sweep,
    loss_compare,
    prepare_model,
    realize,
    timing_bench,
    user_sweep,
    write_ber_csv,
    write_constellation_csv,
    write_loss_csv,
    write_sidecar,
    write_timing_csv,
    write_users_csv,
)

#: Environment variable naming the default output directory.
OUT_DIR_VAR = "LMASIM_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

_SHIPPED_CONFIGS = ("set1", "set2", "set3", "set4")

_REQUIRED = object()

_STOP_DEFAULT = {"min_errors": MIN_ERRORS, "max_bits": MAX_BITS}
_SNR_GRID_DEFAULT = [0.0, 3.0, 6.0, 9.0, 12.0, 15.0]

#: Allowed (and default) keys per command; _REQUIRED marks keys the
#: config must provide.  Values are plain JSON trees; section builders
#: below turn them into typed objects and do the deep validation.
_SCHEMAS = {
    "channel": {"channel": _REQUIRED, "out_dir": None},
    "codebook": {"codebook": _REQUIRED, "out_dir": None},
    "precode": {"channel": _REQUIRED, "streams": _REQUIRED,
                "algorithm": "bd", "p_t": None, "seed": 0, "out_dir": None},
    "train": {"channel": _REQUIRED, "streams": _REQUIRED,
              "algorithm": "neural", "train": _REQUIRED, "p_t": None,
              "icsi": None, "seed": 0, "checkpoint": "model.npz",
              "out_dir": None},
    "ber": {"channel": _REQUIRED, "streams": _REQUIRED,
            "algorithm": _REQUIRED, "train": None, "icsi": None,
            "p_t": None, "seed": 0, "snr_db": _SNR_GRID_DEFAULT,
            "stop": _STOP_DEFAULT, "checkpoint": None, "out_dir": None},
    "users": {"n_tx": _REQUIRED, "k_list": [2, 3, 4], "snr_db": 10.0,
              "n_rx_user": 2, "n_streams_user": 2, "n_ray": 3,
              "algorithms": ["bd", "subarray", "neural"], "seed": 0,
              "stop": _STOP_DEFAULT, "sets_by_users": None,
              "train_overrides": {}, "out_dir": None},
    "icsi": {"channel": _REQUIRED, "streams": _REQUIRED,
             "algorithm": _REQUIRED, "train": None, "p_t": None, "seed": 0,
             "sigma_e_sq_list": [0.0, 0.001, 0.01, 0.1],
             "snr_db": _SNR_GRID_DEFAULT, "stop": _STOP_DEFAULT,
             "out_dir": None},
    "bench": {"n_tx": 16, "n_rx_user": 6, "n_users": 2,
              "n_k_list": [3, 4, 5, 6], "repetitions": 300, "snr_db": 10.0,
              "n_ray": 3, "seed": 0, "train_overrides": {},
              "out_dir": None},
    "constellation": {"channel": _REQUIRED, "streams": _REQUIRED,
                      "algorithm": _REQUIRED, "user_k": 0, "train": None,
                      "p_t": None, "seed": 0, "checkpoint": None,
                      "out_dir": None},
    "loss-compare": {"channel": _REQUIRED, "streams": _REQUIRED,
                     "train": _REQUIRED, "seed": 0, "out_dir": None},
}

#: Where --seed lands for commands without a master seed key.
_SEED_PATHS = {"channel": ("channel", "seed"),
               "codebook": ("codebook", "seed")}

#: Full experiment presets behind `reproduce`; overridable via --set.
_FIG_PRESETS = {
    "fig4": {"channel": {"n_tx": 18, "users": [2, 2], "n_ray": 3,
                         "seed": 4},
             "streams": [2, 2], "train": {"set_id": "set1"}, "seed": 0,
             "out_dir": None},
    "fig5": {"channel": {"n_tx": 24, "users": [2, 2, 2], "n_ray": 3,
                         "seed": 11},
             "streams": [2, 2, 2], "train": {"set_id": "set2"},
             "algorithms": ["bd", "subarray", "neural", "e2e"],
             "snr_db": [0.0, 1.5, 3.0, 4.5, 6.0, 7.5, 9.0, 10.5, 12.0,
                        13.5, 15.0],
             "stop": _STOP_DEFAULT, "seed": 0, "out_dir": None},
    "fig7": {"n_tx": 36, "k_list": [2, 3, 4], "snr_db": 10.0,
             "n_rx_user": 2, "n_streams_user": 2, "n_ray": 3,
             "algorithms": ["bd", "subarray", "neural"], "seed": 0,
             "stop": _STOP_DEFAULT, "sets_by_users": None,
             "train_overrides": {}, "out_dir": None},
    "fig8": {"n_tx": 16, "n_rx_user": 6, "n_users": 2,
             "n_k_list": [3, 4, 5, 6], "repetitions": 300, "snr_db": 10.0,
             "n_ray": 3, "seed": 0, "train_overrides": {},
             "out_dir": None},
    "fig9": {"channel": {"n_tx": 12, "users": [2, 2], "n_ray": 3,
                         "seed": 9},
             "streams": [2, 2], "algorithms": ["bd", "subarray"],
             "sigma_e_sq_list": [0.0, 0.001, 0.01, 0.1],
             "snr_db": [0.0, 3.0, 6.0, 9.0, 12.0], "stop": _STOP_DEFAULT,
             "p_t": None, "train": None, "seed": 1, "out_dir": None},
}


class _Parser(argparse.ArgumentParser):
    """Routes argparse usage errors through the config exit code."""

    def error(self, message):
        raise ConfigError(message)


def _as_int(where, value):
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return out


def _as_float(where, value):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return out


def _as_float_list(where, value):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a non-empty list of numbers")
    return [_as_float(f"{where}[{i}]", v) for i, v in enumerate(value)]


def _as_int_list(where, value):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a non-empty list of integers")
    return [_as_int(f"{where}[{i}]", v) for i, v in enumerate(value)]


def _check_mapping(where, data, allowed, required=()):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) under {where}: "
                          f"{', '.join(unknown)}")
    missing = sorted(set(required) - set(data))
    if missing:
        raise ConfigError(f"missing required key(s) under {where}: "
                          f"{', '.join(missing)}")


_CHANNEL_KEYS = ("n_tx", "users", "n_ray", "spacing_over_lambda", "seed")
_TRAIN_KEYS = ("set_id", "n_users", "n_h", "h_enc", "h_dec", "batch_size",
               "sample_count", "epochs", "learning_rate", "snr_lo_db",
               "snr_hi_db", "seed")
_TRAIN_OVERRIDE_KEYS = tuple(k for k in _TRAIN_KEYS if k != "set_id")
_ICSI_KEYS = ("sigma_e_sq", "seed")
_STOP_KEYS = ("min_errors", "max_bits")
_CODEBOOK_KEYS = ("n_bits", "power", "sample_count", "max_iters", "seed")


def _channel_from(where, data):
    _check_mapping(where, data, _CHANNEL_KEYS, required=("n_tx", "users"))
    kwargs = {"n_tx": _as_int(f"{where}.n_tx", data["n_tx"]),
              "users": tuple(_as_int_list(f"{where}.users", data["users"]))}
    if "n_ray" in data:
        kwargs["n_ray"] = _as_int(f"{where}.n_ray", data["n_ray"])
    if "spacing_over_lambda" in data:
        kwargs["spacing_over_lambda"] = _as_float(
            f"{where}.spacing_over_lambda", data["spacing_over_lambda"])
    if "seed" in data:
        kwargs["seed"] = _as_int(f"{where}.seed", data["seed"])
    return ChannelConfig(**kwargs)


def _train_from(where, data):
    _check_mapping(where, data, _TRAIN_KEYS, required=("set_id",))
    overrides = {k: v for k, v in data.items() if k != "set_id"}
    return train_params_for(data["set_id"], **overrides)


def _train_overrides_from(where, data):
    _check_mapping(where, data, _TRAIN_OVERRIDE_KEYS)
    return dict(data)


def _icsi_from(where, data):
    _check_mapping(where, data, _ICSI_KEYS, required=("sigma_e_sq",))
    return IcsiConfig(
        sigma_e_sq=_as_float(f"{where}.sigma_e_sq", data["sigma_e_sq"]),
        seed=_as_int(f"{where}.seed", data.get("seed", 0)))


def _stop_from(where, data):
    _check_mapping(where, data, _STOP_KEYS)
    merged = dict(_STOP_DEFAULT)
    merged.update(data)
    return {"min_errors": _as_int(f"{where}.min_errors",
                                  merged["min_errors"]),
            "max_bits": _as_int(f"{where}.max_bits", merged["max_bits"])}


def _algorithms_from(where, data):
    names = [str(a) for a in (data if isinstance(data, (list, tuple))
                              else [data])]
    for name in names:
        if name not in ALGORITHMS:
            raise ConfigError(f"{where}: unknown algorithm {name!r}")
    if not names:
        raise ConfigError(f"{where} must name at least one algorithm")
    return names


def _scenario_from(cfg, algorithm=None):
    algorithm = algorithm if algorithm is not None else cfg["algorithm"]
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm: unknown algorithm {algorithm!r}")
    train = None
    if algorithm in LEARNED_ALGORITHMS:
        if cfg.get("train") is None:
            raise ConfigError(f"{algorithm} runs need a train section")
        train = _train_from("train", cfg["train"])
    icsi = None
    if cfg.get("icsi") is not None:
        icsi = _icsi_from("icsi", cfg["icsi"])
    p_t = cfg.get("p_t")
    return Scenario(
        channel_config=_channel_from("channel", cfg["channel"]),
        stream_counts=tuple(_as_int_list("streams", cfg["streams"])),
        algorithm=algorithm,
        p_t=None if p_t is None else _as_float("p_t", p_t),
        train=train, icsi=icsi,
        seed=_as_int("seed", cfg.get("seed", 0)))


def _load_config(ref):
    if ref is None:
        return {}
    if ref in _SHIPPED_CONFIGS:
        text = resources.files("lmasim").joinpath(
            "configs", f"{ref}.json").read_text(encoding="utf-8")
    else:
        if not os.path.exists(ref):
            raise ConfigError(f"config {ref!r} is neither a file nor a "
                              f"shipped name {_SHIPPED_CONFIGS}")
        with open(ref, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {ref!r} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config {ref!r} must be a JSON object")
    return data


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"--set needs key.path=value, got {text!r}")
    path, raw = text.split("=", 1)
    keys = [p for p in path.split(".") if p]
    if not keys:
        raise ConfigError(f"--set has an empty key path in {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def _apply_override(tree, keys, value):
    node = tree
    for key in keys[:-1]:
        nxt = node.get(key)
        if nxt is None:
            nxt = node[key] = {}
        elif not isinstance(nxt, dict):
            raise ConfigError(f"--set path {'.'.join(keys)} descends "
                              f"through non-mapping key {key!r}")
        node = nxt
    node[keys[-1]] = value


def _resolve(command, args):
    """Merge defaults, config file, and flag overrides; reject strays."""
    if command == "reproduce":
        schema = _FIG_PRESETS[args.figure]
    else:
        schema = _SCHEMAS[command]
    cfg = {k: (None if v is _REQUIRED else json.loads(json.dumps(v)))
           for k, v in schema.items()}
    file_data = _load_config(args.config)

    where = args.figure if command == "reproduce" else command
    _check_mapping(f"the {where} config", file_data, schema)
    for key, value in file_data.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value

    for text in args.set or []:
        keys, value = _parse_override(text)
        _apply_override(cfg, keys, value)
    if args.seed is not None:
        _apply_override(cfg, list(_SEED_PATHS.get(command, ("seed",))),
                        args.seed)
    if args.out is not None:
        cfg["out_dir"] = args.out
    _check_mapping(f"the {where} config", cfg, schema)

    required = [k for k, v in schema.items()
                if v is _REQUIRED and cfg.get(k) is None]
    if required:
        raise ConfigError(f"missing required key(s) for {where}: "
                          f"{', '.join(sorted(required))}")
    return cfg


def _out_dir(cfg):
    return cfg.get("out_dir") or os.environ.get(OUT_DIR_VAR) or "."


class _Run:
    """One resolved invocation: plan first, then write artifacts."""

    def __init__(self, command, cfg, workers):
        self.command = command
        self.cfg = cfg
        self.out_dir = _out_dir(cfg)
        self.workers = workers
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return os.path.join(self.out_dir, name)

    def finish(self, sidecar_name, scenario=None, seeds=None):
        write_sidecar(self.path(sidecar_name), scenario=scenario,
                      seeds=seeds,
                      extra={"command": self.command, "config": self.cfg,
                             "artifacts": sorted(set(self.artifacts))})


def _plan(command, cfg):
    """Artifact names the command will produce, without computing."""
    names = {
        "channel": ["channel.npz", "channel.json"],
        "codebook": ["codebook.npz", "codebook.json"],
        "precode": ["precoders.npz", "precode.json"],
        "train": [cfg.get("checkpoint") or "model.npz", "loss.csv",
                  "train.json"],
        "ber": ["ber.csv", "ber.json"],
        "users": ["users.csv", "users.json"],
        "bench": ["timing.csv", "bench.json"],
        "constellation": ["constellation.csv", "constellation.json"],
        "loss-compare": ["loss.csv", "loss_compare.json"],
    }
    if command in names:
        return names[command]
    if command == "icsi":
        return [f"ber_icsi_{s:g}.csv" for s in cfg["sigma_e_sq_list"]] \
            + ["icsi.json"]
    raise ConfigError(f"unknown command {command!r}")


def _plan_reproduce(figure, cfg):
    if figure == "fig4":
        return ["loss.csv", "fig4.json"]
    if figure == "fig5":
        return [f"ber_{a}.csv" for a in cfg["algorithms"]] + ["fig5.json"]
    if figure == "fig7":
        return ["users.csv", "fig7.json"]
    if figure == "fig8":
        return ["timing.csv", "fig8.json"]
    return [f"ber_{a}_icsi_{s:g}.csv" for a in cfg["algorithms"]
            for s in cfg["sigma_e_sq_list"]] + ["fig9.json"]


def _run_channel(run):
    config = _channel_from("channel", run.cfg["channel"])
    realization = generate(config)
    np.savez(run.path("channel.npz"),
             **{f"h{k}": m for k, m in enumerate(realization.matrices)})
    run.finish("channel.json", seeds={"channel": config.seed})


def _run_codebook(run):
    data = run.cfg["codebook"]
    _check_mapping("codebook", data, _CODEBOOK_KEYS,
                   required=("n_bits", "power"))
    params = PmhBuildParams(
        sample_count=(None if data.get("sample_count") is None
                      else _as_int("codebook.sample_count",
                                   data["sample_count"])),
        max_iters=_as_int("codebook.max_iters", data.get("max_iters", 100)),
        seed=_as_int("codebook.seed", data.get("seed", 0)))
    book = build_pmh(_as_int("codebook.n_bits", data["n_bits"]),
                     _as_float("codebook.power", data["power"]), params)
    np.savez(run.path("codebook.npz"), codewords=book.codewords)
    run.finish("codebook.json", seeds={"codebook": params.seed})


def _run_precode(run):
    scenario = _scenario_from(run.cfg)
    if scenario.algorithm not in CLASSIC_ALGORITHMS:
        raise ConfigError("precode builds bd or subarray precoders only")
    link = realize(scenario)
    arrays = {}
    for k in range(scenario.channel_config.n_users):
        arrays[f"f{k}"] = link.precoders.f_blocks[k]
        arrays[f"w{k}"] = link.precoders.combiners[k]
        arrays[f"sv{k}"] = link.precoders.singular_values[k]
    np.savez(run.path("precoders.npz"), **arrays)
    run.finish("precode.json", scenario=scenario,
               seeds={"master": scenario.seed})


def _run_train(run):
    scenario = _scenario_from(run.cfg)
    if scenario.algorithm not in LEARNED_ALGORITHMS:
        raise ConfigError("train handles the learned algorithms only")
    model, report = prepare_model(scenario)
    save_checkpoint(model, run.path(run.cfg.get("checkpoint")
                                    or "model.npz"))
    write_loss_csv(run.path("loss.csv"), {scenario.algorithm: report})
    run.finish("train.json", scenario=scenario,
               seeds={"master": scenario.seed})


def _load_model_for(run, scenario):
    link = realize(scenario)
    path = run.cfg["checkpoint"]
    candidate = path if os.path.exists(path) \
        else os.path.join(run.out_dir, path)
    return load_checkpoint(candidate, link.estimate,
                           precoders=link.precoders,
                           true_channel=link.truth)


def _run_ber(run):
    scenario = _scenario_from(run.cfg)
    stop = _stop_from("stop", run.cfg["stop"])
    model = None
    if run.cfg.get("checkpoint") is not None:
        if scenario.algorithm in CLASSIC_ALGORITHMS:
            raise ConfigError("checkpoint only applies to learned "
                              "algorithms")
        model = _load_model_for(run, scenario)
    curve = ber_sweep(scenario, _as_float_list("snr_db", run.cfg["snr_db"]),
                      min_errors=stop["min_errors"],
                      max_bits=stop["max_bits"], model=model,
                      workers=run.workers)
    write_ber_csv(run.path("ber.csv"), curve)
    run.finish("ber.json", scenario=scenario,
               seeds={"master": scenario.seed})


def _users_rows(cfg):
    stop = _stop_from("stop", cfg["stop"])
    sets_by_users = None
    if cfg.get("sets_by_users") is not None:
        sets_by_users = {_as_int("sets_by_users key", k): str(v)
                         for k, v in cfg["sets_by_users"].items()}
    return user_sweep(
        n_tx=_as_int("n_tx", cfg["n_tx"]),
        k_list=_as_int_list("k_list", cfg["k_list"]),
        snr_db=_as_float("snr_db", cfg["snr_db"]),
        n_rx_user=_as_int("n_rx_user", cfg["n_rx_user"]),
        n_streams_user=_as_int("n_streams_user", cfg["n_streams_user"]),
        n_ray=_as_int("n_ray", cfg["n_ray"]),
        algorithms=tuple(_algorithms_from("algorithms",
                                          cfg["algorithms"])),
        seed=_as_int("seed", cfg["seed"]),
        min_errors=stop["min_errors"], max_bits=stop["max_bits"],
        sets_by_users=sets_by_users,
        train_overrides=_train_overrides_from("train_overrides",
                                              cfg["train_overrides"]))


def _run_users(run):
    write_users_csv(run.path("users.csv"), _users_rows(run.cfg))
    run.finish("users.json", seeds={"master": run.cfg["seed"]})


def _run_icsi(run):
    scenario = _scenario_from(run.cfg)
    stop = _stop_from("stop", run.cfg["stop"])
    sigmas = _as_float_list("sigma_e_sq_list", run.cfg["sigma_e_sq_list"])
    curves = icsi_sweep(scenario,
                        sigmas, _as_float_list("snr_db",
                                               run.cfg["snr_db"]),
                        min_errors=stop["min_errors"],
                        max_bits=stop["max_bits"], workers=run.workers)
    for sigma in sigmas:
        write_ber_csv(run.path(f"ber_icsi_{sigma:g}.csv"),
                      curves[float(sigma)])
    run.finish("icsi.json", scenario=scenario,
               seeds={"master": scenario.seed})


def _bench_reports(cfg):
    return timing_bench(
        n_tx=_as_int("n_tx", cfg["n_tx"]),
        n_rx_user=_as_int("n_rx_user", cfg["n_rx_user"]),
        n_users=_as_int("n_users", cfg["n_users"]),
        n_k_list=tuple(_as_int_list("n_k_list", cfg["n_k_list"])),
        repetitions=_as_int("repetitions", cfg["repetitions"]),
        snr_db=_as_float("snr_db", cfg["snr_db"]),
        seed=_as_int("seed", cfg["seed"]),
        n_ray=_as_int("n_ray", cfg["n_ray"]),
        train_overrides=_train_overrides_from("train_overrides",
                                              cfg["train_overrides"]))


def _run_bench(run):
    write_timing_csv(run.path("timing.csv"), _bench_reports(run.cfg))
    run.finish("bench.json", seeds={"master": run.cfg["seed"]})


def _run_constellation(run):
    scenario = _scenario_from(run.cfg)
    model = None
    if scenario.algorithm in LEARNED_ALGORITHMS \
            and run.cfg.get("checkpoint") is not None:
        model = _load_model_for(run, scenario)
    rows = constellation_dump(scenario,
                              _as_int("user_k", run.cfg["user_k"]),
                              model=model)
    write_constellation_csv(run.path("constellation.csv"), rows)
    run.finish("constellation.json", scenario=scenario,
               seeds={"master": scenario.seed})


def _run_loss_compare(run):
    cfg = run.cfg
    reports = loss_compare(_channel_from("channel", cfg["channel"]),
                           tuple(_as_int_list("streams", cfg["streams"])),
                           _train_from("train", cfg["train"]),
                           seed=_as_int("seed", cfg["seed"]))
    write_loss_csv(run.path("loss.csv"), reports)
    run.finish("loss_compare.json", seeds={"master": cfg["seed"]})


def _run_reproduce(run, figure):
    cfg = run.cfg
    if figure == "fig4":
        reports = loss_compare(
            _channel_from("channel", cfg["channel"]),
            tuple(_as_int_list("streams", cfg["streams"])),
            _train_from("train", cfg["train"]),
            seed=_as_int("seed", cfg["seed"]))
        write_loss_csv(run.path("loss.csv"), reports)
    elif figure == "fig5":
        stop = _stop_from("stop", cfg["stop"])
        snr = _as_float_list("snr_db", cfg["snr_db"])
        for algorithm in _algorithms_from("algorithms", cfg["algorithms"]):
            scenario = _scenario_from(cfg, algorithm=algorithm)
            curve = ber_sweep(scenario, snr,
                              min_errors=stop["min_errors"],
                              max_bits=stop["max_bits"],
                              workers=run.workers)
            write_ber_csv(run.path(f"ber_{algorithm}.csv"), curve)
    elif figure == "fig7":
        write_users_csv(run.path("users.csv"), _users_rows(cfg))
    elif figure == "fig8":
        write_timing_csv(run.path("timing.csv"), _bench_reports(cfg))
    else:
        stop = _stop_from("stop", cfg["stop"])
        snr = _as_float_list("snr_db", cfg["snr_db"])
        sigmas = _as_float_list("sigma_e_sq_list", cfg["sigma_e_sq_list"])
        for algorithm in _algorithms_from("algorithms", cfg["algorithms"]):
            scenario = _scenario_from(cfg, algorithm=algorithm)
            curves = icsi_sweep(scenario, sigmas, snr,
                                min_errors=stop["min_errors"],
                                max_bits=stop["max_bits"],
                                workers=run.workers)
            for sigma in sigmas:
                write_ber_csv(
                    run.path(f"ber_{algorithm}_icsi_{sigma:g}.csv"),
                    curves[float(sigma)])
    run.finish(f"{figure}.json", seeds={"master": cfg["seed"]})


_RUNNERS = {
    "channel": _run_channel,
    "codebook": _run_codebook,
    "precode": _run_precode,
    "train": _run_train,
    "ber": _run_ber,
    "users": _run_users,
    "icsi": _run_icsi,
    "bench": _run_bench,
    "constellation": _run_constellation,
    "loss-compare": _run_loss_compare,
}


def _add_common(parser):
    parser.add_argument("config", nargs="?", default=None,
                        help="JSON config path, or a shipped name: "
                        + ", ".join(_SHIPPED_CONFIGS))
    parser.add_argument("--set", action="append", metavar="KEY.PATH=VALUE",
                        help="override one config key (JSON value)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run's master seed")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default: config out_dir, "
                        f"then ${OUT_DIR_VAR}, then .)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for sweeps (default: cores)")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate and print the plan, compute nothing")


def _build_parser():
    parser = _Parser(prog="lmasim",
                     description="Link-level downlink multiuser "
                     "load-modulation MIMO simulator")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "channel": "draw a channel realization and save its matrices",
        "codebook": "build a constant-power codebook and save it",
        "precode": "build precoders/combiners and save them",
        "train": "train a learned system and save the checkpoint",
        "ber": "run one BER-vs-SNR sweep",
        "users": "BER per (algorithm, user count) at one SNR",
        "icsi": "BER sweeps under channel-estimate perturbations",
        "bench": "latency benchmark: exhaustive vs learned detection",
        "constellation": "dump noiseless receive-side codeword points",
        "loss-compare": "train both learned variants on shared draws",
    }
    for name, text in descriptions.items():
        _add_common(sub.add_parser(name, help=text))
    rep = sub.add_parser("reproduce",
                         help="run a full desk-scale experiment preset")
    rep.add_argument("figure", choices=sorted(_FIG_PRESETS))
    _add_common(rep)
    return parser


def _validate_only(command, figure, cfg):
    """Dry-run body: build every typed object, feasibility included."""
    if command == "reproduce":
        if figure in ("fig5", "fig9"):
            for algorithm in _algorithms_from("algorithms",
                                              cfg["algorithms"]):
                _scenario_from(cfg, algorithm=algorithm)
            _stop_from("stop", cfg["stop"])
        elif figure == "fig4":
            _channel_from("channel", cfg["channel"])
            _train_from("train", cfg["train"])
    elif command in ("precode", "train", "ber", "icsi", "constellation"):
        _scenario_from(cfg)
        if "stop" in cfg:
            _stop_from("stop", cfg["stop"])
    elif command == "loss-compare":
        _channel_from("channel", cfg["channel"])
        _train_from("train", cfg["train"])
    elif command == "channel":
        _channel_from("channel", cfg["channel"])
    elif command == "codebook":
        _check_mapping("codebook", cfg["codebook"], _CODEBOOK_KEYS,
                       required=("n_bits", "power"))


def _execute(args):
    command = args.command
    cfg = _resolve(command, args)
    workers = args.threads if args.threads else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError("--threads must be >= 1")

    if command == "reproduce":
        plan = _plan_reproduce(args.figure, cfg)
    else:
        plan = _plan(command, cfg)
    if args.dry_run:
        _validate_only(command, getattr(args, "figure", None), cfg)
        print(json.dumps(
            {"command": (f"reproduce {args.figure}"
                         if command == "reproduce" else command),
             "out_dir": _out_dir(cfg), "artifacts": plan, "config": cfg},
            indent=2, sort_keys=True))
        return

    run = _Run(command, cfg, workers)
    os.makedirs(run.out_dir, exist_ok=True)
    if command == "reproduce":
        run.command = f"reproduce {args.figure}"
        _run_reproduce(run, args.figure)
    else:
        _RUNNERS[command](run)
    for name in run.artifacts:
        print(os.path.join(run.out_dir, name))


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        _execute(args)
        return EXIT_OK
    except InfeasibleDimensionError as exc:
        print(f"error: infeasible dimensions: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TrainingError, NumericalError, DegenerateSignalError,
            ConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (LmaSimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
