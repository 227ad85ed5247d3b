"""Experiment-driver tests: scenario validation, stop rules, pairing,
robustness sweeps, timing, dumps, and the CSV/sidecar writers."""

import json

import numpy as np
import pytest

from lmasim import simkit
from lmasim.channel import ChannelConfig, IcsiConfig, generate
from lmasim.errors import ConfigError, DimensionError, \
    InfeasibleDimensionError
from lmasim.learned import train_params_for
from lmasim.link import candidate_images


def small_config(seed=7):
    return ChannelConfig(n_tx=12, users=(2, 2), n_ray=3, seed=seed)


def tiny_params(**overrides):
    base = dict(n_h=16, h_enc=2, h_dec=2, sample_count=200, batch_size=50,
                epochs=4)
    base.update(overrides)
    return train_params_for("set1", **base)


def classic_scenario(algorithm="bd", seed=1, **kwargs):
    return simkit.Scenario(channel_config=small_config(),
                           stream_counts=(2, 2), algorithm=algorithm,
                           seed=seed, **kwargs)


def neural_scenario(seed=1, **param_overrides):
    return simkit.Scenario(channel_config=small_config(),
                           stream_counts=(2, 2), algorithm="neural",
                           train=tiny_params(**param_overrides), seed=seed)


class TestScenario:
    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ConfigError):
            simkit.Scenario(channel_config=small_config(),
                            stream_counts=(2, 2), algorithm="zf")

    def test_stream_count_per_user(self):
        with pytest.raises(DimensionError):
            simkit.Scenario(channel_config=small_config(),
                            stream_counts=(2,), algorithm="bd")

    def test_infeasible_dimensions_surface_names(self):
        cramped = ChannelConfig(n_tx=4, users=(2, 2, 2), n_ray=3)
        with pytest.raises(InfeasibleDimensionError) as info:
            simkit.Scenario(channel_config=cramped, stream_counts=(2, 2, 2),
                            algorithm="bd")
        assert info.value.violated

    def test_learned_needs_training_recipe(self):
        with pytest.raises(ConfigError):
            simkit.Scenario(channel_config=small_config(),
                            stream_counts=(2, 2), algorithm="neural")

    def test_recipe_user_count_must_match(self):
        with pytest.raises(ConfigError):
            simkit.Scenario(channel_config=small_config(),
                            stream_counts=(2, 2), algorithm="neural",
                            train=train_params_for("set2"))

    def test_power_defaults_to_antenna_count(self):
        assert classic_scenario().power == 12.0
        assert classic_scenario(p_t=5.0).power == 5.0

    def test_power_must_be_positive(self):
        with pytest.raises(ConfigError):
            classic_scenario(p_t=0.0)


class TestRealize:
    def test_classic_gets_precoders_and_codebooks(self):
        link = simkit.realize(classic_scenario())
        assert link.precoders is not None
        assert len(link.codebooks) == 2
        for cb in link.codebooks:
            assert cb.power == pytest.approx(6.0)

    def test_neural_gets_precoders_only(self):
        link = simkit.realize(neural_scenario())
        assert link.precoders is not None
        assert link.codebooks is None

    def test_e2e_gets_neither(self):
        scenario = simkit.Scenario(channel_config=small_config(),
                                   stream_counts=(2, 2), algorithm="e2e",
                                   train=tiny_params(), seed=1)
        link = simkit.realize(scenario)
        assert link.precoders is None and link.codebooks is None

    def test_estimate_is_truth_without_icsi(self):
        link = simkit.realize(classic_scenario())
        assert link.estimate is link.truth

    def test_icsi_perturbs_the_estimate(self):
        icsi = IcsiConfig(sigma_e_sq=1e-2, seed=3)
        link = simkit.realize(classic_scenario(icsi=icsi))
        assert not np.allclose(link.estimate.matrices[0],
                               link.truth.matrices[0])

    def test_deterministic(self):
        a = simkit.realize(classic_scenario(algorithm="subarray"))
        b = simkit.realize(classic_scenario(algorithm="subarray"))
        np.testing.assert_array_equal(a.precoders.composite(),
                                      b.precoders.composite())


class TestBerSweep:
    def test_validation(self):
        with pytest.raises(ConfigError):
            simkit.ber_sweep(classic_scenario(), [])
        with pytest.raises(ConfigError):
            simkit.ber_sweep(classic_scenario(), [5.0], min_errors=0)

    def test_noise_free_point_is_error_free(self):
        curve = simkit.ber_sweep(classic_scenario(), [np.inf],
                                 min_errors=10, max_bits=20_000)
        assert curve.ber == (0.0,)
        assert curve.errors == (0,)

    def test_stop_rule_bounds_the_bit_count(self):
        curve = simkit.ber_sweep(classic_scenario(), [0.0, np.inf],
                                 min_errors=50, max_bits=60_000)
        frame_bits = 4
        assert curve.errors[0] >= 50 and curve.bits[0] < 60_000
        assert 60_000 <= curve.bits[1] < 60_000 + frame_bits

    def test_ber_falls_with_snr(self):
        curve = simkit.ber_sweep(classic_scenario(), [0.0, 9.0],
                                 min_errors=100, max_bits=100_000)
        assert curve.ber[0] > curve.ber[1]

    def test_repeat_runs_bit_identical(self):
        a = simkit.ber_sweep(classic_scenario(), [3.0], min_errors=50,
                             max_bits=60_000)
        b = simkit.ber_sweep(classic_scenario(), [3.0], min_errors=50,
                             max_bits=60_000)
        assert a.ber == b.ber and a.errors == b.errors and a.bits == b.bits

    def test_master_seed_changes_the_draws(self):
        a = simkit.ber_sweep(classic_scenario(seed=1), [0.0],
                             min_errors=400, max_bits=40_000)
        b = simkit.ber_sweep(classic_scenario(seed=2), [0.0],
                             min_errors=400, max_bits=40_000)
        assert a.errors != b.errors

    def test_workers_do_not_change_results(self):
        serial = simkit.ber_sweep(classic_scenario(), [0.0, 3.0, 6.0],
                                  min_errors=50, max_bits=40_000)
        threaded = simkit.ber_sweep(classic_scenario(), [0.0, 3.0, 6.0],
                                    min_errors=50, max_bits=40_000,
                                    workers=3)
        assert serial.ber == threaded.ber and serial.bits == threaded.bits

    def test_learned_path_trains_when_no_model_given(self):
        scenario = neural_scenario(epochs=2)
        model, _ = simkit.prepare_model(scenario)
        with_model = simkit.ber_sweep(scenario, [6.0], min_errors=30,
                                      max_bits=20_000, model=model)
        trained_inside = simkit.ber_sweep(scenario, [6.0], min_errors=30,
                                          max_bits=20_000)
        assert with_model.ber == trained_inside.ber
        assert with_model.errors == trained_inside.errors

    def test_prepare_model_refuses_classic(self):
        with pytest.raises(ConfigError):
            simkit.prepare_model(classic_scenario())


class TestBerInterval:
    def test_zero_errors_matches_closed_form(self):
        lo, hi = simkit.ber_interval(0, 1000)
        assert lo == 0.0
        assert hi == pytest.approx(1.0 - 0.025 ** (1.0 / 1000))

    def test_all_errors_hits_one(self):
        lo, hi = simkit.ber_interval(50, 50)
        assert hi == 1.0 and 0.0 < lo < 1.0

    def test_contains_the_point_estimate(self):
        lo, hi = simkit.ber_interval(37, 12_345)
        assert lo < 37 / 12_345 < hi

    def test_validation(self):
        with pytest.raises(ConfigError):
            simkit.ber_interval(5, 0)
        with pytest.raises(ConfigError):
            simkit.ber_interval(6, 5)


class TestUserSweep:
    def test_classic_rows_and_pairing(self):
        rows = simkit.user_sweep(24, [2, 3], snr_db=6.0,
                                 algorithms=("bd", "subarray"), seed=5,
                                 min_errors=40, max_bits=30_000)
        cells = {(k, a) for k, a, _, _, _ in rows}
        assert cells == {(2, "bd"), (2, "subarray"), (3, "bd"),
                         (3, "subarray")}
        for _, _, ber, bits, errors in rows:
            assert 0.0 <= ber <= 1.0 and bits > 0 and errors >= 0

    def test_infeasible_cells_are_absent(self):
        rows = simkit.user_sweep(6, [2, 4], snr_db=6.0,
                                 algorithms=("bd",), seed=5,
                                 min_errors=20, max_bits=10_000)
        assert {k for k, *_ in rows} == {2}

    def test_learned_cell_uses_the_recipe_map(self):
        rows = simkit.user_sweep(
            12, [2], snr_db=6.0, algorithms=("neural",), seed=5,
            min_errors=20, max_bits=10_000,
            train_overrides=dict(n_h=16, h_enc=2, h_dec=2,
                                 sample_count=120, batch_size=40, epochs=2))
        assert len(rows) == 1 and rows[0][1] == "neural"

    def test_unmapped_user_count_is_an_error(self):
        with pytest.raises(ConfigError):
            simkit.user_sweep(24, [5], algorithms=("neural",),
                              sets_by_users={2: "set1"})


class TestIcsiSweep:
    def test_zero_variance_reproduces_perfect_csi(self):
        base = simkit.ber_sweep(classic_scenario(), [6.0], min_errors=60,
                                max_bits=40_000)
        curves = simkit.icsi_sweep(classic_scenario(), [0.0, 1e-2], [6.0],
                                   min_errors=60, max_bits=40_000)
        assert curves[0.0].ber == base.ber
        assert curves[0.0].errors == base.errors

    def test_estimation_error_degrades_ber(self):
        curves = simkit.icsi_sweep(classic_scenario(), [0.0, 1e-1], [6.0],
                                   min_errors=150, max_bits=80_000)
        assert curves[1e-1].ber[0] > curves[0.0].ber[0]

    def test_variances_share_bit_streams(self):
        curves = simkit.icsi_sweep(classic_scenario(), [1e-3, 1e-3 + 0.0],
                                   [6.0], min_errors=40, max_bits=20_000)
        assert len(curves) == 1


class TestTimingBench:
    def test_structure_and_invariants(self):
        reports = simkit.timing_bench(
            n_k_list=(3, 6), repetitions=40,
            train_overrides=dict(sample_count=100, batch_size=50, epochs=1))
        assert set(reports) == {"bd", "neural"}
        for report in reports.values():
            counts = [n for n, _, _ in report.entries]
            assert counts == [3, 6]
            for _, t_o, t_d in report.entries:
                assert 0.0 < t_d <= t_o

    def test_report_rejects_detection_slower_than_pipeline(self):
        with pytest.raises(ConfigError):
            simkit.TimingReport("bd", ((3, 1e-6, 2e-6),))


class TestConstellationDump:
    def test_classic_matches_receive_images(self):
        scenario = classic_scenario()
        rows = simkit.constellation_dump(scenario, 0)
        link = simkit.realize(scenario)
        images = candidate_images(link.precoders, link.truth.matrices, 0,
                                  link.codebooks[0])
        assert len(rows) == images.shape[0] * images.shape[1]
        for user, idx, dim, re, im in rows:
            assert user == 0
            assert re == pytest.approx(images[idx, dim].real)
            assert im == pytest.approx(images[idx, dim].imag)

    def test_learned_dump_covers_every_pattern(self):
        scenario = neural_scenario(epochs=2)
        model, _ = simkit.prepare_model(scenario)
        rows = simkit.constellation_dump(scenario, 1, model=model)
        indices = {idx for _, idx, _, _, _ in rows}
        assert indices == set(range(4))
        dims = {dim for _, _, dim, _, _ in rows}
        assert dims == {0, 1}
        assert all(np.isfinite(re) and np.isfinite(im)
                   for _, _, _, re, im in rows)

    def test_learned_points_distinct(self):
        scenario = neural_scenario(epochs=6)
        model, _ = simkit.prepare_model(scenario)
        rows = simkit.constellation_dump(scenario, 0, model=model)
        points = np.zeros((4, 2), dtype=complex)
        for _, idx, dim, re, im in rows:
            points[idx, dim] = re + 1j * im
        gaps = [np.linalg.norm(points[i] - points[j])
                for i in range(4) for j in range(i + 1, 4)]
        assert min(gaps) > 1e-3


class TestLossCompare:
    def test_both_variants_and_pairing(self):
        reports = simkit.loss_compare(small_config(), (2, 2), tiny_params(),
                                      seed=9)
        assert set(reports) == {"neural", "e2e"}
        for report in reports.values():
            assert len(report.epoch_losses) == 4
            assert np.all(np.isfinite(report.epoch_losses))
        again = simkit.loss_compare(small_config(), (2, 2), tiny_params(),
                                    seed=9)
        assert reports["neural"].epoch_losses == \
            again["neural"].epoch_losses
        assert reports["e2e"].epoch_losses == again["e2e"].epoch_losses


class TestWriters:
    def test_ber_csv_round_trip(self, tmp_path):
        curve = simkit.ber_sweep(classic_scenario(), [0.0, 6.0],
                                 min_errors=40, max_bits=20_000)
        path = tmp_path / "ber.csv"
        simkit.write_ber_csv(path, curve)
        lines = path.read_text().splitlines()
        assert lines[0] == "snr_db,ber,bits,errors"
        assert len(lines) == 3
        snr, ber, bits, errors = lines[1].split(",")
        assert float(snr) == 0.0
        assert float(ber) == curve.ber[0]
        assert int(bits) == curve.bits[0]
        assert int(errors) == curve.errors[0]

    def test_loss_csv_schema(self, tmp_path):
        reports = simkit.loss_compare(small_config(), (2, 2),
                                      tiny_params(epochs=2), seed=3)
        path = tmp_path / "loss.csv"
        simkit.write_loss_csv(path, reports)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,loss,variant"
        assert len(lines) == 5
        assert lines[1].endswith(",e2e") and lines[3].endswith(",neural")

    def test_timing_csv_schema(self, tmp_path):
        reports = {"bd": simkit.TimingReport("bd", ((3, 2e-5, 1e-5),)),
                   "neural": simkit.TimingReport("neural",
                                                 ((3, 3e-5, 6e-6),))}
        path = tmp_path / "timing.csv"
        simkit.write_timing_csv(path, reports)
        lines = path.read_text().splitlines()
        assert lines[0] == "n_k,t_o_s,t_d_s,algorithm"
        assert lines[1] == "3,2e-05,1e-05,bd"
        assert lines[2] == "3,3e-05,6e-06,neural"

    def test_constellation_csv_schema(self, tmp_path):
        rows = simkit.constellation_dump(classic_scenario(), 0)
        path = tmp_path / "points.csv"
        simkit.write_constellation_csv(path, rows)
        lines = path.read_text().splitlines()
        assert lines[0] == "user,codeword_index,dim,re,im"
        assert len(lines) == len(rows) + 1

    def test_users_csv_schema(self, tmp_path):
        rows = ((2, "bd", 1e-3, 10_000, 10), (2, "subarray", 2e-2,
                                              10_000, 200))
        path = tmp_path / "users.csv"
        simkit.write_users_csv(path, rows)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,algorithm,ber,bits,errors"
        assert lines[1] == "2,bd,0.001,10000,10"

    def test_sidecar_contents(self, tmp_path):
        scenario = classic_scenario()
        path = tmp_path / "run.json"
        simkit.write_sidecar(path, scenario=scenario,
                             seeds={"master": scenario.seed},
                             extra={"snr_db": [0.0, 6.0]})
        payload = json.loads(path.read_text())
        assert payload["version"] == "0.1.0"
        assert payload["scenario"]["algorithm"] == "bd"
        assert payload["scenario"]["power"] == 12.0
        assert payload["seeds"] == {"master": 1}
        assert payload["snr_db"] == [0.0, 6.0]

    def test_writes_are_byte_stable(self, tmp_path):
        curve = simkit.ber_sweep(classic_scenario(), [3.0], min_errors=30,
                                 max_bits=10_000)
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        simkit.write_ber_csv(first, curve)
        simkit.write_ber_csv(second, curve)
        assert first.read_bytes() == second.read_bytes()
