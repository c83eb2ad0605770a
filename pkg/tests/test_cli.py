import csv
import json

import numpy as np
import pytest

from dwid import container, phantom
from dwid.cli import main
from dwid.pipeline import METHOD_UNIFORM, MethodSpec, run_method
from dwid.reference import PredictionRecord, write_predictions


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "slice"
    assert run("simulate", "--seed", 3, "--out", out) == 0
    return out


@pytest.fixture
def dataset_dir(tmp_path):
    out = tmp_path / "data"
    assert run("simulate", "--seed", 5, "--count", 2, "--out", out) == 0
    return out


class TestSimulate:
    def test_default_config_writes_labeled_container(self, sim_dir):
        slice_set = container.read_stack(sim_dir)
        assert slice_set.high_b.labels is not None
        assert slice_set.roi is not None

    def test_seed_reproducibility(self, tmp_path):
        for name in ("a", "b"):
            assert run("simulate", "--seed", 7, "--out", tmp_path / name) == 0
        a = (tmp_path / "a" / "high" / "stack.f32").read_bytes()
        b = (tmp_path / "b" / "high" / "stack.f32").read_bytes()
        assert a == b

    def test_count_writes_subdirectories(self, dataset_dir):
        names = sorted(p.name for p in dataset_dir.iterdir())
        assert names == ["slice_000", "slice_001"]

    def test_invalid_config_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n "dims": [8, 8,\n}')
        assert run("simulate", "--config", bad, "--out", tmp_path / "x") == 1
        assert "line" in capsys.readouterr().err

    def test_custom_config(self, tmp_path):
        spec = phantom.default_spec(n_high=6, seed=2)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(phantom.spec_to_json(spec)))
        out = tmp_path / "slice"
        assert run("simulate", "--config", cfg, "--out", out) == 0
        assert container.read_stack(out).high_b.n_reps == 6


class TestAverage:
    def test_uniform_matches_library(self, sim_dir, tmp_path):
        out = tmp_path / "avg"
        assert run("average", "--in", sim_dir, "--method", "uniform", "--out", out) == 0
        written = container.read_repetition_stack(out / "average").data[0]
        slice_set = container.read_stack(sim_dir)
        expected, _ = run_method(slice_set, MethodSpec(METHOD_UNIFORM))
        np.testing.assert_allclose(written, expected.astype("<f4"), rtol=1e-6)

    def test_zero_steepness_equals_uniform(self, sim_dir, tmp_path):
        for method, lam, name in (("uniform", 5, "u"), ("dlawa", 0, "d")):
            assert run(
                "average", "--in", sim_dir, "--method", method,
                "--lambda", lam, "--out", tmp_path / name,
            ) == 0
        uniform = container.read_repetition_stack(tmp_path / "u" / "average").data
        guided = container.read_repetition_stack(tmp_path / "d" / "average").data
        np.testing.assert_allclose(guided, uniform, atol=1e-6)

    def test_weights_and_manifest_written(self, sim_dir, tmp_path):
        out = tmp_path / "avg"
        assert run(
            "average", "--in", sim_dir, "--method", "dlawa",
            "--lambda", 5, "--nu", 1, "--patch", 5, "--out", out,
        ) == 0
        weights = container.read_repetition_stack(out / "weights")
        assert weights.n_reps == container.read_stack(sim_dir).high_b.n_reps
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["method"] == "dlawa"
        assert manifest["params"] == {"patch": 5, "nu": 1.0, "lambda": 5.0}
        assert manifest["reference"]["origin"] == "labels"

    def test_missing_reference_is_actionable(self, tmp_path, capsys):
        slice_set = phantom.synthesize(phantom.default_spec(seed=1))
        unlabeled = container.SliceSet(
            slice_set.low_b,
            container.RepetitionStack(slice_set.high_b.data, slice_set.high_b.b_value),
            slice_set.roi,
        )
        src = tmp_path / "unlabeled"
        container.write_stack(unlabeled, src)
        assert run("average", "--in", src, "--method", "dlawa", "--out", tmp_path / "o") == 1
        err = capsys.readouterr().err
        assert "--predictions" in err and "--baseline" in err

    def test_predictions_reference(self, sim_dir, tmp_path):
        n = container.read_stack(sim_dir).high_b.n_reps
        pred_path = tmp_path / "pred.json"
        write_predictions(PredictionRecord(np.linspace(0.1, 0.9, n), 0.68), pred_path)
        out = tmp_path / "avg"
        assert run(
            "average", "--in", sim_dir, "--method", "cd",
            "--predictions", pred_path, "--out", out,
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["reference"]["origin"] == "external_predictions"

    def test_mask_reference(self, sim_dir, tmp_path):
        n = container.read_stack(sim_dir).high_b.n_reps
        mask_path = tmp_path / "mask.json"
        mask_path.write_text(json.dumps(
            {"format_version": 1, "n_reps": n, "selected": [True] * 3 + [False] * (n - 3)}
        ))
        assert run(
            "average", "--in", sim_dir, "--method", "dlawa",
            "--mask", mask_path, "--out", tmp_path / "avg",
        ) == 0

    def test_baseline_reference(self, sim_dir, tmp_path):
        assert run(
            "average", "--in", sim_dir, "--method", "dlawa",
            "--baseline", "--out", tmp_path / "avg",
        ) == 0
        manifest = json.loads((tmp_path / "avg" / "manifest.json").read_text())
        assert manifest["reference"]["origin"] == "external_predictions"

    def test_ambiguous_reference_sources(self, sim_dir, tmp_path):
        mask_path = tmp_path / "mask.json"
        mask_path.write_text('{"format_version": 1, "n_reps": 10, "selected": [true]}')
        assert run(
            "average", "--in", sim_dir, "--method", "dlawa",
            "--mask", mask_path, "--baseline", "--out", tmp_path / "o",
        ) == 1

    def test_missing_input_is_io_error(self, tmp_path):
        assert run(
            "average", "--in", tmp_path / "nope", "--method", "uniform",
            "--out", tmp_path / "o",
        ) == 2


class TestEvaluate:
    def test_protocol_outputs(self, dataset_dir, tmp_path):
        out = tmp_path / "report"
        assert run(
            "evaluate", "--in", dataset_dir, "--runs", 2, "--seed", 1, "--out", out,
        ) == 0
        with (out / "records.csv").open() as fh:
            records = list(csv.DictReader(fh))
        # 2 slices x 2 runs x (4 methods + reference row)
        assert len(records) == 2 * 2 * 5
        assert (out / "binned_adc.csv").exists()
        assert (out / "binned_noise.csv").exists()
        assert (out / "adc_vs_dropout.png").exists()
        assert (out / "noise_vs_dropout.png").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["records"] == len(records)

    def test_binned_partition_matches_record_count(self, dataset_dir, tmp_path):
        out = tmp_path / "report"
        assert run("evaluate", "--in", dataset_dir, "--runs", 3, "--out", out) == 0
        with (out / "records.csv").open() as fh:
            adc_records = [r for r in csv.DictReader(fh) if r["adc_roi"]]
        with (out / "binned_adc.csv").open() as fh:
            bins = list(csv.DictReader(fh))
        assert sum(int(b["n"]) for b in bins) == len(adc_records)

    def test_methods_filter(self, dataset_dir, tmp_path):
        out = tmp_path / "report"
        assert run(
            "evaluate", "--in", dataset_dir, "--runs", 1, "--methods", "uniform", "--out", out,
        ) == 0
        with (out / "records.csv").open() as fh:
            methods = {r["method"] for r in csv.DictReader(fh)}
        assert methods == {"uniform", "reference"}

    def test_unlabeled_dataset_rejected(self, tmp_path, rng):
        from conftest import random_slice_set

        root = tmp_path / "data"
        container.write_stack(random_slice_set(rng), root / "slice_000")
        assert run("evaluate", "--in", root, "--runs", 1, "--out", tmp_path / "o") == 1

    def test_parallel_jobs_match_serial(self, dataset_dir, tmp_path):
        for jobs, name in ((1, "serial"), (2, "parallel")):
            assert run(
                "evaluate", "--in", dataset_dir, "--runs", 2, "--jobs", jobs,
                "--out", tmp_path / name,
            ) == 0
        serial = (tmp_path / "serial" / "records.csv").read_text()
        parallel = (tmp_path / "parallel" / "records.csv").read_text()
        assert serial == parallel


class TestSweepLambda:
    def test_three_result_sets(self, sim_dir, tmp_path):
        out = tmp_path / "sweep"
        assert run("sweep-lambda", "--in", sim_dir, "--lambdas", "1,5,25", "--out", out) == 0
        for lam in ("1", "5", "25"):
            assert (out / f"lambda_{lam}" / "average.f32").exists()
            assert (out / f"lambda_{lam}" / "weights.f32").exists()
            assert (out / f"lambda_{lam}" / "adc.f32").exists()
            assert (out / f"lambda_{lam}" / "noise.f32").exists()
        with (out / "sweep.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["lambda"]) for r in rows] == [1.0, 5.0, 25.0]
        noise = [float(r["mean_relative_noise"]) for r in rows]
        assert noise == sorted(noise)

    def test_single_lambda(self, sim_dir, tmp_path):
        out = tmp_path / "sweep"
        assert run("sweep-lambda", "--in", sim_dir, "--lambdas", "5", "--out", out) == 0
        assert (out / "lambda_5" / "average.f32").exists()

    def test_empty_lambda_list(self, sim_dir, tmp_path):
        assert run(
            "sweep-lambda", "--in", sim_dir, "--lambdas", ",", "--out", tmp_path / "o"
        ) == 1


class TestHistogram:
    def test_counts_partition_slices(self, dataset_dir, tmp_path):
        out = tmp_path / "hist.csv"
        assert run("histogram", "--in", dataset_dir, "--out", out) == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 10
        assert sum(int(r["count"]) for r in rows) == 2

    def test_fifty_percent_slice_lands_in_its_bin(self, tmp_path):
        spec = phantom.default_spec(n_high=8, seed=3, noise=phantom.NoiseSpec("gaussian", 0.0))
        root = tmp_path / "data"
        container.write_stack(phantom.synthesize(spec), root / "slice_000")
        out = tmp_path / "hist.csv"
        assert run("histogram", "--in", root, "--out", out) == 0
        with out.open() as fh:
            by_bin = {float(r["bin_low"]): int(r["count"]) for r in csv.DictReader(fh)}
        assert by_bin[50.0] == 1


class TestUsageErrors:
    def test_unknown_method_exits_one(self, sim_dir, tmp_path, capsys):
        assert run("average", "--in", sim_dir, "--method", "bogus", "--out", tmp_path) == 1
        capsys.readouterr()

    def test_missing_subcommand_exits_one(self, capsys):
        assert run() == 1
        capsys.readouterr()
