import csv
import logging
import statistics

import numpy as np
import pytest
from PIL import Image

from lcnn_gan_lab import (
    DenseLayer,
    LayerSpec,
    Network,
    Rng,
    RunLog,
    Trainer,
    TrainingAbortedError,
    init_network,
    ring_mixture,
    save_checkpoint,
)
from lcnn_gan_lab_cli import main

from ._idx import write_idx_pair

logging.basicConfig(level=logging.INFO, format="%(name)s (%(levelname)s): %(message)s")
logging.getLogger("lcnn_gan_lab").setLevel(10)

SMALL = """\
steps = 30
batch_size = 16
noise_dim = 4
log_stride = 5

[generator]
hidden = 8

[discriminator]
hidden = 8

[diagnostics]
stride = 10
samples = 200
probe_steps = 50

[output]
grid_rows = 2
grid_cols = 2
checkpoint_every = 15
"""

RUN_FILES = [
    "checkpoint_0000015.txt",
    "checkpoint_final.txt",
    "coverage.csv",
    "modes.csv",
    "runlog.csv",
    "samples_0000030.csv",
    "score.txt",
    "vc_bound.txt",
]


def _write_config(tmp_path, text=SMALL, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _report(path):
    return dict(line.split(" = ", 1) for line in path.read_text().splitlines())


def _collapsed_checkpoint(path, center):
    g = Network(layers=[DenseLayer(weights=np.zeros((2, 4)), bias=np.array(center))])
    d = init_network(2, [LayerSpec(size=8), LayerSpec(size=1)], Rng(0))
    save_checkpoint(
        path, generator=g, discriminator=d, g_optimizer=None, d_optimizer=None, step=0, rng=Rng(0)
    )


def test_train_writes_the_artifact_set(tmp_path):
    out = tmp_path / "run"
    assert main(["train", _write_config(tmp_path), "--output", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == sorted([*RUN_FILES, "manifest.tsv"])

    manifest = (out / "manifest.tsv").read_text().splitlines()
    assert [line.split("\t")[0] for line in manifest] == RUN_FILES
    assert all(len(line.split("\t")[1]) == 64 for line in manifest)

    log = RunLog.from_csv(out / "runlog.csv")
    assert [r.step for r in log] == [0, 5, 10, 15, 20, 25, 29]
    with open(out / "coverage.csv", newline="") as f:
        assert [row["step"] for row in csv.DictReader(f)] == ["10", "20", "30"]
    assert set(_report(out / "score.txt")) >= {"score_mean", "score_stdev", "real_score_mean"}
    assert "margin_bound" in _report(out / "vc_bound.txt")


def test_identical_runs_have_identical_manifests(tmp_path):
    config = _write_config(tmp_path)
    assert main(["train", config, "--output", str(tmp_path / "a")]) == 0
    assert main(["train", config, "--output", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "manifest.tsv").read_text()
    assert a == (tmp_path / "b" / "manifest.tsv").read_text()
    assert main(["train", config, "--seed", "1", "--output", str(tmp_path / "c")]) == 0
    assert a != (tmp_path / "c" / "manifest.tsv").read_text()


def test_zero_penalty_run_matches_baseline_run(tmp_path):
    baseline = _write_config(tmp_path, "objective = baseline\n" + SMALL, "baseline.cfg")
    zero = _write_config(
        tmp_path,
        "c1.kind = constant\nc1.value = 0\nc2.kind = constant\nc2.value = 0\n" + SMALL,
        "zero.cfg",
    )
    assert main(["train", baseline, "--output", str(tmp_path / "baseline")]) == 0
    assert main(["train", zero, "--output", str(tmp_path / "zero")]) == 0
    assert (tmp_path / "baseline" / "manifest.tsv").read_text() == (
        tmp_path / "zero" / "manifest.tsv"
    ).read_text()


def test_aborted_run_keeps_partial_artifacts(tmp_path, monkeypatch):
    def abort(self, until=None):
        raise TrainingAbortedError(
            "loss is nan", step=3, term="discriminator loss", log=RunLog()
        )

    monkeypatch.setattr(Trainer, "run", abort)
    out = tmp_path / "run"
    assert main(["train", _write_config(tmp_path), "--output", str(out)]) == 3
    assert _report(out / "abort.txt") == {"step": "3", "term": "discriminator loss"}
    assert (out / "runlog.csv").exists()
    assert (out / "manifest.tsv").exists()


def test_score_of_uniform_probabilities(tmp_path):
    probs = tmp_path / "probs.csv"
    probs.write_text("p0,p1,p2,p3\n" + "0.25,0.25,0.25,0.25\n" * 20)
    assert main(["diagnose", "score", "--probs", str(probs), "--output", str(tmp_path)]) == 0
    report = _report(tmp_path / "score.txt")
    assert float(report["score_mean"]) == pytest.approx(1.0, abs=1e-9)
    assert float(report["score_stdev"]) == pytest.approx(0.0, abs=1e-9)
    assert report["splits"] == "10"


def test_bad_probabilities_are_an_io_error(tmp_path):
    probs = tmp_path / "probs.csv"
    probs.write_text("0.5,0.5\nhalf,half\n")
    assert main(["diagnose", "score", "--probs", str(probs), "--output", str(tmp_path)]) == 4


def test_coverage_of_collapsed_generator(tmp_path):
    checkpoint = tmp_path / "collapsed.txt"
    _collapsed_checkpoint(checkpoint, ring_mixture().centers[2])
    args = ["diagnose", "coverage", "--checkpoint", str(checkpoint), "--samples", "200"]
    assert main([*args, "--output", str(tmp_path)]) == 0
    with open(tmp_path / "coverage.csv", newline="") as f:
        (row,) = csv.DictReader(f)
    assert row["checkpoint"] == "collapsed.txt"
    assert row["covered_modes"] == "1"
    assert row["per_mode_counts"] == "0;0;200;0;0;0;0;0"


def test_other_diagnostics_on_a_trained_run(tmp_path):
    config = _write_config(tmp_path)
    run = tmp_path / "run"
    assert main(["train", config, "--output", str(run)]) == 0
    checkpoint = str(run / "checkpoint_final.txt")
    reports = tmp_path / "reports"
    common = ["--config", config, "--output", str(reports)]
    assert main(["diagnose", "vc", "--checkpoint", checkpoint, "--c", "0.1", *common]) == 0
    assert "activation_bound" in _report(reports / "vc_bound.txt")
    steps = ["--checkpoint", str(run / "checkpoint_0000015.txt"), checkpoint]
    assert main(["diagnose", "pca", *steps, *common]) == 0
    assert (reports / "modes.csv").read_text().splitlines()[0] == "step,components_needed"
    assert main(["diagnose", "pca", *common]) == 0
    assert _report(reports / "pca.txt")["dim"] == "2"
    assert main(["diagnose", "score", "--checkpoint", checkpoint, *common]) == 0
    assert main(["diagnose", "vc", *common]) == 2


def test_image_run_uses_idx_shape_and_final_pca(tmp_path):
    images = np.arange(20 * 15).reshape(20, 3, 5) % 256
    images_path, labels_path = write_idx_pair(tmp_path, images, np.arange(20) % 10)
    text = SMALL + f"\n[data]\nkind = idx\nimages = {images_path}\nlabels = {labels_path}\n"
    out = tmp_path / "run"
    assert main(["train", _write_config(tmp_path, text), "--output", str(out)]) == 0
    with Image.open(out / "samples_0000030.pgm") as grid:
        assert grid.size == (2 * 5, 2 * 3)
    with open(out / "modes.csv", newline="") as f:
        assert [row["step"] for row in csv.DictReader(f)] == ["30"]
    assert not (out / "coverage.csv").exists()


def test_sample_grid_command(tmp_path):
    checkpoint = tmp_path / "collapsed.txt"
    _collapsed_checkpoint(checkpoint, [0.5, -0.5])
    assert main(["sample-grid", str(checkpoint), str(tmp_path / "grid"), "--rows", "2"]) == 0
    lines = (tmp_path / "grid.csv").read_text().splitlines()
    assert lines == ["x0,x1", *["0.5,-0.5"] * 16]
    bad = ["sample-grid", str(checkpoint), str(tmp_path / "g"), "--image-shape", "2by1"]
    assert main(bad) == 2


def test_config_check(tmp_path, capsys):
    assert main(["config-check", _write_config(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert "steps = 30" in printed
    assert "[diagnostics]" in printed
    broken = _write_config(tmp_path, "steps = 10\nbogus = 1\n", "broken.cfg")
    assert main(["config-check", broken]) == 2


def test_missing_files_are_io_errors(tmp_path):
    assert main(["train", str(tmp_path / "missing.cfg")]) == 4
    assert main(["sample-grid", str(tmp_path / "missing.txt"), str(tmp_path / "g")]) == 4


def test_sweep_writes_a_summary(tmp_path):
    seeds = tmp_path / "seeds.txt"
    seeds.write_text("1\n2\n")
    out = tmp_path / "sweep"
    assert main(["train", _write_config(tmp_path), "--sweep", str(seeds), "--output", str(out)]) == 0
    assert (out / "seed-1" / "manifest.tsv").exists()
    assert (out / "seed-2" / "manifest.tsv").exists()
    with open(out / "sweep_summary.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["seed"] for r in rows] == ["1", "2"]
    assert all(r["exit_status"] == "0" for r in rows)
    assert all(r["covered_modes"] != "" for r in rows)


@pytest.mark.slow
def test_constant_penalty_shrinks_real_outputs(tmp_path):
    diagnostics = "[diagnostics]\ncoverage = false\npca = false\nscore = false\nvc_bound = false\n"
    penalty = "[c1]\nkind = constant\nvalue = 0.1\n[c2]\nkind = constant\nvalue = 0.1\n"
    shrunk = 0
    for seed in range(5):
        tails = {}
        for objective, sections in (("lcnn", penalty), ("baseline", "")):
            text = f"seed = {seed}\nsteps = 2000\nobjective = {objective}\n{diagnostics}{sections}"
            out = tmp_path / f"{objective}-{seed}"
            config = _write_config(tmp_path, text, f"{objective}-{seed}.cfg")
            assert main(["train", config, "--output", str(out)]) == 0
            log = RunLog.from_csv(out / "runlog.csv")
            tails[objective] = log.tail_mean("mean_abs_final_net_real")
        shrunk += tails["lcnn"] < tails["baseline"]
    assert shrunk >= 4


@pytest.mark.slow
def test_lcnn_keeps_most_ring_modes(tmp_path):
    seeds = tmp_path / "seeds.txt"
    seeds.write_text("".join(f"{s}\n" for s in range(5)))
    common = "steps = 20000\n[diagnostics]\nstride = 20000\npca = false\nscore = false\nvc_bound = false\n"
    medians = {}
    for objective in ("lcnn", "baseline"):
        config = _write_config(tmp_path, f"objective = {objective}\n" + common, f"{objective}.cfg")
        out = tmp_path / objective
        assert main(["train", config, "--sweep", str(seeds), "--jobs", "5", "--output", str(out)]) == 0
        with open(out / "sweep_summary.csv", newline="") as f:
            medians[objective] = statistics.median(int(r["covered_modes"]) for r in csv.DictReader(f))
    assert medians["lcnn"] >= 7
    # the penalty costs at most one mode of coverage against the plain objective
    assert medians["baseline"] - medians["lcnn"] <= 1
