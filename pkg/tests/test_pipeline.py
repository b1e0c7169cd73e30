import numpy as np
import pytest

from entclust.cli import main
from entclust.config import load_config
from entclust.datasets import LabeledDataset, write_idx
from entclust.persist import (
    load_manifest,
    load_matrix,
    load_metrics_report,
    save_labels,
    save_matrix,
)
from entclust.pipeline import (
    MANIFEST_NAME,
    export_heatmap,
    resolve_dataset,
    run_all,
    run_cluster,
    run_eval,
    run_pretrain,
    verify_artifacts,
)
from entclust.selfexpr import check_coefficient_matrix, coeff_from_logits


def _cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(f"output_dir = {tmp_path / 'out'}\n" + text)
    return load_config(str(path))


IDENTITY_TEXT = """
data.source = synth
synth.clusters = 3
synth.subspace_dim = 1
synth.ambient_dim = 6
synth.points_per_cluster = 8
cluster.learning_rate = 0.05
cluster.epochs = 10
cluster.lambda2 = 1.0
"""

PRETRAIN_TEXT = """
data.source = synth-images
synth_images.classes = 2
synth_images.per_class = 4
synth_images.height = 6
synth_images.width = 6
encoder.widths = 36, 16, 8
encoder.projection_widths = 8, 8, 4
pretrain.epochs = 1
pretrain.batch_size = 4
cluster.learning_rate = 0.05
cluster.epochs = 2
cluster.lambda2 = 1.0
"""


# -- dataset resolution -----------------------------------------------------

def test_resolve_synth_vectors(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    data = resolve_dataset(cfg)
    assert data.dataset.samples.shape == (24, 6)
    assert data.dataset.n_classes == 3
    assert data.images is None


def test_resolve_synth_images(tmp_path):
    cfg = _cfg(tmp_path, PRETRAIN_TEXT)
    data = resolve_dataset(cfg)
    assert data.images is not None
    assert data.images.values.shape == (8, 1, 6, 6)
    assert np.array_equal(data.images.to_matrix(), data.dataset.samples)


def test_resolve_csv_with_subsampling(tmp_path):
    rng = np.random.default_rng(0)
    save_matrix(tmp_path / "x.csv", rng.normal(size=(12, 4)))
    save_labels(tmp_path / "y.csv", np.repeat([0, 1, 2], 4))
    cfg = _cfg(
        tmp_path,
        f"data.source = csv\ndata.csv_samples = {tmp_path / 'x.csv'}\n"
        f"data.csv_labels = {tmp_path / 'y.csv'}\ndata.per_class = 2\n",
    )
    data = resolve_dataset(cfg)
    assert data.dataset.n == 6
    assert np.array_equal(np.bincount(data.dataset.labels), [2, 2, 2])


def test_resolve_csv_per_class_needs_labels(tmp_path):
    save_matrix(tmp_path / "x.csv", np.zeros((4, 2)))
    cfg = _cfg(
        tmp_path,
        f"data.source = csv\ndata.csv_samples = {tmp_path / 'x.csv'}\ndata.per_class = 2\n",
    )
    with pytest.raises(ValueError, match="csv_labels"):
        resolve_dataset(cfg)


def test_resolve_idx_files(tmp_path):
    rng = np.random.default_rng(1)
    ds = LabeledDataset(
        rng.integers(0, 256, size=(6, 4)).astype(np.float64) / 255.0,
        np.array([0, 0, 0, 1, 1, 1]),
    )
    with open(tmp_path / "img.idx", "wb") as fi, open(tmp_path / "lab.idx", "wb") as fl:
        write_idx(fi, fl, ds, height=2, width=2)
    cfg = _cfg(
        tmp_path,
        f"data.source = idx\ndata.idx_images = {tmp_path / 'img.idx'}\n"
        f"data.idx_labels = {tmp_path / 'lab.idx'}\n",
    )
    data = resolve_dataset(cfg)
    assert np.array_equal(data.dataset.samples, ds.samples)
    assert data.images.values.shape == (6, 1, 2, 2)


def test_resolve_missing_idx_names_path(tmp_path):
    cfg = _cfg(
        tmp_path,
        f"data.source = idx\ndata.idx_images = {tmp_path / 'ghost.idx'}\n"
        f"data.idx_labels = {tmp_path / 'lab.idx'}\n",
    )
    with pytest.raises(FileNotFoundError, match="ghost.idx"):
        resolve_dataset(cfg)


# -- cluster stage ----------------------------------------------------------

def test_run_cluster_identity_artifacts(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    files = run_cluster(cfg, identity_encoder=True)
    assert files == ["C.csv", "W.csv", "labels.csv", "cluster_loss.csv"]
    out = tmp_path / "out"
    c = load_matrix(out / "C.csv")
    check_coefficient_matrix(c)
    w = load_matrix(out / "W.csv")
    assert np.array_equal(w, w.T)
    assert np.all(w >= 0.0)
    assert set(load_manifest(out / MANIFEST_NAME)) == set(files)


def test_run_cluster_zero_epochs_writes_uniform(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT.replace("cluster.epochs = 10", "cluster.epochs = 0"))
    run_cluster(cfg, identity_encoder=True)
    c = load_matrix(tmp_path / "out" / "C.csv")
    assert np.array_equal(c, coeff_from_logits(np.zeros((24, 24))))
    assert (tmp_path / "out" / "cluster_loss.csv").read_text() == ""


def test_run_cluster_learned_needs_images(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    with pytest.raises(ValueError, match="identity encoder"):
        run_cluster(cfg, identity_encoder=False)


def test_eval_against_crafted_labels(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    out = tmp_path / "out"
    out.mkdir()
    truth = resolve_dataset(cfg).dataset.labels
    save_labels(out / "labels.csv", truth)
    report = run_eval(cfg)
    assert report.acc == 1.0
    assert report.nmi == 1.0
    assert report.n == 24
    assert report.k_true == 3
    assert report.k_pred == 3
    scores = load_metrics_report(out / "metrics.txt")
    assert scores["acc"] == 1.0
    assert "metrics.txt" in load_manifest(out / MANIFEST_NAME)


# -- pretrain and the learned path ------------------------------------------

def test_run_pretrain_artifacts_and_determinism(tmp_path):
    cfg = _cfg(tmp_path, PRETRAIN_TEXT)
    files = run_pretrain(cfg)
    assert "encoder_manifest.txt" in files
    assert "projection_manifest.txt" in files
    assert "pretrain_loss.csv" in files
    out = tmp_path / "out"
    history = (out / "pretrain_loss.csv").read_text().splitlines()
    assert len(history) == 1

    # Same config into a fresh directory: byte-identical parameters.
    other = tmp_path / "second"
    other.mkdir()
    run_pretrain(_cfg(other, PRETRAIN_TEXT))
    for name in ("encoder_layer0_weight.csv", "projection_layer1_bias.csv", "pretrain_loss.csv"):
        assert (out / name).read_bytes() == (other / "out" / name).read_bytes()


def test_run_cluster_learned_path(tmp_path):
    cfg = _cfg(tmp_path, PRETRAIN_TEXT)
    run_pretrain(cfg)
    files = run_cluster(cfg)
    assert "C.csv" in files
    labels = np.loadtxt(tmp_path / "out" / "labels.csv", dtype=np.int64)
    assert labels.shape == (8,)
    assert set(labels) <= {0, 1}


def test_run_cluster_rejects_stale_parameters(tmp_path):
    cfg = _cfg(tmp_path, PRETRAIN_TEXT)
    run_pretrain(cfg)
    narrower = _cfg(tmp_path, PRETRAIN_TEXT.replace("36, 16, 8", "36, 12, 8"), name="alt.cfg")
    with pytest.raises(ValueError, match="encoder widths"):
        run_cluster(narrower)


# -- full runs and artifact verification ------------------------------------

def test_run_all_identity(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    files = run_all(cfg, identity_encoder=True)
    assert len(files) >= 6
    expected = {"C.csv", "W.csv", "labels.csv", "cluster_loss.csv", "metrics.txt", "W.pgm"}
    assert expected <= set(files)
    out = tmp_path / "out"
    assert set(load_manifest(out / MANIFEST_NAME)) == set(files)
    verify_artifacts(out)


def test_run_all_repeat_is_byte_identical(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    run_all(cfg, identity_encoder=True)
    out = tmp_path / "out"
    first = {name: (out / name).read_bytes() for name in ("C.csv", "W.csv", "labels.csv", "metrics.txt")}
    run_all(cfg, identity_encoder=True)
    for name, blob in first.items():
        assert (out / name).read_bytes() == blob


def test_verify_artifacts_catches_tampering(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    run_all(cfg, identity_encoder=True)
    out = tmp_path / "out"
    c = load_matrix(out / "C.csv")
    c[0, 1] += 0.5
    save_matrix(out / "C.csv", c)
    with pytest.raises(ValueError, match="row"):
        verify_artifacts(out)


def test_verify_artifacts_catches_missing_files(tmp_path):
    cfg = _cfg(tmp_path, IDENTITY_TEXT)
    run_all(cfg, identity_encoder=True)
    out = tmp_path / "out"
    (out / "W.pgm").unlink()
    with pytest.raises(ValueError, match="missing on disk"):
        verify_artifacts(out)


def test_export_heatmap_writes_pgm(tmp_path):
    save_matrix(tmp_path / "w.csv", np.array([[0.0, 1.0], [1.0, 0.0]]))
    export_heatmap(str(tmp_path / "w.csv"), str(tmp_path / "w.pgm"))
    assert (tmp_path / "w.pgm").read_bytes().startswith(b"P5\n2 2\n255\n")


# -- command line -----------------------------------------------------------

def _write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(f"output_dir = {tmp_path / 'out'}\n" + text)
    return str(path)


def test_cli_synth_writes_dataset(tmp_path, capsys):
    rc = main(["synth", "--config", _write_cfg(tmp_path, IDENTITY_TEXT)])
    assert rc == 0
    assert "samples.csv" in capsys.readouterr().out
    assert load_matrix(tmp_path / "out" / "samples.csv").shape == (24, 6)
    assert (tmp_path / "out" / "labels_true.csv").exists()


def test_cli_cluster_and_eval(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, IDENTITY_TEXT)
    assert main(["cluster", "--identity-encoder", "--config", cfg_path]) == 0
    assert "cluster done: 4 artifacts" in capsys.readouterr().out
    assert main(["eval", "--config", cfg_path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("acc=")
    assert "k_true=3" in out


def test_cli_all_identity(tmp_path, capsys):
    rc = main(["all", "--identity-encoder", "--config", _write_cfg(tmp_path, IDENTITY_TEXT)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "run complete" in out
    assert "acc=" in out


def test_cli_seed_and_out_overrides(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, IDENTITY_TEXT)
    alt = tmp_path / "elsewhere"
    rc = main(
        ["cluster", "--identity-encoder", "--config", cfg_path, "--seed", "5", "--out", str(alt)]
    )
    assert rc == 0
    capsys.readouterr()
    assert (alt / "C.csv").exists()
    assert not (tmp_path / "out").exists()


def test_cli_heatmap_subcommand(tmp_path, capsys):
    save_matrix(tmp_path / "w.csv", np.eye(3)[::-1] * 0.5)
    rc = main(["heatmap", str(tmp_path / "w.csv"), str(tmp_path / "w.pgm")])
    assert rc == 0
    assert (tmp_path / "w.pgm").read_bytes().startswith(b"P5\n3 3\n255\n")


def test_cli_config_error_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no.such.key = 1\n")
    rc = main(["cluster", "--identity-encoder", "--config", str(bad)])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "no.such.key" in err


def test_cli_missing_idx_exits_two_naming_path(tmp_path, capsys):
    cfg_path = _write_cfg(
        tmp_path,
        f"data.source = idx\ndata.idx_images = {tmp_path / 'absent.idx'}\n"
        f"data.idx_labels = {tmp_path / 'lab.idx'}\n",
    )
    rc = main(["cluster", "--identity-encoder", "--config", cfg_path])
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("runtime error:")
    assert "absent.idx" in err
