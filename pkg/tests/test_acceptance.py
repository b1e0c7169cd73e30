"""Acceptance suite: ten numbered criteria, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines as
they happen; without ``-s`` they still appear in the captured output of any
failing criterion.
"""

import time

import numpy as np
import pytest

from entclust.autodiff import Tape
from entclust.config import load_config
from entclust.contrastive import pretrain_loss, pretrain_loss_on_tape
from entclust.datasets import SynthConfig, synth_subspaces
from entclust.metrics import acc, nmi
from entclust.persist import load_loss_history, load_metrics_report
from entclust.pipeline import run_all
from entclust.selfexpr import (
    ClusterStageConfig,
    _loss_on_tape,
    coeff_from_logits,
    fit_coefficients,
    affinity,
    selfexpr_loss,
    ssc_entropy_baseline,
    ssc_entropy_rows,
)
from entclust.spectral import SpectralConfig, normalized_laplacian, spectral_cluster
from entclust.metrics import hungarian

from helpers import (
    brute_force_assignment,
    finite_diff_grad,
    grad_rel_err,
    pg_entropy_weights,
)


def _verdict(tag: str, ok: bool, detail: str) -> None:
    print(f"\n[{tag}] {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{tag}: {detail}"


def test_criterion_01_gradient_fidelity():
    started = time.monotonic()
    rng = np.random.default_rng(101)
    worst = 0.0
    instances = 0

    for _ in range(12):  # pretraining loss wrt embeddings
        two_n = int(rng.choice([4, 6, 8]))
        d = int(rng.integers(2, 6))
        z = rng.normal(size=(two_n, d))
        tape = Tape()
        leaf = tape.leaf(z)
        analytic = tape.gradients(pretrain_loss_on_tape(tape, leaf, 0.5))[leaf]
        numeric = finite_diff_grad(lambda v: pretrain_loss(v, 0.5), z)
        worst = max(worst, grad_rel_err(analytic, numeric))
        instances += 1

    for mode in ("literal", "mean-scaled"):  # coefficient loss wrt logits
        for _ in range(6):
            n = int(rng.integers(3, 9))
            d = int(rng.integers(2, 5))
            z = rng.normal(size=(n, d))
            logits = rng.normal(size=(n, n))

            def value(free):
                return selfexpr_loss(z, coeff_from_logits(free), 1.0, 1.0, mode)

            tape = Tape()
            leaf = tape.leaf(logits)
            c_node = tape.row_softmax(leaf, excluded=np.eye(n, dtype=bool))
            loss = _loss_on_tape(tape, tape.constant(z), c_node, 1.0, 1.0, mode)
            analytic = tape.gradients(loss)[leaf]
            numeric = finite_diff_grad(value, logits)
            worst = max(worst, grad_rel_err(analytic, numeric))
            instances += 1

    elapsed = time.monotonic() - started
    _verdict(
        "criterion 01 gradient fidelity",
        instances >= 20 and worst <= 1e-4 and elapsed < 10.0,
        f"{instances} instances, max rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_02_entropy_closed_form_oracle():
    started = time.monotonic()
    rng = np.random.default_rng(202)
    worst_closed = 0.0
    worst_pg = 0.0
    for gamma in (0.7, 1.0, 1.6):
        x = rng.normal(size=(5, 2))
        rows = ssc_entropy_rows(x, gamma)

        # Independent closed form: exp(-d/gamma) normalized per row.
        diffs = x[:, None, :] - x[None, :, :]
        d = np.sqrt(np.sum(diffs * diffs, axis=2))
        expd = np.exp(-d / gamma)
        np.fill_diagonal(expd, 0.0)
        direct = expd / expd.sum(axis=1, keepdims=True)
        worst_closed = max(worst_closed, float(np.max(np.abs(rows - direct))))
        worst_closed = max(
            worst_closed,
            float(np.max(np.abs(ssc_entropy_baseline(x, gamma) - (direct + direct.T) / 2.0))),
        )

        pg = pg_entropy_weights(x, gamma, iters=100_000)
        worst_pg = max(worst_pg, float(np.max(np.abs(rows - pg))))

    elapsed = time.monotonic() - started
    _verdict(
        "criterion 02 entropy closed-form oracle",
        worst_closed <= 1e-12 and worst_pg <= 1e-4 and elapsed < 30.0,
        f"closed-form gap {worst_closed:.2e}, projected-gradient gap {worst_pg:.2e}, {elapsed:.1f}s",
    )


def test_criterion_03_uniform_similarity_identity():
    worst = 0.0
    for n_pairs in (2, 4, 8, 32):
        z = np.tile(np.array([[0.6, -0.1, 0.8]]), (2 * n_pairs, 1))
        worst = max(worst, abs(pretrain_loss(z, 0.5) - np.log(2 * n_pairs - 1)))
    _verdict(
        "criterion 03 uniform-similarity identity",
        worst <= 1e-9,
        f"max |loss - ln(2N-1)| = {worst:.2e} over N in (2, 4, 8, 32)",
    )


def test_criterion_04_constraint_exactness():
    rng = np.random.default_rng(404)
    worst_sum = 0.0
    diag_clean = True
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        logits = rng.uniform(-1e3, 1e3, size=(n, n))
        c = coeff_from_logits(logits)
        worst_sum = max(worst_sum, float(np.max(np.abs(c.sum(axis=1) - 1.0))))
        diag_clean = diag_clean and bool(np.all(np.diag(c) == 0.0))
    _verdict(
        "criterion 04 constraint exactness",
        worst_sum <= 1e-12 and diag_clean,
        f"1000 matrices, max |row sum - 1| = {worst_sum:.2e}, diagonals exact: {diag_clean}",
    )


def test_criterion_05_assignment_oracle():
    rng = np.random.default_rng(505)
    agree = True
    for _ in range(100):
        k = int(rng.integers(2, 7))
        cost = rng.integers(0, 40, size=(k, k)).astype(np.float64)
        perm = hungarian(cost)
        total = float(cost[np.arange(k), perm].sum())
        _, best = brute_force_assignment(cost)
        agree = agree and total == best
    hand = acc([0, 0, 1, 1], [0, 1, 1, 1])
    _verdict(
        "criterion 05 assignment oracle",
        agree and hand == 0.75,
        f"100 brute-force matches: {agree}, hand accuracy = {hand}",
    )


def test_criterion_06_nmi_identities():
    rng = np.random.default_rng(606)
    ident_gap = 0.0
    for _ in range(20):
        labels = rng.integers(0, 4, size=30)
        labels[:4] = [0, 1, 2, 3]
        perm = rng.permutation(4)
        ident_gap = max(ident_gap, abs(nmi(labels, perm[labels]) - 1.0))
    indep_gap = abs(nmi([0, 0, 1, 1], [0, 1, 0, 1]))
    sym_gap = 0.0
    checked = 0
    while checked < 100:
        n = int(rng.integers(4, 40))
        a = rng.integers(0, 4, size=n)
        b = rng.integers(0, 3, size=n)
        if len(np.unique(a)) < 2 or len(np.unique(b)) < 2:
            continue
        sym_gap = max(sym_gap, abs(nmi(a, b) - nmi(b, a)))
        checked += 1
    _verdict(
        "criterion 06 nmi identities",
        ident_gap <= 1e-12 and indep_gap <= 1e-12 and sym_gap <= 1e-12,
        f"identical gap {ident_gap:.2e}, independent gap {indep_gap:.2e}, "
        f"symmetry gap {sym_gap:.2e} over {checked} pairs",
    )


def _random_component(size: int, rng) -> np.ndarray:
    w = np.zeros((size, size))
    for v in range(1, size):  # random spanning tree keeps it connected
        u = int(rng.integers(0, v))
        w[u, v] = w[v, u] = 1.0
    for _ in range(size // 2):  # extra edges
        u, v = rng.integers(0, size, size=2)
        if u != v:
            w[u, v] = w[v, u] = 1.0
    return w


def test_criterion_07_spectral_correctness():
    rng = np.random.default_rng(707)
    multiplicities_ok = True
    for _ in range(20):
        k = int(rng.integers(1, 6))
        sizes = [int(rng.integers(2, 11)) for _ in range(k)]
        n = sum(sizes)
        w = np.zeros((n, n))
        offset = 0
        for s in sizes:
            w[offset : offset + s, offset : offset + s] = _random_component(s, rng)
            offset += s
        perm = rng.permutation(n)
        w = w[np.ix_(perm, perm)]
        values = np.linalg.eigvalsh(normalized_laplacian(w))
        multiplicities_ok = multiplicities_ok and int(np.sum(np.abs(values) < 1e-8)) == k

    clique = np.zeros((10, 10))
    clique[:5, :5] = 1.0
    clique[5:, 5:] = 1.0
    np.fill_diagonal(clique, 0.0)
    labels = spectral_cluster(clique, SpectralConfig(clusters=2, seed=0))
    clique_acc = acc(np.repeat([0, 1], 5), labels)
    _verdict(
        "criterion 07 spectral correctness",
        multiplicities_ok and clique_acc == 1.0,
        f"20 component counts matched: {multiplicities_ok}, two-clique acc = {clique_acc}",
    )


def _recover(noise_sigma: float) -> tuple[float, float, float]:
    started = time.monotonic()
    ds = synth_subspaces(SynthConfig(3, 2, 20, 100, noise_sigma), seed=0)
    cfg = ClusterStageConfig(
        lambda1=1.0, lambda2=75.0, learning_rate=0.05, epochs=200, entropy_mode="literal"
    )
    c, _, _ = fit_coefficients(ds.samples, cfg)
    labels = spectral_cluster(affinity(c), SpectralConfig(clusters=3, seed=0))
    return acc(ds.labels, labels), nmi(ds.labels, labels), time.monotonic() - started


def test_criterion_08_synthetic_recovery():
    acc_clean, nmi_clean, t_clean = _recover(0.0)
    acc_noisy, _, t_noisy = _recover(0.01)
    _verdict(
        "criterion 08 synthetic recovery",
        acc_clean >= 0.95
        and nmi_clean >= 0.90
        and acc_noisy >= 0.90
        and t_clean < 60.0
        and t_noisy < 60.0,
        f"clean acc {acc_clean:.4f} nmi {nmi_clean:.4f} ({t_clean:.1f}s), "
        f"noisy acc {acc_noisy:.4f} ({t_noisy:.1f}s)",
    )


SMOKE_TEXT = """
data.source = synth-images
synth_images.classes = 10
synth_images.per_class = 100
synth_images.height = 8
synth_images.width = 8
pretrain.epochs = 50
pretrain.batch_size = 64
cluster.learning_rate = 0.05
cluster.epochs = 150
cluster.lambda1 = 1.0
cluster.lambda2 = 75.0
"""


def test_criterion_09_learned_encoder_smoke(tmp_path):
    cfg_path = tmp_path / "smoke.cfg"
    cfg_path.write_text(f"output_dir = {tmp_path / 'out'}\n" + SMOKE_TEXT)
    cfg = load_config(str(cfg_path))
    run_all(cfg)
    out = tmp_path / "out"
    scores = load_metrics_report(out / "metrics.txt")
    history = load_loss_history(out / "pretrain_loss.csv")
    decreased = history[-1] < history[0]
    _verdict(
        "criterion 09 learned-encoder smoke",
        scores["acc"] >= 0.20 and len(history) == 50 and decreased,
        f"acc {scores['acc']:.4f}, pretraining loss {history[0]:.4f} -> {history[-1]:.4f}",
    )


DETERMINISM_TEXT = """
seed = 7
data.source = synth
synth.clusters = 3
synth.subspace_dim = 1
synth.ambient_dim = 6
synth.points_per_cluster = 8
cluster.learning_rate = 0.05
cluster.epochs = 10
cluster.lambda2 = 1.0
"""


def test_criterion_10_byte_identical_runs(tmp_path):
    blobs = []
    for run in ("first", "second"):
        out = tmp_path / run
        cfg_path = tmp_path / f"{run}.cfg"
        cfg_path.write_text(f"output_dir = {out}\n" + DETERMINISM_TEXT)
        run_all(load_config(str(cfg_path)), identity_encoder=True)
        blobs.append(
            {
                name: (out / name).read_bytes()
                for name in ("C.csv", "W.csv", "labels.csv", "metrics.txt")
            }
        )
    identical = blobs[0] == blobs[1]
    _verdict(
        "criterion 10 byte-identical runs",
        identical,
        "C.csv, W.csv, labels.csv, metrics.txt byte-identical across repeated runs: "
        f"{identical}",
    )
