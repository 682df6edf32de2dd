"""Acceptance suite.

Each test checks one release criterion at its pinned tolerance and prints a
single [PASS]/[FAIL] line so the run log doubles as an acceptance report.
Tolerances and runtime bounds here are contractual; do not loosen them.
"""

import math
import time

import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from stembed import cli, embednet, smoothing, subspace, viz
from stembed.archive import read_archive, write_archive
from stembed.embednet import EmbeddingNetwork, NetworkConfig, TrainingRecord

_capman = None


@pytest.fixture(autouse=True)
def _live_reporting(request):
    global _capman
    _capman = request.config.pluginmanager.getplugin("capturemanager")
    yield


def _report(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[{status}] {name}{suffix}"
    if _capman is not None:
        with _capman.global_and_fixture_disabled():
            print(line, flush=True)
    else:
        print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. SVD oracle equivalence

def test_acceptance_svd_oracle():
    rng = np.random.default_rng(100)
    start = time.perf_counter()
    worst_sv, worst_recon = 0.0, 0.0
    for _ in range(200):
        c = int(rng.integers(2, 41))
        t = int(rng.integers(2, 121))
        s = rng.normal(size=(c, t)) * float(rng.uniform(0.1, 20.0))
        b = subspace.svd_decompose(s)
        # independent oracle: eigenvalues of the Gram matrix
        eigvals = np.linalg.eigh(s @ s.T)[0][::-1][: min(c, t)]
        oracle = np.sqrt(np.maximum(eigvals, 0.0))
        worst_sv = max(worst_sv, float(np.max(np.abs(b.singular_values - oracle))))
        recon = b.spectral @ b.temporal
        worst_recon = max(worst_recon,
                          float(np.linalg.norm(recon - s) / np.linalg.norm(s)))
    elapsed = time.perf_counter() - start
    ok = worst_sv <= 1e-8 and worst_recon <= 1e-6 and elapsed < 30.0
    _report("SVD oracle equivalence",
            ok, f"sv_err={worst_sv:.2e} recon={worst_recon:.2e} {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Eckart-Young monotonicity

def test_acceptance_eckart_young():
    rng = np.random.default_rng(101)
    ok = True
    for _ in range(50):
        c = int(rng.integers(4, 41))
        t = int(rng.integers(c, 121))
        s = rng.normal(size=(c, t))
        full = subspace.svd_decompose(s)
        errors = []
        for d in range(1, min(c, t) + 1):
            b = subspace.truncate(full, d, d)
            errors.append(np.linalg.norm(s - b.spectral @ b.temporal))
        if not np.all(np.diff(errors) <= 1e-9):
            ok = False
            break
    _report("Eckart-Young monotonicity (50 spectrograms)", ok)


# ---------------------------------------------------------------------------
# 3. Dimensionality contract

def test_acceptance_dimensionality_contract():
    rng = np.random.default_rng(102)
    full = subspace.svd_decompose(rng.normal(size=(40, 120)))
    dims = {}
    for d_s, d_t in ((2, 5), (4, 10)):
        b = subspace.truncate(full, d_s, d_t)
        sf = subspace.spectral_feature(b)
        tf = subspace.temporal_feature(b)
        dims[(d_s, "sbe")] = sf.dim
        dims[(d_t, "tbe")] = tf.dim
        dims[((d_s, d_t), "stbe")] = subspace.combined_feature(sf, tf).dim
    expected = {(2, "sbe"): 80, (4, "sbe"): 160, (5, "tbe"): 250,
                (10, "tbe"): 500, ((2, 5), "stbe"): 330, ((4, 10), "stbe"): 660}
    ok = all(dims[k] == v for k, v in expected.items())
    _report("Dimensionality contract 80/160/250/330/660", ok, str(dims))


# ---------------------------------------------------------------------------
# 4. Gradient check

def test_acceptance_gradient_check():
    cfg = NetworkConfig(input_dim=8, num_primary_classes=3,
                        hidden_dims=(16, 16, 16, 25), linear_bottleneck_dim=6,
                        use_speaker_task=True, num_speakers=4, mtl_weight=0.5,
                        seed=1)
    net = EmbeddingNetwork(cfg)
    rng = np.random.default_rng(103)
    x = rng.normal(size=(12, 8))
    yp = rng.integers(3, size=12)
    ys = rng.integers(4, size=12)
    start = time.perf_counter()
    _, grads = embednet.backward(net, x, yp, ys, 0.5)
    worst = 0.0
    sample_rng = np.random.default_rng(104)
    for key, grad in grads.items():
        flat = net.params[key].ravel()
        gflat = grad.ravel()
        idx = sample_rng.choice(flat.size, size=min(6, flat.size), replace=False)
        analytic, numeric = [], []
        for i in idx:
            orig = flat[i]
            h = 1e-4 * max(1.0, abs(orig))
            flat[i] = orig + h
            lp, ls, _, _ = net.forward(x, mode="train")
            hi = embednet.mtl_loss(lp, ls, yp, ys, 0.5)
            flat[i] = orig - h
            lp, ls, _, _ = net.forward(x, mode="train")
            lo = embednet.mtl_loss(lp, ls, yp, ys, 0.5)
            flat[i] = orig
            numeric.append((hi - lo) / (2 * h))
            analytic.append(gflat[i])
        analytic, numeric = np.array(analytic), np.array(numeric)
        denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 60.0
    _report("Gradient check vs central finite differences",
            ok, f"max_rel_err={worst:.2e} {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 5. Classifier capability

def test_acceptance_classifier_capability():
    rng = np.random.default_rng(105)

    def separable(n):
        X = rng.normal(size=(n, 8))
        y = (rng.random(n) < 0.5).astype(int)
        X[:, 0] = 4.0 * (2 * y - 1) + 0.2 * rng.normal(size=n)
        return [TrainingRecord(X[i], int(y[i]), 0) for i in range(n)]

    cfg = NetworkConfig(input_dim=8, num_primary_classes=2,
                        hidden_dims=(16, 16, 16, 25), linear_bottleneck_dim=6,
                        learning_rate=1e-2, batch_size=16, epochs=20, seed=3)
    net, log = embednet.train(separable(100), cfg)
    train_acc = log[-1]["primary_acc"]
    held_out = separable(40)
    held_acc = sum(embednet.classify(net, r.feature)[0] == r.primary_label
                   for r in held_out) / len(held_out)
    ce_gap = abs(embednet.cross_entropy(np.zeros((7, 5)), np.zeros(7, dtype=int))
                 - math.log(5))
    ok = train_acc == 1.0 and held_acc >= 0.95 and ce_gap <= 1e-12
    _report("Classifier capability",
            ok, f"train={train_acc:.2f} held={held_acc:.2f} ce_gap={ce_gap:.1e}")


# ---------------------------------------------------------------------------
# 6. GMM EM monotonicity

def test_acceptance_gmm_monotone():
    rng = np.random.default_rng(106)
    ok = True
    for i in range(20):
        n = int(rng.integers(60, 200))
        dim = int(rng.integers(2, 8))
        X = rng.normal(size=(n, dim)) * float(rng.uniform(0.5, 3.0))
        gmm = smoothing.fit_gmm(X, M=int(rng.integers(2, 6)), seed=i)
        if not np.all(np.diff(gmm.log_likelihoods) >= -1e-8):
            ok = False
            break
    X = rng.normal(size=(200, 5))
    g1 = smoothing.fit_gmm(X, M=1, seed=0)
    closed = (np.max(np.abs(g1.means[0] - X.mean(axis=0))) <= 1e-9
              and np.max(np.abs(g1.variances[0] - X.var(axis=0))) <= 1e-9)
    _report("GMM EM monotone log-likelihood + M=1 closed form", ok and closed)


# ---------------------------------------------------------------------------
# 7. LDA sanity

def test_acceptance_lda_sanity():
    docs = [[i] * 400 for i in range(3)]
    lda = smoothing.fit_lda(docs, K=3, num_symbols=3, seed=0, sweeps=100)
    min_posterior = 1.0
    norm_err = float(np.max(np.abs(lda.topic_word.sum(axis=1) - 1.0)))
    for doc in docs:
        theta = smoothing.lda_smooth(lda, doc, seed=0).vector
        min_posterior = min(min_posterior, float(theta.max()))
        norm_err = max(norm_err, abs(float(theta.sum()) - 1.0))
    ok = min_posterior >= 0.9 and norm_err <= 1e-8
    _report("LDA disjoint-support recovery",
            ok, f"min_posterior={min_posterior:.3f} norm_err={norm_err:.1e}")


# ---------------------------------------------------------------------------
# 8. t-SNE separation and determinism

def test_acceptance_tsne():
    rng = np.random.default_rng(107)
    a = rng.normal(0.0, 1.0, size=(50, 25))
    b = rng.normal(0.0, 1.0, size=(50, 25))
    b[:, 0] += 10.0
    pts = np.concatenate([a, b])
    labels = ["a"] * 50 + ["b"] * 50
    start = time.perf_counter()
    r1 = viz.tsne_project(pts, perplexity=10.0, seed=0, iters=1000, groups=labels)
    elapsed = time.perf_counter() - start
    r2 = viz.tsne_project(pts, perplexity=10.0, seed=0, iters=1000, groups=labels)
    sil = silhouette_score(r1.coords, labels)
    deterministic = np.array_equal(r1.coords, r2.coords)
    ok = sil >= 0.5 and deterministic and elapsed < 60.0
    _report("t-SNE blob separation + bitwise determinism",
            ok, f"silhouette={sil:.3f} {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 9. Toy adaptation direction

def test_acceptance_toy_adaptation():
    from stembed.pipeline import toy_adaptation_experiment
    start = time.perf_counter()
    varied = toy_adaptation_experiment(seed=0, n_seeds=5, speaker_variation=True)
    control = toy_adaptation_experiment(seed=0, n_seeds=5, speaker_variation=False)
    elapsed = time.perf_counter() - start
    direction = varied["mean_aux_error"] <= varied["mean_baseline_error"]
    control_flat = abs(control["mean_delta"]) <= 0.02
    ok = direction and control_flat and elapsed < 300.0
    _report("Toy adaptation direction", ok,
            f"base={varied['mean_baseline_error']:.3f} "
            f"aux={varied['mean_aux_error']:.3f} "
            f"control_delta={control['mean_delta']:+.3f} {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 10. End-to-end determinism

def test_acceptance_end_to_end_determinism(wav_corpus, tmp_path):
    config = str(wav_corpus["config"])
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    codes = [cli.main(["pipeline", "--config", config, "--out", str(out)])
             for out in (out1, out2)]
    identical = all(
        (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in ("features.ark", "embeddings.ark", "speakers.ark", "train.log"))
    entries, header = read_archive(out1 / "speakers.ark")
    copy = tmp_path / "copy.ark"
    write_archive(copy, entries, header["kind"], int(header["dim"]), header["hash"])
    roundtrip = copy.read_bytes() == (out1 / "speakers.ark").read_bytes()
    ok = codes == [0, 0] and identical and roundtrip
    _report("End-to-end pipeline determinism + archive round-trip", ok)
