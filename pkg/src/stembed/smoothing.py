"""Speaker-level smoothing of utterance embeddings.

Two routes: simple per-speaker averaging (the default), and vector
quantization with a diagonal-covariance GMM followed by Latent Dirichlet
Allocation over the per-speaker bags of component symbols, giving a
topic-posterior speaker feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VAR_FLOOR = 1e-6


class DataError(Exception):
    pass


@dataclass
class SpeakerEmbedding:
    speaker_id: str
    vector: np.ndarray
    method: str  # 'avg' | 'lda'
    num_utterances: int


@dataclass
class GmmModel:
    weights: np.ndarray    # (M,)
    means: np.ndarray      # (M, D)
    variances: np.ndarray  # (M, D), diagonal
    log_likelihoods: list = field(default_factory=list)  # per EM iteration

    @property
    def num_components(self) -> int:
        return self.weights.size

    def save(self, path):
        np.savez(path, weights=self.weights, means=self.means,
                 variances=self.variances,
                 log_likelihoods=np.asarray(self.log_likelihoods),
                 format_version=np.array([1], dtype=np.int64))

    @classmethod
    def load(cls, path):
        d = np.load(path)
        return cls(d["weights"], d["means"], d["variances"],
                   list(d["log_likelihoods"]))


@dataclass
class LdaModel:
    topic_word: np.ndarray  # (K, M), rows sum to 1
    alpha: float
    beta: float

    @property
    def num_topics(self) -> int:
        return self.topic_word.shape[0]

    def save(self, path):
        np.savez(path, topic_word=self.topic_word,
                 priors=np.array([self.alpha, self.beta]),
                 format_version=np.array([1], dtype=np.int64))

    @classmethod
    def load(cls, path):
        d = np.load(path)
        return cls(d["topic_word"], float(d["priors"][0]), float(d["priors"][1]))


# ---------------------------------------------------------------------------
# averaging

def average_smooth(per_speaker: dict) -> list:
    """Arithmetic mean of each speaker's utterance embeddings."""
    if not per_speaker:
        raise DataError("no speakers given")
    out = []
    for speaker_id, vectors in per_speaker.items():
        if len(vectors) == 0:
            raise DataError(f"speaker {speaker_id!r} has no utterance embeddings")
        stack = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
        # fsum is exactly rounded, so the mean is order-invariant
        mean = np.array([math.fsum(col) for col in stack.T]) / stack.shape[0]
        out.append(SpeakerEmbedding(speaker_id, mean, "avg", stack.shape[0]))
    return out


# ---------------------------------------------------------------------------
# GMM quantization

def _log_gauss_diag(X, means, variances):
    # (N, M) log densities under each diagonal Gaussian
    diff = X[:, None, :] - means[None, :, :]
    return -0.5 * (np.log(2.0 * np.pi * variances).sum(axis=1)[None, :]
                   + (diff**2 / variances[None, :, :]).sum(axis=2))


def _kmeans_pp_init(X, M, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(M - 1):
        d2 = np.min([np.sum((X - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        probs = d2 / total
        centers.append(X[rng.choice(n, p=probs)])
    return np.stack(centers)


def fit_gmm(X, M=100, seed=0, max_iter=200, tol=1e-6) -> GmmModel:
    """Diagonal-covariance EM from a k-means++ initialization.

    Stops when the relative log-likelihood improvement drops below `tol` or
    after `max_iter` iterations. The per-iteration total log-likelihood is
    recorded on the model and is non-decreasing up to numerical slack.
    """
    X = np.asarray(X, dtype=np.float64)
    n, dim = X.shape
    if len(np.unique(X, axis=0)) < M:
        raise DataError(f"need at least {M} distinct vectors, got fewer")
    rng = np.random.default_rng(seed)
    means = _kmeans_pp_init(X, M, rng)
    variances = np.tile(np.maximum(X.var(axis=0), VAR_FLOOR), (M, 1))
    weights = np.full(M, 1.0 / M)
    lls = []
    prev = -np.inf
    for _ in range(max_iter):
        log_joint = np.log(weights)[None, :] + _log_gauss_diag(X, means, variances)
        log_norm = np.logaddexp.reduce(log_joint, axis=1)
        ll = float(log_norm.sum())
        lls.append(ll)
        resp = np.exp(log_joint - log_norm[:, None])
        nk = resp.sum(axis=0) + 1e-300
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        sq = (resp.T @ (X**2)) / nk[:, None]
        variances = np.maximum(sq - means**2, VAR_FLOOR)
        if prev > -np.inf and (ll - prev) < tol * abs(prev):
            break
        prev = ll
    return GmmModel(weights, means, variances, lls)


def quantize(gmm: GmmModel, vector) -> int:
    """Most probable component for one vector; ties break to the lowest index."""
    v = np.asarray(vector, dtype=np.float64)[None, :]
    log_post = np.log(gmm.weights) + _log_gauss_diag(v, gmm.means, gmm.variances)[0]
    return int(np.argmax(log_post))


# ---------------------------------------------------------------------------
# LDA over quantized symbols

def fit_lda(docs, K, num_symbols, alpha=None, beta=0.01, seed=0, sweeps=500) -> LdaModel:
    """Collapsed Gibbs sampling over per-speaker symbol bags.

    `docs` maps each document to a sequence of symbols in 0..num_symbols-1.
    The topic-word matrix is read off the final sampler state with beta
    smoothing. Deterministic given the seed.
    """
    if K < 2:
        raise DataError("K must be >= 2")
    docs = [list(d) for d in docs]
    if any(len(d) == 0 for d in docs):
        raise DataError("empty document")
    alpha = alpha if alpha is not None else 50.0 / K
    rng = np.random.default_rng(seed)
    n_dk = np.zeros((len(docs), K))
    n_kw = np.zeros((K, num_symbols))
    n_k = np.zeros(K)
    assign = []
    for d, doc in enumerate(docs):
        z = rng.integers(K, size=len(doc))
        assign.append(z)
        for w, k in zip(doc, z):
            n_dk[d, k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1
    for _ in range(sweeps):
        for d, doc in enumerate(docs):
            z = assign[d]
            for i, w in enumerate(doc):
                k = z[i]
                n_dk[d, k] -= 1
                n_kw[k, w] -= 1
                n_k[k] -= 1
                p = (n_dk[d] + alpha) * (n_kw[:, w] + beta) / (n_k + num_symbols * beta)
                p /= p.sum()
                k = int(rng.choice(K, p=p))
                z[i] = k
                n_dk[d, k] += 1
                n_kw[k, w] += 1
                n_k[k] += 1
    topic_word = (n_kw + beta) / (n_kw + beta).sum(axis=1, keepdims=True)
    return LdaModel(topic_word, alpha, beta)


def lda_smooth(lda: LdaModel, doc, speaker_id="", seed=0, sweeps=100) -> SpeakerEmbedding:
    """Doc-topic posterior for one symbol bag via a fold-in Gibbs pass.

    Topic assignments are resampled with the trained topic-word matrix held
    fixed; theta = (final counts + alpha), normalized.
    """
    doc = list(doc)
    if not doc:
        raise DataError("empty document")
    K = lda.num_topics
    rng = np.random.default_rng(seed)
    z = rng.integers(K, size=len(doc))
    counts = np.bincount(z, minlength=K).astype(np.float64)
    for _ in range(sweeps):
        for i, w in enumerate(doc):
            counts[z[i]] -= 1
            p = (counts + lda.alpha) * lda.topic_word[:, w]
            p /= p.sum()
            z[i] = int(rng.choice(K, p=p))
            counts[z[i]] += 1
    theta = (counts + lda.alpha) / (counts + lda.alpha).sum()
    return SpeakerEmbedding(speaker_id, theta, "lda", len(doc))


def gmm_lda_smooth(per_speaker: dict, M=100, K=25, seed=0,
                   gmm_iters=200, lda_sweeps=500) -> list:
    """Full quantization route: fit GMM on all utterance embeddings, quantize
    each speaker's utterances into a symbol bag, fit LDA, return per-speaker
    topic posteriors."""
    speakers = list(per_speaker)
    all_vecs = np.concatenate(
        [np.stack([np.asarray(v, float) for v in per_speaker[s]]) for s in speakers])
    gmm = fit_gmm(all_vecs, M=M, seed=seed, max_iter=gmm_iters)
    docs = [[quantize(gmm, v) for v in per_speaker[s]] for s in speakers]
    lda = fit_lda(docs, K, num_symbols=M, seed=seed, sweeps=lda_sweeps)
    out = []
    for s, doc in zip(speakers, docs):
        emb = lda_smooth(lda, doc, speaker_id=s, seed=seed)
        out.append(emb)
    return out
