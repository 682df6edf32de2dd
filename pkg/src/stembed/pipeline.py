"""End-to-end orchestration: manifest -> FBK -> SVD features -> classifier ->
embeddings -> speaker smoothing -> feature archives, plus the synthetic
adaptation experiment and auxiliary-feature concatenation."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields as dc_fields, asdict

import numpy as np

from stembed import frontend, subspace, embednet, smoothing
from stembed.archive import config_hash, write_archive
from stembed.frontend import CorpusManifest, FrontendConfig, ManifestError, parse_manifest


class ConfigError(Exception):
    pass


_KIND_ALIASES = {"sbe": "spectral", "tbe": "temporal", "stbe": "spectro-temporal",
                 "spectral": "spectral", "temporal": "temporal",
                 "spectro-temporal": "spectro-temporal"}
_KIND_TAGS = {"spectral": "sbe", "temporal": "tbe", "spectro-temporal": "stbe"}


def _kind_tag(kind):
    return _KIND_TAGS[_KIND_ALIASES[kind]]


@dataclass
class PipelineConfig:
    manifest: str = ""
    # frontend
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    channels: int = 40
    preemphasis: float = 0.97
    f_lo: float = 20.0
    f_hi: float = 0.0
    floor: float = 1e-10
    vad_margin_db: float = 9.0
    vad_percentile: float = 10.0
    trim: bool = True
    # subspace
    d_s: int = 2
    d_t: int = 5
    feature_kind: str = "spectral"
    # embedding network
    primary_target: str = "severity"  # 'severity' | 'age'
    use_speaker_task: bool = False
    mtl_weight: float = 0.0
    hidden_dim: int = 2000
    linear_bottleneck_dim: int = 200
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 20
    # smoothing
    smoothing: str = "avg"  # 'avg' | 'lda'
    gmm_components: int = 100
    lda_topics: int = 25
    lda_sweeps: int = 500
    # t-SNE
    tsne_perplexity: float = 30.0
    tsne_iters: int = 1000
    # shared
    seed: int = 0
    model_path: str = ""
    input_archive: str = ""
    acoustic_archive: str = ""
    speaker_archive: str = ""

    def __post_init__(self):
        if self.feature_kind not in _KIND_ALIASES:
            raise ConfigError(f"unknown feature_kind {self.feature_kind!r}")
        self.feature_kind = _KIND_ALIASES[self.feature_kind]
        if self.primary_target not in ("severity", "age"):
            raise ConfigError(f"primary_target must be severity or age, got {self.primary_target!r}")
        if self.smoothing not in ("avg", "lda"):
            raise ConfigError(f"smoothing must be avg or lda, got {self.smoothing!r}")
        if self.d_s < 1 or self.d_t < 1:
            raise ConfigError("d_s and d_t must be >= 1")

    @classmethod
    def from_file(cls, path):
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        values = {}
        types = {f.name: f.type for f in dc_fields(cls)}
        defaults = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key not in types:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                current = getattr(defaults, key)
                if isinstance(current, bool):
                    if value.lower() not in ("true", "false", "1", "0"):
                        raise ConfigError(f"{path}:{lineno}: bad boolean {value!r}")
                    values[key] = value.lower() in ("true", "1")
                elif isinstance(current, int):
                    values[key] = int(value)
                elif isinstance(current, float):
                    values[key] = float(value)
                else:
                    values[key] = value
        return cls(**values)

    def frontend_config(self) -> FrontendConfig:
        return FrontendConfig(self.frame_length_ms, self.frame_shift_ms, self.channels,
                              self.preemphasis, self.f_lo, self.f_hi, self.floor,
                              self.vad_margin_db, self.vad_percentile)

    def influencing_hash(self) -> str:
        d = asdict(self)
        for key in ("manifest", "model_path", "input_archive",
                    "acoustic_archive", "speaker_archive"):
            d.pop(key)
        return config_hash(d)


# ---------------------------------------------------------------------------
# stages

def compute_fbk(manifest: CorpusManifest, cfg: PipelineConfig):
    """Load, optionally trim, and compute log-mel spectrograms per utterance."""
    fcfg = cfg.frontend_config()
    specs = {}
    rates = set()
    for entry in manifest.entries:
        clip = frontend.load_audio(entry.audio_path, entry.utterance_id, entry.speaker_id)
        rates.add(clip.sample_rate)
        if cfg.trim:
            clip = frontend.trim_silence(clip, fcfg)
        specs[entry.utterance_id] = frontend.mel_spectrogram(clip, fcfg)
    if len(rates) > 1:
        raise ManifestError(f"mixed sample rates in corpus: {sorted(rates)}")
    return specs


def compute_features(specs: dict, cfg: PipelineConfig):
    """SVD-decompose each spectrogram and build the configured basis features."""
    kind = _KIND_ALIASES[cfg.feature_kind]
    feats = {}
    for utt, spec in specs.items():
        bases = subspace.truncate(subspace.svd_decompose(spec), cfg.d_s, cfg.d_t)
        if kind == "spectral":
            feats[utt] = subspace.spectral_feature(bases)
        elif kind == "temporal":
            feats[utt] = subspace.temporal_feature(bases)
        else:
            feats[utt] = subspace.combined_feature(
                subspace.spectral_feature(bases), subspace.temporal_feature(bases))
    return feats


def _label_maps(manifest: CorpusManifest, cfg: PipelineConfig):
    attr = "severity_label" if cfg.primary_target == "severity" else "age_label"
    vocab = manifest.labels(cfg.primary_target)
    if not vocab:
        raise ManifestError(f"no {cfg.primary_target} labels in manifest")
    missing = [e.utterance_id for e in manifest.entries if getattr(e, attr) is None]
    if missing:
        raise ManifestError(f"utterances without {cfg.primary_target} label: {missing}")
    label_index = {lab: i for i, lab in enumerate(vocab)}
    speaker_index = {s: i for i, s in enumerate(sorted(manifest.speakers))}
    return attr, vocab, label_index, speaker_index


def train_network(manifest: CorpusManifest, feats: dict, cfg: PipelineConfig):
    attr, vocab, label_index, speaker_index = _label_maps(manifest, cfg)
    records = [
        embednet.TrainingRecord(feats[e.utterance_id].vector,
                                label_index[getattr(e, attr)],
                                speaker_index[e.speaker_id])
        for e in manifest.entries
    ]
    input_dim = records[0].feature.size
    h = cfg.hidden_dim
    net_cfg = embednet.NetworkConfig(
        input_dim=input_dim, num_primary_classes=len(vocab),
        hidden_dims=(h, h, h, embednet.BOTTLENECK_DIM),
        linear_bottleneck_dim=cfg.linear_bottleneck_dim,
        dropout_rate=cfg.dropout_rate, use_speaker_task=cfg.use_speaker_task,
        num_speakers=len(speaker_index),
        mtl_weight=cfg.mtl_weight if cfg.use_speaker_task else 0.0,
        learning_rate=cfg.learning_rate, momentum=cfg.momentum,
        batch_size=cfg.batch_size, epochs=cfg.epochs, seed=cfg.seed)
    return embednet.train(records, net_cfg)


def extract_embeddings(net, feats: dict):
    return {utt: embednet.extract_embedding(net, f) for utt, f in feats.items()}


def smooth_embeddings(manifest: CorpusManifest, embeddings: dict, cfg: PipelineConfig):
    per_speaker = {}
    for e in manifest.entries:
        per_speaker.setdefault(e.speaker_id, []).append(embeddings[e.utterance_id])
    if cfg.smoothing == "avg":
        return smoothing.average_smooth(per_speaker)
    return smoothing.gmm_lda_smooth(per_speaker, M=cfg.gmm_components,
                                    K=cfg.lda_topics, seed=cfg.seed,
                                    lda_sweeps=cfg.lda_sweeps)


def run_extract(cfg: PipelineConfig, out_dir):
    """Full flow; writes feature/embedding/speaker archives, model, log, report."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = parse_manifest(cfg.manifest)
    specs = compute_fbk(manifest, cfg)
    feats = compute_features(specs, cfg)
    net, log = train_network(manifest, feats, cfg)
    embeddings = extract_embeddings(net, feats)
    speakers = smooth_embeddings(manifest, embeddings, cfg)
    h = cfg.influencing_hash()
    tag = _kind_tag(cfg.feature_kind)

    feat_dim = next(iter(feats.values())).dim
    write_archive(os.path.join(out_dir, "features.ark"),
                  {u: f.vector for u, f in feats.items()}, tag, feat_dim, h)
    write_archive(os.path.join(out_dir, "embeddings.ark"),
                  embeddings, "embedding", embednet.BOTTLENECK_DIM, h)
    spk_dim = speakers[0].vector.size
    write_archive(os.path.join(out_dir, "speakers.ark"),
                  {s.speaker_id: s.vector for s in speakers},
                  f"speaker-{cfg.smoothing}", spk_dim, h)
    net.save(os.path.join(out_dir, "embednet.npz"))
    embednet.write_training_log(log, os.path.join(out_dir, "train.log"))

    attr, vocab, label_index, _ = _label_maps(manifest, cfg)
    dist = {lab: 0 for lab in vocab}
    for e in manifest.entries:
        dist[getattr(e, attr)] += 1
    report = {
        "utterances": len(manifest.entries),
        "speakers": len(manifest.speakers),
        "feature_kind": tag,
        "feature_dim": feat_dim,
        "embedding_dim": embednet.BOTTLENECK_DIM,
        "smoothing": cfg.smoothing,
        "config_hash": h,
        "final_loss": log[-1]["loss"],
        "train_accuracy": log[-1]["primary_acc"],
        "label_distribution": dist,
    }
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        for k, v in report.items():
            fh.write(f"{k}: {v}\n")
    with open(os.path.join(out_dir, "report.tsv"), "w", encoding="utf-8") as fh:
        keys = [k for k in report if k != "label_distribution"]
        fh.write("\t".join(keys) + "\n")
        fh.write("\t".join(str(report[k]) for k in keys) + "\n")
    return report


# ---------------------------------------------------------------------------
# auxiliary-feature concatenation

def concat_aux(acoustic, speaker_emb):
    """Tile a speaker embedding onto every acoustic frame: T x F -> T x (F+E)."""
    acoustic = np.atleast_2d(np.asarray(acoustic, dtype=np.float64))
    vec = np.asarray(getattr(speaker_emb, "vector", speaker_emb), dtype=np.float64)
    tiled = np.tile(vec, (acoustic.shape[0], 1))
    return np.hstack([acoustic, tiled])


# ---------------------------------------------------------------------------
# synthetic adaptation experiment

def _synth_corpus(rng, n_speakers=8, n_train_utts=12, n_test_utts=4,
                  n_phones=4, channels=40, base_dur=8, segs_per_utt=5,
                  noise=0.7, speaker_variation=True):
    """Speaker-tilted synthetic mel corpus with two severity groups.

    Each utterance is a sequence of phone-class template segments; impaired
    speakers get a stronger spectral tilt, a volume drop and a slower tempo.
    Returns per-split lists of (speaker, mel matrix, per-frame phone labels).
    """
    freq = np.linspace(-1.0, 1.0, channels)
    templates = np.stack([
        np.sin((i + 1) * np.pi * freq) + rng.normal(scale=0.3, size=channels)
        for i in range(n_phones)
    ])
    centered = templates - templates.mean(axis=0)
    speakers = []
    for s in range(n_speakers):
        group = s % 2
        if speaker_variation:
            # shift each speaker inside the template subspace so classes from
            # different speakers genuinely overlap without the aux feature
            mix = rng.normal(scale=0.5 * (1.0 + group), size=n_phones)
            slope = rng.uniform(0.5, 1.5) * (1.0 + group)
            offset = -1.0 * group + rng.normal(scale=0.3)
            tilt = offset + slope * freq + mix @ centered
            tempo = 1.0 + 0.6 * group + rng.uniform(0, 0.2)
        else:
            tilt = np.zeros(channels)
            tempo = 1.0
        speakers.append((f"spk{s}", group, tilt, tempo))

    def make_utt(spk_idx):
        name, group, tilt, tempo = speakers[spk_idx]
        frames, labels = [], []
        for _ in range(segs_per_utt):
            phone = rng.integers(n_phones)
            dur = max(2, int(round(base_dur * tempo)))
            seg = templates[phone][None, :] + tilt[None, :] + rng.normal(scale=noise, size=(dur, channels))
            frames.append(seg)
            labels.extend([phone] * dur)
        return name, group, np.concatenate(frames), np.array(labels)

    train = [make_utt(s) for s in range(n_speakers) for _ in range(n_train_utts)]
    test = [make_utt(s) for s in range(n_speakers) for _ in range(n_test_utts)]
    return train, test


def _softmax_regression(X, y, n_classes, lr=0.5, epochs=200):
    """Full-batch multinomial logistic regression; returns (W, b)."""
    n, d = X.shape
    W = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    for _ in range(epochs):
        logits = X @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        diff = (probs - onehot) / n
        W -= lr * (X.T @ diff)
        b -= lr * diff.sum(axis=0)
    return W, b


def _frame_error(W, b, X, y):
    return float(np.mean((X @ W + b).argmax(axis=1) != y))


def toy_adaptation_experiment(seed=0, n_seeds=5, speaker_variation=True, d_s=2):
    """Frame-classification analogue of auxiliary-feature speaker adaptation.

    For each seed: build a speaker-varied synthetic mel corpus, run the full
    embedding pipeline (SVD spectral features -> severity classifier ->
    bottleneck embeddings -> speaker averaging), then train one frame
    classifier on plain mel frames and one with the speaker embedding
    appended to every frame. Reports held-out frame error rates for both.
    """
    results = []
    for run in range(n_seeds):
        run_seed = seed + run
        rng = np.random.default_rng(run_seed)
        train_utts, test_utts = _synth_corpus(rng, speaker_variation=speaker_variation)
        n_phones = 4

        # embedding pipeline on training utterances
        records = []
        feats_by_utt = []
        speakers = sorted({name for name, _, _, _ in train_utts})
        spk_index = {s: i for i, s in enumerate(speakers)}
        for name, group, mel, _ in train_utts:
            bases = subspace.truncate(subspace.svd_decompose(mel.T), d_s, 1)
            feat = subspace.spectral_feature(bases)
            records.append(embednet.TrainingRecord(feat.vector, group, spk_index[name]))
            feats_by_utt.append((name, feat.vector))
        dim = records[0].feature.size
        net_cfg = embednet.NetworkConfig(
            input_dim=dim, num_primary_classes=2, hidden_dims=(64, 64, 64, 25),
            linear_bottleneck_dim=32, dropout_rate=0.1, learning_rate=1e-2,
            batch_size=32, epochs=10, seed=run_seed)
        net, _ = embednet.train(records, net_cfg)
        per_speaker = {}
        for name, vec in feats_by_utt:
            per_speaker.setdefault(name, []).append(embednet.extract_embedding(net, vec))
        spk_emb = {e.speaker_id: e.vector for e in smoothing.average_smooth(per_speaker)}

        def frame_matrix(utts, with_aux):
            xs, ys = [], []
            for name, _, mel, labels in utts:
                feats = concat_aux(mel, spk_emb[name]) if with_aux else mel
                xs.append(feats)
                ys.append(labels)
            return np.concatenate(xs), np.concatenate(ys)

        errors = {}
        for with_aux in (False, True):
            Xtr, ytr = frame_matrix(train_utts, with_aux)
            Xte, yte = frame_matrix(test_utts, with_aux)
            mu, sd = Xtr.mean(axis=0), Xtr.std(axis=0) + 1e-8
            W, b = _softmax_regression((Xtr - mu) / sd, ytr, n_phones)
            errors["aux" if with_aux else "baseline"] = _frame_error(W, b, (Xte - mu) / sd, yte)
        results.append({"seed": run_seed, **errors})

    mean_base = float(np.mean([r["baseline"] for r in results]))
    mean_aux = float(np.mean([r["aux"] for r in results]))
    return {
        "speaker_variation": speaker_variation,
        "seeds": [r["seed"] for r in results],
        "per_seed": results,
        "mean_baseline_error": mean_base,
        "mean_aux_error": mean_aux,
        "mean_delta": mean_base - mean_aux,
    }


def format_toy_report(report):
    lines = [
        f"speaker_variation: {report['speaker_variation']}",
        "seed\tbaseline_err\taux_err",
    ]
    for r in report["per_seed"]:
        lines.append(f"{r['seed']}\t{r['baseline']:.4f}\t{r['aux']:.4f}")
    lines.append(f"mean_baseline_error: {report['mean_baseline_error']:.4f}")
    lines.append(f"mean_aux_error: {report['mean_aux_error']:.4f}")
    lines.append(f"mean_delta: {report['mean_delta']:.4f}")
    return "\n".join(lines) + "\n"
