import numpy as np
import pytest
from scipy.io import wavfile


@pytest.fixture(scope="session")
def wav_corpus(tmp_path_factory):
    """Synthetic 8-speaker WAV corpus with manifest and pipeline config."""
    root = tmp_path_factory.mktemp("corpus")
    audio = root / "audio"
    audio.mkdir()
    rng = np.random.default_rng(42)
    sr = 16000
    rows = []
    for s in range(8):
        speaker = f"spk{s}"
        severity = "low" if s % 2 == 0 else "high"
        age = "nonaged" if s % 2 == 0 else "aged"
        base = 250 + 90 * s
        for u in range(2):
            t = np.arange(int(sr * 0.6)) / sr
            sig = 0.4 * np.sin(2 * np.pi * (base + 40 * u) * t)
            sig += 0.01 * rng.normal(size=t.size)
            sig = np.concatenate([np.zeros(2000), sig, np.zeros(2000)])
            utt = f"{speaker}_u{u}"
            path = audio / f"{utt}.wav"
            wavfile.write(path, sr, (sig * 32767).astype(np.int16))
            rows.append(f"{utt}\t{speaker}\t{path}\t{severity}\t{age}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(rows) + "\n")
    config = root / "pipeline.cfg"
    config.write_text(
        f"manifest={manifest}\n"
        "d_s=2\nd_t=5\nfeature_kind=sbe\n"
        "hidden_dim=32\nlinear_bottleneck_dim=16\n"
        "epochs=3\nbatch_size=8\nseed=7\n"
        "tsne_perplexity=1.5\ntsne_iters=250\n"
    )
    return {"root": root, "manifest": manifest, "config": config}
