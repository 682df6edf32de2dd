"""End-to-end run of the extraction pipeline on a small generated corpus.

Builds 8 two-utterance speakers of synthetic WAV audio, writes a manifest
and a config file, then drives the same code path as `stembed pipeline`:
filter banks, SVD features, classifier training, embedding extraction and
speaker averaging, with every stage landing in a text archive.
"""

import os
import tempfile

import numpy as np
from scipy.io import wavfile

from stembed.pipeline import PipelineConfig, run_extract

rate = 16000
root = tempfile.mkdtemp()
wav_dir = os.path.join(root, "wav")
os.makedirs(wav_dir)
rng = np.random.default_rng(5)

lines = []
for s in range(8):
    severity = "low" if s < 4 else "high"
    age = "nonaged" if s % 2 == 0 else "aged"
    f0 = 200.0 + 40.0 * s + (300.0 if severity == "high" else 0.0)
    for u in range(2):
        t = np.arange(int(0.6 * rate)) / rate
        tone = 0.4 * np.sin(2 * np.pi * f0 * t) + 0.01 * rng.normal(size=t.size)
        path = os.path.join(wav_dir, "s%02d_u%d.wav" % (s, u))
        wavfile.write(path, rate, (tone * 32767).astype(np.int16))
        lines.append("s%02d_u%d\tspk%02d\t%s\t%s\t%s" % (s, u, s, path, severity, age))

manifest = os.path.join(root, "manifest.tsv")
open(manifest, "w").write("\n".join(lines) + "\n")

cfg_path = os.path.join(root, "pipeline.cfg")
open(cfg_path, "w").write(
    "manifest=%s\nd_s=2\nd_t=5\nfeature_kind=sbe\nhidden_dim=32\n"
    "linear_bottleneck_dim=16\nepochs=3\nbatch_size=8\nseed=7\n" % manifest)

cfg = PipelineConfig.from_file(cfg_path)
out = os.path.join(root, "out")
report = run_extract(cfg, out)

print("pipeline outputs in", out)
for name in sorted(os.listdir(out)):
    print("  %-16s %6d bytes" % (name, os.path.getsize(os.path.join(out, name))))
print("\nfeature kind %s, dim %d; %d utterances from %d speakers"
      % (report["feature_kind"], report["feature_dim"],
         report["utterances"], report["speakers"]))
print("embedding dim:", report["embedding_dim"])
