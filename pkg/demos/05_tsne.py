"""Project 25-dim speaker embeddings to 2-D with exact t-SNE and write an
SVG scatter plot plus a TSV sidecar of the coordinates.
"""

import os
import tempfile

import numpy as np

from stembed.viz import emit_plot, tsne_project

rng = np.random.default_rng(4)

# two groups of synthetic speaker embeddings
aged = rng.normal(0.0, 1.0, size=(30, 25))
nonaged = rng.normal(0.0, 1.0, size=(30, 25))
nonaged[:, 0] += 8.0

points = np.concatenate([aged, nonaged])
groups = ["aged"] * 30 + ["nonaged"] * 30
ids = ["spk%02d" % i for i in range(60)]

result = tsne_project(points, perplexity=10.0, seed=0, iters=800,
                      groups=groups, speaker_ids=ids)
print("final KL divergence: %.4f after %d iterations"
      % (result.kl_divergence, result.iterations))

centroid_a = result.coords[:30].mean(axis=0)
centroid_n = result.coords[30:].mean(axis=0)
print("2-D centroid distance: %.2f" % np.linalg.norm(centroid_a - centroid_n))

out = os.path.join(tempfile.mkdtemp(), "tsne.svg")
sidecar = emit_plot(result, out)
print("wrote", out)
print("wrote", sidecar)
