"""SVD subspace decomposition of a spectrogram and the fixed-length features.

Shows the rank-d reconstruction error shrinking as d grows, then builds the
spectral (80-dim), temporal (250-dim) and combined (330-dim) feature vectors.
"""

import numpy as np

from stembed.subspace import (
    combined_feature,
    spectral_feature,
    svd_decompose,
    temporal_feature,
    truncate,
)

rng = np.random.default_rng(1)

# low-rank structure plus noise, shaped like a 40-channel spectrogram
C, T, rank = 40, 120, 3
spec = rng.normal(size=(C, rank)) @ rng.normal(size=(rank, T))
spec += 0.05 * rng.normal(size=(C, T))

bases = svd_decompose(spec, utterance_id="demo")
print("top singular values:", np.round(bases.singular_values[:6], 3))

print("\nrank-d reconstruction error (Frobenius, relative):")
for d in (1, 2, 3, 5, 10):
    b = truncate(bases, d, d)
    err = np.linalg.norm(spec - b.spectral @ b.temporal) / np.linalg.norm(spec)
    print("  d=%2d  %.4f" % (d, err))

b = truncate(bases, 2, 5)
sf = spectral_feature(b)
tf = temporal_feature(b)
cf = combined_feature(sf, tf)
print("\nspectral feature: dim", sf.dim)   # 40 channels x 2 bases
print("temporal feature: dim", tf.dim)     # 25-frame window mean+std x 5 bases
print("combined feature: dim", cf.dim)
