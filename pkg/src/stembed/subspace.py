"""SVD subspace decomposition of mel spectrograms and fixed-length basis features.

An utterance spectrogram S (C x T) factors as S = U diag(s) Vt. Columns of U
span the spectral (time-invariant) subspace; rows of Vt, scaled by their
singular values, span the temporal (time-variant) subspace. Truncating both to
the leading components gives compact per-utterance descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from stembed.frontend import MelSpectrogram

TEMPORAL_WINDOW = 25


@dataclass
class SubspaceBases:
    spectral: np.ndarray          # C x d_s, unit-norm columns
    temporal: np.ndarray          # d_t x T, singular values absorbed
    singular_values: np.ndarray   # descending, length min(C, T)
    utterance_id: str = ""
    speaker_id: str = ""

    @property
    def d_s(self) -> int:
        return self.spectral.shape[1]

    @property
    def d_t(self) -> int:
        return self.temporal.shape[0]


@dataclass
class BasisFeature:
    vector: np.ndarray
    kind: str  # 'spectral' | 'temporal' | 'spectro-temporal'
    utterance_id: str = ""
    speaker_id: str = ""

    @property
    def dim(self) -> int:
        return self.vector.size


def svd_decompose(spec: MelSpectrogram | np.ndarray, utterance_id="", speaker_id="") -> SubspaceBases:
    """Full SVD of a spectrogram with a fixed sign convention.

    Each spectral basis vector is flipped so its largest-magnitude entry is
    positive; the paired temporal row is flipped to compensate, keeping the
    reconstruction exact. Singular values are absorbed into the temporal rows.
    """
    if isinstance(spec, MelSpectrogram):
        matrix = spec.values
        utterance_id = utterance_id or spec.utterance_id
        speaker_id = speaker_id or spec.speaker_id
    else:
        matrix = np.asarray(spec, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("spectrogram contains non-finite entries")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    # sign convention: largest-|.| entry of each spectral vector positive
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    vt = vt * signs[:, None]
    return SubspaceBases(u, s[:, None] * vt, s, utterance_id, speaker_id)


def truncate(bases: SubspaceBases, d_s: int, d_t: int) -> SubspaceBases:
    """Keep the top d_s spectral columns and top d_t temporal rows."""
    k = bases.singular_values.size
    if not (1 <= d_s <= k) or not (1 <= d_t <= k):
        raise ValueError(f"d_s={d_s}, d_t={d_t} out of range 1..{k}")
    return replace(bases,
                   spectral=bases.spectral[:, :d_s].copy(),
                   temporal=bases.temporal[:d_t, :].copy())


def spectral_feature(bases: SubspaceBases) -> BasisFeature:
    """Flatten the C x d_s spectral matrix basis-by-basis into a C*d_s vector."""
    vec = bases.spectral.flatten(order="F")
    return BasisFeature(vec, "spectral", bases.utterance_id, bases.speaker_id)


def _windows(row, window):
    if row.size < window:
        # left-pad with the first value so exactly one window exists
        row = np.concatenate([np.full(window - row.size, row[0]), row])
    n = row.size - window + 1
    idx = np.arange(window)[None, :] + np.arange(n)[:, None]
    return row[idx]


def temporal_feature(bases: SubspaceBases, window: int = TEMPORAL_WINDOW) -> BasisFeature:
    """Windowed mean/std statistics of each temporal row, 2*window values per basis.

    A length-`window` sliding window (hop 1) is applied to each temporal row;
    the elementwise mean and population standard deviation across windows are
    concatenated, bases in singular-value order. Total length 2*window*d_t.
    """
    parts = []
    for row in bases.temporal:
        w = _windows(row, window)
        parts.append(w.mean(axis=0))
        parts.append(w.std(axis=0))
    return BasisFeature(np.concatenate(parts), "temporal", bases.utterance_id, bases.speaker_id)


def combined_feature(sf: BasisFeature, tf: BasisFeature) -> BasisFeature:
    """Concatenate a spectral and a temporal feature of the same utterance."""
    if sf.utterance_id != tf.utterance_id:
        raise ValueError(f"utterance mismatch: {sf.utterance_id!r} vs {tf.utterance_id!r}")
    if sf.kind != "spectral" or tf.kind != "temporal":
        raise ValueError("expected a (spectral, temporal) feature pair")
    return BasisFeature(np.concatenate([sf.vector, tf.vector]), "spectro-temporal",
                        sf.utterance_id, sf.speaker_id)
