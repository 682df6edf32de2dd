"""Spectro-temporal subspace embedding features for speaker adaptation.

Pipeline: WAV audio -> log-mel filter-bank spectrograms -> SVD subspace
bases -> bottleneck classifier embeddings -> speaker-level smoothing ->
auxiliary features for acoustic-model adaptation.
"""

from stembed.frontend import AudioClip, MelSpectrogram, load_audio, mel_spectrogram, trim_silence
from stembed.subspace import (
    SubspaceBases,
    BasisFeature,
    svd_decompose,
    truncate,
    spectral_feature,
    temporal_feature,
    combined_feature,
)

__version__ = "0.1.0"
