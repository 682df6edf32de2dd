"""Audio ingest, energy-based silence trimming and log-mel filter-bank features.

All operations are pure functions of their inputs; per-utterance parallelism
is the intended scaling axis.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.io import wavfile


class AudioFormatError(Exception):
    """Raised for malformed or unsupported audio files."""


class EmptyAudioError(Exception):
    """Raised when a WAV file carries no samples."""


class TooShortError(Exception):
    """Raised when a clip is shorter than one analysis frame."""


class ManifestError(Exception):
    """Raised when a corpus manifest fails validation; message lists all bad lines."""


@dataclass
class AudioClip:
    samples: np.ndarray  # float64 in [-1, 1], mono
    sample_rate: int
    utterance_id: str = ""
    speaker_id: str = ""
    all_silent: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise EmptyAudioError("clip has no samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class MelSpectrogram:
    values: np.ndarray  # C x T log mel energies (natural log)
    frame_shift_ms: float
    frame_length_ms: float
    utterance_id: str = ""
    speaker_id: str = ""

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


@dataclass
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    audio_path: str
    severity_label: str | None = None
    age_label: str | None = None


@dataclass
class CorpusManifest:
    entries: list = field(default_factory=list)

    @property
    def speakers(self):
        seen = {}
        for e in self.entries:
            seen.setdefault(e.speaker_id, None)
        return list(seen)

    def labels(self, kind):
        """Sorted label vocabulary for 'severity' or 'age'."""
        attr = "severity_label" if kind == "severity" else "age_label"
        return sorted({getattr(e, attr) for e in self.entries if getattr(e, attr) is not None})


@dataclass
class FrontendConfig:
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    channels: int = 40
    preemphasis: float = 0.97
    f_lo: float = 20.0
    f_hi: float = 0.0  # 0 means Nyquist
    floor: float = 1e-10
    vad_margin_db: float = 9.0
    vad_percentile: float = 10.0


# ---------------------------------------------------------------------------
# audio loading

_INT_SCALE = {np.dtype(np.int16): 2.0**15, np.dtype(np.int32): 2.0**31}


def load_audio(path, utterance_id="", speaker_id="") -> AudioClip:
    """Load a linear-PCM WAV file, average channels to mono, normalize to [-1, 1]."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, EOFError, io.UnsupportedOperation) as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise EmptyAudioError(f"{path}: zero-length payload")
    samples = np.asarray(data, dtype=np.float64)
    if data.dtype == np.uint8:
        samples = (samples - 128.0) / 128.0
    elif data.dtype in _INT_SCALE:
        samples = samples / _INT_SCALE[data.dtype]
    elif data.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise AudioFormatError(f"{path}: unsupported sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioClip(samples, int(rate), utterance_id, speaker_id)


# ---------------------------------------------------------------------------
# silence trimming

def _frame_signal(x, frame_len, hop):
    n_frames = (len(x) - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def trim_silence(clip: AudioClip, cfg: FrontendConfig | None = None) -> AudioClip:
    """Strip leading/trailing frames below an energy threshold.

    The threshold is the clip's noise floor (a low percentile of frame RMS, in
    dB) plus a margin. If every frame falls below the threshold, the original
    clip is returned with ``all_silent`` set.
    """
    cfg = cfg or FrontendConfig()
    frame_len = int(round(cfg.frame_length_ms * clip.sample_rate / 1000.0))
    hop = int(round(cfg.frame_shift_ms * clip.sample_rate / 1000.0))
    if len(clip.samples) < frame_len:
        return replace(clip)
    frames = _frame_signal(clip.samples, frame_len, hop)
    rms_db = 20.0 * np.log10(np.sqrt(np.mean(frames**2, axis=1)) + 1e-300)
    noise_floor = np.percentile(rms_db, cfg.vad_percentile)
    threshold = noise_floor + cfg.vad_margin_db
    active = np.flatnonzero(rms_db >= threshold)
    if active.size == 0:
        return replace(clip, all_silent=True)
    start = active[0] * hop
    stop = min(active[-1] * hop + frame_len, len(clip.samples))
    return replace(clip, samples=clip.samples[start:stop].copy(), all_silent=False)


# ---------------------------------------------------------------------------
# mel filter bank

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(channels, n_fft, sample_rate, f_lo, f_hi):
    """Triangular mel filter weights, (channels, n_fft//2 + 1)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), channels + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    weights = np.zeros((channels, bin_freqs.size))
    for c in range(channels):
        lo, mid, hi = edges[c], edges[c + 1], edges[c + 2]
        rise = (bin_freqs - lo) / max(mid - lo, 1e-12)
        fall = (hi - bin_freqs) / max(hi - mid, 1e-12)
        weights[c] = np.maximum(0.0, np.minimum(rise, fall))
    return weights


def _next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


def mel_spectrogram(clip: AudioClip, cfg: FrontendConfig | None = None) -> MelSpectrogram:
    """Compute a C x T log-mel filter-bank spectrogram (natural log of floored power)."""
    cfg = cfg or FrontendConfig()
    frame_len = int(round(cfg.frame_length_ms * clip.sample_rate / 1000.0))
    hop = int(round(cfg.frame_shift_ms * clip.sample_rate / 1000.0))
    if len(clip.samples) < frame_len:
        raise TooShortError(
            f"clip of {len(clip.samples)} samples shorter than one {frame_len}-sample frame"
        )
    x = clip.samples
    emphasized = np.empty_like(x)
    emphasized[0] = x[0] * (1.0 - cfg.preemphasis)
    emphasized[1:] = x[1:] - cfg.preemphasis * x[:-1]
    frames = _frame_signal(emphasized, frame_len, hop) * np.hamming(frame_len)
    n_fft = _next_pow2(frame_len)
    power = np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2
    f_hi = cfg.f_hi if cfg.f_hi > 0 else clip.sample_rate / 2.0
    fbank = mel_filterbank(cfg.channels, n_fft, clip.sample_rate, cfg.f_lo, f_hi)
    mel = power @ fbank.T
    values = np.log(np.maximum(mel, cfg.floor)).T
    return MelSpectrogram(values, cfg.frame_shift_ms, cfg.frame_length_ms,
                          clip.utterance_id, clip.speaker_id)


# ---------------------------------------------------------------------------
# corpus manifest

def parse_manifest(path) -> CorpusManifest:
    """Parse a tab-separated manifest file.

    Columns: utterance_id, speaker_id, audio_path, severity_label, age_label.
    '-' marks an absent label; '#' starts a comment line. All bad lines are
    reported at once.
    """
    entries = []
    problems = []
    seen_utts = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                problems.append(f"line {lineno}: expected 5 tab-separated fields, got {len(parts)}")
                continue
            utt, spk, audio, sev, age = (p.strip() for p in parts)
            if not utt or not spk or not audio:
                problems.append(f"line {lineno}: empty utterance_id, speaker_id or audio_path")
                continue
            if utt in seen_utts:
                problems.append(f"line {lineno}: duplicate utterance_id {utt!r}")
                continue
            if age not in ("aged", "nonaged", "-"):
                problems.append(f"line {lineno}: age_label must be aged/nonaged/-, got {age!r}")
                continue
            seen_utts.add(utt)
            entries.append(ManifestEntry(utt, spk, audio,
                                         None if sev == "-" else sev,
                                         None if age == "-" else age))
    if problems:
        raise ManifestError(f"{path}: " + "; ".join(problems))
    if not entries:
        raise ManifestError(f"{path}: no entries")
    return CorpusManifest(entries)
