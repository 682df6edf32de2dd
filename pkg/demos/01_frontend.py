"""Front end walk-through: WAV in, trimmed log-mel spectrogram out.

Synthesizes a short tone with silent padding, writes it as a WAV file,
then runs silence trimming and filter-bank extraction on it.
"""

import os
import tempfile

import numpy as np
from scipy.io import wavfile

from stembed.frontend import FrontendConfig, load_audio, mel_spectrogram, trim_silence

rate = 16000
rng = np.random.default_rng(0)

# 0.2 s near-silence, 0.6 s of a 440 Hz tone, 0.2 s near-silence
t = np.arange(int(0.6 * rate)) / rate
tone = 0.5 * np.sin(2 * np.pi * 440.0 * t)
pad = 0.001 * rng.normal(size=int(0.2 * rate))
signal = np.concatenate([pad, tone, pad])

path = os.path.join(tempfile.mkdtemp(), "tone.wav")
wavfile.write(path, rate, (signal * 32767).astype(np.int16))
print("wrote", path)

clip = load_audio(path, "demo_utt", "demo_spk")
print("loaded: %d samples @ %d Hz (%.2f s)"
      % (clip.samples.size, clip.sample_rate, clip.samples.size / rate))

cfg = FrontendConfig()
trimmed = trim_silence(clip, cfg)
print("after trimming: %d samples (%.2f s removed)"
      % (trimmed.samples.size,
         (clip.samples.size - trimmed.samples.size) / rate))

spec = mel_spectrogram(trimmed, cfg)
print("spectrogram: %d channels x %d frames" % spec.values.shape)
print("log-energy range: [%.2f, %.2f]" % (spec.values.min(), spec.values.max()))

# the tone concentrates energy in a narrow band of mel channels
mean_per_channel = spec.values.mean(axis=1)
print("hottest mel channel:", int(mean_per_channel.argmax()))
