"""Utterance-to-speaker smoothing, both routes.

Averaging keeps the 25-dim embedding space; the quantization route runs a
GMM over all utterance embeddings, maps each utterance to its best
component, and treats each speaker as a bag of component indices that an
LDA topic model reduces to a topic posterior.
"""

import numpy as np

from stembed.smoothing import average_smooth, gmm_lda_smooth

rng = np.random.default_rng(3)

# three synthetic speakers with well separated embedding clouds
per_speaker = {
    "spk_a": [rng.normal(0.0, 0.2, size=25) for _ in range(15)],
    "spk_b": [rng.normal(2.0, 0.2, size=25) for _ in range(15)],
    "spk_c": [rng.normal(-2.0, 0.2, size=25) for _ in range(15)],
}

print("averaging route:")
for e in average_smooth(per_speaker):
    print("  %s: %d utts, mean of first dims %s"
          % (e.speaker_id, e.num_utterances, np.round(e.vector[:3], 3)))

print("\nGMM quantization + LDA route:")
smoothed = gmm_lda_smooth(per_speaker, M=6, K=3, seed=0, lda_sweeps=200)
for e in smoothed:
    print("  %s: topic posterior %s" % (e.speaker_id, np.round(e.vector, 3)))

# well separated speakers should each own a distinct dominant topic
dominant = {e.speaker_id: int(e.vector.argmax()) for e in smoothed}
print("dominant topics:", dominant)
