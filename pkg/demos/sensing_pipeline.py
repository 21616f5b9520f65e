"""
Spectrum sensing, end to end
============================

Synthesize one capture per class, look at the features the classifier sees,
train the reference classifier and score it on held-out data.
"""

import numpy as np

from tvws_backhaul import sensing
from tvws_backhaul.spectrum import CLASS_ORDER
from tvws_backhaul.waveforms import SynthConfig, synth_channel

# One 2 ms capture per class at 15 dB, unit noise power, 8 MS/s.
print("class          " + "  ".join(f"{n[:12]:>12}" for n in sensing.FeatureVector.names()))
for cls in CLASS_ORDER:
    buf = synth_channel(SynthConfig(cls, snr_db=15.0, seed=1))
    f = sensing.features_of(buf)
    print(f"{cls.value:<14} " + "  ".join(f"{x:12.4g}" for x in f.as_array()))

# Spectrogram geometry: 1024-point frames at 50% overlap.
sg = sensing.spectrogram(synth_channel(SynthConfig(CLASS_ORDER[0], 15.0, seed=1)))
print(f"\nspectrogram: {sg.frames} frames x {sg.fft_size} bins")

# Train on 500 examples per class (takes a few seconds), test on fresh ones.
model = sensing.default_model(seed=0)
held_out = sensing.make_dataset(50, 15.0, seed=99)
print(f"held-out accuracy: {sensing.accuracy(model, held_out):.3f}")

# Confusion matrix, rows are truth.
counts = np.zeros((4, 4), dtype=int)
for feat, label in held_out:
    cls, _ = sensing.classify(model, feat)
    counts[CLASS_ORDER.index(label), CLASS_ORDER.index(cls)] += 1
print(counts)

# A verdict is a transmission candidate only if Vacant at confidence >= 0.85.
for cls in CLASS_ORDER:
    v = sensing.sense_channel(synth_channel(SynthConfig(cls, 15.0, seed=7)), model)
    print(f"{cls.value:<12} -> {v.signal_class.value:<12} conf={v.confidence:.3f} "
          f"candidate={sensing.is_candidate(v)} ({v.decision_latency * 1e3:.1f} ms)")

# The energy detector baseline at p_fa = 1%: noise alone vs a 0 dB signal.
rng = np.random.default_rng(0)
noise = (rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)) / np.sqrt(2)
print("\nenergy detector, noise only:", sensing.energy_detect(noise, 1.0, 0.01))
print("energy detector, 0 dB signal:", sensing.energy_detect(noise * np.sqrt(2), 1.0, 0.01))
