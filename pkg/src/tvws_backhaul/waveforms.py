"""Synthetic complex-baseband captures for each signal class, plus augmentations."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .spectrum import (
    ChannelPlan, GroundTruthOccupancy, SignalClass, channel_center_hz,
)

DEFAULT_SAMPLE_RATE_HZ = 8_000_000.0
DEFAULT_CHANNEL_WIDTH_HZ = 6_000_000.0

MAX_FREQ_SHIFT_HZ = 500_000.0
STRETCH_RANGE = (0.9, 1.1)

# Waveform archetypes. These are stand-ins, not standards-exact signals.
TV_FFT_SIZE = 1024
TV_OCCUPANCY = 0.95
MIC_MAX_BANDWIDTH_HZ = 200_000.0
BURST_DUTY_RANGE = (0.3, 0.8)


class InvalidConfig(ValueError):
    pass


class AugmentOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class IqBuffer:
    samples: np.ndarray
    sample_rate_hz: float
    center_freq_hz: float = 0.0
    capture_time: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("IQ buffer must be a non-empty 1-D array")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("IQ samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class SynthConfig:
    signal_class: SignalClass
    snr_db: float = 20.0
    duration_s: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise InvalidConfig("duration must be positive")
        if not np.isfinite(self.snr_db):
            raise InvalidConfig("snr_db must be finite")


def complex_noise(rng: np.random.Generator, n: int, power: float = 1.0) -> np.ndarray:
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def _ofdm(rng, n, fs, width_hz):
    """Random-QPSK multicarrier filling ``TV_OCCUPANCY`` of the channel."""
    spacing = fs / TV_FFT_SIZE
    half = int(TV_OCCUPANCY * width_hz / spacing / 2)
    active = np.r_[1:half + 1, TV_FFT_SIZE - half:TV_FFT_SIZE]
    n_sym = -(-n // TV_FFT_SIZE)
    grid = np.zeros((n_sym, TV_FFT_SIZE), dtype=complex)
    qpsk = (rng.integers(0, 2, (n_sym, active.size)) * 2 - 1
            + 1j * (rng.integers(0, 2, (n_sym, active.size)) * 2 - 1))
    grid[:, active] = qpsk
    return np.fft.ifft(grid, axis=1).ravel()[:n]


def _fm_mic(rng, n, fs, width_hz):
    """Narrowband FM carrier at a random offset inside the channel."""
    audio_hz = rng.uniform(1e3, 5e3)
    deviation_hz = rng.uniform(20e3, 60e3)
    # Carson's rule keeps the occupied bandwidth under the mic ceiling.
    assert 2 * (deviation_hz + audio_hz) <= MIC_MAX_BANDWIDTH_HZ
    edge = width_hz / 2 - MIC_MAX_BANDWIDTH_HZ
    offset_hz = rng.uniform(-edge, edge)
    t = np.arange(n) / fs
    phase = (2 * np.pi * offset_hz * t
             + (deviation_hz / audio_hz) * np.sin(2 * np.pi * audio_hz * t + rng.uniform(0, 2 * np.pi)))
    return np.exp(1j * phase)


def _rrc_taps(beta, sps, span):
    t = np.arange(-span * sps, span * sps + 1) / sps
    taps = np.empty_like(t)
    for i, ti in enumerate(t):
        if ti == 0:
            taps[i] = 1 - beta + 4 * beta / np.pi
        elif abs(abs(4 * beta * ti) - 1) < 1e-12:
            taps[i] = beta / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                                           + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta)))
        else:
            taps[i] = ((np.sin(np.pi * ti * (1 - beta)) + 4 * beta * ti * np.cos(np.pi * ti * (1 + beta)))
                       / (np.pi * ti * (1 - (4 * beta * ti) ** 2)))
    return taps / np.sqrt(np.sum(taps ** 2))


def _bursty_qam(rng, n, fs, width_hz):
    """Gated single-carrier 16-QAM with a duty cycle in ``BURST_DUTY_RANGE``."""
    sps = int(rng.choice([4, 6, 8]))
    n_sym = -(-n // sps) + 16
    levels = np.array([-3, -1, 1, 3])
    symbols = rng.choice(levels, n_sym) + 1j * rng.choice(levels, n_sym)
    upsampled = np.zeros(n_sym * sps, dtype=complex)
    upsampled[::sps] = symbols
    shaped = np.convolve(upsampled, _rrc_taps(0.35, sps, 6), mode="same")
    offset_hz = rng.uniform(-0.2, 0.2) * width_hz
    shaped = shaped[:n] * np.exp(2j * np.pi * offset_hz * np.arange(n) / fs)

    duty = rng.uniform(*BURST_DUTY_RANGE)
    # At least four bursts per capture so the duty cycle is observable.
    period = max(8, min(int(fs * 1e-3), n // 4))
    on = max(1, int(round(duty * period)))
    gate = (np.arange(n) + rng.integers(0, period)) % period < on
    return shaped * gate


_GENERATORS = {
    SignalClass.TV_BROADCAST: _ofdm,
    SignalClass.WIRELESS_MIC: _fm_mic,
    SignalClass.OTHER_TVWS: _bursty_qam,
}


def synth_channel(config: SynthConfig, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ, *,
                  channel_width_hz: float = DEFAULT_CHANNEL_WIDTH_HZ,
                  center_freq_hz: float = 0.0, capture_time: float = 0.0) -> IqBuffer:
    """Unit-power noise plus, for occupied classes, a signal scaled to ``snr_db``.

    Samples are single-precision complex, matching the on-disk container.

    Signal power is measured over the whole capture (bursts included) and set
    exactly, so the clean signal-to-noise ratio equals the request.
    """
    if sample_rate_hz <= 0:
        raise InvalidConfig("sample rate must be positive")
    if channel_width_hz > sample_rate_hz:
        raise InvalidConfig("channel is wider than the sample rate")
    n = int(round(config.duration_s * sample_rate_hz))
    if n < 1:
        raise InvalidConfig("capture holds no samples")
    rng = np.random.default_rng(config.seed)
    noise = complex_noise(rng, n)
    samples = noise
    gen = _GENERATORS.get(config.signal_class)
    if gen is not None:
        sig = gen(rng, n, sample_rate_hz, channel_width_hz)
        p = np.mean(np.abs(sig) ** 2)
        if p > 0:
            sig = sig * np.sqrt(10 ** (config.snr_db / 10) / p)
        samples = noise + sig
    return IqBuffer(samples.astype(np.complex64), float(sample_rate_hz), float(center_freq_hz),
                    float(capture_time))


def augment(buf: IqBuffer, freq_shift_hz: float = 0.0, time_stretch: float = 1.0,
            extra_noise_db: float = float("-inf"), seed: int = 0) -> IqBuffer:
    """Frequency shift, time stretch and additive noise.

    ``extra_noise_db`` is relative to unit noise power; ``-inf`` adds nothing.
    Output length is ``round(len(buf) * time_stretch)``.
    """
    if abs(freq_shift_hz) > MAX_FREQ_SHIFT_HZ:
        raise AugmentOutOfRange(f"frequency shift {freq_shift_hz} Hz exceeds +/-500 kHz")
    if not STRETCH_RANGE[0] <= time_stretch <= STRETCH_RANGE[1]:
        raise AugmentOutOfRange(f"time stretch {time_stretch} outside [0.9, 1.1]")
    x = np.asarray(buf.samples)
    n = len(x)
    if freq_shift_hz != 0.0:
        x = x * np.exp(2j * np.pi * freq_shift_hz * np.arange(n) / buf.sample_rate_hz)
    if time_stretch != 1.0:
        x = signal.resample(x, int(round(n * time_stretch)))
    if extra_noise_db != float("-inf"):
        rng = np.random.default_rng(seed)
        x = x + complex_noise(rng, len(x), 10 ** (extra_noise_db / 10))
    if x is buf.samples:
        return buf
    return replace(buf, samples=x.astype(np.asarray(buf.samples).dtype, copy=False))


def random_augment(buf: IqBuffer, rng: np.random.Generator) -> IqBuffer:
    return augment(
        buf,
        freq_shift_hz=float(rng.uniform(-MAX_FREQ_SHIFT_HZ, MAX_FREQ_SHIFT_HZ)),
        time_stretch=float(rng.uniform(*STRETCH_RANGE)),
        extra_noise_db=float(rng.uniform(-20.0, -10.0)),
        seed=int(rng.integers(2 ** 32)),
    )


def scene_seed(seed: int, ch: int, t: float) -> int:
    """Per-(channel, time) seed so each buffer is independent and reproducible."""
    return int(np.random.SeedSequence([seed, ch, int(round(t * 1000))]).generate_state(1)[0])


def mix_scene(truth: GroundTruthOccupancy, plan: ChannelPlan, t: float,
              per_channel_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ, seed: int = 0,
              duration_s: float = 0.002, channels=None) -> dict[int, IqBuffer]:
    """One baseband buffer per channel, consistent with the scripted occupancy at ``t``."""
    out = {}
    for ch in (plan.channels() if channels is None else channels):
        act = truth.active(ch, t)
        cls = SignalClass.VACANT if act is None else act.signal_class
        snr = 0.0 if act is None else act.snr_db
        cfg = SynthConfig(cls, snr, duration_s, scene_seed(seed, ch, t))
        out[ch] = synth_channel(cfg, per_channel_rate_hz,
                                channel_width_hz=plan.channel_width_hz,
                                center_freq_hz=channel_center_hz(plan, ch),
                                capture_time=t)
    return out
