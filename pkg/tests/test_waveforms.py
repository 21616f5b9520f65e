import numpy as np
import pytest
from scipy import signal

from tvws_backhaul.sensing import energy_detect
from tvws_backhaul.spectrum import GroundTruthOccupancy, MHZ, SignalClass, build_plan
from tvws_backhaul.waveforms import (
    AugmentOutOfRange, InvalidConfig, IqBuffer, SynthConfig, augment, mix_scene, synth_channel,
)

FS = 8e6


def occupied_bw_hz(buf, noise_power=1.0, frac=0.99):
    """Independent periodogram oracle: 99% of the power above the known noise floor."""
    f, psd = signal.welch(buf.samples, fs=buf.sample_rate_hz, nperseg=4096,
                          return_onesided=False, scaling="density")
    order = np.argsort(f)
    f, psd = f[order], psd[order]
    excess = np.clip(psd - noise_power / buf.sample_rate_hz, 0, None)
    c = np.cumsum(excess) / excess.sum()
    lo = f[np.searchsorted(c, (1 - frac) / 2)]
    hi = f[np.searchsorted(c, 1 - (1 - frac) / 2)]
    return hi - lo


def test_vacant_noise_power():
    for seed in range(5):
        buf = synth_channel(SynthConfig(SignalClass.VACANT, 20.0, 0.02, seed))
        assert len(buf) >= 100_000
        assert buf.power() == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("cls", [SignalClass.TV_BROADCAST, SignalClass.WIRELESS_MIC,
                                 SignalClass.OTHER_TVWS])
def test_signal_power_matches_snr(cls):
    buf = synth_channel(SynthConfig(cls, 10.0, 0.01, 1))
    # signal and noise are independent, so total power is about 1 + 10
    assert buf.power() == pytest.approx(11.0, rel=0.05)


def test_tv_occupies_the_channel():
    buf = synth_channel(SynthConfig(SignalClass.TV_BROADCAST, 20.0, 0.01, 2))
    assert occupied_bw_hz(buf) >= 0.9 * 6e6


def test_mic_is_narrowband():
    for seed in range(5):
        buf = synth_channel(SynthConfig(SignalClass.WIRELESS_MIC, 20.0, 0.01, seed))
        assert occupied_bw_hz(buf) <= 200e3


def test_bursty_duty_cycle():
    buf = synth_channel(SynthConfig(SignalClass.OTHER_TVWS, 30.0, 0.01, 4))
    env = np.abs(buf.samples) ** 2
    frames = env[: len(env) // 256 * 256].reshape(-1, 256).mean(axis=1)
    duty = np.mean(frames > 10)
    assert 0.2 <= duty <= 0.9


def test_synthesis_is_deterministic():
    cfg = SynthConfig(SignalClass.TV_BROADCAST, 15.0, 0.002, 99)
    a, b = synth_channel(cfg), synth_channel(cfg)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert a.samples.dtype == np.complex64


def test_config_validation():
    with pytest.raises(InvalidConfig):
        SynthConfig(SignalClass.VACANT, duration_s=0)
    with pytest.raises(InvalidConfig):
        synth_channel(SynthConfig(SignalClass.VACANT), 4e6, channel_width_hz=6e6)
    with pytest.raises(ValueError):
        IqBuffer(np.array([1 + 1j, np.nan]), FS)


def test_identity_augmentation():
    buf = synth_channel(SynthConfig(SignalClass.TV_BROADCAST, 15.0, 0.002, 5))
    out = augment(buf)
    assert np.array_equal(out.samples, buf.samples)


def test_frequency_shift_moves_tone():
    n = 8192
    tone = IqBuffer(np.ones(n, dtype=np.complex64), FS)
    shifted = augment(tone, freq_shift_hz=500e3)
    spec = np.abs(np.fft.fftshift(np.fft.fft(shifted.samples)))
    freqs = np.fft.fftshift(np.fft.fftfreq(n, 1 / FS))
    assert abs(freqs[np.argmax(spec)] - 500e3) <= FS / n


def test_time_stretch_length():
    buf = synth_channel(SynthConfig(SignalClass.VACANT, 0.0, 0.002, 6))
    n = len(buf)
    assert len(augment(buf, time_stretch=1.1)) == round(1.1 * n)
    assert len(augment(buf, time_stretch=0.9)) == round(0.9 * n)


def test_augment_bounds():
    buf = synth_channel(SynthConfig(SignalClass.VACANT))
    with pytest.raises(AugmentOutOfRange):
        augment(buf, freq_shift_hz=600e3)
    with pytest.raises(AugmentOutOfRange):
        augment(buf, time_stretch=1.2)


def test_extra_noise_raises_power():
    buf = synth_channel(SynthConfig(SignalClass.VACANT, 0.0, 0.01, 7))
    louder = augment(buf, extra_noise_db=0.0, seed=1)
    assert louder.power() == pytest.approx(2.0, rel=0.05)


def test_mix_scene_all_vacant():
    plan = build_plan(470 * MHZ, 518 * MHZ)
    bufs = mix_scene(GroundTruthOccupancy(), plan, 3.0, seed=1, duration_s=0.01)
    assert sorted(bufs) == list(range(8))
    for buf in bufs.values():
        assert buf.power() == pytest.approx(1.0, rel=0.05)
        assert buf.capture_time == 3.0


def test_mix_scene_single_tv_channel_detected():
    plan = build_plan(470 * MHZ, 518 * MHZ)
    truth = GroundTruthOccupancy.from_config(
        [{"channel": 5, "class": "TvBroadcast", "snr_db": 30, "start_s": 0, "end_s": 10}])
    bufs = mix_scene(truth, plan, 1.0, seed=2, duration_s=0.01)
    busy = [ch for ch, b in bufs.items() if energy_detect(b, 1.0, 0.01)]
    assert busy == [5]


def test_mix_scene_deterministic():
    plan = build_plan(470 * MHZ, 494 * MHZ)
    a = mix_scene(GroundTruthOccupancy(), plan, 4.0, seed=8)
    b = mix_scene(GroundTruthOccupancy(), plan, 4.0, seed=8)
    assert all(a[ch].samples.tobytes() == b[ch].samples.tobytes() for ch in a)
    c = mix_scene(GroundTruthOccupancy(), plan, 5.0, seed=8)
    assert a[0].samples.tobytes() != c[0].samples.tobytes()
