import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvws_backhaul.controller import (
    ENCODER_DEGRADED, ENCODER_NATIVE, DisableSr, EnableSr, EncoderConsumer, HysteresisPolicy,
    KpmBuffer, KpmSample, Mode, ModeState, SetEncoder, directives_idempotent, step,
)


def run(trace, policy=HysteresisPolicy(), start=ModeState(Mode.NATIVE_HD, 0.0)):
    state, window, history = start, [], []
    for s in trace:
        window.append(s)
        state, directives = step(state, policy, window, s.t)
        if any(isinstance(d, SetEncoder) for d in directives):
            history.append((s.t, state.mode, directives))
    return state, history


def test_steady_throughput_never_transitions():
    _, hist = run([KpmSample(t, 20.0) for t in range(300)])
    assert hist == []


def test_sustained_drop_degrades():
    trace = [KpmSample(t, 20.0) for t in range(30)] + [KpmSample(t, 1.0) for t in range(30, 60)]
    state, hist = run(trace)
    assert state.mode is Mode.DEGRADED
    (t, mode, directives), = hist
    assert t == 35  # five seconds of low samples spanning 30..35
    assert directives == [SetEncoder(ENCODER_DEGRADED), EnableSr()]


def test_dwell_blocks_early_transition():
    trace = [KpmSample(t, 1.0) for t in range(20)]
    _, hist = run(trace)
    assert hist[0][0] == 10  # sustain satisfied at 5 s but dwell needs 10 s


def test_restore_needs_longer_sustain():
    trace = ([KpmSample(t, 1.0) for t in range(0, 30)]
             + [KpmSample(t, 8.0) for t in range(30, 80)])
    state, hist = run(trace)
    assert [h[1] for h in hist] == [Mode.DEGRADED, Mode.NATIVE_HD]
    assert hist[1][0] == 40
    assert hist[1][2] == [SetEncoder(ENCODER_NATIVE), DisableSr()]


def test_square_wave_respects_dwell():
    policy = HysteresisPolicy()
    trace = [KpmSample(t / 2, 1.0 if int(t / 2) % 2 else 10.0) for t in range(2000)]
    _, hist = run(trace, policy)
    times = [h[0] for h in hist]
    assert all(b - a >= policy.min_dwell for a, b in zip(times, times[1:]))


def test_bler_is_a_degrade_trigger():
    trace = [KpmSample(t, 20.0, bler=0.3) for t in range(20)]
    state, _ = run(trace)
    assert state.mode is Mode.DEGRADED
    assert "BLER" in state.last_transition_cause


def test_gpu_guard_withholds_super_resolution():
    trace = [KpmSample(t, 1.0, gpu_utilization=0.95) for t in range(20)]
    state, hist = run(trace)
    assert state.mode is Mode.DEGRADED and not state.sr_active
    assert hist[0][2] == [SetEncoder(ENCODER_DEGRADED), DisableSr()]
    # guard clears: SR comes on without a mode change
    s2, d2 = step(state, HysteresisPolicy(), trace + [KpmSample(20, 1.0, gpu_utilization=0.4)], 20)
    assert s2.mode is Mode.DEGRADED and s2.sr_active and d2 == [EnableSr()]


def test_thermal_guard_switches_sr_off():
    state = ModeState(Mode.DEGRADED, 0.0)
    s2, d = step(state, HysteresisPolicy(), [KpmSample(1, 1.0, thermal_headroom_c=4.0)], 1)
    assert d == [DisableSr()] and not s2.sr_active


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_hovering_between_thresholds_is_silent(seed):
    rng = np.random.default_rng(seed)
    trace = [KpmSample(float(t), float(rng.uniform(3.0, 6.0))) for t in range(500)]
    _, hist = run(trace)
    assert hist == []


def test_idempotent_directives():
    for state in (ModeState(Mode.NATIVE_HD), ModeState(Mode.DEGRADED)):
        once = EncoderConsumer().apply(directives_idempotent(state))
        twice = EncoderConsumer().apply(directives_idempotent(state) * 2)
        assert once == twice
    assert directives_idempotent(ModeState(Mode.NATIVE_HD)) == [SetEncoder(ENCODER_NATIVE), DisableSr()]
    assert directives_idempotent(ModeState(Mode.DEGRADED)) == [SetEncoder(ENCODER_DEGRADED), EnableSr()]


def test_policy_validation():
    with pytest.raises(ValueError):
        HysteresisPolicy(degrade_threshold_mbps=6, restore_threshold_mbps=3)
    with pytest.raises(ValueError):
        HysteresisPolicy(min_dwell=0)
    with pytest.raises(ValueError):
        KpmSample(0, 5, bler=1.5)


def test_kpm_buffer_drops_out_of_order_and_old():
    buf = KpmBuffer(horizon_s=5)
    assert buf.push(KpmSample(0, 1))
    assert buf.push(KpmSample(3, 1))
    assert not buf.push(KpmSample(2, 1))
    buf.push(KpmSample(9, 1))
    assert [s.t for s in buf.window()] == [9]
