"""Native-HD / Degraded video mode selection with hysteresis and dwell times.

Directives are mode tags for the encoder and the super-resolution stage; no
media is processed here.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence


class Mode(enum.Enum):
    NATIVE_HD = "NativeHd"
    DEGRADED = "Degraded"


ENCODER_NATIVE = "1080p30"
ENCODER_DEGRADED = "480p15"


@dataclass(frozen=True)
class SetEncoder:
    profile: str


@dataclass(frozen=True)
class EnableSr:
    pass


@dataclass(frozen=True)
class DisableSr:
    pass


@dataclass(frozen=True)
class KpmSample:
    t: float
    ul_throughput_mbps: float
    prb_utilization: float = 0.5
    cqi: int = 10
    bler: float = 0.0
    gpu_utilization: float = 0.3
    thermal_headroom_c: float = 30.0

    def __post_init__(self):
        for name in ("prb_utilization", "bler", "gpu_utilization"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.cqi <= 15:
            raise ValueError("cqi must lie in 0..15")

    @classmethod
    def from_config(cls, doc: Mapping) -> "KpmSample":
        return cls(**{k: (int(v) if k == "cqi" else float(v)) for k, v in doc.items()})


@dataclass(frozen=True)
class ModeState:
    mode: Mode
    entered_at: float = 0.0
    last_transition_cause: str = "initial"
    sr_active: bool | None = None

    def __post_init__(self):
        if self.sr_active is None:
            object.__setattr__(self, "sr_active", self.mode is Mode.DEGRADED)


@dataclass(frozen=True)
class HysteresisPolicy:
    degrade_threshold_mbps: float = 3.0
    restore_threshold_mbps: float = 6.0
    degrade_sustain: float = 5.0
    restore_sustain: float = 10.0
    min_dwell: float = 10.0
    gpu_util_ceiling: float = 0.85
    thermal_floor_c: float = 10.0
    bler_ceiling: float = 0.10

    def __post_init__(self):
        if not self.restore_threshold_mbps > self.degrade_threshold_mbps:
            raise ValueError("restore threshold must exceed degrade threshold")
        if min(self.degrade_sustain, self.restore_sustain, self.min_dwell) <= 0:
            raise ValueError("durations must be positive")

    @classmethod
    def from_config(cls, doc: Mapping | None) -> "HysteresisPolicy":
        return cls(**{k: float(v) for k, v in (doc or {}).items()})


def _sustained(window: Sequence[KpmSample], now: float, span: float, cond) -> bool:
    """``cond`` held for every sample over at least ``span`` seconds ending at ``now``."""
    oldest = None
    for s in reversed(window):
        if s.t > now:
            continue
        if not cond(s):
            break
        oldest = s.t
        if now - oldest >= span:
            return True
    return False


def _sr_guard(policy: HysteresisPolicy, samples: Iterable[KpmSample]) -> bool:
    return all(s.gpu_utilization <= policy.gpu_util_ceiling
               and s.thermal_headroom_c >= policy.thermal_floor_c for s in samples)


def _recent(window, now, span):
    return [s for s in window if now - span <= s.t <= now]


def step(state: ModeState, policy: HysteresisPolicy, window: Sequence[KpmSample],
         now: float) -> tuple[ModeState, list]:
    """Advance the controller by one evaluation.

    Degrade on throughput below the degrade threshold (or BLER above its
    ceiling) sustained for ``degrade_sustain``; restore on throughput above the
    restore threshold sustained for ``restore_sustain``. Either transition
    needs ``min_dwell`` in the current mode. Super-resolution is switched on
    only while GPU utilization and thermal headroom pass their guards over
    the triggering window, and is switched off if they fail later.
    """
    dwell_ok = now - state.entered_at >= policy.min_dwell
    if state.mode is Mode.NATIVE_HD:
        if not dwell_ok:
            return state, []
        low = _sustained(window, now, policy.degrade_sustain,
                         lambda s: s.ul_throughput_mbps < policy.degrade_threshold_mbps)
        lossy = _sustained(window, now, policy.degrade_sustain,
                           lambda s: s.bler > policy.bler_ceiling)
        if not (low or lossy):
            return state, []
        sr = _sr_guard(policy, _recent(window, now, policy.degrade_sustain))
        cause = "uplink throughput below degrade threshold" if low else "BLER above ceiling"
        new = ModeState(Mode.DEGRADED, now, cause, sr)
        return new, [SetEncoder(ENCODER_DEGRADED), EnableSr() if sr else DisableSr()]

    if dwell_ok and _sustained(window, now, policy.restore_sustain,
                               lambda s: s.ul_throughput_mbps > policy.restore_threshold_mbps):
        new = ModeState(Mode.NATIVE_HD, now, "uplink throughput above restore threshold", False)
        return new, [SetEncoder(ENCODER_NATIVE), DisableSr()]

    latest = [s for s in window if s.t <= now][-1:]
    if not latest:
        return state, []
    guard = _sr_guard(policy, latest)
    if state.sr_active and not guard:
        return replace(state, sr_active=False), [DisableSr()]
    if not state.sr_active and guard:
        return replace(state, sr_active=True), [EnableSr()]
    return state, []


def directives_idempotent(state: ModeState) -> list:
    """Full directive set for the current state, safe to re-send to late joiners."""
    if state.mode is Mode.NATIVE_HD:
        return [SetEncoder(ENCODER_NATIVE), DisableSr()]
    return [SetEncoder(ENCODER_DEGRADED), EnableSr() if state.sr_active else DisableSr()]


@dataclass
class EncoderConsumer:
    """Stand-in for the UAV companion computer applying directives."""
    profile: str = ENCODER_NATIVE
    sr_enabled: bool = False

    def apply(self, directives: Iterable) -> "EncoderConsumer":
        for d in directives:
            if isinstance(d, SetEncoder):
                self.profile = d.profile
            elif isinstance(d, EnableSr):
                self.sr_enabled = True
            elif isinstance(d, DisableSr):
                self.sr_enabled = False
        return self


class KpmBuffer:
    """Bounded, time-ordered KPM window; out-of-order samples are dropped."""

    def __init__(self, horizon_s: float = 30.0, maxlen: int = 4096):
        self.horizon_s = horizon_s
        self._samples: deque[KpmSample] = deque(maxlen=maxlen)

    def push(self, sample: KpmSample) -> bool:
        if self._samples and sample.t < self._samples[-1].t:
            return False
        self._samples.append(sample)
        while self._samples and sample.t - self._samples[0].t > self.horizon_s:
            self._samples.popleft()
        return True

    def window(self) -> list[KpmSample]:
        return list(self._samples)
