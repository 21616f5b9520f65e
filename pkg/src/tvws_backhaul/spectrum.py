"""TVWS band layout, channel plans and scripted ground-truth occupancy."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping

MHZ = 1_000_000

ALLOWED_WIDTHS_HZ = (6 * MHZ, 7 * MHZ, 8 * MHZ)

DEFAULT_BAND_START_HZ = 470 * MHZ
DEFAULT_BAND_END_HZ = 698 * MHZ
DEFAULT_CHANNEL_WIDTH_HZ = 6 * MHZ

# Channels are addressed by their 0-based index within a plan.
ChannelId = int


class PlanError(ValueError):
    pass


class InvalidWidth(PlanError):
    pass


class EmptyBand(PlanError):
    pass


class ChannelOutOfRange(IndexError):
    pass


class SignalClass(enum.Enum):
    TV_BROADCAST = "TvBroadcast"
    WIRELESS_MIC = "WirelessMic"
    OTHER_TVWS = "OtherTvws"
    VACANT = "Vacant"

    @property
    def occupied(self) -> bool:
        """True under the incumbent-present hypothesis (every class but Vacant)."""
        return self is not SignalClass.VACANT

    @classmethod
    def parse(cls, value: "str | SignalClass") -> "SignalClass":
        if isinstance(value, SignalClass):
            return value
        for member in cls:
            if value in (member.value, member.name):
                return member
        raise ValueError(f"unknown signal class {value!r}")


# Stable ordering used by classifiers, file formats and reports.
CLASS_ORDER = (
    SignalClass.TV_BROADCAST,
    SignalClass.WIRELESS_MIC,
    SignalClass.OTHER_TVWS,
    SignalClass.VACANT,
)


@dataclass(frozen=True)
class ChannelPlan:
    band_start_hz: int
    band_end_hz: int
    channel_width_hz: int

    def __post_init__(self):
        if self.channel_width_hz not in ALLOWED_WIDTHS_HZ:
            raise InvalidWidth(
                f"channel width must be 6, 7 or 8 MHz, got {self.channel_width_hz} Hz")
        if self.band_end_hz <= self.band_start_hz:
            raise EmptyBand(f"band [{self.band_start_hz}, {self.band_end_hz}) is empty")
        if self.count < 1:
            raise EmptyBand("band is narrower than one channel")

    @property
    def count(self) -> int:
        return (self.band_end_hz - self.band_start_hz) // self.channel_width_hz

    def channels(self) -> Iterator[ChannelId]:
        return iter(range(self.count))

    def check(self, ch: ChannelId) -> ChannelId:
        if not isinstance(ch, int) or not 0 <= ch < self.count:
            raise ChannelOutOfRange(f"channel {ch!r} outside plan of {self.count} channels")
        return ch

    def edges_hz(self, ch: ChannelId) -> tuple[int, int]:
        self.check(ch)
        lo = self.band_start_hz + ch * self.channel_width_hz
        return lo, lo + self.channel_width_hz

    def to_config(self) -> dict:
        return {
            "band_start_hz": self.band_start_hz,
            "band_end_hz": self.band_end_hz,
            "channel_width_hz": self.channel_width_hz,
        }

    @classmethod
    def from_config(cls, doc: Mapping | None) -> "ChannelPlan":
        doc = doc or {}
        return build_plan(
            int(doc.get("band_start_hz", DEFAULT_BAND_START_HZ)),
            int(doc.get("band_end_hz", DEFAULT_BAND_END_HZ)),
            int(doc.get("channel_width_hz", DEFAULT_CHANNEL_WIDTH_HZ)),
        )


def build_plan(band_start_hz: int = DEFAULT_BAND_START_HZ,
               band_end_hz: int = DEFAULT_BAND_END_HZ,
               channel_width_hz: int = DEFAULT_CHANNEL_WIDTH_HZ) -> ChannelPlan:
    """Divide ``[band_start_hz, band_end_hz)`` into whole channels.

    Bandwidth left over at the top edge (less than one channel) is unused.
    """
    if channel_width_hz not in ALLOWED_WIDTHS_HZ:
        raise InvalidWidth(f"channel width must be 6, 7 or 8 MHz, got {channel_width_hz} Hz")
    if band_end_hz <= band_start_hz or band_end_hz - band_start_hz < channel_width_hz:
        raise EmptyBand(f"band [{band_start_hz}, {band_end_hz}) holds no channel")
    return ChannelPlan(int(band_start_hz), int(band_end_hz), int(channel_width_hz))


def channel_center_hz(plan: ChannelPlan, ch: ChannelId) -> float:
    plan.check(ch)
    return plan.band_start_hz + (ch + 0.5) * plan.channel_width_hz


@dataclass(frozen=True)
class Activity:
    """One scripted transmission on a channel over ``[start_s, end_s]``."""
    signal_class: SignalClass
    snr_db: float
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.end_s < self.start_s:
            raise ValueError(f"interval end {self.end_s} precedes start {self.start_s}")

    def covers(self, t: float) -> bool:
        return self.start_s <= t <= self.end_s


@dataclass(frozen=True)
class GroundTruthOccupancy:
    """Scripted per-channel activity. Later entries override earlier ones."""
    entries: Mapping[ChannelId, tuple[Activity, ...]] = field(default_factory=dict)

    def active(self, ch: ChannelId, t: float) -> Activity | None:
        for act in reversed(self.entries.get(ch, ())):
            if act.covers(t):
                return act
        return None

    def with_activity(self, ch: ChannelId, act: Activity) -> "GroundTruthOccupancy":
        entries = dict(self.entries)
        entries[ch] = tuple(entries.get(ch, ())) + (act,)
        return GroundTruthOccupancy(entries)

    @classmethod
    def from_config(cls, items) -> "GroundTruthOccupancy":
        """Build from a list of ``{channel, class, snr_db, start_s, end_s}`` mappings."""
        truth = cls()
        for item in items or ():
            truth = truth.with_activity(int(item["channel"]), Activity(
                SignalClass.parse(item["class"]),
                float(item.get("snr_db", 20.0)),
                float(item.get("start_s", 0.0)),
                float(item.get("end_s", float("inf"))),
            ))
        return truth

    def to_config(self) -> list[dict]:
        out = []
        for ch in sorted(self.entries):
            for act in self.entries[ch]:
                out.append({
                    "channel": ch,
                    "class": act.signal_class.value,
                    "snr_db": act.snr_db,
                    "start_s": act.start_s,
                    "end_s": act.end_s,
                })
        return out


def occupancy_at(truth: GroundTruthOccupancy, ch: ChannelId, t: float) -> SignalClass:
    act = truth.active(ch, t)
    return SignalClass.VACANT if act is None else act.signal_class
