"""Occupancy priors and transmitter protection zones (advisory only)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .spectrum import ChannelId

EARTH_RADIUS_M = 6_371_008.8


@dataclass(frozen=True)
class OccupancyPrior:
    """Beta(alpha, beta) belief per channel about its occupancy probability.

    Channels without an entry carry the uniform Beta(1, 1).
    """
    params: Mapping[ChannelId, tuple[float, float]] = field(default_factory=dict)
    default: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        for ch, (a, b) in list(self.params.items()) + [(None, self.default)]:
            if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"Beta parameters for channel {ch} must be finite and positive")

    def get(self, ch: ChannelId) -> tuple[float, float]:
        return self.params.get(ch, self.default)

    def to_config(self) -> dict:
        return {"default": list(self.default),
                "channels": {int(ch): [a, b] for ch, (a, b) in sorted(self.params.items())}}

    @classmethod
    def from_config(cls, doc: Mapping | None) -> "OccupancyPrior":
        doc = doc or {}
        default = tuple(float(v) for v in doc.get("default", (1.0, 1.0)))
        chans = {int(ch): (float(a), float(b)) for ch, (a, b) in (doc.get("channels") or {}).items()}
        return cls(chans, default)


def update_prior(prior: OccupancyPrior, ch: ChannelId, observed_occupied: bool) -> OccupancyPrior:
    a, b = prior.get(ch)
    params = dict(prior.params)
    params[ch] = (a + 1.0, b) if observed_occupied else (a, b + 1.0)
    return OccupancyPrior(params, prior.default)


def update_many(prior: OccupancyPrior, observations: Mapping[ChannelId, bool]) -> OccupancyPrior:
    params = dict(prior.params)
    for ch, occ in observations.items():
        a, b = params.get(ch, prior.default)
        params[ch] = (a + 1.0, b) if occ else (a, b + 1.0)
    return OccupancyPrior(params, prior.default)


def prior_occupancy(prior: OccupancyPrior, ch: ChannelId) -> float:
    a, b = prior.get(ch)
    return a / (a + b)


@dataclass(frozen=True)
class ProtectionZone:
    location: tuple[float, float]
    channel: ChannelId
    radius_m: float

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValueError("protection radius must be positive")

    @classmethod
    def from_config(cls, doc: Mapping) -> "ProtectionZone":
        return cls((float(doc["lat"]), float(doc["lon"])), int(doc["channel"]), float(doc["radius_m"]))


def great_circle_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine distance on a spherical Earth."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def in_protection_zone(zones: Iterable[ProtectionZone], location: tuple[float, float],
                       ch: ChannelId) -> bool:
    return any(z.channel == ch and great_circle_m(z.location, location) < z.radius_m
               for z in zones)


@dataclass
class DigitalTwin:
    """Priors plus static zones; the scenario loop is its only writer."""
    prior: OccupancyPrior = field(default_factory=OccupancyPrior)
    zones: tuple[ProtectionZone, ...] = ()

    def observe(self, observations: Mapping[ChannelId, bool]) -> None:
        self.prior = update_many(self.prior, observations)

    def advise(self, ch: ChannelId | None, location: tuple[float, float]) -> tuple:
        if ch is None:
            return None, False
        return prior_occupancy(self.prior, ch), in_protection_zone(self.zones, location, ch)

    def to_config(self) -> dict:
        return {
            "prior": self.prior.to_config(),
            "zones": [{"lat": z.location[0], "lon": z.location[1], "channel": z.channel,
                       "radius_m": z.radius_m} for z in self.zones],
        }

    @classmethod
    def from_config(cls, doc: Mapping | None) -> "DigitalTwin":
        doc = doc or {}
        return cls(OccupancyPrior.from_config(doc.get("prior")),
                   tuple(ProtectionZone.from_config(z) for z in doc.get("zones") or ()))
