"""Per-channel transmit admission: database grant first, sensing under waiver second."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .audit import AuditLog, AuditRecord, Basis, GrantStatus
from .paws.client import PawsGrant, grant_valid
from .sensing import THETA_SENSE, SensingVerdict
from .spectrum import ChannelId, SignalClass


@dataclass(frozen=True)
class EmergencyWaiver:
    """Pre-cleared, time-bounded permission to transmit on sensing evidence."""
    waiver_id: str
    activated_at: float
    max_duration: float
    min_confidence: float = THETA_SENSE
    max_eirp_dbm: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.min_confidence < 1.0:
            raise ValueError("min_confidence must lie in (0, 1)")
        if self.max_duration <= 0:
            raise ValueError("waiver duration must be positive")

    def active(self, now: float) -> bool:
        return self.activated_at <= now < self.activated_at + self.max_duration


@dataclass(frozen=True)
class ComplianceDecision:
    channel: ChannelId | None
    allowed: bool
    basis: Basis
    eirp_cap_dbm: float | None
    sensing_confidence: float | None
    decided_at: float
    grant_status: GrantStatus = GrantStatus.NONE
    sensing_class: SignalClass | None = None
    waiver_id: str | None = None

    @property
    def sensing_conflict(self) -> bool:
        """A valid grant was used although sensing reported the channel occupied."""
        return (self.basis is Basis.VALID_GRANT and self.sensing_class is not None
                and self.sensing_class.occupied)


def grant_status(ch, now, grants: Iterable[PawsGrant], waiver) -> GrantStatus:
    mine = [g for g in grants if g.channel == ch]
    if any(grant_valid(g, now, ch) for g in mine):
        return GrantStatus.VALID
    if waiver is not None and waiver.active(now):
        return GrantStatus.WAIVER_ACTIVE
    if any(now >= g.expires_at for g in mine):
        return GrantStatus.EXPIRED
    return GrantStatus.NONE


def evaluate(ch: ChannelId | None, now: float, grants: Sequence[PawsGrant],
             waiver: EmergencyWaiver | None = None,
             verdict: SensingVerdict | None = None) -> ComplianceDecision:
    """Pure admission rule.

    1. a grant valid for ``ch`` at ``now`` allows at the grant's EIRP cap;
    2. otherwise an active waiver plus a Vacant verdict at or above the
       waiver's minimum confidence allows at the waiver's cap;
    3. otherwise the channel is denied.
    """
    if verdict is not None and verdict.channel is not None and verdict.channel != ch:
        verdict = None
    conf = None if verdict is None else verdict.confidence
    cls = None if verdict is None else verdict.signal_class
    status = grant_status(ch, now, grants, waiver)
    if ch is not None:
        valid = [g for g in grants if grant_valid(g, now, ch)]
        if valid:
            cap = min(g.max_eirp_dbm for g in valid)
            return ComplianceDecision(ch, True, Basis.VALID_GRANT, cap, conf, now, status, cls)
        if (waiver is not None and waiver.active(now) and verdict is not None
                and cls is SignalClass.VACANT and conf >= waiver.min_confidence):
            return ComplianceDecision(ch, True, Basis.WAIVER_SENSING, waiver.max_eirp_dbm, conf,
                                      now, status, cls, waiver.waiver_id)
    return ComplianceDecision(ch, False, Basis.DENIED, None, conf, now, status, cls,
                              waiver.waiver_id if waiver is not None and waiver.active(now) else None)


class ComplianceGate:
    """Single-writer gate: every :meth:`decide` call appends exactly one audit record."""

    def __init__(self, log: AuditLog, gps: Callable[[float], tuple[float, float]] | None = None,
                 advisor: Callable[[ChannelId | None, tuple[float, float]], tuple] | None = None):
        self.log = log
        self.gps = gps or (lambda now: (0.0, 0.0))
        # ``advisor`` returns (prior occupancy, inside a protection zone) for the record.
        self.advisor = advisor
        self.decisions = 0

    def decide(self, ch, now, grants, waiver=None, verdict=None) -> ComplianceDecision:
        decision = evaluate(ch, now, grants, waiver, verdict)
        position = tuple(self.gps(now))
        prior, zone = (None, False)
        if self.advisor is not None:
            prior, zone = self.advisor(ch, position)
        self.log.append(AuditRecord(
            timestamp=now,
            gps=position,
            channel=ch,
            eirp_dbm=decision.eirp_cap_dbm,
            grant_status=decision.grant_status,
            sensing_confidence=decision.sensing_confidence,
            basis=decision.basis,
            allowed=decision.allowed,
            sensing_class=None if decision.sensing_class is None else decision.sensing_class.value,
            sensing_conflict=decision.sensing_conflict,
            prior_occupancy=prior,
            in_protection_zone=bool(zone),
            waiver_id=decision.waiver_id,
        ))
        self.decisions += 1
        return decision


@dataclass(frozen=True)
class Discrepancy:
    channel: ChannelId
    decided_at: float
    sensing_said: SignalClass
    db_said: str
    incumbent: SignalClass | None = None


@dataclass(frozen=True)
class ReconciliationReport:
    compared: int
    confirmed: int
    discrepancies: tuple[Discrepancy, ...] = field(default_factory=tuple)

    @property
    def confirmation_rate(self) -> float | None:
        return self.confirmed / self.compared if self.compared else None

    def merge(self, other: "ReconciliationReport") -> "ReconciliationReport":
        return ReconciliationReport(self.compared + other.compared,
                                    self.confirmed + other.confirmed,
                                    self.discrepancies + other.discrepancies)


def reconcile(prior_decisions: Iterable[ComplianceDecision], fresh_grants: Iterable[PawsGrant],
              reservations: Mapping[ChannelId, SignalClass] | None = None) -> ReconciliationReport:
    """Check each waiver-basis decision against the grants obtained on reconnect."""
    granted = {g.channel for g in fresh_grants}
    reservations = reservations or {}
    compared = confirmed = 0
    found = []
    for d in prior_decisions:
        if d.basis is not Basis.WAIVER_SENSING:
            continue
        compared += 1
        if d.channel in granted:
            confirmed += 1
            continue
        incumbent = reservations.get(d.channel)
        found.append(Discrepancy(d.channel, d.decided_at, d.sensing_class or SignalClass.VACANT,
                                 "Reserved" if incumbent is not None else "NotAvailable",
                                 incumbent))
    return ReconciliationReport(compared, confirmed, tuple(found))
