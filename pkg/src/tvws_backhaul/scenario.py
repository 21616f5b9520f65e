"""Discrete-time scenario driver wiring sensing, PAWS, gate, controller and twin.

A scenario script is a YAML (or JSON) document; see README for the schema.
"""
from __future__ import annotations

import bisect
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from . import sensing
from .audit import AuditLog, Basis, signing_key_from_seed
from .compliance import (
    ComplianceDecision, ComplianceGate, EmergencyWaiver, ReconciliationReport, evaluate, reconcile,
)
from .controller import HysteresisPolicy, KpmBuffer, KpmSample, Mode, ModeState, step
from .paws.client import Cause, InProcessTransport, PawsClient, WsdbUnavailable
from .paws.wsdb import MockWsdb, WsdbState
from .propagation import MOBILE_EIRP_CAP_DBM
from .sensing import SensingVerdict, sense_channel
from .spectrum import ChannelId, ChannelPlan, GroundTruthOccupancy, SignalClass, occupancy_at
from .twin import DigitalTwin, OccupancyPrior, prior_occupancy
from .waveforms import DEFAULT_SAMPLE_RATE_HZ, mix_scene


class ScriptInvalid(ValueError):
    pass


WSDB_EVENTS = {"OutageStart", "OutageEnd", "SetAvailability", "SetLatency", "SetNullRuleset"}
WAIVER_EVENTS = {"Activate", "Expire"}


@dataclass(frozen=True)
class SensingConfig:
    classifier: str = "trained"  # or "oracle"
    theta: float = sensing.THETA_SENSE
    capture_s: float = 0.002
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    train_per_class: int = 500
    train_snr_db: float = 15.0


@dataclass(frozen=True)
class ScenarioScript:
    duration_s: float
    plan: ChannelPlan
    truth: GroundTruthOccupancy = field(default_factory=GroundTruthOccupancy)
    epoch_s: float = 1.0
    seed: int = 0
    name: str = "scenario"
    wsdb: WsdbState = field(default_factory=WsdbState)
    wsdb_deadline_s: float = 1.0
    wsdb_events: tuple = ()
    waiver: Mapping = field(default_factory=dict)
    waiver_events: tuple = ()
    kpm_trace: tuple[KpmSample, ...] = ()
    policy: HysteresisPolicy = field(default_factory=HysteresisPolicy)
    vessel_track: tuple = ((0.0, 13.1, -59.62),)
    twin: DigitalTwin = field(default_factory=DigitalTwin)
    sensing: SensingConfig = field(default_factory=SensingConfig)

    def __post_init__(self):
        if not self.epoch_s > 0:
            raise ScriptInvalid("epoch_s must be positive")
        if self.duration_s < 0:
            raise ScriptInvalid("duration_s must be non-negative")
        for kind, events, allowed in (("wsdb", self.wsdb_events, WSDB_EVENTS),
                                      ("waiver", self.waiver_events, WAIVER_EVENTS)):
            for ev in events:
                if ev.get("type") not in allowed:
                    raise ScriptInvalid(f"unknown {kind} event {ev.get('type')!r}")
                self._check_time(ev.get("t"), f"{kind} event")
        for s in self.kpm_trace:
            self._check_time(s.t, "KPM sample")
        for t, *_ in self.vessel_track:
            self._check_time(t, "track point")

    def _check_time(self, t, what):
        if t is None or not 0 <= t <= self.duration_s:
            raise ScriptInvalid(f"{what} time {t!r} outside [0, {self.duration_s}]")

    @property
    def epochs(self) -> int:
        return int(math.floor(self.duration_s / self.epoch_s + 1e-9))


def _expand_kpm(doc) -> tuple[KpmSample, ...]:
    samples = [KpmSample.from_config(s) for s in doc.get("kpm_trace") or ()]
    epoch = float(doc.get("epoch_s", 1.0))
    for seg in doc.get("kpm_segments") or ():
        seg = dict(seg)
        start, end = float(seg.pop("start_s")), float(seg.pop("end_s"))
        t = start
        while t < end - 1e-9:
            samples.append(KpmSample.from_config({"t": t, **seg}))
            t += epoch
    return tuple(sorted(samples, key=lambda s: s.t))


def parse_script(doc: Mapping) -> ScenarioScript:
    """Build a script from a parsed config document; raises :class:`ScriptInvalid`."""
    if not isinstance(doc, Mapping):
        raise ScriptInvalid("scenario document must be a mapping")
    try:
        wsdb_doc = dict(doc.get("wsdb") or {})
        deadline = float(wsdb_doc.pop("deadline_s", 1.0))
        track = tuple((float(p["t"]), float(p["lat"]), float(p["lon"]))
                      for p in doc.get("vessel_track") or ()) or ((0.0, 13.1, -59.62),)
        return ScenarioScript(
            duration_s=float(doc["duration_s"]),
            plan=ChannelPlan.from_config(doc.get("plan")),
            truth=GroundTruthOccupancy.from_config(doc.get("truth")),
            epoch_s=float(doc.get("epoch_s", 1.0)),
            seed=int(doc.get("seed", 0)),
            name=str(doc.get("name", "scenario")),
            wsdb=WsdbState.from_config(wsdb_doc),
            wsdb_deadline_s=deadline,
            wsdb_events=tuple(sorted((dict(e) for e in doc.get("wsdb_events") or ()),
                                     key=lambda e: e.get("t", -1))),
            waiver=dict(doc.get("waiver") or {}),
            waiver_events=tuple(sorted((dict(e) for e in doc.get("waiver_events") or ()),
                                       key=lambda e: e.get("t", -1))),
            kpm_trace=_expand_kpm(doc),
            policy=HysteresisPolicy.from_config(doc.get("policy")),
            vessel_track=track,
            twin=DigitalTwin.from_config(doc.get("twin")),
            sensing=SensingConfig(**(doc.get("sensing") or {})),
        )
    except ScriptInvalid:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScriptInvalid(f"invalid scenario script: {exc}") from exc


def load_script(path) -> ScenarioScript:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ScriptInvalid(f"cannot read {path}: {exc}") from exc
    return parse_script(doc)


def reference_script_path(name: str) -> Path:
    """Path of a bundled reference scenario (``outage_resilience``, ...)."""
    return Path(str(resources.files(__package__) / "scenarios" / f"{name}.yaml"))


def load_reference(name: str) -> ScenarioScript:
    return load_script(reference_script_path(name))


@dataclass(frozen=True)
class ScenarioReport:
    name: str = ""
    epochs: int = 0
    availability: float | None = None
    violations: int = 0
    sensing_accuracy: float | None = None
    false_vacant_rate: float | None = None
    confirmation_rate: float | None = None
    reconciliation_compared: int = 0
    reconciliation_confirmed: int = 0
    discrepancies: tuple = ()
    basis_counts: Mapping = field(default_factory=dict)
    mode_transitions: int = 0
    audit_entries: int = 0
    decision_latency_median_ms: float | None = None
    decision_latency_p95_ms: float | None = None
    # Run artifacts, not part of the emitted report.
    decisions: tuple = field(default=(), repr=False, compare=False)
    audit_log: AuditLog | None = field(default=None, repr=False, compare=False)
    reconciliation: ReconciliationReport | None = field(default=None, repr=False, compare=False)


TIMING_FIELDS = ("decision_latency_median_ms", "decision_latency_p95_ms")
REPORT_FIELDS = ("name", "epochs", "availability", "violations", "sensing_accuracy",
                 "false_vacant_rate", "confirmation_rate", "reconciliation_compared",
                 "reconciliation_confirmed", "discrepancies", "basis_counts", "mode_transitions",
                 "audit_entries") + TIMING_FIELDS


def select_channel(candidates, prior: OccupancyPrior) -> ChannelId | None:
    """Lowest prior occupancy, then highest confidence, then lowest index."""
    best = None
    best_key = None
    for ch, verdict in candidates:
        conf = verdict.confidence if verdict is not None else 0.0
        key = (prior_occupancy(prior, ch), -conf, ch)
        if best_key is None or key < best_key:
            best, best_key = ch, key
    return best


def _track_at(track, t):
    times = [p[0] for p in track]
    i = max(0, bisect.bisect_right(times, t) - 1)
    return track[i][1], track[i][2]


class _Sensor:
    def __init__(self, script: ScenarioScript, model=None):
        self.script = script
        cfg = script.sensing
        self.oracle = cfg.classifier == "oracle"
        if cfg.classifier not in ("oracle", "trained"):
            raise ScriptInvalid(f"unknown classifier {cfg.classifier!r}")
        self.model = model
        if not self.oracle and self.model is None:
            self.model = sensing.default_model(script.seed, cfg.train_per_class,
                                               cfg.train_snr_db, cfg.capture_s)

    def sense(self, t: float) -> dict[ChannelId, SensingVerdict]:
        s = self.script
        if self.oracle:
            out = {}
            for ch in s.plan.channels():
                cls = occupancy_at(s.truth, ch, t)
                out[ch] = SensingVerdict(ch, cls, 1.0, cls.occupied, t, 0.0)
            return out
        bufs = mix_scene(s.truth, s.plan, t, s.sensing.sample_rate_hz, s.seed, s.sensing.capture_s)
        return {ch: sense_channel(buf, self.model, s.sensing.theta, channel=ch)
                for ch, buf in bufs.items()}


def run_scenario(script: ScenarioScript, *, model=None, audit_path=None,
                 signing_key=None) -> ScenarioReport:
    """Run every epoch of ``script`` and aggregate the metrics."""
    plan = script.plan
    clock = {"now": 0.0}
    wsdb = MockWsdb(plan, script.wsdb, clock=lambda: clock["now"])
    transport = InProcessTransport(wsdb, script.wsdb_deadline_s)
    client = PawsClient(transport)
    twin = DigitalTwin(script.twin.prior, script.twin.zones)
    log = AuditLog(signing_key or signing_key_from_seed(f"node-{script.seed}"), audit_path)
    gate = ComplianceGate(log, gps=lambda now: _track_at(script.vessel_track, now),
                          advisor=twin.advise)
    sensor = _Sensor(script, model) if script.epochs else None
    theta = script.sensing.theta

    wsdb_events = list(script.wsdb_events)
    waiver_events = list(script.waiver_events)
    kpm = list(script.kpm_trace)
    kpm_buf = KpmBuffer(horizon_s=max(script.policy.degrade_sustain,
                                      script.policy.restore_sustain) + 2 * script.epoch_s)
    mode = ModeState(Mode.NATIVE_HD, 0.0)
    waiver: EmergencyWaiver | None = None

    grants: list = []
    reservations: dict = {}
    refresh_at = 0.0
    link_lost = False
    pending: list[ComplianceDecision] = []
    recon = ReconciliationReport(0, 0)

    decisions = []
    allowed_epochs = violations = transitions = 0
    correct = total = 0
    occupied_total = false_vacant = 0
    latencies = []

    for k in range(script.epochs):
        t = k * script.epoch_s
        clock["now"] = t
        while wsdb_events and wsdb_events[0]["t"] <= t:
            _apply_wsdb_event(wsdb, wsdb_events.pop(0))
        while waiver_events and waiver_events[0]["t"] <= t:
            ev = waiver_events.pop(0)
            if ev["type"] == "Activate":
                w = {**script.waiver, **{k2: v for k2, v in ev.items() if k2 not in ("t", "type")}}
                waiver = EmergencyWaiver(
                    str(w.get("waiver_id", "EW-1")), t, float(w.get("max_duration_s", 6 * 3600)),
                    float(w.get("min_confidence", theta)),
                    float(w.get("max_eirp_dbm", MOBILE_EIRP_CAP_DBM)))
            else:
                waiver = None
        position = _track_at(script.vessel_track, t)

        if link_lost or t >= refresh_at or not any(g.expires_at > t for g in grants):
            try:
                if not client.initialized:
                    client.init(position)
                avail = client.available_spectrum(position, plan)
            except WsdbUnavailable as exc:
                link_lost = True
                if exc.cause is Cause.NULL_RULESET:
                    grants = []
            else:
                grants = list(avail.grants)
                reservations = dict(avail.reservations)
                if link_lost:
                    recon = recon.merge(reconcile(pending, grants, reservations))
                    pending = []
                link_lost = False
                if grants:
                    g = grants[0]
                    # Re-query at half the remaining grant lifetime.
                    refresh_at = t + (g.expires_at - t) / 2
                else:
                    refresh_at = t + script.epoch_s

        verdicts = sensor.sense(t)
        twin.observe({ch: v.occupied for ch, v in verdicts.items()})
        for ch, v in verdicts.items():
            truth_cls = occupancy_at(script.truth, ch, t)
            total += 1
            correct += v.signal_class is truth_cls
            if truth_cls.occupied:
                occupied_total += 1
                false_vacant += v.signal_class is SignalClass.VACANT
            latencies.append(v.decision_latency)

        while kpm and kpm[0].t <= t:
            kpm_buf.push(kpm.pop(0))
        mode, directives = step(mode, script.policy, kpm_buf.window(), t)
        transitions += any(d.__class__.__name__ == "SetEncoder" for d in directives)

        admissible = [(ch, verdicts[ch]) for ch in plan.channels()
                      if evaluate(ch, t, grants, waiver, verdicts[ch]).allowed]
        chosen = select_channel(admissible, twin.prior)
        if chosen is None:
            fallback = [(ch, v) for ch, v in verdicts.items() if sensing.is_candidate(v, theta)]
            chosen = select_channel(fallback, twin.prior)
        decision = gate.decide(chosen, t, grants, waiver,
                               verdicts.get(chosen) if chosen is not None else None)
        decisions.append(decision)
        if decision.allowed:
            allowed_epochs += 1
            if occupancy_at(script.truth, chosen, t).occupied:
                violations += 1
        if decision.basis is Basis.WAIVER_SENSING:
            pending.append(decision)

    log.close()
    n = script.epochs
    counts = {b.value: sum(d.basis is b for d in decisions) for b in Basis}
    lat_ms = np.array(latencies) * 1e3
    timed = not sensor or not sensor.oracle
    return ScenarioReport(
        name=script.name,
        epochs=n,
        availability=allowed_epochs / n if n else None,
        violations=violations,
        sensing_accuracy=correct / total if total else None,
        false_vacant_rate=false_vacant / occupied_total if occupied_total else None,
        confirmation_rate=recon.confirmation_rate,
        reconciliation_compared=recon.compared,
        reconciliation_confirmed=recon.confirmed,
        discrepancies=tuple({"channel": d.channel, "t": d.decided_at,
                             "sensing_said": d.sensing_said.value, "db_said": d.db_said,
                             "incumbent": None if d.incumbent is None else d.incumbent.value}
                            for d in recon.discrepancies),
        basis_counts=counts if n else {},
        mode_transitions=transitions,
        audit_entries=len(log),
        decision_latency_median_ms=float(np.median(lat_ms)) if n and timed else None,
        decision_latency_p95_ms=float(np.percentile(lat_ms, 95)) if n and timed else None,
        decisions=tuple(decisions),
        audit_log=log,
        reconciliation=recon,
    )


def _apply_wsdb_event(wsdb: MockWsdb, ev: Mapping) -> None:
    kind = ev["type"]
    if kind == "OutageStart":
        wsdb.set_outage(True)
    elif kind == "OutageEnd":
        wsdb.set_outage(False)
    elif kind == "SetAvailability":
        wsdb.set_availability(ev["channels"], bool(ev.get("available", True)))
    elif kind == "SetLatency":
        wsdb.set_latency(float(ev["latency_s"]))
    elif kind == "SetNullRuleset":
        wsdb.set_null_ruleset(bool(ev.get("value", True)))


def _report_dict(report: ScenarioReport, include_timing: bool) -> dict:
    out = {}
    for name in REPORT_FIELDS:
        if name in TIMING_FIELDS and not include_timing:
            continue
        value = getattr(report, name)
        if isinstance(value, tuple):
            value = list(value)
        out[name] = value
    return out


def emit_report(report: ScenarioReport, format: str = "structured",
                include_timing: bool = False) -> str:
    """Render a report as canonical JSON (``structured``) or an aligned table (``text``).

    Wall-clock latency varies run to run, so it is left out unless
    ``include_timing`` is set; everything else is a pure function of the script.
    """
    doc = _report_dict(report, include_timing)
    if format == "structured":
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")
    out = io.StringIO()
    width = max(len(k) for k in doc)
    for key, value in doc.items():
        if key == "discrepancies":
            out.write(f"{key:<{width}}  {len(value)}\n")
            for d in value:
                out.write(f"{'':<{width}}    ch {d['channel']} t={d['t']} sensing={d['sensing_said']}"
                          f" db={d['db_said']} incumbent={d['incumbent']}\n")
            continue
        if key == "basis_counts":
            value = ", ".join(f"{k}={v}" for k, v in value.items()) or "-"
        elif value is None:
            value = "-"
        elif isinstance(value, float):
            value = f"{value:.6g}"
        out.write(f"{key:<{width}}  {value}\n")
    return out.getvalue()


def parse_text_report(text: str) -> dict:
    """Scalar fields of a text report, for cross-checking against the structured form."""
    out = {}
    for line in text.splitlines():
        if not line or line.startswith(" "):
            continue
        key, _, value = line.partition("  ")
        out[key.strip()] = value.strip()
    return out
