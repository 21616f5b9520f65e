"""Embeddable mock whitespace database with runtime fault injection."""
from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterable, Mapping

from ..propagation import MOBILE_EIRP_CAP_DBM
from ..spectrum import ChannelId, ChannelPlan, SignalClass
from . import protocol as P

log = logging.getLogger(__name__)

DEFAULT_GRANT_LIFETIME_S = 12 * 3600.0
DEFAULT_RULESET_ID = "TVWS-MOCK-2025"


class BindFailure(OSError):
    pass


@dataclass(frozen=True)
class WsdbState:
    available: frozenset = frozenset()
    ruleset_id: str = DEFAULT_RULESET_ID
    outage: bool = False
    injected_latency_s: float = 0.0
    null_ruleset: bool = False
    max_eirp_dbm: float = MOBILE_EIRP_CAP_DBM
    grant_lifetime_s: float = DEFAULT_GRANT_LIFETIME_S
    reservations: Mapping[ChannelId, SignalClass] = field(default_factory=dict)

    @classmethod
    def from_config(cls, doc: Mapping | None) -> "WsdbState":
        doc = doc or {}
        return cls(
            available=frozenset(int(c) for c in doc.get("available", ())),
            ruleset_id=str(doc.get("ruleset_id", DEFAULT_RULESET_ID)),
            outage=bool(doc.get("outage", False)),
            injected_latency_s=float(doc.get("latency_s", 0.0)),
            null_ruleset=bool(doc.get("null_ruleset", False)),
            max_eirp_dbm=float(doc.get("max_eirp_dbm", MOBILE_EIRP_CAP_DBM)),
            grant_lifetime_s=float(doc.get("grant_lifetime_s", DEFAULT_GRANT_LIFETIME_S)),
            reservations={int(k): SignalClass.parse(v)
                          for k, v in (doc.get("reservations") or {}).items()},
        )


class MockWsdb:
    """Answers encoded PAWS requests from a mutable :class:`WsdbState`.

    Mutations go through one lock, so concurrent sessions always see a
    consistent snapshot. ``clock`` supplies grant timestamps.
    """

    def __init__(self, plan: ChannelPlan, state: WsdbState | None = None,
                 clock: Callable[[], float] = time.time):
        self.plan = plan
        self.clock = clock
        self._state = state or WsdbState()
        self._lock = threading.Lock()
        self._sessions: set[str] = set()
        self.served = 0

    @property
    def state(self) -> WsdbState:
        with self._lock:
            return self._state

    def update(self, **changes) -> WsdbState:
        with self._lock:
            self._state = replace(self._state, **changes)
            return self._state

    # admin interface
    def set_outage(self, outage: bool) -> None:
        self.update(outage=bool(outage))

    def set_latency(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("latency must be non-negative")
        self.update(injected_latency_s=float(seconds))

    def set_availability(self, channels: Iterable[ChannelId], available: bool = True) -> None:
        chans = {self.plan.check(int(c)) for c in channels}
        with self._lock:
            cur = set(self._state.available)
            cur = cur | chans if available else cur - chans
            self._state = replace(self._state, available=frozenset(cur))

    def set_available(self, channels: Iterable[ChannelId]) -> None:
        self.update(available=frozenset(self.plan.check(int(c)) for c in channels))

    def set_null_ruleset(self, null: bool) -> None:
        self.update(null_ruleset=bool(null))

    @property
    def sessions(self) -> frozenset:
        with self._lock:
            return frozenset(self._sessions)

    def close_sessions(self) -> None:
        with self._lock:
            self._sessions.clear()

    def handle(self, raw: bytes) -> bytes:
        """Answer one request. Outage and latency are applied by the transport."""
        try:
            req = P.decode_request(raw)
        except P.ProtocolError as exc:
            return P.encode_response(P.ErrorResponse(None, P.ERR_INVALID_VALUE, str(exc)))
        state = self.state
        with self._lock:
            self.served += 1
        if state.null_ruleset:
            return P.encode_response(P.ErrorResponse(
                req.request_id, P.ERR_OUTSIDE_COVERAGE, "OUTSIDE_COVERAGE: no registered ruleset"))
        if req.method is P.Method.INIT:
            with self._lock:
                self._sessions.add(req.device_id)
            return P.encode_response(P.InitResponse(req.request_id, (state.ruleset_id,)))
        with self._lock:
            known = req.device_id in self._sessions
        if not known:
            return P.encode_response(P.ErrorResponse(
                req.request_id, P.ERR_NOT_REGISTERED, "NOT_REGISTERED: send INIT first"))
        now = float(self.clock())
        spectra = []
        for ch in sorted(state.available):
            lo, hi = self.plan.edges_hz(ch)
            spectra.append(P.SpectrumEntry(lo, hi, state.max_eirp_dbm))
        reservations = []
        for ch, incumbent in sorted(state.reservations.items()):
            lo, hi = self.plan.edges_hz(ch)
            reservations.append(P.Reservation(lo, hi, incumbent))
        return P.encode_response(P.SpectrumResponse(
            req.request_id, now, state.ruleset_id, now, now + state.grant_lifetime_s,
            tuple(spectra), tuple(reservations)))


def _admin(wsdb: MockWsdb, doc: Mapping) -> dict:
    op = doc.get("op")
    if op == "set-outage":
        wsdb.set_outage(doc["value"])
    elif op == "set-latency":
        wsdb.set_latency(float(doc["value"]))
    elif op == "set-availability":
        wsdb.set_availability(doc["channels"], bool(doc.get("available", True)))
    elif op == "set-null-ruleset":
        wsdb.set_null_ruleset(doc["value"])
    elif op != "get-state":
        raise ValueError(f"unknown admin op {op!r}")
    s = wsdb.state
    return {"available": sorted(s.available), "outage": s.outage,
            "latency_s": s.injected_latency_s, "null_ruleset": s.null_ruleset,
            "ruleset_id": s.ruleset_id}


class WsdbServer:
    """Running HTTP front end for a :class:`MockWsdb`.

    ``POST /paws`` carries PAWS messages; ``POST /admin`` takes
    ``{"op": ..., ...}`` fault-injection commands. During an outage requests
    are held for ``outage_hold_s`` and then dropped without a reply.
    """

    def __init__(self, wsdb: MockWsdb, host: str = "127.0.0.1", port: int = 0,
                 outage_hold_s: float = 2.0):
        self.wsdb = wsdb
        self.outage_hold_s = outage_hold_s
        self._closing = threading.Event()
        self._inflight = 0
        self._inflight_lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.0"

            def log_message(self, fmt, *args):
                log.debug("wsdb %s", fmt % args)

            def do_POST(self):
                with server._inflight_lock:
                    server._inflight += 1
                try:
                    self._dispatch()
                finally:
                    with server._inflight_lock:
                        server._inflight -= 1

            def _dispatch(self):
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                if self.path == "/admin":
                    try:
                        reply = json.dumps(_admin(server.wsdb, json.loads(body))).encode()
                        self._send(200, reply)
                    except (ValueError, KeyError, TypeError) as exc:
                        self._send(400, json.dumps({"error": str(exc)}).encode())
                    return
                if self.path != "/paws":
                    self._send(404, b"{}")
                    return
                state = server.wsdb.state
                if state.outage:
                    server._closing.wait(server.outage_hold_s)
                    self.close_connection = True
                    return
                if state.injected_latency_s > 0:
                    server._closing.wait(state.injected_latency_s)
                self._send(200, server.wsdb.handle(body))

            def _send(self, code, payload):
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                try:
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    # the client hit its deadline and hung up first
                    self.close_connection = True

        try:
            self._httpd = ThreadingHTTPServer((host, port), Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._httpd.daemon_threads = False
        self._httpd.block_on_close = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="wsdb", daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    @property
    def inflight(self) -> int:
        with self._inflight_lock:
            return self._inflight

    def stop(self) -> None:
        self._closing.set()
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join()
        self.wsdb.close_sessions()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def serve_wsdb(state: WsdbState, plan: ChannelPlan, host: str = "127.0.0.1", port: int = 0,
               clock: Callable[[], float] = time.time, outage_hold_s: float = 2.0) -> WsdbServer:
    return WsdbServer(MockWsdb(plan, state, clock), host, port, outage_hold_s)
