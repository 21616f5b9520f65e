"""Session-scoped PAWS client and grant bookkeeping.

The client never retries; the compliance loop that owns it decides when to
query again.
"""
from __future__ import annotations

import enum
import http.client
import socket
import urllib.parse
from dataclasses import dataclass

from ..propagation import MOBILE_EIRP_CAP_DBM
from ..spectrum import ChannelId, ChannelPlan, SignalClass
from . import protocol as P
from .wsdb import MockWsdb


class Cause(enum.Enum):
    TIMEOUT = "Timeout"
    CONNECTION_REFUSED = "ConnectionRefused"
    NULL_RULESET = "NullRuleset"


class WsdbUnavailable(Exception):
    """The database could not be reached or has no ruleset for this location."""

    def __init__(self, cause: Cause, detail: str = ""):
        super().__init__(f"{cause.value}: {detail}" if detail else cause.value)
        self.cause = cause


class NotInitialized(RuntimeError):
    pass


@dataclass(frozen=True)
class PawsGrant:
    channel: ChannelId
    max_eirp_dbm: float
    granted_at: float
    expires_at: float
    ruleset_id: str

    def __post_init__(self):
        if not self.expires_at > self.granted_at:
            raise ValueError("grant must expire after it is issued")


def grant_valid(grant: PawsGrant, now: float, ch: ChannelId) -> bool:
    """Valid on ``ch`` over the half-open interval ``[granted_at, expires_at)``."""
    return grant.channel == ch and grant.granted_at <= now < grant.expires_at


@dataclass(frozen=True)
class AvailableSpectrum:
    grants: tuple[PawsGrant, ...]
    reservations: dict
    ruleset_id: str


class InProcessTransport:
    """Calls a :class:`MockWsdb` directly; outage and latency are simulated, not slept."""

    def __init__(self, wsdb: MockWsdb, deadline_s: float = 1.0):
        self.wsdb = wsdb
        self.deadline_s = deadline_s
        self.connected = True

    def call(self, payload: bytes) -> bytes:
        if not self.connected:
            raise WsdbUnavailable(Cause.CONNECTION_REFUSED, "database process is down")
        state = self.wsdb.state
        if state.outage:
            raise WsdbUnavailable(Cause.TIMEOUT, f"no reply within {self.deadline_s} s")
        if state.injected_latency_s > self.deadline_s:
            raise WsdbUnavailable(Cause.TIMEOUT, f"reply after {state.injected_latency_s} s")
        return self.wsdb.handle(payload)


class HttpTransport:
    """POSTs PAWS messages to ``<url>/paws`` with a hard deadline."""

    def __init__(self, url: str, deadline_s: float = 1.0):
        parts = urllib.parse.urlsplit(url)
        self.host = parts.hostname or "127.0.0.1"
        self.port = parts.port or 80
        self.deadline_s = deadline_s

    def call(self, payload: bytes) -> bytes:
        conn = http.client.HTTPConnection(self.host, self.port, timeout=self.deadline_s)
        try:
            conn.request("POST", "/paws", body=payload,
                         headers={"Content-Type": "application/json"})
            resp = conn.getresponse()
            body = resp.read()
        except ConnectionRefusedError as exc:
            raise WsdbUnavailable(Cause.CONNECTION_REFUSED, str(exc)) from exc
        except (socket.timeout, TimeoutError) as exc:
            raise WsdbUnavailable(Cause.TIMEOUT, f"no reply within {self.deadline_s} s") from exc
        except (http.client.RemoteDisconnected, ConnectionResetError) as exc:
            # The server hung up without answering: indistinguishable from a lost reply.
            raise WsdbUnavailable(Cause.TIMEOUT, str(exc)) from exc
        finally:
            conn.close()
        if resp.status != 200:
            raise P.ProtocolError(f"HTTP status {resp.status}")
        return body


class PawsClient:
    """One device session against one database."""

    def __init__(self, transport, device_id: str = "vessel-01",
                 antenna_height_m: float = 5.0):
        self.transport = transport
        self.device_id = device_id
        self.antenna_height_m = antenna_height_m
        self.ruleset_ids: tuple[str, ...] = ()
        self.initialized = False
        self._next_id = 1

    def _request_id(self) -> int:
        rid = self._next_id
        self._next_id += 1
        return rid

    def _exchange(self, req: P.PawsRequest):
        resp = P.decode_response(self.transport.call(P.encode_request(req)))
        if resp.request_id != req.request_id:
            raise P.ProtocolError(f"reply id {resp.request_id} != request id {req.request_id}")
        if isinstance(resp, P.ErrorResponse):
            if resp.code == P.ERR_OUTSIDE_COVERAGE:
                raise WsdbUnavailable(Cause.NULL_RULESET, resp.message)
            raise P.ProtocolError(f"database error {resp.code}: {resp.message}")
        return resp

    def init(self, location: tuple[float, float]) -> tuple[str, ...]:
        req = P.PawsRequest(P.Method.INIT, self.device_id, location, self._request_id())
        resp = self._exchange(req)
        if not isinstance(resp, P.InitResponse):
            raise P.ProtocolError("expected INIT_RESP")
        self.ruleset_ids = resp.ruleset_ids
        self.initialized = True
        return resp.ruleset_ids

    def available_spectrum(self, location: tuple[float, float],
                           plan: ChannelPlan) -> AvailableSpectrum:
        if not self.initialized:
            raise NotInitialized("exchange INIT before querying spectrum")
        req = P.PawsRequest(P.Method.GET_SPECTRUM, self.device_id, location,
                            self._request_id(), self.antenna_height_m)
        resp = self._exchange(req)
        if not isinstance(resp, P.SpectrumResponse):
            raise P.ProtocolError("expected AVAIL_SPECTRUM_RESP")
        grants = []
        for entry in resp.spectra:
            ch = _channel_of(plan, entry.start_hz, entry.stop_hz)
            grants.append(PawsGrant(ch, min(entry.max_eirp_dbm, MOBILE_EIRP_CAP_DBM),
                                    resp.start_time, resp.stop_time, resp.ruleset_id))
        reservations = {_channel_of(plan, r.start_hz, r.stop_hz): r.incumbent
                        for r in resp.reservations}
        return AvailableSpectrum(tuple(grants), reservations, resp.ruleset_id)


def _channel_of(plan: ChannelPlan, start_hz: int, stop_hz: int) -> ChannelId:
    offset = start_hz - plan.band_start_hz
    ch, rem = divmod(offset, plan.channel_width_hz)
    if rem or stop_hz - start_hz != plan.channel_width_hz or not 0 <= ch < plan.count:
        raise P.ProtocolError(f"range [{start_hz}, {stop_hz}) is not a channel of the plan")
    return int(ch)


def query_spectrum(client: PawsClient, location: tuple[float, float],
                   plan: ChannelPlan) -> list[PawsGrant]:
    """Grants for ``location``; raises :class:`WsdbUnavailable` on outage or null ruleset."""
    return list(client.available_spectrum(location, plan).grants)


def reservation_reason(reservations: dict, ch: ChannelId) -> SignalClass | None:
    return reservations.get(ch)
