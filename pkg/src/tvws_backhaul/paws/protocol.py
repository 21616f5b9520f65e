"""Wire format for the PAWS subset (INIT and AVAIL_SPECTRUM) as JSON-RPC 2.0.

Messages are encoded canonically: UTF-8 JSON with sorted keys, no
insignificant whitespace and no NaN/Infinity, so encode(decode(b)) == b for
every well-formed message. Times are seconds on the database clock rather
than RFC 3339 strings. ``reservations`` is a local extension that names the
incumbent holding a withheld channel.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from ..spectrum import SignalClass

JSONRPC = "2.0"
PAWS_VERSION = "1.0"

METHOD_INIT = "spectrum.paws.init"
METHOD_GET_SPECTRUM = "spectrum.paws.getSpectrum"

# RFC 7545 error codes used by the mock database.
ERR_UNSUPPORTED = -102
ERR_OUTSIDE_COVERAGE = -104
ERR_MISSING = -301
ERR_INVALID_VALUE = -302
ERR_NOT_REGISTERED = -304


class ProtocolError(ValueError):
    """Malformed or unexpected message."""


class Method(enum.Enum):
    INIT = METHOD_INIT
    GET_SPECTRUM = METHOD_GET_SPECTRUM


@dataclass(frozen=True)
class PawsRequest:
    method: Method
    device_id: str
    location: tuple[float, float]
    request_id: int
    antenna_height_m: float = 0.0

    def __post_init__(self):
        lat, lon = self.location
        if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
            raise ValueError(f"location {self.location} out of range")


@dataclass(frozen=True)
class SpectrumEntry:
    start_hz: int
    stop_hz: int
    max_eirp_dbm: float


@dataclass(frozen=True)
class Reservation:
    start_hz: int
    stop_hz: int
    incumbent: SignalClass


@dataclass(frozen=True)
class InitResponse:
    request_id: int
    ruleset_ids: tuple[str, ...]


@dataclass(frozen=True)
class SpectrumResponse:
    request_id: int
    timestamp: float
    ruleset_id: str
    start_time: float
    stop_time: float
    spectra: tuple[SpectrumEntry, ...] = ()
    reservations: tuple[Reservation, ...] = ()


@dataclass(frozen=True)
class ErrorResponse:
    request_id: int | None
    code: int
    message: str
    data: dict = field(default_factory=dict)


def _dumps(obj) -> bytes:
    try:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False,
                          ensure_ascii=False).encode("utf-8")
    except ValueError as exc:
        raise ProtocolError(str(exc)) from exc


def _loads(raw: bytes):
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable message: {exc}") from exc


def _location(loc):
    return {"point": {"center": {"latitude": float(loc[0]), "longitude": float(loc[1])}}}


def encode_request(req: PawsRequest) -> bytes:
    params = {
        "type": "INIT_REQ" if req.method is Method.INIT else "AVAIL_SPECTRUM_REQ",
        "version": PAWS_VERSION,
        "deviceDesc": {"serialNumber": req.device_id},
        "location": _location(req.location),
    }
    if req.method is Method.GET_SPECTRUM:
        params["antenna"] = {"height": float(req.antenna_height_m), "heightType": "AGL"}
    return _dumps({"jsonrpc": JSONRPC, "method": req.method.value, "params": params,
                   "id": req.request_id})


def decode_request(raw: bytes) -> PawsRequest:
    msg = _loads(raw)
    try:
        if msg["jsonrpc"] != JSONRPC:
            raise ProtocolError("not a JSON-RPC 2.0 message")
        method = Method(msg["method"])
        params = msg["params"]
        center = params["location"]["point"]["center"]
        height = params.get("antenna", {}).get("height", 0.0)
        return PawsRequest(method, params["deviceDesc"]["serialNumber"],
                           (center["latitude"], center["longitude"]), msg["id"], height)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ProtocolError):
            raise
        raise ProtocolError(f"malformed request: {exc!r}") from exc


def encode_response(resp) -> bytes:
    if isinstance(resp, ErrorResponse):
        err = {"code": resp.code, "message": resp.message}
        if resp.data:
            err["data"] = resp.data
        return _dumps({"jsonrpc": JSONRPC, "error": err, "id": resp.request_id})
    if isinstance(resp, InitResponse):
        result = {"type": "INIT_RESP", "version": PAWS_VERSION,
                  "rulesetInfos": [{"rulesetId": r} for r in resp.ruleset_ids]}
    elif isinstance(resp, SpectrumResponse):
        spectra = [{"resolutionBwHz": e.stop_hz - e.start_hz,
                    "profiles": [[{"hz": e.start_hz, "dbm": e.max_eirp_dbm},
                                  {"hz": e.stop_hz, "dbm": e.max_eirp_dbm}]]}
                   for e in resp.spectra]
        result = {
            "type": "AVAIL_SPECTRUM_RESP",
            "version": PAWS_VERSION,
            "timestamp": resp.timestamp,
            "spectrumSpecs": [{
                "rulesetInfo": {"rulesetId": resp.ruleset_id},
                "spectrumSchedules": [{
                    "eventTime": {"startTime": resp.start_time, "stopTime": resp.stop_time},
                    "spectra": spectra,
                }],
                "reservations": [{"startHz": r.start_hz, "stopHz": r.stop_hz,
                                  "incumbent": r.incumbent.value} for r in resp.reservations],
            }],
        }
    else:
        raise TypeError(f"cannot encode {type(resp).__name__}")
    return _dumps({"jsonrpc": JSONRPC, "result": result, "id": resp.request_id})


def decode_response(raw: bytes):
    msg = _loads(raw)
    try:
        if msg["jsonrpc"] != JSONRPC:
            raise ProtocolError("not a JSON-RPC 2.0 message")
        if "error" in msg:
            err = msg["error"]
            return ErrorResponse(msg["id"], int(err["code"]), str(err["message"]),
                                 dict(err.get("data", {})))
        result = msg["result"]
        kind = result["type"]
        if kind == "INIT_RESP":
            return InitResponse(msg["id"], tuple(r["rulesetId"] for r in result["rulesetInfos"]))
        if kind != "AVAIL_SPECTRUM_RESP":
            raise ProtocolError(f"unexpected response type {kind!r}")
        (spec,) = result["spectrumSpecs"]
        (sched,) = spec["spectrumSchedules"]
        entries = []
        for s in sched["spectra"]:
            (profile,) = s["profiles"]
            lo, hi = profile
            if lo["dbm"] != hi["dbm"]:
                raise ProtocolError("sloped power profiles are not supported")
            entries.append(SpectrumEntry(lo["hz"], hi["hz"], lo["dbm"]))
        reservations = tuple(Reservation(r["startHz"], r["stopHz"], SignalClass.parse(r["incumbent"]))
                             for r in spec.get("reservations", ()))
        return SpectrumResponse(msg["id"], result["timestamp"], spec["rulesetInfo"]["rulesetId"],
                                sched["eventTime"]["startTime"], sched["eventTime"]["stopTime"],
                                tuple(entries), reservations)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ProtocolError):
            raise
        raise ProtocolError(f"malformed response: {exc!r}") from exc
