from .client import (
    AvailableSpectrum, Cause, HttpTransport, InProcessTransport, NotInitialized, PawsClient,
    PawsGrant, WsdbUnavailable, grant_valid, query_spectrum,
)
from .protocol import Method, PawsRequest, ProtocolError
from .wsdb import BindFailure, MockWsdb, WsdbServer, WsdbState, serve_wsdb

__all__ = [
    "AvailableSpectrum", "BindFailure", "Cause", "HttpTransport", "InProcessTransport",
    "Method", "MockWsdb", "NotInitialized", "PawsClient", "PawsGrant", "PawsRequest",
    "ProtocolError", "WsdbServer", "WsdbState", "WsdbUnavailable", "grant_valid",
    "query_spectrum", "serve_wsdb",
]
