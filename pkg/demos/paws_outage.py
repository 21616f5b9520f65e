"""
Talking to the whitespace database
==================================

Start the mock database over HTTP, get a grant, then inject faults and watch
the client classify them.
"""

from tvws_backhaul.paws import (
    HttpTransport, PawsClient, WsdbState, WsdbUnavailable, query_spectrum, serve_wsdb,
)
from tvws_backhaul.spectrum import SignalClass, build_plan

plan = build_plan()
here = (13.0975, -59.62)
state = WsdbState(available=frozenset({3, 7, 12}), reservations={9: SignalClass.WIRELESS_MIC})

with serve_wsdb(state, plan, outage_hold_s=0.5) as server:
    print("database at", server.url)
    client = PawsClient(HttpTransport(server.url, deadline_s=0.3))
    print("rulesets:", client.init(here))

    avail = client.available_spectrum(here, plan)
    for g in avail.grants:
        print(f"  grant ch {g.channel}: {g.max_eirp_dbm} dBm until t={g.expires_at:.0f}")
    print("  reserved:", {ch: c.value for ch, c in avail.reservations.items()})

    # Channel 7 is withdrawn mid-session; the next query reflects it.
    server.wsdb.set_availability([7], available=False)
    print("after withdrawal:", sorted(g.channel for g in query_spectrum(client, here, plan)))

    for fault, undo in ((lambda: server.wsdb.set_outage(True), lambda: server.wsdb.set_outage(False)),
                        (lambda: server.wsdb.set_latency(1.0), lambda: server.wsdb.set_latency(0)),
                        (lambda: server.wsdb.set_null_ruleset(True),
                         lambda: server.wsdb.set_null_ruleset(False))):
        fault()
        try:
            query_spectrum(client, here, plan)
        except WsdbUnavailable as exc:
            print("unavailable:", exc.cause.value)
        undo()

# Once the server is gone the failure is a refused connection instead.
try:
    query_spectrum(client, here, plan)
except WsdbUnavailable as exc:
    print("after shutdown:", exc.cause.value)
