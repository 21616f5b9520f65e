"""
A database outage at sea
========================

Run the bundled outage scenario: a 600 s voyage with one 180 s database
outage covered by an emergency waiver. Pass ``--trained`` to use the feature
classifier (trains for a few seconds) instead of the ground-truth oracle.
"""

import dataclasses
import sys
import tempfile
from pathlib import Path

from tvws_backhaul.audit import verify_file
from tvws_backhaul.scenario import emit_report, load_reference, run_scenario

script = load_reference("outage_resilience")
if "--trained" not in sys.argv:
    script = dataclasses.replace(
        script, sensing=dataclasses.replace(script.sensing, classifier="oracle"))

with tempfile.TemporaryDirectory() as tmp:
    log_path = Path(tmp) / "voyage.audit"
    report = run_scenario(script, audit_path=log_path)
    print(emit_report(report, "text"))

    # Every change of legal basis: grants run out, the waiver takes over, grants return.
    prev = None
    for d in report.decisions:
        if d.basis is not prev:
            print(f"t={d.decided_at:5.0f} ch={d.channel} {d.basis.value:<14} cap={d.eirp_cap_dbm}")
            prev = d.basis

    print("\naudit log:", verify_file(log_path))
