"""
Video mode under a throughput dip
=================================

Feed the controller a KPM trace that sags below the degrade threshold and
recovers, and print the directives it emits.
"""

from tvws_backhaul.controller import (
    EncoderConsumer, HysteresisPolicy, KpmBuffer, KpmSample, Mode, ModeState, step,
)

policy = HysteresisPolicy()
print(policy)

trace = ([KpmSample(t, 12.0) for t in range(0, 40)]
         + [KpmSample(t, 1.8, gpu_utilization=0.6) for t in range(40, 70)]
         + [KpmSample(t, 4.5) for t in range(70, 90)]      # between thresholds: no change
         + [KpmSample(t, 9.0) for t in range(90, 130)])

state = ModeState(Mode.NATIVE_HD, 0.0)
buf = KpmBuffer()
uav = EncoderConsumer()
for s in trace:
    buf.push(s)
    state, directives = step(state, policy, buf.window(), s.t)
    if directives:
        uav.apply(directives)
        names = ", ".join(type(d).__name__ + (f"({d.profile})" if hasattr(d, "profile") else "")
                          for d in directives)
        print(f"t={s.t:5.1f}  {state.mode.value:<9} {names:<35} {state.last_transition_cause}")

print("encoder:", uav.profile, "super-resolution:", uav.sr_enabled)
