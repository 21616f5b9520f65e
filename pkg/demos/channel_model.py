"""
Over-water channel model
========================

Two-ray loss for a shore mast talking to a vessel, the breakpoint where the
loss bends to 40 dB/decade, and the resulting SNR at a few ranges.
"""

import numpy as np

from tvws_backhaul.propagation import (
    LinkBudgetParams, LinkGeometry, breakpoint_distance_m, free_space_path_loss_db,
    received_power_dbm, snr_db, two_ray_far_field_db, two_ray_path_loss_db,
)

# A 25 m shore mast, a 5 m antenna on deck, mid-band UHF.
h_t, h_r, f = 25.0, 5.0, 550e6
d_b = breakpoint_distance_m(h_t, h_r, f)
print(f"breakpoint: {d_b:.1f} m")

# Raising the deck antenna to 10 m doubles it.
print(f"breakpoint with a 10 m receive mast: {breakpoint_distance_m(h_t, 10.0, f):.1f} m")

# Inside the breakpoint the two rays interfere and the loss ripples around
# free space; past it the exact loss converges on 20 log10(d^2 / (h_t h_r)).
print("\n  range_m   two_ray   free_space   far_field")
for d in np.geomspace(100, 100 * d_b, 9):
    g = LinkGeometry(h_t, h_r, float(d), f)
    print(f"{d:9.0f} {two_ray_path_loss_db(g):9.1f} {free_space_path_loss_db(d, f):12.1f}"
          f" {two_ray_far_field_db(g):11.1f}")

# Link budget at the 36 dBm mobile cap with modest antennas and a fade margin.
params = LinkBudgetParams(p_t_dbm=36.0, g_t_dbi=6.0, g_r_dbi=3.0, fade_margin_db=8.0)
print("\n  range_km   P_r_dBm   SNR_dB")
for km in (2, 5, 10, 20, 30):
    pr = received_power_dbm(params, LinkGeometry(h_t, h_r, km * 1000.0, f))
    print(f"{km:10d} {pr:9.1f} {snr_db(pr):8.1f}")
