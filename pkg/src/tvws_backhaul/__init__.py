"""Compliance-gated TV white space backhaul: sensing, PAWS, audit and scenario tools."""
from .spectrum import ChannelPlan, SignalClass, build_plan, channel_center_hz, occupancy_at

__version__ = "0.1.0"

__all__ = ["ChannelPlan", "SignalClass", "build_plan", "channel_center_hz", "occupancy_at"]
