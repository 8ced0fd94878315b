"""Ride-hailing trip mobility mining: place detection, home/work inference,
commuting statistics and distribution fitting."""

__version__ = "0.1.0"
