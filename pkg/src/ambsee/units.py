"""Unit conversions. All internal math runs in watts and bits/s/Hz; dBm only
appears at config/CLI boundaries."""

import math


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(watts) + 30.0


def parse_power(text: str) -> float:
    """Parse a power value given either in watts ("0.5") or with a dBm
    suffix ("50dBm", case-insensitive)."""
    t = text.strip()
    if t.lower().endswith("dbm"):
        return dbm_to_watts(float(t[:-3]))
    return float(t)
