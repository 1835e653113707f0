"""Detection and estimation metrics."""

from __future__ import annotations

import math

import numpy as np


def aer(true_set, detected_set, N: int) -> float:
    """Activity error rate: (misses + false alarms) / N."""
    true_set, detected_set = set(true_set), set(detected_set)
    return (len(true_set - detected_set) + len(detected_set - true_set)) / N


def miss_rate(true_set, detected_set) -> float:
    """Fraction of active devices declared inactive (0 when nobody is active)."""
    true_set = set(true_set)
    return len(true_set - set(detected_set)) / len(true_set) if true_set else 0.0


def false_alarm_rate(true_set, detected_set, N: int) -> float:
    """Fraction of inactive devices declared active."""
    true_set = set(true_set)
    inactive = N - len(true_set)
    return len(set(detected_set) - true_set) / inactive if inactive else 0.0


def nmse(true_channels, est_channels) -> float:
    """``sqrt(sum ||H - H_hat||^2) / sqrt(sum ||H_hat||^2)``.

    The denominator is the *estimated* channel energy. All-zero estimates
    give ``nan``.
    """
    H, Hh = np.asarray(true_channels), np.asarray(est_channels)
    if H.shape != Hh.shape:
        raise ValueError(f"shape mismatch {H.shape} vs {Hh.shape}")
    den = np.linalg.norm(Hh)
    return float(np.linalg.norm(H - Hh) / den) if den > 0 else math.nan


def nmse_standard(true_channels, est_channels) -> float:
    """Same numerator, true-channel energy in the denominator."""
    H, Hh = np.asarray(true_channels), np.asarray(est_channels)
    if H.shape != Hh.shape:
        raise ValueError(f"shape mismatch {H.shape} vs {Hh.shape}")
    den = np.linalg.norm(H)
    return float(np.linalg.norm(H - Hh) / den) if den > 0 else math.nan


def to_db(x) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf
