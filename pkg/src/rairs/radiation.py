"""Directional gain patterns and their rotation derivatives.

Both the steerable antennas and the reflecting elements use the same
cosine-power pattern: linear power gain ``G_max * c**(2p)`` on the forward
half space (c = cosine of the off-boresight angle), zero behind, with
``G_max = 2 * (2p + 1)`` so the pattern integrates to 4*pi over the sphere.
All gains are linear; convert to dB only when reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import boresight, boresight_jacobian

#: dot products of unit vectors may fall outside [-1, 1] by rounding
COS_SLACK = 1e-9


@dataclass(frozen=True)
class GainPattern:
    """Cosine-power gain pattern with directivity exponent >= 1."""

    exponent: float

    def __post_init__(self):
        if self.exponent < 1.0:
            raise ValueError("directivity exponent must be at least 1")

    @property
    def peak_gain(self) -> float:
        return 2.0 * (2.0 * self.exponent + 1.0)


def _checked_cos(value):
    arr = np.asarray(value, dtype=float)
    if np.any(arr > 1.0 + COS_SLACK) or np.any(arr < -1.0 - COS_SLACK):
        raise ValueError("cosine argument outside [-1, 1]")
    return np.clip(arr, -1.0, 1.0)


def _scalar_ok(value, ref):
    return float(value) if np.ndim(ref) == 0 else value


def antenna_gain(cos_eps, pattern: GainPattern):
    """Linear power gain toward a direction with boresight cosine ``cos_eps``.

    Zero on the back half space (``cos_eps <= 0``).  Accepts scalars or
    arrays.
    """
    c = _checked_cos(cos_eps)
    g = np.where(c > 0.0, pattern.peak_gain * np.maximum(c, 0.0) ** (2.0 * pattern.exponent), 0.0)
    return _scalar_ok(g, cos_eps)


def irs_element_gain(cos_theta, pattern: GainPattern):
    """Reflecting-element gain; same cosine-power form as :func:`antenna_gain`.

    Applied identically for incidence and reflection.
    """
    return antenna_gain(cos_theta, pattern)


def gain_subgradient(cos_eps, pattern: GainPattern):
    """Subgradient of the gain with respect to the boresight cosine.

    ``2p * G_max * c**(2p-1)`` for c > 0; the zero branch is selected at and
    behind the cutoff, which is the continuous extension for p >= 1.
    """
    c = _checked_cos(cos_eps)
    p = pattern.exponent
    g = np.where(c > 0.0, 2.0 * p * pattern.peak_gain * np.maximum(c, 0.0) ** (2.0 * p - 1.0), 0.0)
    return _scalar_ok(g, cos_eps)


def sqrt_gain(cos_eps, pattern: GainPattern):
    """Amplitude (square-root) gain: ``sqrt(G_max) * c**p`` for c > 0, else 0.

    No cosine validation: intended for arrays of dot products of unit
    vectors produced internally.
    """
    c = np.asarray(cos_eps, dtype=float)
    amp = math.sqrt(pattern.peak_gain)
    g = np.where(c > 0.0, amp * np.maximum(c, 0.0) ** pattern.exponent, 0.0)
    return _scalar_ok(g, cos_eps)


def sqrt_gain_slope(cos_eps, pattern: GainPattern):
    """Derivative of :func:`sqrt_gain` with respect to the cosine (zero branch
    at and behind the cutoff)."""
    c = np.asarray(cos_eps, dtype=float)
    amp = math.sqrt(pattern.peak_gain) * pattern.exponent
    g = np.where(c > 0.0, amp * np.maximum(c, 0.0) ** (pattern.exponent - 1.0), 0.0)
    return _scalar_ok(g, cos_eps)


def amplitude_rotation_gradient(theta: float, phi: float, direction,
                                pattern: GainPattern) -> tuple[float, float]:
    """Gradient of the amplitude gain toward ``direction`` with respect to the
    deflection angles.

    ``direction`` must be a unit vector.  Returns ``(d/dtheta, d/dphi)`` of
    ``sqrt(G)`` evaluated at the boresight cosine ``c = f(theta, phi) . d``;
    both components are zero when ``c <= 0``.
    """
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > COS_SLACK:
        raise ValueError("direction must be a unit vector")
    c = float(boresight(theta, phi) @ d)
    if c <= 0.0:
        return 0.0, 0.0
    slope = math.sqrt(pattern.peak_gain) * pattern.exponent * c ** (pattern.exponent - 1.0)
    j_theta, j_phi = boresight_jacobian(theta, phi)
    return slope * float(j_theta @ d), slope * float(j_phi @ d)
