"""Smooth window functions used to build the frequency-domain filter bank.

All windows are built from the degree-7 polynomial step ``nu`` with
``nu(t) + nu(1 - t) = 1``, which makes every squared-sum identity below hold
exactly (sin^2 + cos^2), not just approximately.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "smooth_step",
    "bump1d",
    "bump3d",
    "radial_squared",
    "angular_window",
]


def _nu(t: np.ndarray) -> np.ndarray:
    """Polynomial step: 0 for t<=0, 1 for t>=1, C^3 at the end points."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))


def smooth_step(t):
    """Smooth 0-to-1 step s with s(t)^2 + s(1-t)^2 = 1."""
    return np.sin(0.5 * np.pi * _nu(np.asarray(t, dtype=float)))


def bump1d(t):
    """Even taper equal to 1 on [-1/16, 1/16], supported in [-1/8, 1/8]."""
    a = np.abs(np.asarray(t, dtype=float))
    out = np.cos(0.5 * np.pi * _nu(16.0 * a - 1.0))
    return np.where(a >= 0.125, 0.0, out)


def bump3d(x1, x2, x3):
    """Separable 3D taper: 1 on the cube [-1/16,1/16]^3, 0 outside [-1/8,1/8]^3."""
    return bump1d(x1) * bump1d(x2) * bump1d(x3)


def radial_squared(x1, x2, x3):
    """Squared band-pass window: bump3d(xi/4)^2 - bump3d(xi)^2 (clipped at 0)."""
    outer = bump3d(x1 / 4.0, x2 / 4.0, x3 / 4.0)
    inner = bump3d(x1, x2, x3)
    return np.clip(outer * outer - inner * inner, 0.0, None)


def angular_window(z):
    """Even window v supported in [-1,1] with v(z-1)^2 + v(z)^2 + v(z+1)^2 = 1.

    Shifting by integers tiles the real line: sum_k v(z+k)^2 = 1 for all z.
    """
    a = np.abs(np.asarray(z, dtype=float))
    out = np.cos(0.5 * np.pi * _nu(a))
    return np.where(a >= 1.0, 0.0, out)
