"""Closed-form quasi-static triple-junction results.

Dimensionless setting: domain width, mobility and top boundary energy are 1.
For the symmetric T-junction benchmark with energy ratio ``r_gamma =
gamma_top / gamma_bot`` the top dihedral angle is ``2*acos(1/(2*r_gamma))``,
the junction speed is ``pi - xi0`` and the boundary follows a log-cosine
travelling profile. Arbitrary junctions obey Young's law
``sin(xi0)/g12 = sin(xi1)/g02 = sin(xi2)/g01``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class WettingLimitError(ValueError):
    """Energy ratio at or beyond the wetting limit: no junction equilibrium exists."""


SMALL_V = 1e-6


def _check_ratio(r_gamma: float) -> None:
    if not (r_gamma > 0.5) or not math.isfinite(r_gamma):
        raise WettingLimitError(f"energy ratio {r_gamma} violates the wetting limit (must exceed 1/2)")


def garcke_angle(r_gamma: float) -> float:
    _check_ratio(r_gamma)
    return 2.0 * math.acos(1.0 / (2.0 * r_gamma))


def garcke_velocity(xi0: float, mobility: float = 1.0, gamma_top: float = 1.0, width: float = 1.0) -> float:
    """Junction speed ``mobility*gamma_top/width * (pi - xi0)``."""
    if not (0.0 < xi0 <= math.pi + 1e-15):
        raise ValueError(f"top angle must lie in (0, pi], got {xi0}")
    return mobility * gamma_top / width * (math.pi - xi0)


def garcke_profile(x, t: float, v_tj: float, mobility: float = 1.0, gamma_top: float = 1.0, width: float = 1.0):
    """Boundary height ``v*t + (m*g/v) * ln cos(v/(m*g) * (width/2 - |x|))``.

    The flat limit ``v -> 0`` uses the series ``-v*(width/2 - |x|)**2 / (2*m*g)``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > width / 2 * (1 + 1e-12)):
        raise ValueError("x outside [-width/2, width/2]")
    if v_tj < 0:
        raise ValueError("junction speed must be non-negative")
    mg = mobility * gamma_top
    u = width / 2 - np.abs(x)
    if v_tj < SMALL_V:
        y = v_tj * t - v_tj * u**2 / (2.0 * mg)
    else:
        arg = v_tj / mg * u
        if np.any(arg >= math.pi / 2):
            raise ValueError("profile undefined: cos argument reaches pi/2 (speed too large)")
        # log(cos a) = log1p(-2 sin^2(a/2)) keeps precision for small a
        y = v_tj * t + mg / v_tj * np.log1p(-2.0 * np.sin(arg / 2.0) ** 2)
    return float(y) if y.ndim == 0 else y


def garcke_profile_shape(x, v_tj: float):
    """Profile height relative to the junction (x = 0): zero at the junction, rising to the walls."""
    return np.asarray(garcke_profile(x, 0.0, v_tj)) - garcke_profile(0.0, 0.0, v_tj)


def lambda_ratio_from_gamma_ratio(r_gamma: float) -> float:
    _check_ratio(r_gamma)
    return 1.0 / (2.0 * r_gamma - 1.0)


def gamma_ratio_from_lambda_ratio(r_lambda: float) -> float:
    if not (r_lambda > 0) or not math.isfinite(r_lambda):
        raise WettingLimitError(f"source ratio must be positive and finite, got {r_lambda}")
    return 0.5 * (1.0 / r_lambda + 1.0)


def gamma_ratio_from_angle(xi0: float) -> float:
    """Inverse of ``garcke_angle``."""
    if not (0.0 < xi0 < math.pi + 1e-15):
        raise ValueError("top angle must lie in (0, pi]")
    return 1.0 / (2.0 * math.cos(xi0 / 2.0))


@dataclass(frozen=True)
class GarckeSolution:
    r_gamma: float
    xi0: float
    v_tj: float

    @classmethod
    def from_gamma_ratio(cls, r_gamma: float) -> "GarckeSolution":
        xi0 = garcke_angle(r_gamma)
        return cls(r_gamma, xi0, garcke_velocity(xi0))

    @classmethod
    def from_lambda_ratio(cls, r_lambda: float) -> "GarckeSolution":
        return cls.from_gamma_ratio(gamma_ratio_from_lambda_ratio(r_lambda))


@dataclass(frozen=True)
class YoungTriple:
    gamma01: float
    gamma02: float
    gamma12: float
    xi0: float
    xi1: float
    xi2: float


def _check_triangle(g01, g02, g12):
    if min(g01, g02, g12) <= 0:
        raise ValueError("boundary energies must be positive")
    if not (g01 < g02 + g12 and g02 < g01 + g12 and g12 < g01 + g02):
        raise WettingLimitError(f"energies ({g01}, {g02}, {g12}) violate the triangle inequality (wetting)")


def young_angles(gamma01: float, gamma02: float, gamma12: float) -> tuple[float, float, float]:
    """Equilibrium dihedral angles (xi0, xi1, xi2) inside grains 0, 1, 2.

    The three tensions close a triangle; the interior angle of that triangle
    opposite the tension of the boundary facing grain k is ``pi - xi_k``.
    """
    _check_triangle(gamma01, gamma02, gamma12)

    def opposite(a, b, c):
        # triangle angle opposite side a
        return math.acos(max(-1.0, min(1.0, (b * b + c * c - a * a) / (2.0 * b * c))))

    xi0 = math.pi - opposite(gamma12, gamma01, gamma02)
    xi1 = math.pi - opposite(gamma02, gamma01, gamma12)
    xi2 = 2.0 * math.pi - xi0 - xi1
    return xi0, xi1, xi2


def young_triple(gamma01: float, gamma02: float, gamma12: float) -> YoungTriple:
    return YoungTriple(gamma01, gamma02, gamma12, *young_angles(gamma01, gamma02, gamma12))


def gamma_from_angles(xi1: float, xi2: float) -> tuple[float, float]:
    """(gamma02, gamma01) from two measured angles with gamma12 = 1; xi0 = 2*pi - xi1 - xi2."""
    xi0 = 2.0 * math.pi - xi1 - xi2
    s0 = math.sin(xi0)
    if abs(s0) < 1e-9 or not (0 < xi0 < 2 * math.pi):
        raise ValueError(f"degenerate top angle xi0 = {xi0}: sin(xi0) ~ 0")
    return math.sin(xi1) / s0, math.sin(xi2) / s0


def deviation_from_line(xi0: float, v: float) -> float:
    """Distance from (xi0, v) to the line v = pi - xi0."""
    return abs(xi0 + v - math.pi) / math.sqrt(2.0)
