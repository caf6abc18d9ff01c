"""Arclength parametrization of the rounded-square boundary.

The domain is a unit square whose corners are smoothed by circular arcs of
radius ``r``; its boundary has circumference ``L = 4 + 2*pi*r``.  Arclength
``t = 0`` sits at the midpoint of the bottom edge and the curve runs counter
clockwise.  All functions reduce arclength arguments modulo ``L`` and are
vectorized over ``t``.

The traveling pressure activation is a normal traction whose scalar profile
``exp(-(cos(2*pi*s/L) - 1)^2 / (2*sigma^2))`` peaks with value one at the
activation position and decays like a bell curve along the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundaryGeometry",
    "ActivationShape",
    "boundary_point",
    "boundary_tangent",
    "exterior_normal",
    "arclength_parameter",
    "boundary_distance",
    "activation_profile",
    "activation_profile_derivative",
    "activation_field",
    "activation_position_derivative",
]


class GeometryError(ValueError):
    """Raised for invalid geometric inputs (off-boundary points, bad radius)."""


@dataclass(frozen=True)
class BoundaryGeometry:
    """Rounded unit square with corner radius ``radius`` (meters)."""

    radius: float = 1e-3

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"corner radius must be positive, got {self.radius}")

    @property
    def circumference(self) -> float:
        return 4.0 + 2.0 * np.pi * self.radius

    @property
    def half_width(self) -> float:
        """Half side length of the bounding box, 0.5 + radius."""
        return 0.5 + self.radius

    @property
    def area(self) -> float:
        """Domain area: bounding square minus the four corner cutoffs."""
        r = self.radius
        return (1.0 + 2.0 * r) ** 2 - (4.0 - np.pi) * r**2

    def reduce(self, t):
        """Canonical arclength representative in [0, L)."""
        return np.mod(t, self.circumference)

    def breakpoints(self) -> np.ndarray:
        """Seam parameters of the nine boundary pieces (bottom-right first)."""
        r = self.radius
        p = np.pi
        return np.array(
            [
                0.0,
                0.5,
                p / 2 * r + 0.5,
                p / 2 * r + 1.5,
                p * r + 1.5,
                p * r + 2.5,
                1.5 * p * r + 2.5,
                1.5 * p * r + 3.5,
                2 * p * r + 3.5,
                self.circumference,
            ]
        )


@dataclass(frozen=True)
class ActivationShape:
    """Width parameter of the activation profile (dimensionless)."""

    sigma: float = 0.01

    def __post_init__(self):
        if not self.sigma > 0:
            raise GeometryError(f"activation width must be positive, got {self.sigma}")


def _branches(geom: BoundaryGeometry, t):
    """Branch index (0..8) and reduced parameter for each input value."""
    t = geom.reduce(np.asarray(t, dtype=float))
    idx = np.searchsorted(geom.breakpoints(), t, side="right") - 1
    # t == L cannot occur after reduction; clip guards stray roundoff.
    return np.clip(idx, 0, 8), t


def boundary_point(geom: BoundaryGeometry, t) -> np.ndarray:
    """Boundary point (x, y) at arclength ``t``; shape (..., 2)."""
    idx, t = _branches(geom, t)
    r = geom.radius
    p = np.pi
    x = np.empty_like(t)
    y = np.empty_like(t)

    for b in range(9):
        m = idx == b
        if not np.any(m):
            continue
        s = t[m]
        if b == 0:  # bottom edge, right half
            x[m] = s
            y[m] = -0.5 - r
        elif b == 1:  # bottom-right corner arc
            a = (s - 0.5) / r + 1.5 * p
            x[m] = 0.5 + r * np.cos(a)
            y[m] = -0.5 + r * np.sin(a)
        elif b == 2:  # right edge
            x[m] = r + 0.5
            y[m] = -0.5 + s - (p / 2 * r + 0.5)
        elif b == 3:  # top-right corner arc
            a = (s - (p / 2 * r + 1.5)) / r
            x[m] = 0.5 + r * np.cos(a)
            y[m] = 0.5 + r * np.sin(a)
        elif b == 4:  # top edge
            x[m] = p * r + 2.0 - s
            y[m] = 0.5 + r
        elif b == 5:  # top-left corner arc
            a = (s - (p * r + 2.5)) / r + p / 2
            x[m] = r * np.cos(a) - 0.5
            y[m] = 0.5 + r * np.sin(a)
        elif b == 6:  # left edge
            x[m] = -r - 0.5
            y[m] = 1.5 * p * r + 3.0 - s
        elif b == 7:  # bottom-left corner arc
            a = (s - (1.5 * p * r + 3.5)) / r + p
            x[m] = r * np.cos(a) - 0.5
            y[m] = -0.5 + r * np.sin(a)
        else:  # bottom edge, left half
            x[m] = s - (2 * p * r + 4.0)
            y[m] = -0.5 - r
    return np.stack([x, y], axis=-1)


def boundary_tangent(geom: BoundaryGeometry, t) -> np.ndarray:
    """Unit tangent (analytic piecewise derivative of the parametrization)."""
    idx, t = _branches(geom, t)
    r = geom.radius
    p = np.pi
    dx = np.empty_like(t)
    dy = np.empty_like(t)

    for b in range(9):
        m = idx == b
        if not np.any(m):
            continue
        s = t[m]
        if b == 0 or b == 8:
            dx[m], dy[m] = 1.0, 0.0
        elif b == 1:
            a = (s - 0.5) / r + 1.5 * p
            dx[m] = -np.sin(a)
            dy[m] = np.cos(a)
        elif b == 2:
            dx[m], dy[m] = 0.0, 1.0
        elif b == 3:
            a = (s - (p / 2 * r + 1.5)) / r
            dx[m] = -np.sin(a)
            dy[m] = np.cos(a)
        elif b == 4:
            dx[m], dy[m] = -1.0, 0.0
        elif b == 5:
            a = (s - (p * r + 2.5)) / r + p / 2
            dx[m] = -np.sin(a)
            dy[m] = np.cos(a)
        elif b == 6:
            dx[m], dy[m] = 0.0, -1.0
        else:  # b == 7
            a = (s - (1.5 * p * r + 3.5)) / r + p
            dx[m] = -np.sin(a)
            dy[m] = np.cos(a)
    return np.stack([dx, dy], axis=-1)


def exterior_normal(geom: BoundaryGeometry, t) -> np.ndarray:
    """Outward unit normal; for a counter-clockwise curve (ty, -tx)."""
    tan = boundary_tangent(geom, t)
    return np.stack([tan[..., 1], -tan[..., 0]], axis=-1)


def boundary_distance(geom: BoundaryGeometry, point) -> np.ndarray:
    """Unsigned distance from ``point`` to the boundary curve."""
    pt = np.asarray(point, dtype=float)
    x, y = pt[..., 0], pt[..., 1]
    r = geom.radius
    qx = np.maximum(np.abs(x) - 0.5, 0.0)
    qy = np.maximum(np.abs(y) - 0.5, 0.0)
    outer = np.hypot(qx, qy)
    inner_depth = 0.5 - np.maximum(np.abs(x), np.abs(y))
    return np.where(outer > 0.0, np.abs(outer - r), r + inner_depth)


def arclength_parameter(geom: BoundaryGeometry, point, tol: float = 1e-9) -> np.ndarray:
    """Arclength parameter in [0, L) of a point on the boundary.

    Rejects points farther than ``tol`` from the curve, reporting their
    distance.  Inverse of :func:`boundary_point` on [0, L).
    """
    pt = np.asarray(point, dtype=float)
    scalar = pt.ndim == 1
    pt = np.atleast_2d(pt)
    dist = boundary_distance(geom, pt)
    if np.any(dist > tol):
        worst = float(np.max(dist))
        raise GeometryError(
            f"point not on the boundary: distance {worst:.3e} m exceeds tolerance {tol:.1e} m"
        )

    x, y = pt[:, 0], pt[:, 1]
    r = geom.radius
    p = np.pi
    L = geom.circumference
    t = np.empty_like(x)

    on_right = x > 0.5
    on_left = x < -0.5
    on_top = y > 0.5
    on_bottom = y < -0.5

    u = np.clip((x - 0.5) / r, -1.0, 1.0)  # corner-arc abscissa, right side
    v = np.clip((x + 0.5) / r, -1.0, 1.0)  # corner-arc abscissa, left side

    m = on_bottom & ~on_right & ~on_left  # bottom edge
    t[m] = np.where(x[m] >= 0.0, x[m], 4.0 + 2 * p * r + x[m])
    m = on_right & on_bottom  # bottom-right arc
    t[m] = 0.5 + r * (np.arccos(-u[m]) - p / 2)
    m = on_right & ~on_bottom & ~on_top  # right edge
    t[m] = 1.0 + r * p / 2 + y[m]
    m = on_right & on_top  # top-right arc
    t[m] = 1.5 + r * p / 2 + r * np.arccos(u[m])
    m = on_top & ~on_right & ~on_left  # top edge
    t[m] = 1.5 + r * p - (x[m] - 0.5)
    m = on_left & on_top  # top-left arc
    t[m] = 2.5 + r * p / 2 + r * np.arccos(v[m])
    m = on_left & ~on_top & ~on_bottom  # left edge
    t[m] = 2.5 + 3 * r * p / 2 - (y[m] - 0.5)
    m = on_left & on_bottom  # bottom-left arc
    t[m] = 3.5 + 3 * r * p / 2 + r * p - r * np.arccos(v[m])

    t = np.where(t >= L, t - L, t)
    return float(t[0]) if scalar else t


def activation_profile(geom: BoundaryGeometry, shape: ActivationShape, s) -> np.ndarray:
    """Scalar bell-curve profile at offset ``s`` from the activation center."""
    s = geom.reduce(np.asarray(s, dtype=float))
    c = np.cos(2.0 * np.pi * s / geom.circumference) - 1.0
    return np.exp(-(c**2) / (2.0 * shape.sigma**2))


def activation_profile_derivative(geom: BoundaryGeometry, shape: ActivationShape, s) -> np.ndarray:
    """Derivative of the profile with respect to its offset argument."""
    s = geom.reduce(np.asarray(s, dtype=float))
    L = geom.circumference
    ang = 2.0 * np.pi * s / L
    c = np.cos(ang) - 1.0
    w = np.exp(-(c**2) / (2.0 * shape.sigma**2))
    return w * c * np.sin(ang) * (2.0 * np.pi / L) / shape.sigma**2


def activation_field(geom: BoundaryGeometry, shape: ActivationShape, p, t) -> np.ndarray:
    """Pressure activation centered at arclength ``p``, evaluated at ``t``.

    Normal traction with unit peak magnitude at ``t == p``; L-periodic in
    both arguments.  Shape (..., 2).
    """
    w = activation_profile(geom, shape, np.asarray(t, dtype=float) - p)
    return w[..., None] * exterior_normal(geom, t)


def activation_position_derivative(
    geom: BoundaryGeometry, shape: ActivationShape, p, t
) -> np.ndarray:
    """Derivative of the activation field with respect to its position ``p``.

    Only the scalar profile is differentiated (and translated); the normal is
    untouched.  This field is exactly the boundary load whose solution is the
    position-derivative of the displacement, so callers apply no extra sign.
    """
    dw = -activation_profile_derivative(geom, shape, np.asarray(t, dtype=float) - p)
    return dw[..., None] * exterior_normal(geom, t)
