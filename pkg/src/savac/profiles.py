"""Initial phase field profiles.

Builders return closures mapping a mesh to nodal values, so experiment
drivers can instantiate the same profile on every resolution of a ladder.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConfigError
from .fem import nodal_interpolate
from .mesh import TorusMesh


def ellipse_signed_distance(x, y, center=(0.5, 0.5), semi_axes=(0.3, 0.18)):
    """Signed Euclidean distance to an axis-aligned ellipse, positive inside.

    Uses the monotone root bracketing of the nearest point conditions: for a
    query point (p, q) in the first quadrant with q > 0 the nearest point on
    the ellipse is (a^2 p / (t + a^2), b^2 q / (t + b^2)) where t is the
    unique root of

        f(t) = (a p / (t + a^2))^2 + (b q / (t + b^2))^2 - 1

    on (-b^2 + b q, a p + b q], on which f decreases strictly.  Points on the
    major axis are handled in closed form, including the near-centre regime
    where the nearest point leaves the axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = float(semi_axes[0]), float(semi_axes[1])
    if not (a > 0.0 and b > 0.0):
        raise ConfigError([f"ellipse semi-axes must be positive, got {semi_axes!r}"])
    px = np.abs(x - center[0])
    py = np.abs(y - center[1])
    if b > a:  # fold onto the a >= b configuration
        px, py = py, px
        a, b = b, a

    px = np.atleast_1d(px)
    py = np.atleast_1d(py)
    px, py = np.broadcast_arrays(px, py)
    dist = np.empty(px.shape)

    off_axis = py > 0.0
    if np.any(off_axis):
        p = px[off_axis]
        q = py[off_axis]
        lo = np.full(p.shape, -b * b) + b * q
        hi = a * p + b * q
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            fx = (a * p / (mid + a * a)) ** 2 + (b * q / (mid + b * b)) ** 2 - 1.0
            pos = fx > 0.0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        t = 0.5 * (lo + hi)
        nx = a * a * p / (t + a * a)
        ny = b * b * q / (t + b * b)
        dist[off_axis] = np.hypot(p - nx, q - ny)

    on_axis = ~off_axis
    if np.any(on_axis):
        p = px[on_axis]
        cusp = (a * a - b * b) / a
        d_axis = np.abs(a - p)
        with np.errstate(divide="ignore", invalid="ignore"):
            ct = np.where(a > b, a * p / max(a * a - b * b, 1e-300), 1.0)
        ct = np.clip(ct, 0.0, 1.0)
        nx = a * ct
        ny = b * np.sqrt(np.maximum(1.0 - ct * ct, 0.0))
        d_foot = np.hypot(p - nx, ny)
        dist[on_axis] = np.where(p < cusp, d_foot, d_axis)

    inside = (px / a) ** 2 + (py / b) ** 2 < 1.0
    signed = np.where(inside, dist, -dist)
    if np.isscalar(x) or x.ndim == 0:
        return float(signed[0])
    return signed.reshape(np.broadcast_shapes(x.shape, y.shape))


def constant_profile(value: float) -> Callable[[TorusMesh], np.ndarray]:
    """Spatially constant initial field."""

    def build(mesh: TorusMesh) -> np.ndarray:
        return np.full(mesh.node_count, float(value))

    return build


def cosine_profile(amplitude: float = 1.0) -> Callable[[TorusMesh], np.ndarray]:
    """Lowest cosine mode: A cos(2 pi x), in 2-D A cos(2 pi x) cos(2 pi y)."""

    def build(mesh: TorusMesh) -> np.ndarray:
        if mesh.dim == 1:
            return nodal_interpolate(
                lambda x: amplitude * np.cos(2 * np.pi * x), mesh
            )
        return nodal_interpolate(
            lambda x, y: amplitude * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y),
            mesh,
        )

    return build


def tanh_ellipse_profile(epsilon: float, center=(0.5, 0.5),
                         semi_axes=(0.3, 0.18)) -> Callable[[TorusMesh], np.ndarray]:
    """Diffuse elliptical droplet tanh(d / (sqrt(2) eps)), +1 inside.

    ``d`` is the signed distance to the ellipse, so the zero level set is
    exactly the ellipse and the interface width scales with ``epsilon``.
    2-D only.
    """
    if not epsilon > 0.0:
        raise ConfigError([f"epsilon must be > 0, got {epsilon!r}"])

    def build(mesh: TorusMesh) -> np.ndarray:
        if mesh.dim != 2:
            raise ConfigError(
                ["tanh-ellipse initial data is only defined on 2-D meshes"]
            )
        return nodal_interpolate(
            lambda x, y: np.tanh(
                ellipse_signed_distance(x, y, center, semi_axes)
                / (np.sqrt(2.0) * epsilon)
            ),
            mesh,
        )

    return build
