"""Implicit particle geometries and the field direction.

Every shape provides a level-set function (negative inside, positive outside)
and its gradient; the outward normal is the normalized gradient. Orientation
relative to the field is carried by the angles ``phi`` (rotation about x1)
and ``psi`` (rotation about x2), which rotate the field direction while the
particle stays fixed, so one mesh serves every orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

GRADIENT_TOL = 1e-12


class DegenerateNormalError(ValueError):
    pass


def field_direction(phi: float, psi: float) -> np.ndarray:
    """Unit field vector ``R_x2(psi) @ R_x1(phi) @ e3``."""
    return np.array([np.cos(phi) * np.sin(psi), -np.sin(phi), np.cos(phi) * np.cos(psi)])


def _points(x) -> tuple:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _norm(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


@dataclass(frozen=True)
class Shape:
    phi: float = 0.0
    psi: float = 0.0

    kind = "abstract"

    @property
    def H(self) -> np.ndarray:
        return field_direction(self.phi, self.psi)

    @property
    def center(self) -> np.ndarray:
        return np.zeros(3)

    @property
    def circumradius(self) -> float:
        raise NotImplementedError

    def oriented(self, phi: float = None, psi: float = None) -> "Shape":
        return replace(self, phi=self.phi if phi is None else phi, psi=self.psi if psi is None else psi)

    def _level(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def level(self, x):
        x, single = _points(x)
        val = self._level(x)
        return float(val[0]) if single else val

    def gradient(self, x):
        x, single = _points(x)
        g = self._gradient(x)
        return g[0] if single else g

    def normal(self, x, strict: bool = True):
        """Outward unit normal; zero rows at degenerate points when not strict."""
        x, single = _points(x)
        g = self._gradient(x)
        n = _norm(g)
        bad = n < GRADIENT_TOL
        if strict and np.any(bad):
            raise DegenerateNormalError(f"level-set gradient vanishes at {x[bad][0].tolist()}")
        out = np.zeros_like(g)
        out[~bad] = g[~bad] / n[~bad, None]
        return out[0] if single else out

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Sphere(Shape):
    radius: float = 1.0

    kind = "sphere"

    @property
    def circumradius(self) -> float:
        return self.radius

    def _level(self, x):
        return _norm(x) - self.radius

    def _gradient(self, x):
        r = _norm(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = x / r[:, None]
        g[r == 0] = 0.0
        return g

    def surface_area(self) -> float:
        return 4 * np.pi * self.radius**2

    def describe(self):
        return {"radius": self.radius}


@dataclass(frozen=True)
class Donut(Shape):
    """Torus around the x3-axis, tube radius ``r`` and centre-line radius ``R``."""

    R: float = 0.7
    r: float = 0.4

    kind = "donut"

    @property
    def circumradius(self) -> float:
        return self.R + self.r

    def _parts(self, x):
        q = np.hypot(x[:, 0], x[:, 1])
        d = np.hypot(q - self.R, x[:, 2])
        return q, d

    def _level(self, x):
        return self._parts(x)[1] - self.r

    def _gradient(self, x):
        q, d = self._parts(x)
        g = np.zeros_like(x)
        ok = (q > 0) & (d > 0)
        s = (q[ok] - self.R) / d[ok] / q[ok]
        g[ok, 0] = s * x[ok, 0]
        g[ok, 1] = s * x[ok, 1]
        # on the symmetry axis the in-plane part vanishes by symmetry
        g[d > 0, 2] = x[d > 0, 2] / d[d > 0]
        return g

    def describe(self):
        return {"R": self.R, "r": self.r}


@dataclass(frozen=True)
class Croissant(Shape):
    """Tube of radius ``r`` around a half circle plus two straight legs.

    The centre line is the half circle of radius ``R`` in the x1x2-plane with
    x2 >= 0, continued at both ends by segments of length ``L`` in the -x2
    direction. The distance to that curve gives hemispherical end caps.
    """

    R: float = 0.7
    r: float = 0.4
    L: float = 0.5

    kind = "croissant"

    @property
    def circumradius(self) -> float:
        return max(self.R, np.hypot(self.R, self.L)) + self.r

    @property
    def tips(self) -> np.ndarray:
        return np.array([[self.R, -self.L, 0.0], [-self.R, -self.L, 0.0]])

    def _closest(self, x):
        """Closest centre-line point for every row of x."""
        best = np.empty_like(x)
        dist = np.full(len(x), np.inf)
        for sx in (self.R, -self.R):
            a = np.array([sx, 0.0, 0.0])
            b = np.array([sx, -self.L, 0.0])
            ab = b - a
            t = np.clip((x - a) @ ab / (ab @ ab), 0.0, 1.0)
            c = a + t[:, None] * ab
            d = _norm(x - c)
            take = d < dist
            best[take], dist[take] = c[take], d[take]
        theta = np.arctan2(x[:, 1], x[:, 0])
        q = np.hypot(x[:, 0], x[:, 1])
        on_arc = (theta >= 0) & (q > 0)
        c = np.zeros_like(x)
        c[:, 0] = self.R * np.cos(theta)
        c[:, 1] = self.R * np.sin(theta)
        d = np.where(on_arc, _norm(x - c), np.inf)
        take = d < dist
        best[take], dist[take] = c[take], d[take]
        return best, dist

    def _level(self, x):
        return self._closest(x)[1] - self.r

    def _gradient(self, x):
        c, d = self._closest(x)
        g = np.zeros_like(x)
        ok = d > 0
        g[ok] = (x[ok] - c[ok]) / d[ok, None]
        return g

    def describe(self):
        return {"R": self.R, "r": self.r, "L": self.L}


@dataclass(frozen=True)
class Peanut(Shape):
    """Smooth union of two spheres on the x3-axis.

    Lobes of radius ``lobe_radius`` centred at ``+-offset`` e3, blended with
    a polynomial smooth minimum of width ``blend``.
    """

    lobe_radius: float = 0.65
    offset: float = 0.5
    blend: float = 0.15

    kind = "peanut"

    @property
    def circumradius(self) -> float:
        return self.offset + self.lobe_radius

    def _parts(self, x):
        c = np.array([0.0, 0.0, self.offset])
        ra, rb = x - c, x + c
        a = _norm(ra) - self.lobe_radius
        b = _norm(rb) - self.lobe_radius
        k = self.blend
        w = np.clip(0.5 + 0.5 * (b - a) / k, 0.0, 1.0)
        return ra, rb, a, b, w

    def _level(self, x):
        _, _, a, b, w = self._parts(x)
        return w * a + (1 - w) * b - self.blend * w * (1 - w)

    def _gradient(self, x):
        ra, rb, _, _, w = self._parts(x)
        na, nb = _norm(ra), _norm(rb)
        ga = np.divide(ra, na[:, None], out=np.zeros_like(ra), where=na[:, None] > 0)
        gb = np.divide(rb, nb[:, None], out=np.zeros_like(rb), where=nb[:, None] > 0)
        return w[:, None] * ga + (1 - w)[:, None] * gb

    def describe(self):
        return {"lobe_radius": self.lobe_radius, "offset": self.offset, "blend": self.blend}


@dataclass(frozen=True)
class GridShape(Shape):
    """Level set sampled on a rectilinear grid, read from an ``.npz`` file.

    The file holds 1-D coordinate arrays ``x``, ``y``, ``z`` and a 3-D array
    ``level`` of shape ``(len(x), len(y), len(z))``. Values are interpolated
    trilinearly; outside the grid the nearest sample is used.
    """

    path: str = ""
    _data: dict = field(default=None, repr=False, compare=False)

    kind = "custom"

    @classmethod
    def from_file(cls, path, phi=0.0, psi=0.0) -> "GridShape":
        from scipy.interpolate import RegularGridInterpolator

        with np.load(Path(path)) as f:
            axes = tuple(np.asarray(f[k], dtype=float) for k in ("x", "y", "z"))
            level = np.asarray(f["level"], dtype=float)
        if level.shape != tuple(len(a) for a in axes):
            raise ValueError(f"level grid shape {level.shape} does not match axes")
        grads = np.gradient(level, *axes)
        interp = [RegularGridInterpolator(axes, v, bounds_error=False, fill_value=None) for v in (level, *grads)]
        inside = level <= 0
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)[inside]
        radius = float(_norm(pts).max()) if len(pts) else 0.0
        return cls(phi=phi, psi=psi, path=str(path), _data={"interp": interp, "radius": radius, "axes": axes})

    @property
    def circumradius(self) -> float:
        return self._data["radius"]

    def _clamp(self, x):
        lo = np.array([a[0] for a in self._data["axes"]])
        hi = np.array([a[-1] for a in self._data["axes"]])
        return np.clip(x, lo, hi)

    def _level(self, x):
        return self._data["interp"][0](self._clamp(x))

    def _gradient(self, x):
        xc = self._clamp(x)
        return np.stack([f(xc) for f in self._data["interp"][1:]], axis=1)

    def describe(self):
        return {"path": self.path}


SHAPES = {cls.kind: cls for cls in (Sphere, Donut, Croissant, Peanut)}


def make_shape(kind: str, phi: float = 0.0, psi: float = 0.0, **params) -> Shape:
    if kind == "custom":
        return GridShape.from_file(params.pop("path"), phi=phi, psi=psi)
    try:
        cls = SHAPES[kind]
    except KeyError:
        raise ValueError(f"unknown shape {kind!r}; expected one of {sorted(SHAPES) + ['custom']}") from None
    return cls(phi=phi, psi=psi, **params)
