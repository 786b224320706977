"""Static potentials above the electrode plane in the gapless-plane model.

With every gap split along its midline and the remaining plane grounded, the
potential of an electrode held at 1 V is the solid angle it subtends divided
by 2*pi. Gradients and Hessians are analytic (see ``_kernels``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from shapely.geometry import MultiPolygon
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.geometry.polygon import orient

from . import _kernels
from .errors import EvaluationBelowPlane, UnknownElectrode
from .geometry import TrapLayout

# overlaps smaller than this (m^2) are ignored when splitting gaps
_AREA_TOL = 1e-22


def as_points(points):
    """Return ``(array of shape (n, 3), was_single)`` and reject z <= 0."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[-1] != 3:
        raise ValueError("points must have shape (3,) or (n, 3)")
    if np.any(~(p[:, 2] > 0.0)):
        raise EvaluationBelowPlane("field evaluation requires z > 0")
    return p, single


def fd_step(z):
    """Central-difference step used where analytic derivatives are absent."""
    return np.minimum(1e-7, np.asarray(z) / 100.0)


# --------------------------------------------------------------------------
# gap filling
# --------------------------------------------------------------------------

def _polygons_of(geom):
    if geom.is_empty:
        return []
    if isinstance(geom, _ShapelyPolygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, _ShapelyPolygon)]


def gapless_regions(layout: TrapLayout, gap: float | None = None) -> dict:
    """Grow every electrode into the surrounding gaps.

    Each electrode is dilated by ``gap / 2`` (mitred corners). Where two
    dilated electrodes overlap, because they sit closer than ``gap``, the
    overlap is split at half their separation.

    Returns
    -------
    dict
        Electrode name -> shapely geometry of the gap-filled region.
    """
    g = layout.gap if gap is None else float(gap)
    shapes = {e.name: e.to_shapely() for e in layout.electrodes}
    if g <= 0:
        return shapes
    grown = {n: s.buffer(g / 2, join_style="mitre", mitre_limit=10.0)
             for n, s in shapes.items()}
    names = list(shapes)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            overlap = grown[a].intersection(grown[b])
            if overlap.area <= _AREA_TOL:
                continue
            d = shapes[a].distance(shapes[b])
            near_a = shapes[a].buffer(d / 2, join_style="mitre", mitre_limit=10.0)
            part_a = overlap.intersection(near_a)
            grown[a] = grown[a].difference(overlap.difference(part_a))
            grown[b] = grown[b].difference(part_a)
    return grown


def _loops(geom):
    """Closed boundary loops, exteriors CCW and holes CW."""
    loops = []
    for poly in _polygons_of(geom):
        poly = orient(poly, sign=1.0)
        for ring in [poly.exterior, *poly.interiors]:
            v = np.asarray(ring.coords)[:-1]
            if len(v) >= 3:
                loops.append(v)
    return loops


def _loop_geometry(loops):
    tris, starts, tangents, lengths = [], [], [], []
    for v in loops:
        v3 = np.column_stack([v, np.zeros(len(v))])
        # signed fan triangulation; holes come out negative automatically
        for i in range(1, len(v3) - 1):
            a, b, c = v3[0], v3[i], v3[i + 1]
            if abs(np.cross(b - a, c - a)[2]) > 1e-30:
                tris.append((a, b, c))
        nxt = np.roll(v3, -1, axis=0)
        d = nxt - v3
        length = np.linalg.norm(d, axis=1)
        ok = length > 0
        starts.append(v3[ok])
        tangents.append(d[ok] / length[ok, None])
        lengths.append(length[ok])
    return (np.asarray(tris, dtype=float).reshape(-1, 3, 3),
            np.concatenate(starts), np.concatenate(tangents), np.concatenate(lengths))


# --------------------------------------------------------------------------
# basis solutions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasisSolution:
    """Unit-voltage potential of one electrode in the gapless plane.

    ``potential`` is dimensionless (volts per volt), ``gradient`` is in 1/m
    and ``hessian`` in 1/m^2. All accept a single point of shape (3,) or an
    array of shape (n, 3) with z > 0.
    """

    name: str
    region: object
    triangles: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    tangents: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)

    @classmethod
    def from_region(cls, name, region):
        tris, starts, tangents, lengths = _loop_geometry(_loops(region))
        return cls(name, region, tris, starts, tangents, lengths)

    def potential(self, points):
        p, single = as_points(points)
        out = _kernels.solid_angle(p, self.triangles) / _kernels.TWO_PI
        return out[0] if single else out

    def gradient(self, points):
        p, single = as_points(points)
        out = _kernels.solid_angle_gradient(p, self.starts, self.tangents, self.lengths)
        out /= _kernels.TWO_PI
        return out[0] if single else out

    def hessian(self, points):
        p, single = as_points(points)
        out = _kernels.solid_angle_hessian(p, self.starts, self.tangents, self.lengths)
        out /= _kernels.TWO_PI
        return out[0] if single else out

    def evaluate(self, points):
        return self.potential(points), self.gradient(points), self.hessian(points)

    def third_derivatives(self, points):
        """Tensor T[..., k, i, j] = d_k H_ij by central differences of the Hessian."""
        p, single = as_points(points)
        h = fd_step(p[:, 2])
        out = np.empty((len(p), 3, 3, 3))
        for k in range(3):
            dp = np.zeros_like(p)
            dp[:, k] = h
            out[:, k] = (self.hessian(p + dp) - self.hessian(p - dp)) / (2 * h)[:, None, None]
        return out[0] if single else out


class FieldModel:
    """Gapless basis solutions for every electrode of a layout.

    Parameters
    ----------
    layout : TrapLayout
    gap : float, optional
        Gap width used for gap filling; defaults to ``layout.gap``.
    """

    def __init__(self, layout: TrapLayout, gap: float | None = None):
        self.layout = layout
        self.gap = layout.gap if gap is None else float(gap)
        self._bases = {}

    @cached_property
    def regions(self):
        return gapless_regions(self.layout, self.gap)

    @property
    def rf_name(self):
        return self.layout.rf_names[0]

    def basis(self, name) -> BasisSolution:
        if name not in self._bases:
            if name not in self.layout.names:
                raise UnknownElectrode(f"no electrode named {name!r}")
            self._bases[name] = BasisSolution.from_region(name, self.regions[name])
        return self._bases[name]

    def rf_basis(self) -> BasisSolution:
        return self.basis(self.rf_name)

    def static(self, voltages) -> "StaticField":
        return StaticField(self, normalize_voltages(self.layout, voltages))


def basis_solution(layout: TrapLayout, electrode: str, gap: float | None = None) -> BasisSolution:
    """Unit-voltage gapless basis solution for one electrode.

    Raises
    ------
    UnknownElectrode
        If ``electrode`` is not in the layout.
    """
    return FieldModel(layout, gap).basis(electrode)


def normalize_voltages(layout: TrapLayout, voltages) -> dict:
    """Voltage map over all control electrodes, missing entries set to 0."""
    voltages = dict(voltages or {})
    controls = layout.control_names
    for name in voltages:
        if name not in controls:
            raise UnknownElectrode(f"{name!r} is not a control electrode of the layout")
    return {n: float(voltages.get(n, 0.0)) for n in controls}


@dataclass(frozen=True, eq=False)
class StaticField:
    """Superposition of control-electrode basis solutions.

    The RF electrode is held at 0 V for the static solution. ``potential`` is
    in V, ``gradient`` in V/m (``field`` returns E = -gradient) and
    ``hessian`` in V/m^2.
    """

    model: FieldModel
    voltages: dict

    @property
    def layout(self):
        return self.model.layout

    def _active(self):
        return [(self.model.basis(n), v) for n, v in self.voltages.items() if v != 0.0]

    def potential(self, points):
        p, single = as_points(points)
        out = np.zeros(len(p))
        for b, v in self._active():
            out += v * b.potential(p)
        return out[0] if single else out

    def gradient(self, points):
        p, single = as_points(points)
        out = np.zeros((len(p), 3))
        for b, v in self._active():
            out += v * b.gradient(p)
        return out[0] if single else out

    def field(self, points):
        return -self.gradient(points)

    def hessian(self, points):
        p, single = as_points(points)
        out = np.zeros((len(p), 3, 3))
        for b, v in self._active():
            out += v * b.hessian(p)
        return out[0] if single else out

    def evaluate(self, points):
        return self.potential(points), self.field(points), self.hessian(points)

    def scaled(self, alpha):
        return StaticField(self.model, {n: alpha * v for n, v in self.voltages.items()})


def static_field(layout: TrapLayout, voltages, model: FieldModel | None = None) -> StaticField:
    """Static potential from control voltages.

    Parameters
    ----------
    layout : TrapLayout
    voltages : dict
        Electrode name -> volts. Missing control electrodes are at 0 V.
    model : FieldModel, optional
        Reuse precomputed basis solutions.
    """
    model = model or FieldModel(layout)
    return model.static(voltages)


def laplacian_fd(func, points):
    """Finite-difference Laplacian of a scalar field, step ``fd_step(z)``.

    Fourth-order central stencil; the second-order one leaves truncation
    error comparable to the Hessian where its diagonal nearly cancels.
    """
    p, single = as_points(points)
    h = fd_step(p[:, 2])[:, None]
    f0 = func(p)
    out = np.zeros(len(p))
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        out += (-func(p + 2 * h * e) + 16 * func(p + h * e) - 30 * f0
                + 16 * func(p - h * e) - func(p - 2 * h * e)) / (12 * h[:, 0] ** 2)
    return out[0] if single else out
