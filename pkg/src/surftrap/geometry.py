"""Planar electrode layouts.

A layout is a set of named electrodes lying in the z=0 plane. Every electrode
is a list of simple polygons; the rest of the plane is taken to be grounded.
All coordinates are meters. The trap axis is x, y is the in-plane transverse
direction and z is the height above the electrode plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.ops import unary_union

from .errors import (DegeneratePolygon, DuplicateName, InvalidParams, OverlapError,
                     UnknownElectrode)

# vertices closer than this are merged during normalization
MERGE_TOL = 1e-12
# interior overlaps below this area (m^2) are treated as touching edges
OVERLAP_AREA_TOL = 1e-22


class Kind(str, Enum):
    RF = "RF"
    CONTROL = "Control"


@dataclass(frozen=True)
class Polygon:
    """Simple planar polygon.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
        Ordered vertices in meters. The ring is implicitly closed.
    """

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise DegeneratePolygon("polygon vertices must have shape (n, 2)")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))

    @classmethod
    def rectangle(cls, x1, x2, y1, y2):
        return cls([(x1, y1), (x2, y1), (x2, y2), (x1, y2)])

    @property
    def array(self):
        return np.asarray(self.vertices, dtype=float)

    @property
    def signed_area(self):
        x, y = self.array.T
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def area(self):
        return abs(self.signed_area)

    def to_shapely(self):
        return _ShapelyPolygon(self.array)

    def mirrored_x(self):
        v = self.array * np.array([-1.0, 1.0])
        return Polygon(v[::-1])


@dataclass(frozen=True)
class Electrode:
    name: str
    kind: Kind
    polygons: tuple

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "polygons", tuple(self.polygons))

    @property
    def area(self):
        return sum(p.area for p in self.polygons)

    def to_shapely(self):
        return unary_union([p.to_shapely() for p in self.polygons])


@dataclass(frozen=True)
class TrapLayout:
    electrodes: tuple
    metadata: dict = field(default_factory=dict)
    validated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))

    def __getitem__(self, name):
        for e in self.electrodes:
            if e.name == name:
                return e
        raise UnknownElectrode(f"no electrode named {name!r}")

    @property
    def names(self):
        return [e.name for e in self.electrodes]

    @property
    def rf_names(self):
        return [e.name for e in self.electrodes if e.kind is Kind.RF]

    @property
    def control_names(self):
        return [e.name for e in self.electrodes if e.kind is Kind.CONTROL]

    @property
    def gap(self):
        """Nominal inter-electrode gap (m) used by the gapless field model."""
        return float(self.metadata.get("gap_m", 0.0))

    @property
    def bounds(self):
        pts = np.concatenate([p.array for e in self.electrodes for p in e.polygons])
        return pts.min(axis=0), pts.max(axis=0)

    @property
    def diameter(self):
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def _normalize_polygon(poly, where):
    v = poly.array
    if len(v) >= 2 and np.all(np.abs(v[0] - v[-1]) <= MERGE_TOL):
        v = v[:-1]
    # merge repeated vertices
    keep = [0]
    for i in range(1, len(v)):
        if np.max(np.abs(v[i] - v[keep[-1]])) > MERGE_TOL:
            keep.append(i)
    v = v[keep]
    if len(v) > 1 and np.max(np.abs(v[0] - v[-1])) <= MERGE_TOL:
        v = v[:-1]
    # drop collinear vertices
    changed = True
    while changed and len(v) >= 3:
        changed = False
        for i in range(len(v)):
            a, b, c = v[i - 1], v[i], v[(i + 1) % len(v)]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            scale = max(np.linalg.norm(b - a) * np.linalg.norm(c - a), 1e-300)
            if abs(cross) <= 1e-12 * scale:
                v = np.delete(v, i, axis=0)
                changed = True
                break
    if len(v) < 3:
        raise DegeneratePolygon(f"{where}: fewer than 3 distinct vertices")
    out = Polygon(v)
    if out.area <= 0.0:
        raise DegeneratePolygon(f"{where}: zero area")
    if not out.to_shapely().is_valid:
        raise DegeneratePolygon(f"{where}: polygon is self-intersecting")
    if out.signed_area < 0:
        out = Polygon(v[::-1])
    return out


def validate_layout(layout: TrapLayout) -> TrapLayout:
    """Check layout invariants and return a normalized copy.

    Normalization merges repeated and collinear vertices and orients every
    polygon counter-clockwise seen from +z.

    Parameters
    ----------
    layout : TrapLayout

    Returns
    -------
    TrapLayout
        Normalized layout with ``validated=True``.

    Raises
    ------
    DuplicateName, DegeneratePolygon, OverlapError
    """
    seen = set()
    for e in layout.electrodes:
        if e.name in seen:
            raise DuplicateName(f"electrode name {e.name!r} used twice")
        seen.add(e.name)

    electrodes = []
    for e in layout.electrodes:
        if not e.polygons:
            raise DegeneratePolygon(f"electrode {e.name!r} has no polygons")
        polys = tuple(_normalize_polygon(p, f"{e.name}[{i}]")
                      for i, p in enumerate(e.polygons))
        shapes = [p.to_shapely() for p in polys]
        for i in range(len(shapes)):
            for j in range(i + 1, len(shapes)):
                if shapes[i].intersection(shapes[j]).area > OVERLAP_AREA_TOL:
                    raise OverlapError(f"polygons {i} and {j} of {e.name!r} overlap")
        electrodes.append(Electrode(e.name, e.kind, polys))

    kinds = [e.kind for e in electrodes]
    if Kind.RF not in kinds or Kind.CONTROL not in kinds:
        raise InvalidParams("layout needs at least one RF and one control electrode")

    unions = [e.to_shapely() for e in electrodes]
    tree = shapely.STRtree(unions)
    for i, u in enumerate(unions):
        for j in tree.query(u):
            if j <= i:
                continue
            if u.intersection(unions[j]).area > OVERLAP_AREA_TOL:
                raise OverlapError(
                    f"electrodes {electrodes[i].name!r} and {electrodes[j].name!r} overlap")
    return TrapLayout(electrodes, dict(layout.metadata), validated=True)


def min_clearance(layout: TrapLayout) -> float:
    """Smallest distance between polygons of different electrodes (m)."""
    unions = [e.to_shapely() for e in layout.electrodes]
    best = np.inf
    for i in range(len(unions)):
        for j in range(i + 1, len(unions)):
            best = min(best, unions[i].distance(unions[j]))
    return float(best)


# --------------------------------------------------------------------------
# reference five-wire layout
# --------------------------------------------------------------------------

RF_TOPOLOGIES = ("ring", "rails", "u")


@dataclass(frozen=True)
class FiveWireParams:
    """Dimensions of the five-wire reference layout (all meters).

    The center control strip (electrode 1) sits on the trap axis between two
    RF rails. The control row on the -y side is cut into three segments
    (electrodes 2, 4, 3 in order of increasing x); the row on the +y side is
    electrode 5.

    Parameters
    ----------
    inner_edge : float
        Distance from the axis to the inner edge of both RF rails (a).
    outer_edge : float
        Distance from the axis to the outer edge of the -y rail (b).
    outer_edge_opposite : float, optional
        Outer edge of the +y rail. Defaults to ``outer_edge`` (symmetric).
    center_width : float, optional
        Width of the center strip. Defaults to ``2 * (inner_edge - gap)``.
    gap : float
        Inter-electrode gap.
    segment_lengths : tuple of float
        Axial lengths of the -y control segments, ordered along +x. Three
        segments give electrodes 2, 4, 3.
    control_widths : tuple of float
        Transverse widths of the -y and +y control rows.
    rf_length : float
        Axial length of the RF electrode.
    bridge_width : float
        Axial width of the RF end bridges ("ring" and "u" topologies).
    rf_topology : {"ring", "rails", "u"}
        "ring" closes both ends of the rails, "u" only the +x end and
        "rails" leaves them as two strips joined off-chip.
    """

    inner_edge: float = 28e-6
    outer_edge: float = 49e-6
    outer_edge_opposite: float | None = 119e-6
    center_width: float | None = 40e-6
    gap: float = 8e-6
    segment_lengths: tuple = (983e-6, 10e-6, 983e-6)
    control_widths: tuple = (81e-6, 87e-6)
    rf_length: float = 720e-6
    bridge_width: float = 56e-6
    rf_topology: str = "ring"

    @property
    def b_plus(self):
        return self.outer_edge if self.outer_edge_opposite is None else self.outer_edge_opposite

    @property
    def center(self):
        if self.center_width is None:
            return 2.0 * (self.inner_edge - self.gap)
        return self.center_width

    @property
    def extent(self):
        """Axial length of the control rows."""
        return float(sum(self.segment_lengths) + (len(self.segment_lengths) - 1) * self.gap)

    def check(self):
        a, b, g = self.inner_edge, self.outer_edge, self.gap
        lengths = [a, b, self.b_plus, g, self.center, self.rf_length, self.bridge_width,
                   *self.segment_lengths, *self.control_widths]
        if not all(np.isfinite(lengths)) or min(lengths) <= 0:
            raise InvalidParams("all lengths must be positive and finite")
        if not (0 < a < b and a < self.b_plus):
            raise InvalidParams("need 0 < inner_edge < outer_edge")
        if self.center / 2 + g > a * (1 + 1e-12):
            raise InvalidParams("center strip plus gap does not fit inside the rails")
        if len(self.segment_lengths) != 3:
            raise InvalidParams("segment_lengths must hold three segments (electrodes 2, 4, 3)")
        if len(self.control_widths) != 2:
            raise InvalidParams("control_widths must hold the -y and +y widths")
        if self.rf_topology not in RF_TOPOLOGIES:
            raise InvalidParams(f"rf_topology must be one of {RF_TOPOLOGIES}")
        if self.rf_topology != "rails":
            n_bridges = 2 if self.rf_topology == "ring" else 1
            if self.rf_length - n_bridges * (self.bridge_width + g) <= 0:
                raise InvalidParams("RF bridges leave no room for the center strip")
        if self.rf_length > self.extent:
            raise InvalidParams("RF electrode longer than the control rows")


def reference_layout(params: FiveWireParams | None = None) -> TrapLayout:
    """Build the five-wire reference layout.

    Parameters
    ----------
    params : FiveWireParams, optional
        Defaults reproduce the bundled reconstructed geometry.

    Returns
    -------
    TrapLayout
        Validated layout with electrodes ``RF`` and ``DC1`` .. ``DC5``.
    """
    p = params or FiveWireParams()
    p.check()
    a, b, bp, g = p.inner_edge, p.outer_edge, p.b_plus, p.gap
    half = p.rf_length / 2
    rect = Polygon.rectangle

    rf = [rect(-half, half, -b, -a), rect(-half, half, a, bp)]
    c_lo, c_hi = -half, half
    if p.rf_topology in ("ring", "u"):
        rf.append(rect(half - p.bridge_width, half, -a, a))
        c_hi = half - p.bridge_width - g
    if p.rf_topology == "ring":
        rf.append(rect(-half, -half + p.bridge_width, -a, a))
        c_lo = -half + p.bridge_width + g
    electrodes = [Electrode("RF", Kind.RF, rf),
                  Electrode("DC1", Kind.CONTROL, [rect(c_lo, c_hi, -p.center / 2, p.center / 2)])]

    wa, wb = p.control_widths
    ya = (-b - g - wa, -b - g)
    yb = (bp + g, bp + g + wb)
    x = -p.extent / 2
    for name, length in zip(("DC2", "DC4", "DC3"), p.segment_lengths):
        electrodes.append(Electrode(name, Kind.CONTROL, [rect(x, x + length, *ya)]))
        x += length + g
    electrodes.append(Electrode("DC5", Kind.CONTROL, [rect(-p.extent / 2, p.extent / 2, *yb)]))
    electrodes.sort(key=lambda e: e.name)

    meta = {"gap_m": g, "source": "reference_layout", "rf_topology": p.rf_topology}
    return validate_layout(TrapLayout(electrodes, meta))


def strip_area(params: FiveWireParams) -> float:
    """Analytic total electrode area of a reference layout (m^2)."""
    p = params
    area = p.rf_length * ((p.outer_edge - p.inner_edge) + (p.b_plus - p.inner_edge))
    n_bridges = {"ring": 2, "u": 1, "rails": 0}[p.rf_topology]
    area += n_bridges * p.bridge_width * 2 * p.inner_edge
    area += (p.rf_length - n_bridges * (p.bridge_width + p.gap)) * p.center
    area += sum(p.segment_lengths) * p.control_widths[0]
    area += p.extent * p.control_widths[1]
    return area


def mirror_x(layout: TrapLayout) -> TrapLayout:
    """Reflect a layout about the x=0 plane."""
    return TrapLayout([Electrode(e.name, e.kind, [p.mirrored_x() for p in e.polygons])
                       for e in layout.electrodes], dict(layout.metadata), layout.validated)
