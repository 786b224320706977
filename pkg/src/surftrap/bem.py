"""Boundary element oracle for planar electrodes.

Electrodes are infinitely thin conductors at z=0 in free space. The plane is
cut into axis-aligned rectangular panels carrying constant surface charge,
the first-kind integral equation is collocated at panel centroids and the
dense system is solved directly. Gaps are left open (no panels), so the
oracle sees the real gap geometry that the gapless model approximates.

The layout is surrounded by a finite grounded frame that stands in for the
grounded plane of the gapless model; it keeps ``gap`` clearance from every
electrode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import linalg
from shapely.geometry import box
from shapely.ops import unary_union

from . import _kernels
from .constants import epsilon_0
from .errors import PanelLimitExceeded, SingularSystem, UnknownElectrode
from .fields import as_points
from .geometry import TrapLayout

log = logging.getLogger(__name__)

DEFAULT_PANEL_CAP = 20_000
GROUND = "__ground__"
_COULOMB = 1.0 / (4.0 * np.pi * epsilon_0)


def _axis_breaks(coords, h0, focus, rate, lo, hi):
    """Graded 1-D panel edges covering [lo, hi] that include every coordinate."""
    pts = np.unique(np.clip(np.concatenate([coords, [lo, hi]]), lo, hi))
    f0, f1 = focus

    def size(t):
        d = max(f0 - t, t - f1, 0.0)
        return h0 + rate * d

    edges = [pts[0]]
    for p, q in zip(pts[:-1], pts[1:]):
        span = q - p
        if span <= 1e-15:
            continue
        # march from the end nearer the focus, then rescale to fit exactly
        forward = size(p) <= size(q)
        t, steps = (p, []) if forward else (q, [])
        while True:
            s = size(t)
            steps.append(s)
            t = t + s if forward else t - s
            if (forward and t >= q - 1e-3 * s) or (not forward and t <= p + 1e-3 * s):
                break
        steps = np.asarray(steps if forward else steps[::-1])
        steps *= span / steps.sum()
        edges.extend(p + np.cumsum(steps))
    edges = np.asarray(edges)
    edges[-1] = pts[-1]
    return edges


@dataclass(frozen=True, eq=False)
class Panelization:
    rects: np.ndarray  # (n, 4) rows (x1, x2, y1, y2)
    owner: np.ndarray  # (n,) index into names
    names: tuple

    @property
    def centroids(self):
        r = self.rects
        return np.column_stack([(r[:, 0] + r[:, 1]) / 2, (r[:, 2] + r[:, 3]) / 2,
                                np.zeros(len(r))])

    @property
    def areas(self):
        r = self.rects
        return (r[:, 1] - r[:, 0]) * (r[:, 3] - r[:, 2])

    def __len__(self):
        return len(self.rects)


def panelize(layout: TrapLayout, panel_target_size: float, focus=None, grading: float = 0.15,
             ground: bool = True, ground_margin: float | None = None):
    """Cut electrodes (and the grounded frame) into rectangular panels.

    Panel edges follow a tensor grid through every polygon vertex. Panels are
    ``panel_target_size`` inside the ``focus`` box and grow linearly with the
    distance from it at ``grading`` per unit length. Non axis-aligned edges
    are resolved as a staircase.
    """
    if not panel_target_size > 0:
        raise ValueError("panel_target_size must be positive")
    lo, hi = layout.bounds
    shapes = {e.name: e.to_shapely() for e in layout.electrodes}
    names = list(shapes)
    if ground:
        margin = 2.0 * layout.diameter if ground_margin is None else ground_margin
        frame = box(lo[0] - margin, lo[1] - margin, hi[0] + margin, hi[1] + margin)
        keepout = unary_union(list(shapes.values())).buffer(
            layout.gap, join_style="mitre", mitre_limit=10.0)
        shapes[GROUND] = frame.difference(keepout)
        names.append(GROUND)
        lo, hi = lo - margin, hi + margin
    if focus is None:
        focus = ((lo[0], hi[0]), (lo[1], hi[1]))

    coords = [[], []]
    for geom in shapes.values():
        for ring in _rings(geom):
            xy = np.asarray(ring.coords)
            coords[0].append(xy[:, 0])
            coords[1].append(xy[:, 1])
    xe = _axis_breaks(np.concatenate(coords[0]), panel_target_size, focus[0], grading, lo[0], hi[0])
    ye = _axis_breaks(np.concatenate(coords[1]), panel_target_size, focus[1], grading, lo[1], hi[1])

    X1, Y1 = np.meshgrid(xe[:-1], ye[:-1], indexing="ij")
    X2, Y2 = np.meshgrid(xe[1:], ye[1:], indexing="ij")
    cx, cy = ((X1 + X2) / 2).ravel(), ((Y1 + Y2) / 2).ravel()
    owner = np.full(cx.shape, -1)
    for k, n in enumerate(names):
        hit = shapely.contains_xy(shapes[n], cx, cy) & (owner < 0)
        owner[hit] = k
    keep = owner >= 0
    rects = np.column_stack([X1.ravel(), X2.ravel(), Y1.ravel(), Y2.ravel()])[keep]
    return Panelization(rects, owner[keep], tuple(names))


def _rings(geom):
    for poly in getattr(geom, "geoms", [geom]):
        if poly.is_empty:
            continue
        yield poly.exterior
        yield from poly.interiors


@dataclass(frozen=True, eq=False)
class BemSolution:
    """Solved surface charge densities for unit voltage on each electrode.

    Attributes
    ----------
    panels : Panelization
    density : ndarray, shape (n_panels, n_electrodes)
        Charge density (C/m^2) for 1 V on electrode ``electrodes[j]`` with all
        other conductors grounded.
    electrodes : tuple of str
    residual : float
        Max relative collocation residual over all unit solves.
    """

    panels: Panelization
    density: np.ndarray = field(repr=False)
    electrodes: tuple
    residual: float

    def charge(self, voltages) -> np.ndarray:
        sigma = np.zeros(len(self.panels))
        for name, v in voltages.items():
            if name not in self.electrodes:
                raise UnknownElectrode(f"no electrode named {name!r}")
            sigma += v * self.density[:, self.electrodes.index(name)]
        return sigma


def bem_solve(layout: TrapLayout, panel_target_size: float, focus=None, grading: float = 0.15,
              ground: bool = True, ground_margin: float | None = None,
              max_panels: int = DEFAULT_PANEL_CAP) -> BemSolution:
    """Assemble and solve the collocation system for every electrode.

    Parameters
    ----------
    layout : TrapLayout
    panel_target_size : float
        Panel edge length (m) inside the focus box.
    focus : ((x0, x1), (y0, y1)), optional
        Region meshed at the target size; defaults to the whole layout
        (uniform panels).
    grading : float
        Linear growth of the panel size with distance from the focus.
    ground : bool
        Add a grounded frame around the layout.
    ground_margin : float, optional
        Width of the frame beyond the layout bounds; default twice the
        layout diameter.
    max_panels : int
        Refuse to assemble larger systems.

    Raises
    ------
    PanelLimitExceeded, SingularSystem
    """
    panels = panelize(layout, panel_target_size, focus, grading, ground, ground_margin)
    n = len(panels)
    if n > max_panels:
        raise PanelLimitExceeded(f"{n} panels exceed the cap of {max_panels}")
    if n == 0:
        raise SingularSystem("panelization produced no panels")
    log.info("bem: %d panels", n)
    centroids = panels.centroids
    A = _kernels.rect_potential_matrix(centroids, panels.rects)
    A *= _COULOMB
    electrodes = tuple(e.name for e in layout.electrodes)
    rhs = np.zeros((n, len(electrodes)))
    for j, name in enumerate(electrodes):
        rhs[panels.owner == panels.names.index(name), j] = 1.0
    A_check = A[: min(n, 2000)].copy()
    try:
        lu = linalg.lu_factor(A, overwrite_a=True, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    diag = np.abs(np.diag(lu[0]))
    if not np.all(np.isfinite(diag)) or diag.min() <= 1e-14 * diag.max():
        raise SingularSystem("collocation matrix is singular")
    density = linalg.lu_solve(lu, rhs, check_finite=False)
    del lu
    if not np.all(np.isfinite(density)):
        raise SingularSystem("non-finite charge densities")
    resid = np.abs(A_check @ density - rhs[: len(A_check)]).max()
    return BemSolution(panels, density, electrodes, float(resid))


def bem_potential(solution: BemSolution, points, voltages):
    """Potential (V), field E = -grad (V/m) and Hessian (V/m^2) from a BEM solution.

    Parameters
    ----------
    solution : BemSolution
    points : array_like, shape (3,) or (n, 3)
        Evaluation points with z > 0.
    voltages : dict
        Electrode name -> volts; missing electrodes are at 0 V.
    """
    p, single = as_points(points)
    sigma = solution.charge(voltages) * _COULOMB
    rects = solution.panels.rects
    phi = _kernels.rect_potential(p, rects, sigma)
    grad = _kernels.rect_gradient(p, rects, sigma)
    hess = _kernels.rect_hessian(p, rects, sigma)
    if single:
        return phi[0], -grad[0], hess[0]
    return phi, -grad, hess


def collocation_potential(solution: BemSolution, voltages):
    """Potential at the panel centroids (on the plane)."""
    sigma = solution.charge(voltages) * _COULOMB
    return _kernels.rect_potential_matrix(solution.panels.centroids,
                                          solution.panels.rects) @ sigma
