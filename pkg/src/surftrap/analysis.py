"""Trap minimum, normal modes, depth and micromotion diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .constants import meV, um
from .errors import (GridTooCoarse, NegativeCurvature, NoMinimumFound, NullNotFound,
                     Unbounded)
from .fields import FieldModel, StaticField

log = logging.getLogger(__name__)

#: gradient tolerance for a converged minimum (N)
GRAD_TOL = 1e-22


# --------------------------------------------------------------------------
# minimization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimumResult:
    r0: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    newton_steps: int


def _default_bounds(potential, seed):
    layout = getattr(potential, "layout", None)
    if layout is None:
        span = max(1e-3, 100 * abs(seed[2]))
        return np.array([seed - span, seed + span])
    lo, hi = layout.bounds
    d = layout.diameter
    return np.array([[lo[0] - d / 2, lo[1] - d / 2, 0.0], [hi[0] + d / 2, hi[1] + d / 2, d]])


def find_minimum(potential, seed, grad_tol: float = GRAD_TOL, max_iter: int = 500,
                 bounds=None) -> MinimumResult:
    """Local minimum of ``potential`` by BFGS with backtracking, then Newton polish.

    Parameters
    ----------
    potential : object
        Provides ``energy``, ``gradient`` and ``hessian`` for points of shape (3,).
    seed : array_like, shape (3,)
        Starting point (m), z > 0.
    grad_tol : float
        Required gradient norm (N).
    bounds : array_like, shape (2, 3), optional
        Search box; leaving it raises NoMinimumFound.

    Raises
    ------
    NoMinimumFound
    """
    seed = np.asarray(seed, dtype=float)
    if seed[2] <= 0:
        raise NoMinimumFound("seed must lie above the plane")
    box = np.asarray(bounds, dtype=float) if bounds is not None else _default_bounds(potential, seed)

    # work in um and meV so that the BFGS scaling is sane
    def inside(s):
        r = s * um
        return r[2] > 0 and np.all(r >= box[0]) and np.all(r <= box[1])

    def f(s):
        return float(potential.energy(s * um)) / meV

    def g(s):
        return np.asarray(potential.gradient(s * um)) * um / meV

    gtol_scaled = grad_tol * um / meV
    s = seed / um
    fs, gs = f(s), g(s)
    Hinv = np.eye(3)
    hscale = potential.hessian(s * um) * um**2 / meV
    lam = np.linalg.eigvalsh(hscale)
    if lam.max() > 0:
        Hinv /= lam.max()
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(gs) < max(gtol_scaled, 1e-6):
            break
        p = -Hinv @ gs
        if p @ gs >= 0:
            Hinv = np.eye(3) / max(lam.max(), 1e-12)
            p = -Hinv @ gs
        t = 1.0
        while True:
            trial = s + t * p
            if inside(trial):
                ft = f(trial)
                if ft <= fs + 1e-4 * t * (p @ gs):
                    break
            t *= 0.5
            if t < 1e-12:
                raise NoMinimumFound("line search failed")
        gt = g(trial)
        dx, dg = trial - s, gt - gs
        s, fs, gs = trial, ft, gt
        sy = dx @ dg
        if sy > 1e-30:
            rho = 1.0 / sy
            I = np.eye(3)
            Hinv = (I - rho * np.outer(dx, dg)) @ Hinv @ (I - rho * np.outer(dg, dx)) \
                + rho * np.outer(dx, dx)
    else:
        raise NoMinimumFound(f"no convergence after {max_iter} quasi-Newton steps")

    # Newton polish with the full Hessian
    r = s * um
    newton = 0
    for newton in range(1, 30):
        grad = np.asarray(potential.gradient(r))
        H = np.asarray(potential.hessian(r))
        if np.linalg.norm(grad) < grad_tol:
            break
        try:
            step = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError as exc:
            raise NoMinimumFound("singular Hessian during polish") from exc
        if np.linalg.norm(step) > 1e-6:
            step *= 1e-6 / np.linalg.norm(step)
        r = r + step
        if not inside(r / um):
            raise NoMinimumFound("Newton polish left the search box")
    grad = np.asarray(potential.gradient(r))
    if np.linalg.norm(grad) >= grad_tol:
        raise NoMinimumFound(f"gradient {np.linalg.norm(grad):.3g} N above tolerance")
    if np.linalg.eigvalsh(potential.hessian(r)).min() <= 0:
        raise NoMinimumFound("stationary point is not a minimum")
    return MinimumResult(r, float(potential.energy(r)), float(np.linalg.norm(grad)), it, newton)


# --------------------------------------------------------------------------
# normal modes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Modes:
    """Normal modes ordered (axial, transverse 1, transverse 2).

    ``axes[i]`` is the unit vector of mode i; frequencies in Hz.
    """

    frequencies: np.ndarray
    axes: np.ndarray
    eigenvalues: np.ndarray

    @property
    def f_axial(self):
        return float(self.frequencies[0])

    @property
    def f_perp1(self):
        return float(self.frequencies[1])

    @property
    def f_perp2(self):
        return float(self.frequencies[2])


def modes_from_hessian(H, mass, axis=(1.0, 0.0, 0.0)) -> Modes:
    """Frequencies sqrt(lambda/m)/2pi from a Hessian (J/m^2).

    The axial mode is the eigenvector with the largest projection on ``axis``;
    ties go to the lower frequency. The other two are sorted ascending.
    """
    lam, vec = np.linalg.eigh(np.asarray(H, dtype=float))
    if lam.min() <= 0:
        raise NegativeCurvature(f"Hessian eigenvalue {lam.min():.3g} J/m^2 is not positive")
    proj = np.abs(vec.T @ np.asarray(axis, dtype=float))
    # lexicographic: largest projection, then lowest eigenvalue
    order = sorted(range(3), key=lambda i: (-round(proj[i], 12), lam[i]))
    ax = order[0]
    rest = sorted(order[1:], key=lambda i: lam[i])
    idx = [ax, *rest]
    axes = vec[:, idx].T
    # deterministic sign: largest component positive
    for k in range(3):
        j = np.argmax(np.abs(axes[k]))
        if axes[k, j] < 0:
            axes[k] = -axes[k]
    f = np.sqrt(lam[idx] / mass) / (2 * np.pi)
    return Modes(f, axes, lam[idx])


def normal_modes(potential, r0, ion) -> Modes:
    """Normal modes of ``potential`` at the minimum ``r0``.

    Raises
    ------
    NegativeCurvature
    """
    return modes_from_hessian(potential.hessian(np.asarray(r0, dtype=float)), ion.mass)


# --------------------------------------------------------------------------
# trap depth
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DepthResult:
    """Trap depth (J) with the escape point (m).

    ``saddle`` is the refined index-1 saddle when one was found near the grid
    escape point; ``grid_depth`` is the depth from the flood fill alone.
    """

    depth: float
    escape_point: np.ndarray
    grid_depth: float
    saddle: np.ndarray | None
    spacing: float
    boundary_limited: bool


def default_depth_box(potential, r0):
    """Box spanning the RF electrode laterally (plus 2 heights) and up to 6 heights."""
    h = float(r0[2])
    layout = potential.layout
    pts = np.concatenate([p.array for p in layout[potential.model.rf_name].polygons])
    lo, hi = pts.min(axis=0) - 2 * h, pts.max(axis=0) + 2 * h
    return ((lo[0], hi[0]), (lo[1], hi[1]), (0.1 * h, 6 * h))


def _saddle_newton(potential, x0, max_step, iters=60):
    x = np.asarray(x0, dtype=float)
    for _ in range(iters):
        g = potential.gradient(x)
        H = potential.hessian(x)
        lam, vec = np.linalg.eigh(H)
        if np.linalg.norm(g) < GRAD_TOL:
            break
        # Newton step with eigenvalue magnitudes bounded away from zero
        floor = 1e-6 * np.abs(lam).max()
        step = -vec @ ((vec.T @ g) / np.where(np.abs(lam) < floor, np.sign(lam + 1e-300) * floor, lam))
        n = np.linalg.norm(step)
        if n > max_step:
            step *= max_step / n
        x = x + step
        if x[2] <= 0:
            return None
    g = potential.gradient(x)
    lam = np.linalg.eigvalsh(potential.hessian(x))
    if np.linalg.norm(g) > 1e3 * GRAD_TOL or np.sum(lam < 0) != 1:
        return None
    return x


def trap_depth(potential, r0, spacing: float = 3e-6, box=None, cap: float = 10.0 * 1000 * meV,
               refine: bool = True, rtol: float = 0.2) -> DepthResult:
    """Depth by sublevel-set flood fill on a 3-D grid.

    The threshold energy at which the connected component of ``r0`` first
    touches the box boundary is bracketed by bisection. The escape point is
    the lowest newly connected grid point; a Newton search from there
    refines the saddle.

    Parameters
    ----------
    potential : EffectivePotential
    r0 : array_like
        Trap minimum (m).
    spacing : float
        Grid spacing (m).
    box : ((x0, x1), (y0, y1), (z0, z1)), optional
        Search box; see ``default_depth_box``.
    cap : float
        Largest depth searched (J).
    refine : bool
        Refine the escape point to an index-1 saddle.
    rtol : float
        Allowed relative disagreement between grid and refined depth.

    Raises
    ------
    Unbounded
        If the well holds beyond ``cap``.
    GridTooCoarse
        If the refined saddle disagrees with the grid threshold by more than
        ``rtol`` of the depth.
    """
    r0 = np.asarray(r0, dtype=float)
    box = box if box is not None else default_depth_box(potential, r0)
    axes = [np.arange(lo, hi + 0.5 * spacing, spacing) for lo, hi in box]
    shape = tuple(len(a) for a in axes)
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    U = np.empty(len(pts))
    for start in range(0, len(pts), 200_000):
        U[start:start + 200_000] = potential.energy(pts[start:start + 200_000])
    U = U.reshape(shape)
    u0 = float(potential.energy(r0))
    seed_idx = tuple(int(np.clip(np.round((r0[k] - axes[k][0]) / spacing), 0, shape[k] - 1))
                     for k in range(3))

    def component(th):
        lab, _ = ndimage.label(U < th)
        lbl = lab[seed_idx]
        return None if lbl == 0 else lab == lbl

    def escapes(mask):
        if mask is None:
            return False
        return (mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any()
                or mask[:, :, 0].any() or mask[:, :, -1].any())

    lo = max(u0, float(U[seed_idx]))
    hi = lo + cap
    if not escapes(component(hi)):
        raise Unbounded(f"no escape below {cap / meV:.1f} meV")
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if escapes(component(mid)):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-6 * meV:
            break
    inner = component(lo)
    if inner is None:
        inner = np.zeros(shape, dtype=bool)
        inner[seed_idx] = True
    grown = component(hi) & ~inner & ndimage.binary_dilation(inner)
    cand = np.argwhere(grown)
    if len(cand) == 0:
        cand = np.argwhere(component(hi) & ~inner)
    best = cand[np.argmin(U[tuple(cand.T)])]
    escape = np.array([axes[k][best[k]] for k in range(3)])
    grid_depth = hi - u0

    saddle = None
    depth = grid_depth
    on_boundary = any(best[k] in (0, shape[k] - 1) for k in range(3))
    if refine and not on_boundary:
        saddle = _saddle_newton(potential, escape, max_step=spacing)
        if saddle is not None:
            depth = float(potential.energy(saddle)) - u0
            if abs(depth - grid_depth) > rtol * grid_depth:
                raise GridTooCoarse(
                    f"refined saddle depth {depth / meV:.2f} meV vs grid {grid_depth / meV:.2f} meV")
            escape = saddle
    return DepthResult(depth, escape, grid_depth, saddle, spacing, saddle is None)


# --------------------------------------------------------------------------
# nulls and micromotion
# --------------------------------------------------------------------------

def _root(gradient, jacobian, x0, scale):
    """Levenberg-Marquardt root of a 3-vector field."""
    def fun(s):
        return gradient(s * scale)

    def jac(s):
        return jacobian(s * scale) * scale

    sol = optimize.least_squares(fun, np.asarray(x0) / scale, jac=jac, method="lm",
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
    return sol.x * scale


def find_rf_null(model: FieldModel, x: float | None = None, seed=None):
    """RF null position (m).

    Without a seed, a coarse scan of |grad phi_RF| over the transverse plane
    at axial position ``x`` (default: RF electrode center) provides one.

    Raises
    ------
    NullNotFound
    """
    rf = model.rf_basis()
    if seed is None:
        pts = np.concatenate([p.array for p in model.layout[model.rf_name].polygons])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        x = 0.5 * (lo[0] + hi[0]) if x is None else x
        width = hi[1] - lo[1]
        ys = np.linspace(lo[1], hi[1], 81)
        zs = np.linspace(0.02 * width, 1.0 * width, 80)
        Yg, Zg = np.meshgrid(ys, zs, indexing="ij")
        P = np.column_stack([np.full(Yg.size, x), Yg.ravel(), Zg.ravel()])
        g = rf.gradient(P)
        # normalize by the height so that the far field does not win
        score = np.linalg.norm(g, axis=1) * P[:, 2]
        seed = P[np.argmin(score)]
    seed = np.asarray(seed, dtype=float)
    r = _root(rf.gradient, rf.hessian, seed, um)
    if r[2] <= 0 or np.linalg.norm(rf.gradient(r)) * r[2] > 1e-8:
        raise NullNotFound("RF null search did not converge")
    return r


def find_static_null(static: StaticField, seed):
    """Point where the static field vanishes, searched from ``seed``.

    Raises
    ------
    NullNotFound
    """
    if all(v == 0 for v in static.voltages.values()):
        raise NullNotFound("all static voltages are zero; the null is undefined")
    seed = np.asarray(seed, dtype=float)
    r = _root(static.gradient, static.hessian, seed, um)
    scale = max(abs(v) for v in static.voltages.values())
    if r[2] <= 0 or np.linalg.norm(static.gradient(r)) > 1e-9 * scale / max(r[2], 1e-12):
        raise NullNotFound("static field null not found near the RF null")
    return r


@dataclass(frozen=True)
class MicromotionResidual:
    """Static field at the RF null (V/m) and the static-null offset (m)."""

    residual: float
    rf_null: np.ndarray
    static_null: np.ndarray | None
    offset: np.ndarray | None

    @property
    def distance(self):
        return None if self.offset is None else float(np.linalg.norm(self.offset))


def micromotion_residual(model: FieldModel, statics, rf_null=None,
                         require_static_null: bool = True) -> MicromotionResidual:
    """Residual static field at the RF null and the offset between the nulls.

    Raises
    ------
    NullNotFound
    """
    static = statics if isinstance(statics, StaticField) else model.static(statics)
    r_rf = find_rf_null(model) if rf_null is None else np.asarray(rf_null, dtype=float)
    residual = float(np.linalg.norm(static.gradient(r_rf)))
    try:
        r_s = find_static_null(static, r_rf)
    except NullNotFound:
        if require_static_null:
            raise
        return MicromotionResidual(residual, r_rf, None, None)
    return MicromotionResidual(residual, r_rf, r_s, r_s - r_rf)


# --------------------------------------------------------------------------
# full characterization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrapCharacterization:
    """Summary of one trapping configuration (SI units).

    ``micromotion_field`` is the RF field amplitude V_RF |grad phi_RF| at the
    minimum (V/m).
    """

    r0: np.ndarray
    modes: Modes
    depth: DepthResult | None
    micromotion_field: float
    minimum: MinimumResult
    diagnostics: dict = field(default_factory=dict)

    @property
    def frequencies(self):
        return self.modes.frequencies

    @property
    def U_T(self):
        return None if self.depth is None else self.depth.depth

    def summary(self):
        d = {
            "r0_um": (self.r0 / um).tolist(),
            "height_um": float(self.r0[2] / um),
            "f_axial_MHz": self.modes.f_axial / 1e6,
            "f_perp1_MHz": self.modes.f_perp1 / 1e6,
            "f_perp2_MHz": self.modes.f_perp2 / 1e6,
            "mode_axes": self.modes.axes.tolist(),
            "micromotion_field_V_per_m": self.micromotion_field,
            "grad_norm_N": self.minimum.grad_norm,
        }
        if self.depth is not None:
            d["U_T_meV"] = self.depth.depth / meV
            d["escape_point_um"] = (self.depth.escape_point / um).tolist()
            d["grid_depth_meV"] = self.depth.grid_depth / meV
        return d


def characterize(potential, seed=None, depth: bool = True, depth_spacing: float = 3e-6,
                 depth_box=None) -> TrapCharacterization:
    """Minimum, modes, depth and RF field at the minimum.

    ``seed`` defaults to the RF null.
    """
    if seed is None:
        seed = find_rf_null(potential.model)
    mn = find_minimum(potential, seed)
    modes = normal_modes(potential, mn.r0, potential.ion)
    d = trap_depth(potential, mn.r0, spacing=depth_spacing, box=depth_box) if depth else None
    e_rf = potential.drive.vrf * float(np.linalg.norm(potential.rf.gradient(mn.r0)))
    return TrapCharacterization(mn.r0, modes, d, e_rf, mn)
