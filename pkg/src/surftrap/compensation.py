"""Control-voltage solves and RF amplitude fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .analysis import characterize, find_minimum, find_rf_null, modes_from_hessian, normal_modes
from .constants import MHz, meV
from .errors import (InfeasibleTarget, NoConvergence, NoMinimumFound, NonIdentifiable,
                     RankDeficient, TrapError)
from .fields import FieldModel
from .geometry import TrapLayout
from .pseudo import DriveConfig, EffectivePotential, IonSpecies

log = logging.getLogger(__name__)

#: default frequency uncertainty (Hz)
SIGMA_DEFAULT = 0.10 * MHz


@dataclass(frozen=True)
class CompensationTarget:
    """What the static voltages must achieve.

    Parameters
    ----------
    point : array_like, optional
        Where the static field must vanish; defaults to the RF null.
    f_axial : float, optional
        Target axial frequency (Hz) at ``point``.
    bounds : (float, float)
        Allowed voltage range (V) for every control electrode.
    normalization : str
        Electrode used to report fractions.
    normalization_volts : float, optional
        If set, the normalization electrode is held at this voltage and the
        remaining electrodes are solved for; otherwise all electrodes are
        free and the minimum-norm solution is returned.
    axis : array_like
        Trap axis direction.
    """

    point: np.ndarray | None = None
    f_axial: float | None = None
    bounds: tuple = (-10.0, 10.0)
    normalization: str = "DC5"
    normalization_volts: float | None = None
    axis: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        lo, hi = self.bounds
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise InfeasibleTarget("voltage bounds must be finite with lo < hi")
        if self.point is not None and not np.asarray(self.point)[2] > 0:
            raise InfeasibleTarget("target point must lie above the plane")


@dataclass(frozen=True)
class CompensationResult:
    voltages: dict
    fractions: dict
    point: np.ndarray
    residual_field: float
    f_axial: float | None
    iterations: int

    def as_dict(self):
        return {
            "voltages_volts": self.voltages,
            "fractions": self.fractions,
            "target_point_um": (self.point * 1e6).tolist(),
            "residual_field_V_per_m": self.residual_field,
            "f_axial_MHz": None if self.f_axial is None else self.f_axial / MHz,
        }


def _axial_curvature_row(model, names, point, axis):
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    return np.array([a @ model.basis(n).hessian(point) @ a for n in names])


def solve_static_voltages(layout: TrapLayout, drive: DriveConfig, ion: IonSpecies,
                          target: CompensationTarget | None = None,
                          model: FieldModel | None = None) -> CompensationResult:
    """Control voltages nulling the static field at the target point.

    Rows of the linear system are the three field components at the target
    and, when requested, the axial curvature that yields ``f_axial`` once the
    pseudopotential curvature is added. The axial eigenfrequency is matched
    exactly by iterating on the curvature target.

    Raises
    ------
    RankDeficient, InfeasibleTarget
    """
    target = target or CompensationTarget()
    model = model or FieldModel(layout)
    names = layout.control_names
    if target.normalization not in names:
        raise InfeasibleTarget(f"normalization electrode {target.normalization!r} unknown")
    point = find_rf_null(model) if target.point is None else np.asarray(target.point, float)

    G = np.array([model.basis(n).gradient(point) for n in names]).T  # (3, n)
    rows, rhs = [G], [np.zeros(3)]
    rf_term = None
    if target.f_axial is not None:
        if not target.f_axial > 0:
            raise InfeasibleTarget("target axial frequency must be positive")
        curv = _axial_curvature_row(model, names, point, target.axis)
        rows.append(ion.charge * curv[None, :])
        ep = EffectivePotential(model, model.static({}), drive, ion)
        rf_term = ep.pseudo_hessian(point)
        a = np.asarray(target.axis, float) / np.linalg.norm(target.axis)
        k_goal = ion.mass * (2 * np.pi * target.f_axial) ** 2
        rhs.append(np.array([k_goal - a @ rf_term @ a]))
    elif target.normalization_volts is None:
        raise InfeasibleTarget("need an axial frequency target or a normalization voltage")
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    # scale rows to comparable magnitude
    row_scale = np.abs(A).max(axis=1)
    row_scale[row_scale == 0] = 1.0

    def linear_solve(b_vec):
        As, bs = A / row_scale[:, None], b_vec / row_scale
        if target.normalization_volts is not None:
            j = names.index(target.normalization)
            free = [i for i in range(len(names)) if i != j]
            bs = bs - As[:, j] * target.normalization_volts
            As = As[:, free]
        s = np.linalg.svd(As, compute_uv=False)
        if len(s) < As.shape[0] or s.min() <= 1e-10 * s.max():
            raise RankDeficient("control-electrode field matrix is rank deficient")
        v, *_ = np.linalg.lstsq(As, bs, rcond=None)
        lo, hi = target.bounds
        if np.any(v < lo) or np.any(v > hi):
            res = optimize.lsq_linear(As, bs, bounds=(lo, hi), method="bvls")
            if np.linalg.norm(As @ res.x - bs) > 1e-9 * max(1.0, np.linalg.norm(bs)):
                raise InfeasibleTarget("target cannot be met within the voltage bounds")
            v = res.x
        if target.normalization_volts is not None:
            v = np.insert(v, j, target.normalization_volts)
        return v

    v = linear_solve(b)
    it = 0
    f_ax = None
    if target.f_axial is not None:
        # fixed point on the curvature target so the eigenmode, not H_xx, hits f_axial
        k_goal = b[-1]
        for it in range(1, 30):
            statics = dict(zip(names, v))
            H = ion.charge * model.static(statics).hessian(point) + rf_term
            modes = modes_from_hessian(H, ion.mass, target.axis)
            f_ax = modes.f_axial
            err = ion.mass * (2 * np.pi) ** 2 * (target.f_axial**2 - f_ax**2)
            if abs(f_ax / target.f_axial - 1) < 1e-12:
                break
            k_goal = k_goal + err
            b = b.copy()
            b[-1] = k_goal
            v = linear_solve(b)
    voltages = dict(zip(names, (float(x) for x in v)))
    vn = voltages[target.normalization]
    fractions = {n: (x / vn if vn != 0 else float("nan")) for n, x in voltages.items()}
    resid = float(np.linalg.norm(model.static(voltages).gradient(point)))
    return CompensationResult(voltages, fractions, point, resid, f_ax, it)


# --------------------------------------------------------------------------
# V_RF fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VrfFitInput:
    """Measured frequencies (Hz, ``None`` when not measured) and the static set."""

    frequencies: tuple
    statics: dict
    omega: float
    sigmas: tuple = (SIGMA_DEFAULT, SIGMA_DEFAULT, SIGMA_DEFAULT)

    def __post_init__(self):
        if len(self.frequencies) != 3 or len(self.sigmas) != 3:
            raise ValueError("frequencies and sigmas need three entries (axial, perp1, perp2)")
        for f in self.frequencies:
            if f is not None and not f > 0:
                raise ValueError("frequencies must be positive")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("uncertainties must be >= 0")

    @property
    def mask(self):
        return np.array([f is not None for f in self.frequencies])


@dataclass(frozen=True)
class VrfFit:
    vrf: float
    sigma_vrf: float
    chi2: float
    residuals: np.ndarray
    model_frequencies: np.ndarray
    covariance: np.ndarray = field(repr=False)


def model_frequencies(model: FieldModel, statics, vrf: float, omega: float, ion: IonSpecies,
                      seed=None):
    """(f_axial, f_perp1, f_perp2) in Hz and the minimum for one drive amplitude."""
    ep = EffectivePotential(model, model.static(statics), DriveConfig(vrf, omega), ion)
    if seed is None:
        seed = find_rf_null(model)
    mn = find_minimum(ep, seed)
    return normal_modes(ep, mn.r0, ion).frequencies, mn.r0


def fit_vrf(layout: TrapLayout, data: VrfFitInput, ion: IonSpecies,
            model: FieldModel | None = None, vrf_range=(1.0, 1000.0)) -> VrfFit:
    """Weighted least-squares fit of V_RF to measured mode frequencies.

    Raises
    ------
    NonIdentifiable
        If no provided frequency moves by one standard deviation when V_RF
        doubles around the best coarse-scan value.
    NoConvergence
    """
    model = model or FieldModel(layout)
    mask = data.mask
    if not mask.any():
        raise NonIdentifiable("no frequencies provided")
    meas = np.array([f if f is not None else np.nan for f in data.frequencies], float)[mask]
    sig = np.array(data.sigmas, float)[mask]
    sig = np.where(sig > 0, sig, SIGMA_DEFAULT)
    seed = find_rf_null(model)
    cache = {}

    def freqs(v):
        key = round(float(v), 12)
        if key not in cache:
            try:
                f, _ = model_frequencies(model, data.statics, v, data.omega, ion, seed)
                cache[key] = f[mask]
            except TrapError:
                cache[key] = None
        return cache[key]

    def resid(v):
        f = freqs(v)
        if f is None:
            return np.full(len(meas), 1e3)
        return (f - meas) / sig

    grid = np.geomspace(*vrf_range, 25)
    costs = [np.sum(resid(v) ** 2) for v in grid]
    v0 = grid[int(np.argmin(costs))]

    # sensitivity: change of the model over a factor-of-two change in V_RF
    f_lo, f_hi = freqs(v0 / np.sqrt(2)), freqs(v0 * np.sqrt(2))
    if f_lo is None or f_hi is None or np.max(np.abs(f_hi - f_lo) / sig) < 1.0:
        raise NonIdentifiable("provided frequencies are insensitive to V_RF")

    sol = optimize.least_squares(lambda x: resid(x[0]), [v0], x_scale=[v0],
                                 bounds=([vrf_range[0]], [vrf_range[1]]), diff_step=1e-6,
                                 xtol=1e-12, ftol=1e-12, gtol=1e-12)
    if not sol.success:
        raise NoConvergence(f"V_RF fit failed: {sol.message}")
    v = float(sol.x[0])
    J = sol.jac
    JTJ = J.T @ J
    cov = np.linalg.inv(JTJ) if np.linalg.det(JTJ) > 0 else np.full((1, 1), np.inf)
    full = np.full(3, np.nan)
    full[mask] = freqs(v)
    return VrfFit(v, float(np.sqrt(cov[0, 0])), float(np.sum(sol.fun**2)), sol.fun, full, cov)


# --------------------------------------------------------------------------
# table prediction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TableRow:
    v_scale: float
    vrf: float
    f_axial: float
    f_perp1: float
    f_perp2: float
    U_T: float | None
    r0: np.ndarray

    def as_dict(self):
        return {
            "V5_volts": self.v_scale,
            "vrf_volts": self.vrf,
            "f_axial_MHz": self.f_axial / MHz,
            "f_perp1_MHz": self.f_perp1 / MHz,
            "f_perp2_MHz": self.f_perp2 / MHz,
            "U_T_meV": None if self.U_T is None else self.U_T / meV,
            "r0_um": (self.r0 * 1e6).tolist(),
        }


def predict_table(layout: TrapLayout, configs, ion: IonSpecies, omega: float, ratios: dict,
                  model: FieldModel | None = None, depth: bool = True,
                  depth_spacing: float = 3e-6):
    """Characterize each ``(V_scale, V_RF)`` configuration.

    Control voltages are ``V_scale * ratios[name]``.
    """
    model = model or FieldModel(layout)
    rows = []
    for v_scale, vrf in configs:
        statics = {n: v_scale * r for n, r in ratios.items()}
        ep = EffectivePotential(model, model.static(statics), DriveConfig(vrf, omega), ion)
        c = characterize(ep, depth=depth, depth_spacing=depth_spacing)
        f = c.frequencies
        rows.append(TableRow(v_scale, vrf, f[0], f[1], f[2], c.U_T, c.r0))
    return rows


def format_table(rows) -> str:
    head = f"{'V5 (V)':>8} {'V_RF (V)':>9} {'f_ax (MHz)':>11} {'f_p1 (MHz)':>11} " \
           f"{'f_p2 (MHz)':>11} {'U_T (meV)':>10}"
    lines = [head]
    for r in rows:
        ut = "-" if r.U_T is None else f"{r.U_T / meV:10.1f}"
        lines.append(f"{r.v_scale:8.2f} {r.vrf:9.1f} {r.f_axial / MHz:11.2f} "
                     f"{r.f_perp1 / MHz:11.2f} {r.f_perp2 / MHz:11.2f} {ut:>10}")
    return "\n".join(lines)
