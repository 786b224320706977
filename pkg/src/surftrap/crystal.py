"""Equilibrium configurations of small ion crystals.

Energies are minimized in natural units: lengths in
l = (q^2 / (4 pi eps0 m w_ax^2))^(1/3) and energies in m w_ax^2 l^2, where
w_ax is the axial angular frequency. A linear chain is the trivial stationary
point; past the zig-zag transition it turns into a saddle, so every solve is
also started from a chain staggered along the softest transverse axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .constants import epsilon_0
from .errors import NoConvergence, RangeExhausted, UnconfinedDirection

ZIGZAG_THRESHOLD = 1e-9  # m
STAGGER = 10e-9  # m
MIN_SEPARATION = 10e-9  # m
GRAD_TOL = 1e-22  # N per ion


@dataclass(frozen=True)
class HarmonicModel:
    """Harmonic well with mode frequencies (Hz) along orthonormal ``axes``.

    ``axes`` rows are the axial, transverse-1 and transverse-2 directions.
    """

    frequencies: tuple
    axes: np.ndarray = field(default_factory=lambda: np.eye(3))
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.shape != (3,):
            raise ValueError("need three frequencies (axial, perp1, perp2)")
        if np.any(~(f > 0)):
            raise UnconfinedDirection("all harmonic frequencies must be positive")
        object.__setattr__(self, "frequencies", tuple(f))
        object.__setattr__(self, "axes", np.asarray(self.axes, dtype=float))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    tag = "harmonic"

    @property
    def f_axial(self):
        return self.frequencies[0]

    def stiffness(self, mass):
        """Spring-constant matrix (J/m^2)."""
        w2 = (2 * np.pi * np.asarray(self.frequencies)) ** 2
        return mass * self.axes.T @ np.diag(w2) @ self.axes

    @property
    def soft_axis(self):
        i = 1 if self.frequencies[1] <= self.frequencies[2] else 2
        return self.axes[i], ("perp1" if i == 1 else "perp2")


class TrapModel:
    """Full effective potential (``EffectivePotential``) around the minimum ``r0``."""

    tag = "full"

    def __init__(self, potential, r0):
        from .analysis import normal_modes

        self.potential = potential
        self.center = np.asarray(r0, dtype=float)
        modes = normal_modes(potential, self.center, potential.ion)
        self.frequencies = tuple(modes.frequencies)
        self.axes = modes.axes

    @property
    def f_axial(self):
        return self.frequencies[0]

    @property
    def soft_axis(self):
        i = 1 if self.frequencies[1] <= self.frequencies[2] else 2
        return self.axes[i], ("perp1" if i == 1 else "perp2")


@dataclass(frozen=True)
class CrystalConfig:
    """Equilibrium of N ions.

    Attributes
    ----------
    positions : ndarray, shape (N, 3)
        Meters.
    model : str
        "harmonic" or "full".
    energy : float
        Total energy (J) including Coulomb repulsion.
    grad_norm : float
        Largest per-ion force magnitude at the solution (N).
    axes : ndarray
        Model axes (axial, perp1, perp2) used for classification.
    center : ndarray
    """

    positions: np.ndarray
    model: str
    energy: float
    grad_norm: float
    axes: np.ndarray
    center: np.ndarray
    seed_kind: str = "linear"

    @property
    def n(self):
        return len(self.positions)

    def transverse_offsets(self):
        d = self.positions - self.positions.mean(axis=0)
        return d @ self.axes[1:].T

    @property
    def transverse_extent(self):
        """Largest distance of an ion from the axial line through the charge center."""
        return float(np.max(np.linalg.norm(self.transverse_offsets(), axis=1)))

    @property
    def is_zigzag(self):
        return self.transverse_extent > ZIGZAG_THRESHOLD


# --------------------------------------------------------------------------
# energy in natural units
# --------------------------------------------------------------------------

def length_scale(charge, mass, f_axial):
    w = 2 * np.pi * f_axial
    return (charge**2 / (4 * np.pi * epsilon_0 * mass * w**2)) ** (1.0 / 3.0)


def _coulomb(x):
    p = x.reshape(-1, 3)
    n = len(p)
    d = p[:, None, :] - p[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, 1.0)
    r = np.sqrt(r2)
    inv = 1.0 / r
    np.fill_diagonal(inv, 0.0)
    e = 0.5 * inv.sum()
    inv3 = inv**3
    g = -(d * inv3[..., None]).sum(axis=1)
    # Hessian blocks: for i != j, d^2(1/r)/dxi dxj = (I r^2 - 3 d d^T)/r^5
    inv5 = inv3 * inv * inv
    blocks = (np.eye(3)[None, None] * inv3[..., None, None]
              - 3 * d[..., :, None] * d[..., None, :] * inv5[..., None, None])
    H = np.zeros((n, 3, n, 3))
    for i in range(n):
        for j in range(n):
            if i != j:
                H[i, :, j, :] = blocks[i, j]
        H[i, :, i, :] = -blocks[i].sum(axis=0)
    return e, g.ravel(), H.reshape(3 * n, 3 * n)


class _Objective:
    """Dimensionless energy with gradient and Hessian for one trap model."""

    def __init__(self, model, ion):
        self.model = model
        self.ion = ion
        self.ell = length_scale(ion.charge, ion.mass, model.f_axial)
        self.e_unit = ion.mass * (2 * np.pi * model.f_axial) ** 2 * self.ell**2
        self.center = np.asarray(model.center, dtype=float)
        if isinstance(model, HarmonicModel):
            self.K = model.stiffness(ion.mass) * self.ell**2 / self.e_unit
        else:
            self.K = None

    def to_si(self, x):
        return self.center + x.reshape(-1, 3) * self.ell

    def trap(self, x):
        p = x.reshape(-1, 3)
        if self.K is not None:
            e = 0.5 * np.einsum("ni,ij,nj->", p, self.K, p)
            g = p @ self.K
            H = np.kron(np.eye(len(p)), self.K)
            return e, g.ravel(), H
        pot = self.model.potential
        r = self.to_si(x)
        u0 = pot.energy(self.center)
        e = (np.sum(pot.energy(r)) - len(p) * u0) / self.e_unit
        g = pot.gradient(r) * self.ell / self.e_unit
        hb = pot.hessian(r) * self.ell**2 / self.e_unit
        H = np.zeros((3 * len(p), 3 * len(p)))
        for i in range(len(p)):
            H[3 * i:3 * i + 3, 3 * i:3 * i + 3] = hb[i]
        return e, g.ravel(), H

    def all(self, x):
        et, gt, Ht = self.trap(x)
        ec, gc, Hc = _coulomb(x)
        return et + ec, gt + gc, Ht + Hc


def _solve(obj, x0, max_iter=2000):
    cache = {}

    def ev(x):
        k = x.tobytes()
        if k not in cache:
            cache.clear()
            cache[k] = obj.all(x)
        return cache[k]

    res = optimize.minimize(lambda x: ev(x)[0], x0, jac=lambda x: ev(x)[1],
                            hess=lambda x: ev(x)[2], method="trust-exact",
                            options=dict(gtol=1e-11, maxiter=max_iter))
    x = res.x
    # Newton polish
    for _ in range(5):
        e, g, H = obj.all(x)
        if np.max(np.abs(g)) < 1e-13:
            break
        lam = np.linalg.eigvalsh(H)
        if lam.min() <= 0:
            break
        x = x - np.linalg.solve(H, g)
    e, g, H = obj.all(x)
    return x, e, g


def _chain_1d(n):
    """Dimensionless equilibrium of a linear chain in a unit axial well."""
    if n == 1:
        return np.zeros(1)
    z0 = np.linspace(-1, 1, n) * (1.0 + 0.9 * n**0.56)

    def f(z):
        d = z[:, None] - z[None, :]
        a = np.abs(d)
        np.fill_diagonal(a, np.inf)
        return 0.5 * z @ z + 0.5 * np.sum(1.0 / a)

    def g(z):
        d = z[:, None] - z[None, :]
        a = np.abs(d)
        np.fill_diagonal(a, np.inf)
        return z - np.sum(np.sign(d) / a**2, axis=1)

    res = optimize.minimize(f, z0, jac=g, method="BFGS", options=dict(gtol=1e-12))
    return np.sort(res.x)


def equilibrium(model, n: int, ion, rng: np.random.Generator | None = None,
                restarts: int = 0) -> CrystalConfig:
    """Minimum-energy configuration of ``n`` ions.

    Parameters
    ----------
    model : HarmonicModel or TrapModel
    n : int
        Number of ions (>= 1).
    ion : IonSpecies
    rng : numpy.random.Generator, optional
        Source for extra randomized restarts.
    restarts : int
        Additional restarts with random 10 nm transverse jitter.

    Raises
    ------
    NoConvergence, UnconfinedDirection
    """
    if n < 1:
        raise ValueError("need at least one ion")
    if isinstance(model, TrapModel) and min(model.frequencies) <= 0:
        raise UnconfinedDirection("trap model has a non-positive curvature")
    obj = _Objective(model, ion)
    axes = np.asarray(model.axes)
    soft, _ = model.soft_axis
    chain = _chain_1d(n)
    base = np.outer(chain, axes[0])
    stagger = STAGGER / obj.ell
    seeds = [("linear", base.ravel())]
    if n > 1:
        alt = (-1.0) ** np.arange(n)
        seeds.append(("staggered", (base + stagger * np.outer(alt, soft)).ravel()))
    rng = rng or np.random.default_rng(0)
    for k in range(restarts):
        jitter = rng.normal(scale=stagger, size=(n, 2)) @ axes[1:]
        seeds.append((f"random{k}", (base + jitter).ravel()))

    best = None
    for kind, x0 in seeds:
        x, e, g = _solve(obj, x0)
        if best is None or e < best[1] - 1e-12 * abs(best[1]):
            best = (x, e, g, kind)
    x, e, g, kind = best
    gmax = float(np.max(np.linalg.norm(g.reshape(-1, 3), axis=1)) * obj.e_unit / obj.ell)
    if not gmax < GRAD_TOL:
        raise NoConvergence(f"crystal solve stopped at force {gmax:.3g} N")
    pos = obj.to_si(x)
    if n > 1:
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1) + np.eye(n)
        if d.min() < MIN_SEPARATION:
            raise NoConvergence("ions collapsed below the collision guard")
    return CrystalConfig(pos, model.tag, float(e * obj.e_unit), gmax, axes,
                         np.asarray(model.center, dtype=float), kind)


def linear_chain_energy(model, n: int, ion) -> float | None:
    """Energy (J) of the linear stationary chain, or None if it is not stationary."""
    obj = _Objective(model, ion)
    x0 = np.outer(_chain_1d(n), np.asarray(model.axes)[0]).ravel()
    # constrain to the axis by solving in one dimension
    a = np.asarray(model.axes)[0]

    def f1(z):
        return obj.all(np.outer(z, a).ravel())[0]

    def g1(z):
        return obj.all(np.outer(z, a).ravel())[1].reshape(-1, 3) @ a

    res = optimize.minimize(f1, x0.reshape(-1, 3) @ a, jac=g1, method="BFGS",
                            options=dict(gtol=1e-12))
    e, g, _ = obj.all(np.outer(res.x, a).ravel())
    if np.max(np.abs(g)) > 1e-8:
        return None
    return float(e * obj.e_unit)


def separations(config: CrystalConfig) -> np.ndarray:
    """Distances (m) between neighbours in axial order."""
    if config.n < 2:
        raise ValueError("need at least two ions")
    order = np.argsort(config.positions @ config.axes[0])
    p = config.positions[order]
    return np.linalg.norm(np.diff(p, axis=0), axis=1)


def two_ion_separation(charge, mass, f_axial):
    """Closed-form separation of two ions in a harmonic axial well (m)."""
    w = 2 * np.pi * f_axial
    return 2.0 * (charge**2 / (16 * np.pi * epsilon_0 * mass * w**2)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class ZigzagReport:
    """Classification of chains over a range of ion numbers.

    ``extents[N]`` is the transverse extent (m) of the N-ion minimizer and
    ``n_crit`` the smallest N classified as zig-zag.
    """

    extents: dict
    zigzag: dict
    soft_axis: str
    n_crit: int

    @property
    def is_zigzag(self):
        return self.zigzag[max(self.zigzag)]

    @property
    def transverse_extent(self):
        return self.extents[max(self.extents)]


def zigzag_analysis(frequencies, ion, n_range=(2, 30), stop_at_first: bool = True) -> ZigzagReport:
    """Scan ion numbers and find the smallest one whose minimizer is zig-zag.

    Parameters
    ----------
    frequencies : (f_axial, f_perp1, f_perp2)
        Hz, with f_axial < f_perp1 <= f_perp2.
    n_range : (int, int)
        Inclusive range of ion numbers.

    Raises
    ------
    RangeExhausted
    """
    f = tuple(float(x) for x in frequencies)
    if not (0 < f[0] < f[1] <= f[2]):
        raise ValueError("need 0 < f_axial < f_perp1 <= f_perp2")
    model = HarmonicModel(f)
    _, soft_name = model.soft_axis
    extents, zz = {}, {}
    n_crit = None
    for n in range(max(2, n_range[0]), n_range[1] + 1):
        cfg = equilibrium(model, n, ion)
        extents[n] = cfg.transverse_extent
        zz[n] = cfg.is_zigzag
        if zz[n] and n_crit is None:
            n_crit = n
            if stop_at_first:
                break
    if n_crit is None:
        raise RangeExhausted(f"no zig-zag configuration for N in {tuple(n_range)}")
    return ZigzagReport(extents, zz, soft_name, n_crit)
