"""Vectorized field kernels for uniformly charged / uniformly biased planar shapes.

Two families live here:

* double-layer (gapless plane) kernels: the potential above a planar
  polygon held at 1 V in an otherwise grounded plane is the subtended
  solid angle over 2*pi. Its gradient is a Biot-Savart sum over the polygon
  edges and its Hessian the analytic Jacobian of that sum.
* single-layer (charged rectangle) kernels used by the boundary element
  oracle: closed forms for the potential, gradient and Hessian of
  ``\\iint dA / |r - r'|`` over an axis-aligned rectangle in the z=0 plane.

All routines take ``points`` of shape (n, 3) and broadcast against m shapes,
returning arrays summed over the shapes.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

# target size of the (n, m) broadcast block
_BLOCK = 400_000


def _chunks(n, m):
    step = max(1, _BLOCK // max(m, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


# --------------------------------------------------------------------------
# gapless plane (solid angle) kernels
# --------------------------------------------------------------------------

def solid_angle(points, triangles):
    """Signed solid angle subtended by triangles at z=0, summed.

    ``triangles`` has shape (t, 3, 3). Counter-clockwise triangles (seen
    from +z) give positive solid angle for points with z > 0.
    """
    points = np.asarray(points, dtype=float)
    out = np.empty(len(points))
    for sl in _chunks(len(points), len(triangles)):
        p = points[sl, None, :]
        r1 = triangles[None, :, 0, :] - p
        r2 = triangles[None, :, 1, :] - p
        r3 = triangles[None, :, 2, :] - p
        n1 = np.linalg.norm(r1, axis=-1)
        n2 = np.linalg.norm(r2, axis=-1)
        n3 = np.linalg.norm(r3, axis=-1)
        triple = np.einsum("ntk,ntk->nt", r1, np.cross(r2, r3))
        den = (n1 * n2 * n3
               + np.einsum("ntk,ntk->nt", r1, r2) * n3
               + np.einsum("ntk,ntk->nt", r1, r3) * n2
               + np.einsum("ntk,ntk->nt", r2, r3) * n1)
        # triple < 0 for a CCW triangle below the point
        out[sl] = (-2.0 * np.arctan2(triple, den)).sum(axis=1)
    return out


def _edge_geometry(p, a, t, length):
    e = p - a
    c = np.einsum("nmk,mk->nm", e, t)
    rho = e - c[..., None] * t
    rho2 = np.einsum("nmk,nmk->nm", rho, rho)
    d = a + length[:, None] * t - p  # B - P
    nd = np.linalg.norm(d, axis=-1)
    ne = np.linalg.norm(e, axis=-1)
    g = (length - c) / nd + c / ne
    return e, c, rho, rho2, d, nd, ne, g


def solid_angle_gradient(points, starts, tangents, lengths):
    """Gradient of the summed solid angle for closed edge loops.

    Each edge runs from ``starts[j]`` along unit ``tangents[j]`` for
    ``lengths[j]``. The loops must be closed and CCW seen from +z.
    """
    points = np.asarray(points, dtype=float)
    out = np.empty((len(points), 3))
    for sl in _chunks(len(points), len(starts)):
        p = points[sl, None, :]
        _, _, rho, rho2, _, _, _, g = _edge_geometry(p, starts, tangents, lengths)
        txr = np.cross(tangents[None, :, :], rho)
        out[sl] = -(txr * (g / rho2)[..., None]).sum(axis=1)
    return out


def solid_angle_hessian(points, starts, tangents, lengths):
    """Hessian of the summed solid angle (analytic Jacobian of the edge sum)."""
    points = np.asarray(points, dtype=float)
    out = np.empty((len(points), 3, 3))
    t = tangents
    tx = np.zeros((len(t), 3, 3))
    tx[:, 0, 1], tx[:, 0, 2] = -t[:, 2], t[:, 1]
    tx[:, 1, 0], tx[:, 1, 2] = t[:, 2], -t[:, 0]
    tx[:, 2, 0], tx[:, 2, 1] = -t[:, 1], t[:, 0]
    for sl in _chunks(len(points), 3 * len(starts)):
        p = points[sl, None, :]
        e, c, rho, rho2, d, nd, ne, g = _edge_geometry(p, starts, t, lengths)
        dc = lengths - c  # (B - P).t
        grad_g = (-t[None] / nd[..., None] + (dc / nd**3)[..., None] * d
                  + t[None] / ne[..., None] - (c / ne**3)[..., None] * e)
        txr = np.cross(t[None, :, :], rho)
        jac = ((g / rho2)[..., None, None] * tx[None]
               - (2.0 * g / rho2**2)[..., None, None]
               * txr[..., :, None] * rho[..., None, :]
               + txr[..., :, None] * grad_g[..., None, :] / rho2[..., None, None])
        out[sl] = -jac.sum(axis=1)
    return out


# --------------------------------------------------------------------------
# charged rectangle kernels (boundary element oracle)
# --------------------------------------------------------------------------

def _safe_log_plus(v, r, u2z2):
    # log(v + R) without cancellation when v < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log(np.where(v >= 0, v + r, 1.0))
        neg = np.log(np.where(v < 0, u2z2, 1.0)) - np.log(np.where(v < 0, r - v, 1.0))
    return np.where(v >= 0, pos, neg)


def _corner_F(u, v, z):
    r = np.sqrt(u * u + v * v + z * z)
    lv = _safe_log_plus(v, r, u * u + z * z)
    lu = _safe_log_plus(u, r, v * v + z * z)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = (np.where(u == 0, 0.0, u * lv) + np.where(v == 0, 0.0, v * lu))
        at = np.where(z == 0, 0.0, z * np.arctan(u * v / np.where(z == 0, 1.0, z * r)))
    return f - at


def _corner_grad(u, v, z):
    """(dF/du, dF/dv, dF/dz) for one corner."""
    r = np.sqrt(u * u + v * v + z * z)
    lv = _safe_log_plus(v, r, u * u + z * z)
    lu = _safe_log_plus(u, r, v * v + z * z)
    with np.errstate(invalid="ignore", divide="ignore"):
        fz = -np.arctan(u * v / np.where(z == 0, 1.0, z * r))
    fz = np.where(z == 0, 0.0, fz)
    return lv, lu, fz


def _corner_hess(u, v, z):
    r = np.sqrt(u * u + v * v + z * z)
    uz = u * u + z * z
    vz = v * v + z * z
    # 1/(R (v+R)) = (R - v)/(R (u^2+z^2)); the rewrite is stable for v < 0
    inv_vr = np.where(v >= 0, 1.0 / (r * (v + r)), (r - v) / (r * uz))
    inv_ur = np.where(u >= 0, 1.0 / (r * (u + r)), (r - u) / (r * vz))
    fuu = u * inv_vr
    fvv = v * inv_ur
    fuv = 1.0 / r
    fuz = z * inv_vr
    fvz = z * inv_ur
    fzz = u * v * (r * r + z * z) / (r * uz * vz)
    return fuu, fvv, fzz, fuv, fuz, fvz


def _rect_corners(points, rects):
    # u = x' - x at the four corners, with inclusion-exclusion signs
    p = points[:, None, :]
    x1, x2, y1, y2 = (rects[None, :, k] for k in range(4))
    z = p[..., 2] + 0.0 * x1
    corners = []
    for xs, ys, sgn in ((x2, y2, 1.0), (x1, y2, -1.0), (x2, y1, -1.0), (x1, y1, 1.0)):
        corners.append((xs - p[..., 0], ys - p[..., 1], z, sgn))
    return corners


def rect_potential_matrix(points, rects):
    """Matrix M[i, j] = \\iint_{rect j} dA / |p_i - r'| (meters)."""
    points = np.asarray(points, dtype=float)
    out = np.empty((len(points), len(rects)))
    for sl in _chunks(len(points), len(rects)):
        acc = 0.0
        for u, v, z, sgn in _rect_corners(points[sl], rects):
            acc = acc + sgn * _corner_F(u, v, np.abs(z))
        out[sl] = acc
    return out


def rect_potential(points, rects, density):
    points = np.asarray(points, dtype=float)
    out = np.empty(len(points))
    for sl in _chunks(len(points), len(rects)):
        acc = 0.0
        for u, v, z, sgn in _rect_corners(points[sl], rects):
            acc = acc + sgn * _corner_F(u, v, np.abs(z))
        out[sl] = acc @ density
    return out


def rect_gradient(points, rects, density):
    """Gradient with respect to the field point (z > 0 assumed)."""
    points = np.asarray(points, dtype=float)
    out = np.empty((len(points), 3))
    for sl in _chunks(len(points), len(rects)):
        gx = gy = gz = 0.0
        for u, v, z, sgn in _rect_corners(points[sl], rects):
            fu, fv, fz = _corner_grad(u, v, z)
            # u = x' - x, v = y' - y: d/dx = -d/du
            gx = gx - sgn * fu
            gy = gy - sgn * fv
            gz = gz + sgn * fz
        out[sl, 0] = gx @ density
        out[sl, 1] = gy @ density
        out[sl, 2] = gz @ density
    return out


def rect_hessian(points, rects, density):
    points = np.asarray(points, dtype=float)
    out = np.empty((len(points), 3, 3))
    for sl in _chunks(len(points), 2 * len(rects)):
        hxx = hyy = hzz = hxy = hxz = hyz = 0.0
        for u, v, z, sgn in _rect_corners(points[sl], rects):
            fuu, fvv, fzz, fuv, fuz, fvz = _corner_hess(u, v, z)
            hxx = hxx + sgn * fuu
            hyy = hyy + sgn * fvv
            hzz = hzz + sgn * fzz
            hxy = hxy + sgn * fuv
            hxz = hxz - sgn * fuz
            hyz = hyz - sgn * fvz
        block = out[sl]
        block[:, 0, 0] = hxx @ density
        block[:, 1, 1] = hyy @ density
        block[:, 2, 2] = hzz @ density
        block[:, 0, 1] = block[:, 1, 0] = hxy @ density
        block[:, 0, 2] = block[:, 2, 0] = hxz @ density
        block[:, 1, 2] = block[:, 2, 1] = hyz @ density
    return out
