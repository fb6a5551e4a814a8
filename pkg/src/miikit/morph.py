"""Landmark morphing: boundary points, Delaunay mesh, piecewise-affine warps, blend.

Images are float arrays (h, w, 3) in [0, 1]; pixel (row y, column x) sits at
the point (x, y). Warping is inverse: each destination pixel inside a mesh
triangle is pulled from the source through that triangle's affine map and
sampled bilinearly with edge clamping. Where triangles share an edge, the
later triangle in mesh order wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollinearError, ContractError, DegenerateTriangleError

MIN_AREA = 1e-9
_INSIDE_TOL = -1e-9
N_FACIAL = 68
N_BOUNDARY = 20


def add_boundary_landmarks(l68, w: int, h: int) -> np.ndarray:
    """Append 20 border points, clockwise from the top-left corner.

    Top edge 6 points (both corners), right edge 4 interior points, bottom
    edge 6 points (right to left, both corners), left edge 4 interior points.
    """
    l68 = np.asarray(l68, dtype=np.float64)
    if l68.shape != (N_FACIAL, 2):
        raise ContractError(f"expected 68 landmarks, got shape {l68.shape}")
    xs = np.linspace(0.0, w - 1, 6)
    ys = np.linspace(0.0, h - 1, 6)
    top = np.stack([xs, np.zeros(6)], axis=1)
    right = np.stack([np.full(4, w - 1.0), ys[1:-1]], axis=1)
    bottom = np.stack([xs[::-1], np.full(6, h - 1.0)], axis=1)
    left = np.stack([np.zeros(4), ys[1:-1][::-1]], axis=1)
    return np.concatenate([l68, top, right, bottom, left])


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (t, 3), counter-clockwise in (x, y)


def _signed_area(a, b, c) -> np.ndarray:
    return 0.5 * ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                  - (c[..., 0] - a[..., 0]) * (b[..., 1] - a[..., 1]))


def _incircle(a, b, c, d) -> float:
    """Positive when d lies inside the circumcircle of the CCW triangle abc."""
    m = np.array([[a[0] - d[0], a[1] - d[1]], [b[0] - d[0], b[1] - d[1]],
                  [c[0] - d[0], c[1] - d[1]]])
    sq = (m ** 2).sum(axis=1)
    return float(m[0, 0] * (m[1, 1] * sq[2] - sq[1] * m[2, 1])
                 - m[0, 1] * (m[1, 0] * sq[2] - sq[1] * m[2, 0])
                 + sq[0] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


def _apply_tie_rule(pts, tris, scale):
    """Flip cocircular quads to the diagonal with the lexicographically smaller vertex pair."""
    tol = 1e-9 * scale ** 4
    tris = [list(t) for t in tris]
    for _ in range(4 * len(tris) + 4):
        edges: dict[tuple[int, int], list[int]] = {}
        for ti, t in enumerate(tris):
            for k in range(3):
                e = tuple(sorted((t[k], t[(k + 1) % 3])))
                edges.setdefault(e, []).append(ti)
        flipped = False
        for e in sorted(edges):
            owners = edges[e]
            if len(owners) != 2:
                continue
            t1, t2 = tris[owners[0]], tris[owners[1]]
            a = next(v for v in t1 if v not in e)
            b = next(v for v in t2 if v not in e)
            other = tuple(sorted((a, b)))
            if other >= e:
                continue
            tri = t1 if _signed_area(*pts[t1]) > 0 else t1[::-1]
            if abs(_incircle(*pts[tri], pts[b])) > tol:
                continue
            # the new diagonal must split the quad into two proper triangles
            n1, n2 = [a, b, e[0]], [a, b, e[1]]
            if abs(_signed_area(*pts[n1])) <= MIN_AREA or abs(_signed_area(*pts[n2])) <= MIN_AREA:
                continue
            if np.sign(_signed_area(*pts[n1])) == np.sign(_signed_area(*pts[n2])):
                continue
            tris[owners[0]], tris[owners[1]] = n1, n2
            flipped = True
            break
        if not flipped:
            break
    return np.array(tris, dtype=np.int64)


def delaunay(points) -> TriangleMesh:
    """Delaunay triangulation with a deterministic rule for cocircular ties."""
    from scipy.spatial import Delaunay, QhullError

    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ContractError("need at least 3 two-dimensional points")
    centered = pts - pts.mean(axis=0)
    scale = float(np.abs(centered).max())
    if scale == 0 or np.linalg.svd(centered, compute_uv=False)[1] <= 1e-12 * scale * len(pts):
        raise CollinearError("points are collinear")
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise CollinearError(str(exc)) from exc
    tris = tri.simplices.astype(np.int64)
    tris = _apply_tie_rule(pts, tris, scale)
    area = _signed_area(pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]])
    tris[area < 0] = tris[area < 0][:, ::-1]
    tris = tris[np.abs(area) > MIN_AREA]
    # canonical order: rotate each triangle to start at its smallest index, then sort
    roll = np.argmin(tris, axis=1)
    tris = np.stack([np.roll(t, -r) for t, r in zip(tris, roll)])
    tris = tris[np.lexsort(tris.T[::-1])]
    return TriangleMesh(pts, tris)


def affine_from_triangles(src, dst) -> np.ndarray:
    """2x3 matrix M with M @ [x, y, 1] mapping each src vertex onto its dst vertex."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    for t in (src, dst):
        if t.shape != (3, 2):
            raise ContractError("triangles must be 3x2")
    if abs(_signed_area(*dst)) <= MIN_AREA:
        raise DegenerateTriangleError(f"degenerate triangle {dst.tolist()}")
    return _solve_affine(src, dst)


def _solve_affine(src, dst) -> np.ndarray:
    # only src must be proper; a collapsed dst is a valid (singular) map
    if abs(_signed_area(*src)) <= MIN_AREA:
        raise DegenerateTriangleError(f"degenerate triangle {src.tolist()}")
    A = np.hstack([src, np.ones((3, 1))])
    return np.linalg.solve(A, dst).T


def bilinear_sample(img, x, y) -> np.ndarray:
    """Sample img at real coordinates, clamping to the image edge."""
    h, w = img.shape[:2]
    x = np.clip(x, 0.0, w - 1)
    y = np.clip(y, 0.0, h - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractError(f"expected an (h, w, 3) image, got shape {img.shape}")
    return img


def warp_to_mean(img, src_lms, dst_lms, mesh: TriangleMesh) -> np.ndarray:
    """Warp img so that src_lms land on dst_lms, triangle by triangle over ``mesh``."""
    img = _check_image(img)
    src_lms = np.asarray(src_lms, dtype=np.float64)
    dst_lms = np.asarray(dst_lms, dtype=np.float64)
    if src_lms.shape != dst_lms.shape:
        raise ContractError("landmark sets differ in length")
    h, w = img.shape[:2]
    out = img.copy()
    for t in mesh.triangles:
        d = dst_lms[t]
        # pulls from the source; the source triangle may legitimately collapse
        M = _solve_affine(d, src_lms[t])
        x_lo, y_lo = np.maximum(np.floor(d.min(axis=0)), 0).astype(int)
        x_hi = min(int(np.ceil(d[:, 0].max())), w - 1)
        y_hi = min(int(np.ceil(d[:, 1].max())), h - 1)
        if x_hi < x_lo or y_hi < y_lo:
            continue
        ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
        xs = xs.ravel().astype(np.float64)
        ys = ys.ravel().astype(np.float64)
        inside = _barycentric_inside(d, xs, ys)
        if not inside.any():
            continue
        xs, ys = xs[inside], ys[inside]
        sx = M[0, 0] * xs + M[0, 1] * ys + M[0, 2]
        sy = M[1, 0] * xs + M[1, 1] * ys + M[1, 2]
        out[ys.astype(int), xs.astype(int)] = bilinear_sample(img, sx, sy)
    return np.clip(out, 0.0, 1.0)


def _barycentric_inside(tri, xs, ys) -> np.ndarray:
    (x1, y1), (x2, y2), (x3, y3) = tri
    det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    l1 = ((y2 - y3) * (xs - x3) + (x3 - x2) * (ys - y3)) / det
    l2 = ((y3 - y1) * (xs - x3) + (x1 - x3) * (ys - y3)) / det
    l3 = 1.0 - l1 - l2
    return (l1 >= _INSIDE_TOL) & (l2 >= _INSIDE_TOL) & (l3 >= _INSIDE_TOL)


def _full_landmarks(lms, w, h) -> np.ndarray:
    lms = np.asarray(lms, dtype=np.float64)
    if lms.shape == (N_FACIAL, 2):
        return add_boundary_landmarks(lms, w, h)
    if lms.shape == (N_FACIAL + N_BOUNDARY, 2):
        return lms
    raise ContractError(f"expected 68 or 88 landmarks, got shape {lms.shape}")


def morph(p_img, p_lms, q_img, q_lms, alpha: float = 0.5) -> np.ndarray:
    """Blend two faces at landmark weight alpha (0 returns p, 1 returns q)."""
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must lie in [0, 1], got {alpha}")
    p_img, q_img = _check_image(p_img), _check_image(q_img)
    if p_img.shape != q_img.shape:
        raise ContractError(f"image shapes differ: {p_img.shape} vs {q_img.shape}")
    h, w = p_img.shape[:2]
    lp, lq = _full_landmarks(p_lms, w, h), _full_landmarks(q_lms, w, h)
    mean = (1 - alpha) * lp + alpha * lq
    mesh = delaunay(mean)
    wp = warp_to_mean(p_img, lp, mean, mesh)
    wq = warp_to_mean(q_img, lq, mean, mesh)
    return np.clip((1 - alpha) * wp + alpha * wq, 0.0, 1.0)
