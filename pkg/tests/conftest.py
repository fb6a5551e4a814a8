"""Shared brute-force oracles and the acceptance summary hook.

The oracles are deliberately naive (explicit loops, no shared helpers with
the library) so agreement means something.
"""

import math

import numpy as np
import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}  {detail}")


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- metric oracles -----------------------------------------------------------------

def oracle_threshold(neg, far_target):
    """Largest observed value v with #{x < v} / n <= far_target, by full scan."""
    n = len(neg)
    best = None
    for v in neg:
        below = sum(1 for x in neg if x < v)
        if below / n <= far_target and (best is None or v > best):
            best = v
    return best


def oracle_auroc(pos, neg):
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p < q:
                wins += 1
            elif p == q:
                ties += 1
    return (2 * wins + ties) / (2 * len(pos) * len(neg))


def oracle_gallery_search(G, p, q):
    """(index, value) minimizing max angle, scanning every member; first index wins ties."""
    best_i, best_v = -1, math.inf
    for i, g in enumerate(G):
        gp = min(1.0, max(-1.0, sum(float(a) * float(b) for a, b in zip(g, p))))
        gq = min(1.0, max(-1.0, sum(float(a) * float(b) for a, b in zip(g, q))))
        v = max(math.acos(gp), math.acos(gq))
        if v < best_v:
            best_i, best_v = i, v
    return best_i, best_v


# -- geometry oracles ---------------------------------------------------------------

def circumcircle(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    return (ux, uy), math.hypot(ax - ux, ay - uy)


def empty_circumcircle_violations(points, triangles, tol=1e-7):
    bad = []
    pts = [tuple(map(float, p)) for p in points]
    for t in triangles:
        (ux, uy), r = circumcircle(*(pts[i] for i in t))
        for j, (x, y) in enumerate(pts):
            if j in t:
                continue
            if math.hypot(x - ux, y - uy) < r - tol:
                bad.append((tuple(t), j))
    return bad


def _bilinear_px(img, x, y):
    h, w = img.shape[:2]
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * img[y0, x0] + fx * (1 - fy) * img[y0, x1]
            + (1 - fx) * fy * img[y1, x0] + fx * fy * img[y1, x1])


def oracle_warp(img, src, dst, triangles):
    """Per-pixel inverse warp: barycentric weights in dst, same weights applied to src."""
    h, w = img.shape[:2]
    out = np.array(img, dtype=np.float64, copy=True)
    for y in range(h):
        for x in range(w):
            hit = None
            for t in triangles:
                (x1, y1), (x2, y2), (x3, y3) = (tuple(map(float, dst[i])) for i in t)
                den = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
                l1 = ((y2 - y3) * (x - x3) + (x3 - x2) * (y - y3)) / den
                l2 = ((y3 - y1) * (x - x3) + (x1 - x3) * (y - y3)) / den
                l3 = 1.0 - l1 - l2
                if min(l1, l2, l3) >= -1e-9:
                    hit = (t, (l1, l2, l3))
            if hit is None:
                continue
            t, lam = hit
            sx = sum(l * float(src[i][0]) for l, i in zip(lam, t))
            sy = sum(l * float(src[i][1]) for l, i in zip(lam, t))
            out[y, x] = _bilinear_px(img, sx, sy)
    return np.clip(out, 0.0, 1.0)


def oracle_morph(p_img, p_lms, q_img, q_lms, alpha, triangles):
    """Blend of two oracle warps onto the alpha-mean landmarks over the given mesh."""
    mean = [((1 - alpha) * a[0] + alpha * b[0], (1 - alpha) * a[1] + alpha * b[1])
            for a, b in zip(p_lms, q_lms)]
    wp = oracle_warp(p_img, p_lms, mean, triangles)
    wq = oracle_warp(q_img, q_lms, mean, triangles)
    return np.clip((1 - alpha) * wp + alpha * wq, 0.0, 1.0)
