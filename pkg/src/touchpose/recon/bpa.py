"""Ball-pivoting surface reconstruction.

A ball of fixed radius rests on three points whose circumscribing ball of
that radius contains no other point; from a seed triangle the ball pivots
around each front edge until it touches the next point, growing an
edge-manifold triangle fan over the cloud. Multiple radii run in
ascending order: edges that fail to pivot at one radius are retried at
the next, which fills gaps left by uneven sampling. Every output vertex
is an input point.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ReconstructionFailed
from ..mesh import TriMesh

_EMPTY_TOL = 1e-7   # relative slack for the empty-ball test
_ANGLE_TOL = 1e-9


def mean_spacing(points: np.ndarray) -> float:
    """Mean nearest-neighbor distance of the cloud."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 2:
        raise ValueError("need at least two points")
    tree = cKDTree(p)
    d, _ = tree.query(p, k=2)
    return float(d[:, 1].mean())


def default_pivot_radii(points: np.ndarray, factors=(1.5, 3.0, 6.0)) -> list:
    s = mean_spacing(points)
    return [f * s for f in factors]


def _circumcenters(a, b, c):
    """Circumcenter and squared circumradius for triangle rows (a, b, c)."""
    ab = b - a
    ac = c - a
    d11 = np.einsum("ij,ij->i", ab, ab)
    d22 = np.einsum("ij,ij->i", ac, ac)
    d12 = np.einsum("ij,ij->i", ab, ac)
    denom = 2.0 * (d11 * d22 - d12 * d12)
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = d22 * (d11 - d12) / denom
        beta = d11 * (d22 - d12) / denom
        cc = a + alpha[:, None] * ab + beta[:, None] * ac
    r2 = np.einsum("ij,ij->i", cc - a, cc - a)
    bad = ~np.isfinite(denom) | (np.abs(denom) < 1e-30)
    r2[bad] = np.inf
    return cc, r2


def _ball_centers(a, b, c, radius):
    """Both centers of radius-`radius` balls through triangle rows.

    Returns (centers_pos, centers_neg, normals, valid); invalid rows are
    degenerate triangles or circumradius beyond the ball radius.
    """
    cc, rc2 = _circumcenters(a, b, c)
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1)
    valid = (norm > 1e-30) & (rc2 <= radius * radius) & np.isfinite(rc2)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm[:, None]
        h = np.sqrt(np.maximum(radius * radius - rc2, 0.0))
    return cc + h[:, None] * n, cc - h[:, None] * n, n, valid


class _Builder:
    def __init__(self, points, normals):
        self.p = points
        self.n = normals
        self.tree = cKDTree(points)
        self.faces: list = []
        self.edge_count: dict = {}
        self.active: deque = deque()
        self.frozen: list = []
        self.used = np.zeros(len(points), dtype=bool)

    @staticmethod
    def _ekey(a, b):
        return (a, b) if a < b else (b, a)

    def _empty(self, centers, radius, touching):
        """Per center row: no point other than the touching triple inside."""
        shrunk = radius * (1.0 - _EMPTY_TOL)
        groups = self.tree.query_ball_point(centers, shrunk)
        if centers.ndim == 1:
            groups = [groups]
        out = np.zeros(len(centers) if centers.ndim == 2 else 1, dtype=bool)
        for i, grp in enumerate(groups):
            t = touching[i] if isinstance(touching, list) else touching
            out[i] = all(g in t for g in grp)
        return out

    def add_face(self, a, b, c, center, radius):
        self.faces.append((a, b, c))
        self.used[[a, b, c]] = True
        for s, t, o in ((a, b, c), (b, c, a), (c, a, b)):
            key = self._ekey(s, t)
            cnt = self.edge_count.get(key, 0) + 1
            self.edge_count[key] = cnt
            if cnt == 1:
                self.active.append((s, t, o, center, radius))

    def face_ball_center(self, s, t, o, old_center, radius):
        """Center of the radius-`radius` ball resting on face (s, t, o),
        on the same side as a previously known center."""
        a = self.p[s][None, :]
        b = self.p[t][None, :]
        c = self.p[o][None, :]
        pos, neg, nrm, valid = _ball_centers(a, b, c, radius)
        if not valid[0]:
            return None
        side = np.dot(old_center - (pos[0] + neg[0]) / 2.0, nrm[0])
        return pos[0] if side >= 0 else neg[0]

    def pivot(self, s, t, o, center, radius):
        """First point hit when the ball pivots around edge (s, t).

        Returns (index, new center) or None when no candidate works at
        this radius.
        """
        ps, pt, po = self.p[s], self.p[t], self.p[o]
        mid = (ps + pt) / 2.0
        edge = pt - ps
        elen = np.linalg.norm(edge)
        if elen < 1e-15 or elen / 2.0 >= radius:
            return None
        u = edge / elen
        v0 = center - mid
        v0 = v0 - np.dot(v0, u) * u
        v0n = np.linalg.norm(v0)
        if v0n < 1e-15:
            return None
        v0 = v0 / v0n
        # Rotation sense: the center must initially move away from the
        # old opposite vertex (the ball rolls over the edge, not back
        # through the existing triangle).
        away = (mid - po) - np.dot(mid - po, u) * u
        axis = u if np.dot(np.cross(u, v0), away) >= 0.0 else -u

        cand = self.tree.query_ball_point(mid, 2.0 * radius)
        cand = [i for i in cand if i != s and i != t and i != o]
        if not cand:
            return None
        cand = np.asarray(cand, dtype=np.int64)
        # Manifold guard: the two would-be new edges must not already
        # carry two faces.
        ok = np.array(
            [
                self.edge_count.get(self._ekey(s, x), 0) < 2
                and self.edge_count.get(self._ekey(x, t), 0) < 2
                for x in cand
            ]
        )
        # Orientation guard: face (s, x, t) must agree with vertex normals.
        px = self.p[cand]
        face_n = np.cross(px - ps, pt - ps)
        nsum = self.n[s] + self.n[t] + self.n[cand]
        ok &= np.einsum("ij,ij->i", face_n, nsum) > 0.0
        if not ok.any():
            return None
        cand = cand[ok]
        px = px[ok]

        k = len(cand)
        aa = np.broadcast_to(ps, (k, 3))
        bb = np.broadcast_to(pt, (k, 3))
        pos, neg, _, valid = _ball_centers(aa, bb, px, radius)
        centers = np.concatenate([pos, neg])
        cand2 = np.concatenate([cand, cand])
        valid2 = np.concatenate([valid, valid])
        vc = centers - mid
        vc = vc - (vc @ u)[:, None] * u
        vcn = np.linalg.norm(vc, axis=1)
        valid2 &= vcn > 1e-15
        with np.errstate(invalid="ignore", divide="ignore"):
            vc = vc / vcn[:, None]
        cosang = vc @ v0
        sinang = np.cross(np.broadcast_to(v0, vc.shape), vc) @ axis
        theta = np.arctan2(sinang, cosang)
        theta = np.where(theta < _ANGLE_TOL, theta + 2.0 * np.pi, theta)
        theta[~valid2] = np.inf

        order = np.argsort(theta)
        order = order[np.isfinite(theta[order])]
        if len(order) == 0:
            return None
        touching = [{s, t, int(cand2[i])} for i in order]
        empty = self._empty(centers[order], radius, touching)
        for rank, i in enumerate(order):
            if empty[rank]:
                return int(cand2[i]), centers[i]
        return None

    def find_seed(self, radius, start_at=0):
        """Scan unused points for a valid seed triangle at this radius."""
        n = len(self.p)
        for i in range(start_at, n):
            if self.used[i]:
                continue
            neigh = [
                j
                for j in self.tree.query_ball_point(self.p[i], 2.0 * radius)
                if j != i and not self.used[j]
            ]
            if len(neigh) < 2:
                continue
            neigh = np.asarray(neigh, dtype=np.int64)
            d = np.linalg.norm(self.p[neigh] - self.p[i], axis=1)
            neigh = neigh[np.argsort(d)][:24]
            pairs = [
                (int(neigh[a]), int(neigh[b]))
                for a in range(len(neigh))
                for b in range(a + 1, len(neigh))
            ]
            if not pairs:
                continue
            pj = np.array([p[0] for p in pairs])
            pk = np.array([p[1] for p in pairs])
            aa = np.broadcast_to(self.p[i], (len(pairs), 3))
            pos, neg, nrm, valid = _ball_centers(aa, self.p[pj], self.p[pk], radius)
            nsum = self.n[i] + self.n[pj] + self.n[pk]
            outward = np.einsum("ij,ij->i", nrm, nsum)
            centers = np.where(outward[:, None] >= 0.0, pos, neg)
            span = np.linalg.norm(self.p[pj] - self.p[i], axis=1) + np.linalg.norm(
                self.p[pk] - self.p[i], axis=1
            )
            for idx in np.argsort(span):
                if not valid[idx]:
                    continue
                j, k = pairs[idx]
                if not self._empty(centers[idx][None, :], radius, [{i, j, k}])[0]:
                    continue
                # Wind the face so its normal matches the vertex normals.
                fn = np.cross(self.p[j] - self.p[i], self.p[k] - self.p[i])
                if np.dot(fn, nsum[idx]) >= 0.0:
                    tri = (i, j, k)
                else:
                    tri = (i, k, j)
                return tri, centers[idx], i
        return None

    def run(self, radii):
        for radius in sorted(radii):
            self.active.extend(self.frozen)
            self.frozen = []
            seed_ptr = 0
            while True:
                while self.active:
                    s, t, o, center, made_r = self.active.popleft()
                    if self.edge_count.get(self._ekey(s, t), 0) >= 2:
                        continue
                    if made_r != radius:
                        center = self.face_ball_center(s, t, o, center, radius)
                        if center is None:
                            continue
                        made_r = radius
                    hit = self.pivot(s, t, o, center, radius)
                    if hit is None:
                        self.frozen.append((s, t, o, center, made_r))
                        continue
                    x, new_center = hit
                    self.add_face(s, x, t, new_center, radius)
                seed = self.find_seed(radius, seed_ptr)
                if seed is None:
                    break
                (a, b, c), center, seed_ptr = seed
                self.add_face(a, b, c, center, radius)


def ball_pivot_reconstruct(points, normals, radii) -> TriMesh:
    """Reconstruct a triangle mesh over a point cloud with normals.

    ``radii`` is a list of pivot-ball radii, processed in ascending
    order. Raises ReconstructionFailed when no triangle can be formed
    (fewer than three points, collinear input, or radii too small).
    """
    p = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
    n = np.ascontiguousarray(normals, dtype=float).reshape(-1, 3)
    if len(p) != len(n):
        raise ValueError("points and normals must have equal length")
    if len(p) < 3:
        raise ReconstructionFailed(f"need at least 3 points, got {len(p)}")
    radii = [float(r) for r in radii]
    if not radii or min(radii) <= 0.0:
        raise ValueError("pivot radii must be positive")
    builder = _Builder(p, n)
    builder.run(radii)
    if not builder.faces:
        raise ReconstructionFailed("no seed triangle found (degenerate or sparse cloud)")
    return TriMesh(p, np.asarray(builder.faces, dtype=np.int64))
