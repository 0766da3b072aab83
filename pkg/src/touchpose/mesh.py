"""Triangle meshes, contact clouds, surface sampling, and proximity queries.

Meshes are value types: vertex and face arrays are frozen after
construction so instances can be shared freely between workers. Face
normals always come from the winding order (counter-clockwise seen from
outside).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParseError
from .geometry import RigidTransform, _readonly

_BRUTE_FACE_LIMIT = 256


def _triangle_normals_areas(vertices, faces):
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    cross = np.cross(b - a, c - a)
    norms = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norms
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = cross / norms[:, None]
    return normals, areas


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray = field(default=None, repr=False)
    face_areas: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        normals, areas = _triangle_normals_areas(v, f)
        if len(f) and areas.min() <= 0.0:
            raise ValueError("mesh contains a degenerate (zero-area) face")
        f_ro = np.ascontiguousarray(f)
        f_ro.setflags(write=False)
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", f_ro)
        object.__setattr__(self, "face_normals", _readonly(normals))
        object.__setattr__(self, "face_areas", _readonly(areas))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    def triangle_corners(self):
        """(a, b, c) vertex arrays, one row per face."""
        return (
            self.vertices[self.faces[:, 0]],
            self.vertices[self.faces[:, 1]],
            self.vertices[self.faces[:, 2]],
        )

    def face_centroids(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        return (a + b + c) / 3.0

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, t: RigidTransform) -> "TriMesh":
        return TriMesh(t.apply(self.vertices), self.faces)


@dataclass(frozen=True)
class ContactCloud:
    """Accumulated contact points with outward surface normals.

    ``steps`` records the episode step index at which each point was
    collected; the three arrays always have equal length.
    """

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        p = np.ascontiguousarray(self.points, dtype=float).reshape(-1, 3)
        n = np.ascontiguousarray(self.normals, dtype=float).reshape(-1, 3)
        s = np.ascontiguousarray(self.steps, dtype=np.int64).reshape(-1)
        if not (len(p) == len(n) == len(s)):
            raise ValueError("points, normals, and steps must have equal length")
        s.setflags(write=False)
        object.__setattr__(self, "points", _readonly(p))
        object.__setattr__(self, "normals", _readonly(n))
        object.__setattr__(self, "steps", s)

    def __len__(self) -> int:
        return len(self.points)

    def extended(self, points, normals, step: int) -> "ContactCloud":
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        n = np.asarray(normals, dtype=float).reshape(-1, 3)
        s = np.full(len(p), step, dtype=np.int64)
        return ContactCloud(
            np.vstack([self.points, p]),
            np.vstack([self.normals, n]),
            np.concatenate([self.steps, s]),
        )


def closest_on_triangles(p, a, b, c):
    """Closest point on each triangle (a, b, c) to each query p, pairwise.

    All inputs are (n, 3) and are matched row by row. Vectorized form of
    the classic Voronoi-region walk (Ericson, Real-Time Collision
    Detection, 5.1.5).
    """
    p = np.asarray(p, dtype=float)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def settle(mask, value):
        actual = mask & ~done
        if actual.any():
            out[actual] = value[actual] if value.ndim == 2 else value
            done[actual] = True

    settle((d1 <= 0) & (d2 <= 0), a)
    settle((d3 >= 0) & (d4 <= d3), b)
    with np.errstate(invalid="ignore", divide="ignore"):
        v_ab = d1 / (d1 - d3)
        settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v_ab[:, None] * ab)
        settle((d6 >= 0) & (d5 <= d6), c)
        w_ac = d2 / (d2 - d6)
        settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w_ac[:, None] * ac)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        settle(
            (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
            b + w_bc[:, None] * (c - b),
        )
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        inner = a + v[:, None] * ab + w[:, None] * ac
    settle(np.ones(len(p), dtype=bool), inner)
    return out


def closest_point_on_mesh(q, mesh: TriMesh):
    """Exact closest surface point and distance for a single query point."""
    if mesh.num_faces == 0:
        raise ValueError("mesh has no faces")
    q = np.asarray(q, dtype=float).reshape(3)
    a, b, c = mesh.triangle_corners()
    qq = np.broadcast_to(q, a.shape)
    cand = closest_on_triangles(qq, a, b, c)
    d2 = np.einsum("ij,ij->i", cand - q, cand - q)
    i = int(np.argmin(d2))
    return cand[i].copy(), float(np.sqrt(d2[i]))


class MeshProximity:
    """Batched distance and closest-point queries against one mesh.

    Candidate (point, face) pairs come from a KD-tree over face centroids
    (brute force for small meshes) and are then screened with a cheap
    per-face AABB distance bound, so the exact triangle test only runs on
    pairs that can actually be close.
    """

    def __init__(self, mesh: TriMesh):
        if mesh.num_faces == 0:
            raise ValueError("mesh has no faces")
        self.mesh = mesh
        self._a, self._b, self._c = mesh.triangle_corners()
        self._centroids = mesh.face_centroids()
        stacked = np.stack([self._a, self._b, self._c])
        self._lo = stacked.min(axis=0)
        self._hi = stacked.max(axis=0)
        self._mesh_lo = self._lo.min(axis=0)
        self._mesh_hi = self._hi.max(axis=0)
        reach = np.linalg.norm(
            np.stack([self._a, self._b, self._c]) - self._centroids, axis=2
        ).max(axis=0)
        self._max_reach = float(reach.max())
        self._brute = mesh.num_faces <= _BRUTE_FACE_LIMIT
        self._tree = None if self._brute else cKDTree(self._centroids)

    def _candidate_pairs(self, points, radius):
        """(row, face) pairs that can be closer than ``radius``.

        Points beyond the whole-mesh bounding box are dropped first, then
        per-face AABB distance bounds screen the remaining pairs.
        """
        n = len(points)
        r2 = radius * radius
        gap = np.maximum(self._mesh_lo - points, 0.0) + np.maximum(points - self._mesh_hi, 0.0)
        near = np.flatnonzero(np.einsum("ij,ij->i", gap, gap) < r2)
        if len(near) == 0:
            return near, near
        p = points[near]
        if self._brute:
            d = np.maximum(self._lo[None, :, :] - p[:, None, :], 0.0)
            d += np.maximum(p[:, None, :] - self._hi[None, :, :], 0.0)
            lb2 = np.einsum("nmj,nmj->nm", d, d)
            sub_rows, cols = np.nonzero(lb2 < r2)
            return near[sub_rows], cols
        groups = self._tree.query_ball_point(p, radius + self._max_reach)
        lengths = np.fromiter((len(g) for g in groups), dtype=np.int64, count=len(p))
        rows = np.repeat(near, lengths)
        if lengths.sum() == 0:
            return rows, rows
        cols = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups])
        d = np.maximum(self._lo[cols] - points[rows], 0.0)
        d += np.maximum(points[rows] - self._hi[cols], 0.0)
        keep = np.einsum("ij,ij->i", d, d) < r2
        return rows[keep], cols[keep]

    def within(self, points, radius: float) -> np.ndarray:
        """True per query point when the surface is closer than ``radius``."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        hit = np.zeros(len(points), dtype=bool)
        if len(points) == 0:
            return hit
        rows, cols = self._candidate_pairs(points, radius)
        if not len(rows):
            return hit
        cand = closest_on_triangles(points[rows], self._a[cols], self._b[cols], self._c[cols])
        diff = cand - points[rows]
        close = np.einsum("ij,ij->i", diff, diff) < radius * radius
        hit[rows[close]] = True
        return hit

    def closest(self, points):
        """(closest points, distances, face indices) for each query row."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        n = len(points)
        if n == 0:
            return np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=np.int64)
        if self._brute:
            rows = np.repeat(np.arange(n), self.mesh.num_faces)
            cols = np.tile(np.arange(self.mesh.num_faces), n)
        else:
            # A ball around the nearest centroid is guaranteed to contain
            # the true closest face once padded by twice the max reach.
            d_near, _ = self._tree.query(points, k=1)
            groups = self._tree.query_ball_point(points, d_near + 2.0 * self._max_reach)
            lengths = np.fromiter((len(g) for g in groups), dtype=np.int64, count=n)
            rows = np.repeat(np.arange(n), lengths)
            cols = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups])
        cand = closest_on_triangles(points[rows], self._a[cols], self._b[cols], self._c[cols])
        diff = cand - points[rows]
        d2 = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((d2, rows))
        _, first = np.unique(rows[order], return_index=True)
        sel = order[first]
        out_p = cand[sel]
        out_d = np.sqrt(d2[sel])
        out_f = cols[sel]
        return out_p, out_d, out_f.astype(np.int64)


def sample_mesh_surface(mesh: TriMesh, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted uniform surface sample; normals from containing faces.

    ``seed`` may be an int or a numpy Generator. Deterministic for a fixed
    seed.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    if mesh.num_faces == 0:
        raise ValueError("cannot sample an empty mesh")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = mesh.face_areas / mesh.face_areas.sum()
    which = rng.choice(mesh.num_faces, size=n, p=probs)
    a, b, c = mesh.triangle_corners()
    a, b, c = a[which], b[which], c[which]
    # sqrt trick for uniform barycentric coordinates
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    pts = (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    return pts, mesh.face_normals[which].copy()


def sample_contact_cloud(mesh: TriMesh, n: int, seed, step: int = 0) -> ContactCloud:
    pts, nrm = sample_mesh_surface(mesh, n, seed)
    return ContactCloud(pts, nrm, np.full(n, step, dtype=np.int64))


# ---------------------------------------------------------------------------
# File formats: OBJ meshes and ASCII PLY contact clouds.

_FMT = "%.9g"


def load_mesh(path) -> TriMesh:
    """Read an ASCII OBJ mesh (v/f records; polygons are fan-triangulated).

    Normals are always recomputed from winding. Zero-area faces are
    dropped. Raises ParseError with the line number on malformed input.
    """
    vertices = []
    raw_faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("vertex needs 3 coordinates", lineno, path)
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError:
                    raise ParseError("bad vertex coordinate", lineno, path) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise ParseError("face needs at least 3 vertices", lineno, path)
                idx = []
                for token in parts[1:]:
                    head = token.split("/", 1)[0]
                    try:
                        k = int(head)
                    except ValueError:
                        raise ParseError(f"bad face index {token!r}", lineno, path) from None
                    if k == 0:
                        raise ParseError("face index 0 (OBJ indices are 1-based)", lineno, path)
                    idx.append(k - 1 if k > 0 else len(vertices) + k)
                for second, third in zip(idx[1:-1], idx[2:]):
                    raw_faces.append((idx[0], second, third))
            # Any other record type (vn, vt, o, g, s, usemtl, ...) is ignored.
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    f = np.asarray(raw_faces, dtype=np.int64).reshape(-1, 3)
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError("face index out of range", None, path)
    if len(f):
        _, areas = _triangle_normals_areas(v, f)
        f = f[areas > 0.0]
    return TriMesh(v, f)


def save_mesh(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write("v " + " ".join(_FMT % x for x in v) + "\n")
        for f in mesh.faces:
            fh.write("f %d %d %d\n" % (f[0] + 1, f[1] + 1, f[2] + 1))


def save_cloud(cloud: ContactCloud, path) -> None:
    """ASCII PLY with x y z nx ny nz plus the collection step per point."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(cloud)}\n")
        for name in ("x", "y", "z", "nx", "ny", "nz"):
            fh.write(f"property double {name}\n")
        fh.write("property int step\n")
        fh.write("end_header\n")
        for p, n, s in zip(cloud.points, cloud.normals, cloud.steps):
            row = list(p) + list(n)
            fh.write(" ".join(_FMT % x for x in row) + " %d\n" % s)


def load_cloud(path) -> ContactCloud:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1, path)
    count = None
    props = []
    body_at = None
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise ParseError("only ascii PLY is supported", i, path)
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise ParseError(f"unsupported element {parts[1]!r}", i, path)
            try:
                count = int(parts[2])
            except (IndexError, ValueError):
                raise ParseError("bad element count", i, path) from None
        elif parts[0] == "property":
            if len(parts) != 3:
                raise ParseError("bad property line", i, path)
            props.append(parts[2])
        elif parts[0] == "end_header":
            body_at = i
            break
    if count is None or body_at is None:
        raise ParseError("incomplete PLY header", len(lines), path)
    for needed in ("x", "y", "z", "nx", "ny", "nz"):
        if needed not in props:
            raise ParseError(f"missing property {needed!r}", body_at, path)
    cols = {name: k for k, name in enumerate(props)}
    rows = []
    for i, line in enumerate(lines[body_at:], start=body_at + 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != len(props):
            raise ParseError("wrong number of values", i, path)
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise ParseError("bad numeric value", i, path) from None
    if len(rows) != count:
        raise ParseError(f"expected {count} rows, found {len(rows)}", len(lines), path)
    data = np.asarray(rows, dtype=float).reshape(-1, len(props))
    pts = data[:, [cols["x"], cols["y"], cols["z"]]]
    nrm = data[:, [cols["nx"], cols["ny"], cols["nz"]]]
    steps = (
        data[:, cols["step"]].astype(np.int64)
        if "step" in cols
        else np.zeros(len(data), dtype=np.int64)
    )
    return ContactCloud(pts, nrm, steps)
