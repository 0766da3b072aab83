"""Procedural object library: exploration primitives and household shapes.

Primitives cover the surface types the explorer trains on (flat, curved,
edge, corner); the test set approximates common desk objects (bottle, can,
pitcher, cleanser bottle, mug, box) with simple generated geometry. All
meshes are centered near the origin, wound outward, and sized in meters.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def box_mesh(sx=0.06, sy=0.09, sz=0.12) -> TriMesh:
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    v = np.array(
        [
            [-hx, -hy, -hz],
            [hx, -hy, -hz],
            [hx, hy, -hz],
            [-hx, hy, -hz],
            [-hx, -hy, hz],
            [hx, -hy, hz],
            [hx, hy, hz],
            [-hx, hy, hz],
        ]
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],          # bottom (-z)
            [4, 5, 6], [4, 6, 7],          # top (+z)
            [0, 1, 5], [0, 5, 4],          # -y
            [2, 3, 7], [2, 7, 6],          # +y
            [1, 2, 6], [1, 6, 5],          # +x
            [3, 0, 4], [3, 4, 7],          # -x
        ],
        dtype=np.int64,
    )
    return TriMesh(v, f)


def lathe_mesh(radii, heights, segments=48) -> TriMesh:
    """Surface of revolution about z from a (radius, height) profile.

    Zero radii at the first/last profile row produce closed poles; other
    rows must have positive radius.
    """
    radii = np.asarray(radii, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if len(radii) != len(heights) or len(radii) < 2:
        raise ValueError("profile needs matching radius/height lists, length >= 2")
    ang = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    cos, sin = np.cos(ang), np.sin(ang)

    verts = []
    ring_index = []
    for r, h in zip(radii, heights):
        if r <= 0.0:
            ring_index.append(("pole", len(verts)))
            verts.append([0.0, 0.0, h])
        else:
            ring_index.append(("ring", len(verts)))
            for c, s in zip(cos, sin):
                verts.append([r * c, r * s, h])
    faces = []
    for (kind_a, ia), (kind_b, ib) in zip(ring_index[:-1], ring_index[1:]):
        if kind_a == "ring" and kind_b == "ring":
            for k in range(segments):
                k2 = (k + 1) % segments
                faces.append([ia + k, ia + k2, ib + k2])
                faces.append([ia + k, ib + k2, ib + k])
        elif kind_a == "pole" and kind_b == "ring":
            for k in range(segments):
                k2 = (k + 1) % segments
                faces.append([ia, ib + k2, ib + k])
        elif kind_a == "ring" and kind_b == "pole":
            for k in range(segments):
                k2 = (k + 1) % segments
                faces.append([ia + k, ia + k2, ib])
        else:
            raise ValueError("two consecutive poles in lathe profile")
    mesh = TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))
    return _recentered(mesh)


def cylinder_mesh(radius=0.035, height=0.12, segments=48) -> TriMesh:
    h = height / 2.0
    return lathe_mesh([0.0, radius, radius, 0.0], [-h, -h, h, h], segments)


def icosphere_mesh(radius=0.05, subdivisions=3) -> TriMesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [row / np.linalg.norm(row) for row in v]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    for _ in range(subdivisions):
        nxt = []
        for i, j, k in f:
            a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            nxt += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        f = nxt
    return TriMesh(np.asarray(verts) * radius, np.asarray(f, dtype=np.int64))


def wedge_mesh(leg_a=0.05, leg_b=0.08, length=0.12) -> TriMesh:
    """Right-triangular prism presenting one long sharp edge."""
    tri = np.array([[0.0, 0.0], [leg_a, 0.0], [0.0, leg_b]])
    hl = length / 2.0
    v = np.vstack(
        [
            np.column_stack([tri[:, 0], np.full(3, -hl), tri[:, 1]]),
            np.column_stack([tri[:, 0], np.full(3, hl), tri[:, 1]]),
        ]
    )
    f = np.array(
        [
            [0, 1, 2],              # -y cap
            [3, 5, 4],              # +y cap
            [0, 4, 1], [0, 3, 4],   # bottom (z=0)
            [0, 2, 5], [0, 5, 3],   # vertical (x=0)
            [1, 4, 5], [1, 5, 2],   # slanted face
        ],
        dtype=np.int64,
    )
    return _recentered(TriMesh(v, f))


def corner_mesh(lx=0.06, ly=0.08, lz=0.10) -> TriMesh:
    """Trirectangular tetrahedron: three perpendicular faces meet in a corner."""
    v = np.array(
        [
            [0.0, 0.0, 0.0],
            [lx, 0.0, 0.0],
            [0.0, ly, 0.0],
            [0.0, 0.0, lz],
        ]
    )
    f = np.array(
        [
            [0, 2, 1],
            [0, 1, 3],
            [0, 3, 2],
            [1, 2, 3],
        ],
        dtype=np.int64,
    )
    return _recentered(TriMesh(v, f))


def _recentered(mesh: TriMesh) -> TriMesh:
    lo, hi = mesh.bounds()
    return TriMesh(mesh.vertices - (lo + hi) / 2.0, mesh.faces)


def _scaled(mesh: TriMesh, sx, sy, sz) -> TriMesh:
    return TriMesh(mesh.vertices * np.array([sx, sy, sz]), mesh.faces)


def bottle_mesh() -> TriMesh:
    r = [0.0, 0.030, 0.032, 0.030, 0.016, 0.012, 0.012, 0.0]
    z = [0.0, 0.0, 0.050, 0.095, 0.120, 0.130, 0.150, 0.150]
    return lathe_mesh(r, z, segments=40)


def can_mesh() -> TriMesh:
    return cylinder_mesh(radius=0.0375, height=0.16, segments=40)


def pitcher_mesh() -> TriMesh:
    r = [0.0, 0.045, 0.055, 0.050, 0.035, 0.040, 0.0]
    z = [0.0, 0.0, 0.040, 0.110, 0.150, 0.170, 0.170]
    return lathe_mesh(r, z, segments=40)


def cleanser_mesh() -> TriMesh:
    body = lathe_mesh(
        [0.0, 0.034, 0.036, 0.032, 0.018, 0.018, 0.0],
        [0.0, 0.0, 0.060, 0.140, 0.170, 0.190, 0.190],
        segments=36,
    )
    return _recentered(_scaled(body, 1.0, 0.62, 1.0))


def mug_mesh() -> TriMesh:
    body = cylinder_mesh(radius=0.042, height=0.095, segments=36)
    # Handle: a small square-section arc welded beside the body (the
    # overlap is harmless for distance queries and sampling).
    arc = np.linspace(-0.7 * np.pi / 2, 0.7 * np.pi / 2, 7)
    cx, cz = 0.042, 0.0
    ring_r, half_w = 0.030, 0.006
    verts = []
    for a in arc:
        px = cx + ring_r * np.cos(a) * 0.8
        pz = cz + ring_r * np.sin(a)
        for dx, dy in ((-half_w, -half_w), (half_w, -half_w), (half_w, half_w), (-half_w, half_w)):
            verts.append([px + dx, dy, pz])
    faces = []
    for i in range(len(arc) - 1):
        a0, b0 = 4 * i, 4 * (i + 1)
        for k in range(4):
            k2 = (k + 1) % 4
            faces.append([a0 + k, b0 + k2, b0 + k])
            faces.append([a0 + k, a0 + k2, b0 + k2])
    for base, flip in ((0, True), (4 * (len(arc) - 1), False)):
        quad = [base, base + 1, base + 2, base + 3]
        tris = [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]]
        if flip:
            tris = [[t[0], t[2], t[1]] for t in tris]
        faces.extend(tris)
    handle = TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))
    merged_v = np.vstack([body.vertices, handle.vertices])
    merged_f = np.vstack([body.faces, handle.faces + body.num_vertices])
    return _recentered(TriMesh(merged_v, merged_f))


def sugar_box_mesh() -> TriMesh:
    return box_mesh(0.038, 0.089, 0.175)


PRIMITIVE_OBJECTS = ("cuboid", "cylinder", "sphere", "edge", "corner")
TEST_OBJECTS = ("bottle", "can", "pitcher", "cleanser", "mug", "sugar_box")

_FACTORIES = {
    "cuboid": box_mesh,
    "cylinder": cylinder_mesh,
    "sphere": icosphere_mesh,
    "edge": wedge_mesh,
    "corner": corner_mesh,
    "bottle": bottle_mesh,
    "can": can_mesh,
    "pitcher": pitcher_mesh,
    "cleanser": cleanser_mesh,
    "mug": mug_mesh,
    "sugar_box": sugar_box_mesh,
}


def object_names() -> tuple[str, ...]:
    return tuple(_FACTORIES)


def get_object(name: str) -> TriMesh:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        known = ", ".join(sorted(_FACTORIES))
        raise ValueError(f"unknown object {name!r} (known: {known})") from None
    return factory()
