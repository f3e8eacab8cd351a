"""Conforming tetrahedral meshes of axis-aligned boxes.

Boxes are split into hexahedral cells and each cell into the 6 Kuhn
tetrahedra that share its main diagonal.  Uniform refinement is red
(8 children per tetrahedron) and maps Kuhn meshes onto Kuhn meshes, so
``h`` halves exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np


class InvalidDomainError(ValueError):
    pass


class InvalidMeshError(ValueError):
    pass


# local faces (opposite vertex 0, 1, 2, 3) and edges of a tetrahedron
TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Immutable tetrahedral mesh.

    Attributes
    ----------
    vertices : (nv, 3) float array
    tets : (nt, 4) int array, every tetrahedron positively oriented
    boundary_faces : (nb, 3) int array, faces owned by exactly one tetrahedron
    h : float, the largest tetrahedron diameter
    extents : box corners ``((x0, y0, z0), (x1, y1, z1))`` or None
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    h: float
    extents: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_tets(self):
        return len(self.tets)

    def signed_volumes(self):
        return signed_volumes(self.vertices, self.tets)

    def volumes(self):
        return np.abs(self.signed_volumes())

    def volume(self):
        return float(np.sum(self.volumes()))

    def jacobians(self):
        """Affine maps from the reference tetrahedron: ``x = x0 + J xi``.

        Returns ``(x0, J, detJ, invJ)`` with shapes ``(nt, 3)``,
        ``(nt, 3, 3)``, ``(nt,)`` and ``(nt, 3, 3)``.
        """
        if "jac" not in self._cache:
            p = self.vertices[self.tets]
            x0 = p[:, 0]
            J = np.stack([p[:, 1] - x0, p[:, 2] - x0, p[:, 3] - x0], axis=2)
            det = np.linalg.det(J)
            inv = np.linalg.inv(J)
            self._cache["jac"] = (x0, J, det, inv)
        return self._cache["jac"]

    def edges(self):
        """Unique edges as sorted vertex pairs in lexicographic order, plus
        the ``(nt, 6)`` map from local to global edge index."""
        if "edges" not in self._cache:
            local = np.sort(self.tets[:, TET_EDGES], axis=2).reshape(-1, 2)
            edges, inverse = np.unique(local, axis=0, return_inverse=True)
            self._cache["edges"] = (edges, inverse.reshape(-1, 6))
        return self._cache["edges"]

    def edge_index(self, pairs):
        """Global indices of edges given as vertex pairs (any order)."""
        edges, _ = self.edges()
        pairs = np.sort(np.asarray(pairs), axis=-1)
        nv = self.num_vertices
        keys = edges[:, 0] * nv + edges[:, 1]
        query = pairs[..., 0] * nv + pairs[..., 1]
        idx = np.searchsorted(keys, query)
        if np.any(idx >= len(keys)) or np.any(keys[np.minimum(idx, len(keys) - 1)] != query):
            raise KeyError("pair is not a mesh edge")
        return idx

    def face_incidence(self):
        """Unique sorted faces and the number of tetrahedra sharing each."""
        faces = np.sort(self.tets[:, TET_FACES], axis=2).reshape(-1, 3)
        uniq, counts = np.unique(faces, axis=0, return_counts=True)
        return uniq, counts


def signed_volumes(vertices, tets):
    p = vertices[tets]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    c = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def _orient(vertices, tets):
    tets = tets.copy()
    neg = signed_volumes(vertices, tets) < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
    return tets


def _boundary_faces(tets):
    faces = np.sort(tets[:, TET_FACES], axis=2).reshape(-1, 3)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise InvalidMeshError("a face is shared by more than two tetrahedra")
    return uniq[counts == 1]


def _max_edge_lengths(vertices, tets):
    p = vertices[tets]
    d = p[:, TET_EDGES[:, 0]] - p[:, TET_EDGES[:, 1]]
    return np.sqrt(np.max(np.einsum("tek,tek->te", d, d), axis=1))


def _make_mesh(vertices, tets, extents=None):
    tets = _orient(vertices, np.asarray(tets, dtype=np.int64))
    vol = signed_volumes(vertices, tets)
    if np.any(vol <= 0):
        raise InvalidMeshError("degenerate tetrahedron")
    h = float(np.max(_max_edge_lengths(vertices, tets)))
    return TetMesh(vertices, tets, _boundary_faces(tets), h, extents)


def _check_extents(extents):
    lo, hi = (np.asarray(c, dtype=float) for c in extents)
    if lo.shape != (3,) or hi.shape != (3,):
        raise InvalidDomainError("extents must be two 3D corners")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi <= lo):
        raise InvalidDomainError(f"degenerate box {lo.tolist()} .. {hi.tolist()}")
    return lo, hi


UNIT_CUBE = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def build_box_mesh(nx, ny, nz, extents=UNIT_CUBE):
    """Kuhn-subdivided mesh of a box with ``nx * ny * nz`` hexahedral cells.

    Vertices are numbered lexicographically by grid index with ``x``
    fastest (ordering by ``(z, y, x)``).
    """
    for n in (nx, ny, nz):
        if int(n) != n or n < 1:
            raise InvalidDomainError("cell counts must be positive integers")
    nx, ny, nz = int(nx), int(ny), int(nz)
    lo, hi = _check_extents(extents)
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    zs = np.linspace(lo[2], hi[2], nz + 1)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    steps = np.eye(3, dtype=int)
    tets = []
    for perm in permutations(range(3)):
        corner = np.zeros(3, dtype=int)
        path = [vid(i, j, k)]
        for axis in perm:
            corner = corner + steps[axis]
            path.append(vid(i + corner[0], j + corner[1], k + corner[2]))
        tets.append(np.column_stack(path))
    # cell-major ordering: the 6 children of cell c are rows 6c .. 6c+5
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    return _make_mesh(vertices, tets, (tuple(lo.tolist()), tuple(hi.tolist())))


def _octahedron_split(mid, coords, tet):
    """Four inner children of a red-refined tetrahedron.

    ``mid`` maps sorted local vertex pairs to global midpoint ids.  The
    shortest octahedron diagonal is used; ties go to the diagonal whose
    endpoint edges have the lexicographically smallest global vertex pairs.
    """
    a, b, c, d = sorted(tet)
    candidates = [((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))]
    lengths = []
    for e1, e2 in candidates:
        diff = coords[mid[e1]] - coords[mid[e2]]
        lengths.append(float(diff @ diff))
    shortest = min(lengths)
    tol = 1e-12 * shortest
    best = min(
        (cand for cand, ln in zip(candidates, lengths) if ln <= shortest + tol),
        key=lambda cand: cand,
    )
    p, q = mid[best[0]], mid[best[1]]
    others = [pair for cand in candidates if cand != best for pair in cand]
    # others = [e1, opp(e1), e2, opp(e2)]; ring must alternate non-opposites
    ring = [mid[others[0]], mid[others[2]], mid[others[1]], mid[others[3]]]
    return [(p, q, ring[r], ring[(r + 1) % 4]) for r in range(4)]


def refine_uniform(mesh):
    """Red refinement: every tetrahedron is split into 8 children.

    New vertices are edge midpoints; afterwards all vertices are renumbered
    by ``(z, y, x)`` coordinate so a refined box mesh keeps the numbering
    convention of :func:`build_box_mesh`.
    """
    edges, cell_edges = mesh.edges()
    nv = mesh.num_vertices
    coords = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
    children = []
    for t, tet in enumerate(mesh.tets):
        mid = {}
        for le, ge in enumerate(cell_edges[t]):
            u, v = tet[TET_EDGES[le]]
            mid[(min(u, v), max(u, v))] = nv + ge
        m = lambda u, v: mid[(min(u, v), max(u, v))]  # noqa: E731
        a, b, c, d = tet
        children.append((a, m(a, b), m(a, c), m(a, d)))
        children.append((b, m(a, b), m(b, c), m(b, d)))
        children.append((c, m(a, c), m(b, c), m(c, d)))
        children.append((d, m(a, d), m(b, d), m(c, d)))
        children.extend(_octahedron_split(mid, coords, tet))
    children = np.array(children, dtype=np.int64)
    order = np.lexsort((coords[:, 0], coords[:, 1], coords[:, 2]))
    renumber = np.empty_like(order)
    renumber[order] = np.arange(len(order))
    return _make_mesh(coords[order], renumber[children], mesh.extents)


def mesh_size(mesh):
    """Largest element diameter (longest edge for a tetrahedron)."""
    return float(np.max(_max_edge_lengths(mesh.vertices, mesh.tets)))


def inradii(mesh):
    p = mesh.vertices[mesh.tets]
    area = np.zeros(mesh.num_tets)
    for face in TET_FACES:
        a, b, c = p[:, face[0]], p[:, face[1]], p[:, face[2]]
        area += 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    return 3.0 * mesh.volumes() / area


@dataclass(frozen=True)
class QualityReport:
    h: float
    min_diameter: float
    diameter_ratio: float
    max_shape_ratio: float
    min_shape_ratio: float
    shape_spread: float


def quality_report(mesh):
    """Quasi-uniformity and shape-regularity ratios.

    ``diameter_ratio`` is max/min element diameter; the shape ratio of an
    element is its diameter divided by its inradius; ``shape_spread`` is
    the max/min shape ratio and exceeds 1 once cells are not congruent up
    to orientation (e.g. stretched boxes).
    """
    diam = _max_edge_lengths(mesh.vertices, mesh.tets)
    shape = diam / inradii(mesh)
    return QualityReport(
        h=float(diam.max()),
        min_diameter=float(diam.min()),
        diameter_ratio=float(diam.max() / diam.min()),
        max_shape_ratio=float(shape.max()),
        min_shape_ratio=float(shape.min()),
        shape_spread=float(shape.max() / shape.min()),
    )


def check_mesh(mesh, rel_tol=1e-12):
    """Raise :class:`InvalidMeshError` unless every structural invariant holds."""
    if np.any(mesh.signed_volumes() <= 0):
        raise InvalidMeshError("non-positive tetrahedron volume")
    _, counts = mesh.face_incidence()
    if not set(np.unique(counts)) <= {1, 2}:
        raise InvalidMeshError("face incidence outside {1, 2}")
    if int(np.sum(counts == 1)) != len(mesh.boundary_faces):
        raise InvalidMeshError("boundary face table out of date")
    if mesh.extents is not None:
        lo, hi = (np.asarray(c) for c in mesh.extents)
        box = float(np.prod(hi - lo))
        if abs(mesh.volume() - box) > rel_tol * box:
            raise InvalidMeshError("tetrahedron volumes do not sum to the box volume")
    if mesh.h != mesh_size(mesh):
        raise InvalidMeshError("stored h differs from the longest edge")
    return True


def mesh_from_config(nx, ny, nz, extents=UNIT_CUBE, refine=0):
    mesh = build_box_mesh(nx, ny, nz, extents)
    for _ in range(refine):
        mesh = refine_uniform(mesh)
    return mesh
