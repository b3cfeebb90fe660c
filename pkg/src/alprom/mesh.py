"""Meshes, P1 finite-element assembly and L2 inner products.

Fields are plain ``numpy`` arrays holding one value per mesh node; every
routine that takes a field checks its length against the mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from itertools import product

import numpy as np
import scipy.sparse as sp

from .errors import MeshError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


def _boundary_kind(bc: str) -> str:
    kind = str(bc).strip().lower()
    if kind not in (DIRICHLET, NEUMANN):
        raise MeshError(f"unknown boundary kind {bc!r}")
    return kind


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh: segments in 1D, triangles in 2D.

    ``nodes`` has shape ``(N, dimension)`` and ``elements`` shape
    ``(n_elements, dimension + 1)``; indices are 0-based.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    boundary_kind: str = DIRICHLET

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.asarray(self.elements, dtype=np.int64)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary_nodes", np.unique(np.asarray(self.boundary_nodes, dtype=np.int64)))
        object.__setattr__(self, "boundary_kind", _boundary_kind(self.boundary_kind))
        d = nodes.shape[1]
        if d not in (1, 2):
            raise MeshError(f"dimension must be 1 or 2, got {d}")
        if elements.ndim != 2 or elements.shape[1] != d + 1:
            raise MeshError(f"{d}D mesh needs elements with {d + 1} nodes")
        if not np.all(np.isfinite(nodes)):
            raise MeshError("non-finite node coordinates")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise MeshError("element references a node index out of range")
        if np.any(element_measures(nodes, elements) <= 0.0):
            raise MeshError("element with non-positive length/area")

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def y(self) -> np.ndarray:
        if self.dimension < 2:
            raise MeshError("1D mesh has no y coordinate")
        return self.nodes[:, 1]


def element_measures(nodes, elements):
    """Signed length (1D) or signed area (2D) of every element."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    p = nodes[elements]
    if nodes.shape[1] == 1:
        return p[:, 1, 0] - p[:, 0, 0]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _facets_on_one_element(elements):
    """Node indices of facets (points in 1D, edges in 2D) owned by exactly one element."""
    k = elements.shape[1]
    if k == 2:
        facets = elements.reshape(-1, 1)
    else:
        facets = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
        facets = np.sort(facets, axis=1)
    uniq, counts = np.unique(facets, axis=0, return_counts=True)
    return uniq[counts == 1]


def boundary_from_elements(elements):
    return np.unique(_facets_on_one_element(np.asarray(elements)))


def build_interval_mesh(a: float, b: float, n_elements: int, bc: str = DIRICHLET) -> Mesh:
    if not (np.isfinite(a) and np.isfinite(b)):
        raise MeshError("interval bounds must be finite")
    if not a < b:
        raise MeshError("need a < b")
    if int(n_elements) != n_elements or n_elements < 2:
        raise MeshError("need at least 2 elements")
    n = int(n_elements)
    x = np.linspace(a, b, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(x, elements, np.array([0, n]), bc)


def _lattice_triangles(cells):
    """Triangulate lattice cells ``(i, j)``; the diagonal alternates with ``(i + j) % 2``.

    Returns triangles expressed as lattice-vertex keys ``(i, j)``.
    """
    tris = []
    for i, j in cells:
        a, b, c, d = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
        if (i + j) % 2 == 0:
            tris += [(a, b, c), (a, c, d)]
        else:
            tris += [(a, b, d), (b, c, d)]
    return tris


def _mesh_from_lattice(cells, h, origin, bc):
    tris = _lattice_triangles(sorted(cells))
    index = {}
    for tri in tris:
        for key in tri:
            if key not in index:
                index[key] = len(index)
    keys = np.array(sorted(index, key=index.get), dtype=float)
    nodes = np.asarray(origin, dtype=float) + keys * np.asarray(h, dtype=float)
    elements = np.array([[index[k] for k in tri] for tri in tris], dtype=np.int64)
    return Mesh(nodes, elements, boundary_from_elements(elements), bc)


def build_structured_rect_mesh(x_range, y_range, nx: int, ny: int, bc: str = DIRICHLET) -> Mesh:
    """Rectangle split into ``nx * ny`` cells, two right triangles each.

    Diagonals alternate in a checkerboard pattern, so every interior vertex
    sees both diagonal directions and the stiffness matrix stays an M-matrix.
    """
    (x0, x1), (y0, y1) = x_range, y_range
    if not (np.all(np.isfinite([x0, x1, y0, y1])) and x1 > x0 and y1 > y0):
        raise MeshError("rectangle extents must be finite and positive")
    if nx < 2 or ny < 2:
        raise MeshError("need nx, ny >= 2")
    cells = [(i, j) for i in range(nx) for j in range(ny)]
    h = ((x1 - x0) / nx, (y1 - y0) / ny)
    return _mesh_from_lattice(cells, h, (x0, y0), bc)


def build_rect_union_mesh(rects, cells_per_unit: int, bc: str = NEUMANN) -> Mesh:
    """Mesh a union of axis-aligned rectangles ``(x0, x1, y0, y1)``.

    Rectangle corners must sit on the lattice of spacing ``1 / cells_per_unit``.
    Overlapping rectangles are merged.
    """
    n = int(cells_per_unit)
    if n < 1:
        raise MeshError("cells_per_unit must be positive")
    cells = set()
    for rect in rects:
        lo_hi = np.asarray(rect, dtype=float) * n
        ints = np.rint(lo_hi)
        if not np.allclose(lo_hi, ints, atol=1e-9):
            raise MeshError(f"rectangle {rect} is not aligned with the 1/{n} lattice")
        i0, i1, j0, j1 = ints.astype(int)
        if i1 <= i0 or j1 <= j0:
            raise MeshError(f"degenerate rectangle {rect}")
        cells.update(product(range(i0, i1), range(j0, j1)))
    return _mesh_from_lattice(cells, (1.0 / n, 1.0 / n), (0.0, 0.0), bc)


def _parse_header(line, what):
    parts = line.split()
    if len(parts) != 2:
        raise MeshError(f"{what} header must be 'count width', got {line!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise MeshError(f"bad {what} header {line!r}") from exc


def _data_lines(text):
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def load_triangle_mesh(node_text: str, element_text: str, bc: str = NEUMANN) -> Mesh:
    """Parse the plain-text node/element format.

    Node file: ``N d`` then ``N`` lines ``index x [y]``.  Element file: ``M k``
    then ``M`` lines of ``k`` node indices.  Triangles given clockwise are
    reoriented; boundary nodes are those on edges owned by one triangle.
    """
    lines = _data_lines(node_text)
    if not lines:
        raise MeshError("empty node file")
    n, d = _parse_header(lines[0], "node")
    if d not in (1, 2) or len(lines) - 1 != n:
        raise MeshError(f"node file declares {n} nodes of dimension {d}, found {len(lines) - 1} lines")
    nodes = np.empty((n, d))
    seen = np.zeros(n, dtype=bool)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != d + 1:
            raise MeshError(f"bad node line {ln!r}")
        try:
            idx = int(parts[0])
            coords = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise MeshError(f"bad node line {ln!r}") from exc
        if not 0 <= idx < n or seen[idx]:
            raise MeshError(f"node index {idx} out of range or repeated")
        seen[idx] = True
        nodes[idx] = coords

    lines = _data_lines(element_text)
    if not lines:
        raise MeshError("empty element file")
    m, k = _parse_header(lines[0], "element")
    if k != d + 1 or len(lines) - 1 != m:
        raise MeshError(f"element file declares {m} elements of width {k}, found {len(lines) - 1} lines")
    try:
        elements = np.array([[int(p) for p in ln.split()] for ln in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise MeshError("non-integer node index in element file") from exc
    if elements.shape != (m, k):
        raise MeshError("element lines have inconsistent widths")
    if elements.min() < 0 or elements.max() >= n:
        raise MeshError("dangling node index in element file")
    meas = element_measures(nodes, elements)
    if np.any(np.abs(meas) <= 1e-14 * max(1.0, np.abs(meas).max())):
        raise MeshError("zero-area element")
    flip = meas < 0
    elements[flip] = elements[flip][:, ::-1]
    return Mesh(nodes, elements, boundary_from_elements(elements), bc)


def read_mesh_files(node_path, element_path, bc: str = NEUMANN) -> Mesh:
    with open(node_path, encoding="utf-8") as fn, open(element_path, encoding="utf-8") as fe:
        return load_triangle_mesh(fn.read(), fe.read(), bc)


def dump_mesh(mesh: Mesh) -> tuple[str, str]:
    """Inverse of :func:`load_triangle_mesh`."""
    node_lines = [f"{mesh.n_nodes} {mesh.dimension}"]
    node_lines += [" ".join([str(i)] + [repr(float(c)) for c in row]) for i, row in enumerate(mesh.nodes)]
    el_lines = [f"{mesh.n_elements} {mesh.elements.shape[1]}"]
    el_lines += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    return "\n".join(node_lines) + "\n", "\n".join(el_lines) + "\n"


def _simplex_moment(exponents, dim):
    """Integral of prod(lambda_i ** e_i) over the reference simplex of unit measure."""
    num = np.prod([factorial(e) for e in exponents])
    return num * factorial(dim) / factorial(sum(exponents) + dim)


def _p1_tensors(dim):
    k = dim + 1
    mass = np.empty((k, k))
    triple = np.empty((k, k, k))
    for i, j in product(range(k), repeat=2):
        e = np.bincount([i, j], minlength=k)
        mass[i, j] = _simplex_moment(e, dim)
    for i, j, l in product(range(k), repeat=3):
        e = np.bincount([i, j, l], minlength=k)
        triple[i, j, l] = _simplex_moment(e, dim)
    return mass, triple


def _p1_gradients(nodes, elements):
    """Gradients of the barycentric basis on each element, shape (E, k, d)."""
    p = nodes[elements]
    if nodes.shape[1] == 1:
        h = p[:, 1, 0] - p[:, 0, 0]
        g = np.stack([-1.0 / h, 1.0 / h], axis=1)
        return g[:, :, None]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    inv = np.linalg.inv(jac)
    return np.stack([-inv[:, 0] - inv[:, 1], inv[:, 0], inv[:, 1]], axis=1)


@dataclass(frozen=True, eq=False)
class FemSpace:
    """Assembled P1 space on a mesh.

    ``mass`` and ``stiffness`` are the unconstrained matrices; ``free`` lists
    the degrees of freedom kept after Dirichlet elimination (all nodes for
    Neumann meshes).
    """

    mesh: Mesh
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    lumped_mass: np.ndarray
    free: np.ndarray
    measures: np.ndarray = field(repr=False)
    _rows: np.ndarray = field(repr=False)
    _cols: np.ndarray = field(repr=False)
    _triple: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def volume(self) -> float:
        return float(self.measures.sum())

    def constrained(self, matrix):
        """Rows and columns of ``matrix`` restricted to the free dofs."""
        return matrix[self.free][:, self.free]

    def expand(self, values):
        """Scatter free-dof values (vector or columns) to full nodal length."""
        values = np.asarray(values)
        out = np.zeros((self.n_nodes,) + values.shape[1:], dtype=values.dtype)
        out[self.free] = values
        return out

    def check_field(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.n_nodes:
            raise MeshError(f"{name} has {f.shape[0]} values, mesh has {self.n_nodes} nodes")
        return f


def assemble(mesh: Mesh) -> FemSpace:
    nodes, elements = mesh.nodes, mesh.elements
    meas = element_measures(nodes, elements)
    if np.any(meas <= 0):
        raise MeshError("singular element geometry")
    k = elements.shape[1]
    mass_ref, triple_ref = _p1_tensors(mesh.dimension)
    grads = _p1_gradients(nodes, elements)
    ke = meas[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    me = meas[:, None, None] * mass_ref
    rows = np.repeat(elements, k, axis=1).ravel()
    cols = np.tile(elements, (1, k)).ravel()
    n = mesh.n_nodes
    mass = sp.csr_matrix((me.ravel(), (rows, cols)), shape=(n, n))
    stiff = sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))
    # exact symmetry; coo summation order can leave 1-ulp asymmetries
    mass = ((mass + mass.T) * 0.5).tocsr()
    stiff = ((stiff + stiff.T) * 0.5).tocsr()
    if mesh.boundary_kind == DIRICHLET:
        free = np.setdiff1d(np.arange(n), mesh.boundary_nodes)
    else:
        free = np.arange(n)
    lumped = np.asarray(mass.sum(axis=1)).ravel()
    return FemSpace(mesh, mass, stiff, lumped, free, meas, rows, cols, triple_ref)


def weighted_mass(fem: FemSpace, w) -> sp.csr_matrix:
    """Matrix of entries <w v_i, v_j> for a P1 weight ``w``, integrated exactly."""
    w = fem.check_field(w, "weight")
    el = fem.mesh.elements
    we = fem.measures[:, None, None] * np.einsum("ijl,el->eij", fem._triple, w[el])
    n = fem.n_nodes
    m = sp.csr_matrix((we.ravel(), (fem._rows, fem._cols)), shape=(n, n))
    return ((m + m.T) * 0.5).tocsr()


def l2_inner(fem: FemSpace, f, g) -> float:
    f = fem.check_field(f)
    g = fem.check_field(g)
    return float(f @ (fem.mass @ g))


def l2_norm(fem: FemSpace, f) -> float:
    return float(np.sqrt(max(l2_inner(fem, f, f), 0.0)))
