"""Builders for the bundled desk-scale models.

Two families instantiate the abstract segment: RLC networks, where the
differential is the node-branch incidence map with the grounded node
removed, and damped membranes on the unit interval/square discretized
with continuous piecewise-linear elements against piecewise constants.
All element integrals are closed form, so assembly is exact and
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complex_core import ComplexSegment, make_segment
from .errors import InvalidGraph, InvalidSpec, NotSPD
from .linalg import spd_factor


@dataclass(frozen=True)
class NetworkSpec:
    """Branch-node description of an RLC network.

    Nodes are numbered 1..n_nodes with 0 the grounded reference.  Each
    branch is a (from, to) pair of node indices.  L couples branch
    currents (self and mutual inductance, SPD), R holds per-branch series
    resistances, C per-node capacitances to ground; R and C are strictly
    positive.
    """

    n_nodes: int
    branches: tuple[tuple[int, int], ...]
    L: np.ndarray
    R: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class MembraneSpec:
    """Damped membrane on the unit interval (dimension 1) or square (2).

    n is the element count per axis (n >= 2).  rho0 (inertia), kappa
    (stiffness), and c_damp (friction) are per-element coefficients:
    scalars or arrays over the n elements (1D) / 2 n^2 triangles (2D),
    all strictly positive.
    """

    dimension: int
    n: int
    rho0: float | np.ndarray = 1.0
    kappa: float | np.ndarray = 1.0
    c_damp: float | np.ndarray = 1.0


def _connected_to_ground(n_nodes: int, branches) -> bool:
    # union-find over nodes 0..n_nodes; ground is 0
    parent = list(range(n_nodes + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in branches:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    root = find(0)
    return all(find(v) == root for v in range(1, n_nodes + 1))


def build_network(spec: NetworkSpec) -> ComplexSegment:
    """Segment of an RLC network: currents against nodal potentials.

    The incidence matrix D carries +1 at the branch tail (from-node) and
    -1 at the head, with the ground row dropped; A = L, Bm = diag(R),
    G = diag(C), M2 = identity, H = diag(1/C), K = D.

    Raises InvalidGraph for bad endpoints, self-loops, or a graph not
    connected to ground, and InvalidSpec for malformed L, R, C.
    """
    n_nodes = int(spec.n_nodes)
    branches = [(int(a), int(b)) for a, b in spec.branches]
    if n_nodes < 1:
        raise InvalidGraph(f"need at least one non-ground node, got {n_nodes}")
    if not branches:
        raise InvalidGraph("network has no branches")
    for a, b in branches:
        if not (0 <= a <= n_nodes and 0 <= b <= n_nodes):
            raise InvalidGraph(f"branch ({a}, {b}) references an unknown node")
        if a == b:
            raise InvalidGraph(f"branch ({a}, {b}) is a self-loop")
    if not _connected_to_ground(n_nodes, branches):
        raise InvalidGraph("graph is not connected to ground")

    nb = len(branches)
    L = np.asarray(spec.L, dtype=float)
    R = np.asarray(spec.R, dtype=float)
    C = np.asarray(spec.C, dtype=float)
    if L.shape != (nb, nb):
        raise InvalidSpec(f"L must be {nb}x{nb}, got {L.shape}")
    if np.max(np.abs(L - L.T), initial=0.0) != 0.0:
        raise InvalidSpec("L must be exactly symmetric")
    if R.shape != (nb,) or np.any(R <= 0):
        raise InvalidSpec(f"R must be {nb} positive values")
    if C.shape != (n_nodes,) or np.any(C <= 0):
        raise InvalidSpec(f"C must be {n_nodes} positive values")
    try:
        spd_factor(L, "L")
    except NotSPD as exc:
        raise InvalidSpec(str(exc)) from exc

    # full incidence over nodes 0..n_nodes, then drop the ground row
    D_full = np.zeros((n_nodes + 1, nb))
    for j, (a, b) in enumerate(branches):
        D_full[a, j] += 1.0
        D_full[b, j] -= 1.0
    D = D_full[1:, :]
    return make_segment(
        A=L, Bm=np.diag(R), G=np.diag(C), M2=np.eye(n_nodes), H=np.diag(1.0 / C), D=D
    )


def unit_loop() -> ComplexSegment:
    """Single branch to ground with unit L, R, C: every matrix is (1)."""
    return build_network(
        NetworkSpec(
            n_nodes=1,
            branches=((1, 0),),
            L=np.eye(1),
            R=np.ones(1),
            C=np.ones(1),
        )
    )


def random_network_spec(n_nodes: int, seed: int, extra_branches: int = 2) -> NetworkSpec:
    """Deterministic random network: a spanning structure plus chords.

    Node i attaches to a uniformly chosen earlier node (possibly ground),
    guaranteeing connectivity; ``extra_branches`` extra chords create
    loops.  L is diagonally dominant with weak symmetric mutual coupling;
    R and C are uniform in [0.5, 2].  Same (n_nodes, seed) always yields
    the same spec.
    """
    if n_nodes < 1:
        raise InvalidGraph(f"need at least one non-ground node, got {n_nodes}")
    rng = np.random.default_rng(seed)
    branches = [(i, int(rng.integers(0, i))) for i in range(1, n_nodes + 1)]
    for _ in range(extra_branches):
        a = int(rng.integers(1, n_nodes + 1))
        b = int(rng.integers(0, n_nodes + 1))
        while b == a:
            b = int(rng.integers(0, n_nodes + 1))
        branches.append((a, b))
    nb = len(branches)
    diag = rng.uniform(0.5, 2.0, nb)
    coupling = rng.uniform(-1.0, 1.0, (nb, nb))
    off = 0.02 * (coupling + coupling.T)
    np.fill_diagonal(off, 0.0)
    L = np.diag(diag) + off
    return NetworkSpec(
        n_nodes=n_nodes,
        branches=tuple(branches),
        L=L,
        R=rng.uniform(0.5, 2.0, nb),
        C=rng.uniform(0.5, 2.0, n_nodes),
    )


def _per_element(name: str, value, count: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(count, float(arr))
    if arr.shape != (count,):
        raise InvalidSpec(f"{name} must be scalar or {count} values, got shape {arr.shape}")
    if np.any(arr <= 0):
        raise InvalidSpec(f"{name} must be strictly positive")
    return arr


def build_membrane_1d(spec: MembraneSpec) -> ComplexSegment:
    """P1/P0 membrane on the unit interval with zero boundary values.

    h = 1/n.  The first space holds the n-1 interior hat functions, the
    second one constant per element.  D maps nodal values to element
    slopes; A and Bm are the rho0- and c_damp-weighted P1 mass matrices
    (element contribution coeff * h/6 * [[2,1],[1,2]]); M2 = diag(h),
    G = diag(h/kappa), H = diag(h kappa); K = M2 D has entries +-1.
    """
    if spec.dimension != 1:
        raise InvalidSpec(f"dimension must be 1, got {spec.dimension}")
    n = int(spec.n)
    if n < 2:
        raise InvalidSpec(f"need n >= 2 elements, got {n}")
    rho = _per_element("rho0", spec.rho0, n)
    kap = _per_element("kappa", spec.kappa, n)
    cd = _per_element("c_damp", spec.c_damp, n)

    h = 1.0 / n
    n1 = n - 1
    Mloc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    A = np.zeros((n1, n1))
    Bm = np.zeros((n1, n1))
    for e in range(n):
        # element e spans nodes e, e+1; interior index of node g is g-1
        idx = (e - 1, e)
        for a in range(2):
            i = idx[a]
            if not 0 <= i < n1:
                continue
            for b in range(2):
                j = idx[b]
                if not 0 <= j < n1:
                    continue
                A[i, j] += rho[e] * h * Mloc[a, b]
                Bm[i, j] += cd[e] * h * Mloc[a, b]

    D = np.zeros((n, n1))
    for e in range(n):
        if e <= n1 - 1:
            D[e, e] = 1.0 / h
        if e - 1 >= 0:
            D[e, e - 1] = -1.0 / h
    return make_segment(
        A=A, Bm=Bm, G=np.diag(h / kap), M2=np.diag(np.full(n, h)), H=np.diag(h * kap), D=D
    )


def _rot90(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def build_membrane_2d(spec: MembraneSpec) -> ComplexSegment:
    """P1/P0^2 membrane on the unit square, structured triangulation.

    Each of the n x n cells is split along its lower-left to upper-right
    diagonal; cells are ordered row-major in (ix, iy) with iy outer, the
    below-diagonal triangle first.  The second space stores two constant
    gradient components per triangle (x component first), so D is the
    exact per-triangle gradient of the interior P1 field.  M2 is the
    triangle area repeated per component; G and H scale it by 1/kappa and
    kappa.
    """
    if spec.dimension != 2:
        raise InvalidSpec(f"dimension must be 2, got {spec.dimension}")
    n = int(spec.n)
    if n < 2:
        raise InvalidSpec(f"need n >= 2 elements per axis, got {n}")
    ntri = 2 * n * n
    rho = _per_element("rho0", spec.rho0, ntri)
    kap = _per_element("kappa", spec.kappa, ntri)
    cd = _per_element("c_damp", spec.c_damp, ntri)

    h = 1.0 / n
    n1 = (n - 1) ** 2
    n2 = 2 * ntri

    def interior(ix: int, iy: int) -> int:
        if 1 <= ix <= n - 1 and 1 <= iy <= n - 1:
            return (iy - 1) * (n - 1) + (ix - 1)
        return -1

    triangles: list[tuple[tuple[int, int], ...]] = []
    for iy in range(n):
        for ix in range(n):
            va, vb = (ix, iy), (ix + 1, iy)
            vc, vd = (ix + 1, iy + 1), (ix, iy + 1)
            triangles.append((va, vb, vc))  # below the diagonal
            triangles.append((va, vc, vd))  # above the diagonal

    area = 0.5 * h * h
    Mloc = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    A = np.zeros((n1, n1))
    Bm = np.zeros((n1, n1))
    D = np.zeros((n2, n1))
    for t, tri in enumerate(triangles):
        coords = h * np.array(tri, dtype=float)
        two_area = float(np.cross(coords[1] - coords[0], coords[2] - coords[0]))
        idx = [interior(ix, iy) for ix, iy in tri]
        for a in range(3):
            i = idx[a]
            if i < 0:
                continue
            # gradient of the hat at vertex a: rotate the opposite edge
            grad = _rot90(coords[(a + 2) % 3] - coords[(a + 1) % 3]) / two_area
            D[2 * t, i] = grad[0]
            D[2 * t + 1, i] = grad[1]
            for b in range(3):
                j = idx[b]
                if j < 0:
                    continue
                A[i, j] += rho[t] * area * Mloc[a, b]
                Bm[i, j] += cd[t] * area * Mloc[a, b]

    areas2 = np.repeat(np.full(ntri, area), 2)
    kap2 = np.repeat(kap, 2)
    return make_segment(
        A=A,
        Bm=Bm,
        G=np.diag(areas2 / kap2),
        M2=np.diag(areas2),
        H=np.diag(areas2 * kap2),
        D=D,
    )


def build_membrane(spec: MembraneSpec) -> ComplexSegment:
    """Dispatch on spec.dimension."""
    if spec.dimension == 1:
        return build_membrane_1d(spec)
    if spec.dimension == 2:
        return build_membrane_2d(spec)
    raise InvalidSpec(f"dimension must be 1 or 2, got {spec.dimension}")
