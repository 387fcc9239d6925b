"""Graph data model: edge lists, incidence structures, Laplacians and generators.

Edges are always stored in canonical orientation ``i < j`` with the +1 entry
of the corresponding incidence column at node ``i``.  The incidence structure
is kept as an index-pair array (two node indices per edge) since every column
has exactly two nonzero entries; dense matrices are only formed on request.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidInputError

#: Identifier of the seeded generator recorded in reports.
PRNG_ID = "numpy-pcg64"


def _as_pairs(pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    return pairs


@dataclass(frozen=True)
class EdgeList:
    """Undirected edge list over ``n`` nodes, 0-based, canonical ``i < j``."""

    n: int
    pairs: np.ndarray  # (m, 2) int array
    weights: np.ndarray  # (m,) float array

    def __post_init__(self):
        object.__setattr__(self, "pairs", _as_pairs(self.pairs))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", w)
        p = self.pairs
        if p.shape[0] != w.shape[0]:
            raise InvalidInputError("edge/weight count mismatch")
        if p.size and (p.min() < 0 or p.max() >= self.n):
            raise InvalidInputError("node index out of range")
        if np.any(p[:, 0] >= p[:, 1]):
            raise InvalidInputError("edges must satisfy i < j (no self-loops)")
        if len({(int(i), int(j)) for i, j in p}) != p.shape[0]:
            raise InvalidInputError("duplicate edge")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("edge weights must be finite")
        self.pairs.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def from_tuples(cls, n, edges):
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples, normalizing orientation."""
        pairs, weights = [], []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise InvalidInputError(f"self-loop at node {i}")
            if i > j:
                i, j = j, i
            pairs.append((i, j))
            weights.append(w)
        if not pairs:
            return cls(n, np.empty((0, 2), dtype=np.intp), np.empty(0))
        return cls(n, np.array(pairs, dtype=np.intp), np.array(weights))

    @property
    def m(self) -> int:
        return self.pairs.shape[0]

    def edge_set(self):
        return {(int(i), int(j)) for i, j in self.pairs}

    def laplacian(self) -> np.ndarray:
        """Weighted graph Laplacian (dense, symmetric, zero row sums)."""
        L = np.zeros((self.n, self.n))
        i, j, w = self.pairs[:, 0], self.pairs[:, 1], self.weights
        np.add.at(L, (i, i), w)
        np.add.at(L, (j, j), w)
        np.add.at(L, (i, j), -w)
        np.add.at(L, (j, i), -w)
        return L


@dataclass(frozen=True)
class IncidenceMatrix:
    """Candidate-edge incidence structure stored as index pairs.

    Column ``l`` of the (virtual) n-by-m matrix has +1 at ``pairs[l, 0]`` and
    -1 at ``pairs[l, 1]``.
    """

    n: int
    pairs: np.ndarray  # (m, 2) int array

    def __post_init__(self):
        object.__setattr__(self, "pairs", _as_pairs(self.pairs))
        p = self.pairs
        if p.size and (p.min() < 0 or p.max() >= self.n):
            raise InvalidInputError("node index out of range")
        if np.any(p[:, 0] == p[:, 1]):
            raise InvalidInputError("self-loop column")
        if len({(int(i), int(j)) for i, j in p}) != p.shape[0]:
            raise InvalidInputError("duplicate column")
        self.pairs.setflags(write=False)

    @property
    def m(self) -> int:
        return self.pairs.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize the n-by-m incidence matrix (tests and small problems)."""
        E = np.zeros((self.n, self.m))
        E[self.pairs[:, 0], np.arange(self.m)] = 1.0
        E[self.pairs[:, 1], np.arange(self.m)] = -1.0
        return E

    def restrict(self, support) -> "IncidenceMatrix":
        """Incidence structure over a subset of columns."""
        idx = np.asarray(support, dtype=np.intp)
        return IncidenceMatrix(self.n, self.pairs[idx])


def incidence_from_edges(edges: EdgeList) -> IncidenceMatrix:
    """Incidence structure of an edge list (weights are ignored)."""
    return IncidenceMatrix(edges.n, edges.pairs.copy())


def controller_laplacian(inc: IncidenceMatrix, x) -> np.ndarray:
    """Weighted Laplacian ``sum_l x_l xi_l xi_l^T`` of the controller graph."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != inc.m:
        raise InvalidInputError("weight vector length does not match edge count")
    return EdgeList(inc.n, inc.pairs, x).laplacian()


def strengthened(L: np.ndarray) -> np.ndarray:
    """Add the rank-one term ``(1/n) 11^T`` to a Laplacian."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    return L + np.full((n, n), 1.0 / n)


def try_cholesky(A: np.ndarray):
    """Lower Cholesky factor of ``A`` or None if ``A`` is not positive definite.

    Success/failure of the factorization is the feasibility test used
    throughout; no tolerance is added.
    """
    try:
        return scipy.linalg.cholesky(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None


@dataclass(frozen=True)
class ClosedLoop:
    """Closed-loop strengthened Laplacian together with its factorization."""

    G: np.ndarray
    chol: np.ndarray | None  # lower Cholesky factor, None if not PD

    @property
    def positive_definite(self) -> bool:
        return self.chol is not None

    def solve(self, B):
        """Solve ``G Z = B`` reusing the retained factorization."""
        return scipy.linalg.cho_solve((self.chol, True), B, check_finite=False)


def closed_loop(G_p: np.ndarray, inc: IncidenceMatrix, x) -> ClosedLoop:
    """Form ``G_p + E diag(x) E^T`` and attempt its factorization."""
    G = G_p + controller_laplacian(inc, x)
    return ClosedLoop(G, try_cholesky(G))


@dataclass(frozen=True)
class PlantGraph:
    """Plant Laplacian with its strengthened form and connectivity flag."""

    n: int
    edges: EdgeList
    L: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    connected: bool

    @classmethod
    def from_edges(cls, edges: EdgeList) -> "PlantGraph":
        L = edges.laplacian()
        G = strengthened(L)
        # Cholesky of the strengthened Laplacian is numerically unreliable as
        # a connectivity test (it can succeed on singular matrices), so count
        # components exactly.
        return cls(edges.n, edges, L, G, component_count(edges) == 1)


def complement_candidates(plant: EdgeList) -> EdgeList:
    """All node pairs ``i < j`` absent from the plant edge list."""
    present = plant.edge_set()
    pairs = [
        (i, j)
        for i in range(plant.n)
        for j in range(i + 1, plant.n)
        if (i, j) not in present
    ]
    return EdgeList.from_tuples(plant.n, pairs)


def generate(kind: str, n: int, p: float | None = None, seed: int = 0) -> EdgeList:
    """Benchmark plant topologies: ``path``, ``ring`` or ``erdos_renyi``.

    The Erdos-Renyi generator iterates all pairs in lexicographic order and
    draws one uniform variate per pair from a seeded PCG64 stream, so
    identical ``(kind, n, p, seed)`` always yield the identical edge list.
    """
    if n < 2:
        raise InvalidInputError("need at least two nodes")
    if kind == "path":
        return EdgeList.from_tuples(n, [(i, i + 1) for i in range(n - 1)])
    if kind == "ring":
        edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
        return EdgeList.from_tuples(n, edges)
    if kind == "erdos_renyi":
        if p is None or not 0.0 <= p <= 1.0:
            raise InvalidInputError("erdos_renyi requires 0 <= p <= 1")
        rng = np.random.Generator(np.random.PCG64(seed))
        all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        u = rng.random(len(all_pairs))
        return EdgeList.from_tuples(n, [e for e, ui in zip(all_pairs, u) if ui < p])
    raise InvalidInputError(f"unknown graph kind {kind!r}")


def random_geometric(n: int, radius: float, box: float = 10.0, seed: int = 0) -> EdgeList:
    """Random geometric graph: ``n`` seeded points in a square, edges below ``radius``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = rng.random((n, 2)) * box
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if d[i, j] <= radius]
    return EdgeList.from_tuples(n, pairs)


def component_count(edges: EdgeList) -> int:
    """Number of connected components of an edge list."""
    import scipy.sparse
    import scipy.sparse.csgraph

    i, j = edges.pairs[:, 0], edges.pairs[:, 1]
    A = scipy.sparse.coo_matrix(
        (np.ones(edges.m), (i, j)), shape=(edges.n, edges.n)
    )
    ncomp, _ = scipy.sparse.csgraph.connected_components(A, directed=False)
    return ncomp


@dataclass(frozen=True)
class Problem:
    """Immutable bundle of problem data for the edge-addition design problem.

    ``Q`` and ``R`` are node-space (n-by-n) weights; ``R`` is commonly a
    scalar multiple of the identity, which is the only case for which dual
    certificates are available.
    """

    plant: PlantGraph
    candidates: IncidenceMatrix
    Q: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    gamma: float = 0.0
    resistive: bool = False

    def __post_init__(self):
        n = self.plant.n
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if self.candidates.n != n or Q.shape != (n, n) or R.shape != (n, n):
            raise InvalidInputError("dimension mismatch in problem data")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise InvalidInputError("Q must be symmetric")
        if not np.allclose(Q @ np.ones(n), 0.0, atol=1e-10):
            raise InvalidInputError("Q must annihilate the all-ones vector")
        if try_cholesky(strengthened(Q)) is None:
            raise InvalidInputError("Q + (1/n) 11^T must be positive definite")
        if not np.allclose(R, R.T, atol=1e-12):
            raise InvalidInputError("R must be symmetric")
        if try_cholesky(R.copy()) is None:
            raise InvalidInputError("R must be positive definite")
        if self.gamma < 0:
            raise InvalidInputError("gamma must be non-negative")
        if self.resistive:
            if not self.plant.connected:
                raise InvalidInputError("resistive problems require a connected plant")
            joint = self.plant.edges.edge_set() & {
                (int(i), int(j)) for i, j in self.candidates.pairs
            }
            if joint:
                raise InvalidInputError(f"joint plant/candidate edges: {sorted(joint)[:3]}")

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def m(self) -> int:
        return self.candidates.m

    @property
    def scalar_r(self) -> float | None:
        """Return ``r`` if ``R = r I``, else None."""
        r = float(self.R[0, 0])
        if np.allclose(self.R, r * np.eye(self.n), atol=1e-12):
            return r
        return None

    def with_gamma(self, gamma: float) -> "Problem":
        return Problem(self.plant, self.candidates, self.Q, self.R, gamma, self.resistive)

    def restrict(self, support) -> "Problem":
        return Problem(
            self.plant, self.candidates.restrict(support), self.Q, self.R,
            self.gamma, self.resistive,
        )


def default_problem(
    plant_edges: EdgeList,
    candidates: EdgeList | None = None,
    gamma: float = 0.0,
    resistive: bool = False,
    q_scale: float = 1.0,
    r_scale: float = 1.0,
) -> Problem:
    """Problem with the standard weights ``Q = I - (1/n) 11^T`` and ``R = I``.

    Candidates default to the complement of the plant edge set.
    """
    n = plant_edges.n
    plant = PlantGraph.from_edges(plant_edges)
    if candidates is None:
        candidates = complement_candidates(plant_edges)
    Q = q_scale * (np.eye(n) - np.full((n, n), 1.0 / n))
    R = r_scale * np.eye(n)
    return Problem(plant, incidence_from_edges(candidates), Q, R, gamma, resistive)


# --- edge-list file format -------------------------------------------------
#
# UTF-8 text, one edge per line, "i j [w]" whitespace-separated, 0-based.
# '#' starts a comment line.  The first non-comment line may be "n <count>"
# to declare isolated nodes; otherwise n = 1 + max index.


def parse_edge_list(text: str) -> EdgeList:
    declared_n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if declared_n is None and not edges and tok[0] == "n":
            if len(tok) != 2:
                raise InvalidInputError(f"line {lineno}: malformed node-count line")
            declared_n = int(tok[1])
            continue
        if len(tok) not in (2, 3):
            raise InvalidInputError(f"line {lineno}: expected 'i j [w]'")
        try:
            i, j = int(tok[0]), int(tok[1])
            w = float(tok[2]) if len(tok) == 3 else 1.0
        except ValueError as exc:
            raise InvalidInputError(f"line {lineno}: {exc}") from exc
        edges.append((i, j, w))
    if declared_n is None:
        if not edges:
            raise InvalidInputError("empty edge list with no node count")
        declared_n = 1 + max(max(i, j) for i, j, _ in edges)
    return EdgeList.from_tuples(declared_n, edges)


def read_edge_list(path) -> EdgeList:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def format_edge_list(edges: EdgeList) -> str:
    # the node-count line is only needed when trailing nodes are isolated
    implied_n = 1 + int(edges.pairs.max()) if edges.m else 0
    lines = [] if implied_n == edges.n else [f"n {edges.n}"]
    for (i, j), w in zip(edges.pairs, edges.weights):
        if w == 1.0:
            lines.append(f"{i} {j}")
        else:
            lines.append(f"{i} {j} {w!r}")
    return "\n".join(lines) + "\n"


def write_edge_list(edges: EdgeList, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(edges))
