"""Directed-graph machinery for the engagement network.

Two digraphs drive the cooperative engagement: a sensing graph with the
target as a leader node (node 0) over which pursuers propagate target
information, and a leaderless actuation graph over which pursuers
exchange time-to-go for consensus. This module builds and validates the
topologies, assembles their Laplacians, and computes the spectral
quantities that set the observer and consensus gain floors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import TopologyError

logger = logging.getLogger(__name__)

# tolerance for positivity assertions, relative to matrix scale
_SPECTRAL_TOL = 1e-9


@dataclass(frozen=True)
class Topology:
    """A validated directed graph.

    ``edges`` are (source, destination) pairs: information flows from
    source to destination. When ``has_leader`` is set, node 0 is the
    leader (the target in sensing graphs) and nodes 1..n-1 are pursuers.
    """

    n_nodes: int
    edges: Tuple[Tuple[int, int], ...]
    has_leader: bool


@dataclass(frozen=True)
class LaplacianBundle:
    """Adjacency, degree, and Laplacian matrices of a Topology.

    Receiver-row convention: W[i, j] = 1 iff j is an in-neighbor of i
    (edge j -> i exists). D is the in-degree diagonal and L = D - W.
    For leader graphs, L_PP is the follower block L[1:, 1:] and L_EP is
    the leader-coupling column L[1:, 0]; both are None otherwise.
    """

    W: np.ndarray
    D: np.ndarray
    L: np.ndarray
    L_PP: Optional[np.ndarray]
    L_EP: Optional[np.ndarray]


@dataclass(frozen=True)
class SpectralData:
    """Spectral quantities behind the gain floors.

    R is the positive diagonal matrix diag((L_PP^T)^-1 1) and
    Q = R L_PP + L_PP^T R its symmetric companion; lambda1_Q is the
    smallest eigenvalue of Q. ``fiedler`` is the connectivity measure of
    an actuation graph (see mirror_fiedler) and is None when the data
    came from a sensing-graph analysis.
    """

    R: Optional[np.ndarray]
    Q: Optional[np.ndarray]
    lambda1_Q: Optional[float]
    lambda_max_R: Optional[float]
    lambda_min_R: Optional[float]
    fiedler: Optional[float] = None


def build_topology(n_nodes: int, edges: Sequence[Sequence[int]], has_leader: bool) -> Topology:
    """Validate an edge list and freeze it into a Topology.

    Rejects out-of-range indices, self-loops, and duplicate edges, and
    identifies the offending edge in the error message.
    """
    if n_nodes < 1:
        raise TopologyError(f"graph needs at least one node, got {n_nodes}")
    seen = set()
    clean = []
    for edge in edges:
        if len(edge) != 2:
            raise TopologyError(f"edge {edge!r} is not a (source, destination) pair")
        src, dst = int(edge[0]), int(edge[1])
        if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
            raise TopologyError(f"edge ({src}, {dst}) has a node index outside 0..{n_nodes - 1}")
        if src == dst:
            raise TopologyError(f"self-loop ({src}, {dst}) is not allowed")
        if (src, dst) in seen:
            raise TopologyError(f"duplicate edge ({src}, {dst})")
        seen.add((src, dst))
        clean.append((src, dst))
    return Topology(n_nodes=n_nodes, edges=tuple(clean), has_leader=bool(has_leader))


def laplacian_bundle(topo: Topology) -> LaplacianBundle:
    """Assemble W, D, L (= D - W) and, for leader graphs, the partition blocks."""
    n = topo.n_nodes
    W = np.zeros((n, n))
    for src, dst in topo.edges:
        W[dst, src] = 1.0  # row = receiver
    D = np.diag(W.sum(axis=1))
    L = D - W
    if topo.has_leader and n >= 2:
        L_PP = L[1:, 1:].copy()
        L_EP = L[1:, 0].copy()
    else:
        L_PP = None
        L_EP = None
    return LaplacianBundle(W=W, D=D, L=L, L_PP=L_PP, L_EP=L_EP)


def _out_neighbors(topo: Topology) -> list:
    adj = [[] for _ in range(topo.n_nodes)]
    for src, dst in topo.edges:
        adj[src].append(dst)
    return adj


def _reachable(adj: list, root: int, n: int) -> bool:
    seen = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        for nxt in adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == n


def has_spanning_tree(topo: Topology, root: int) -> bool:
    """True iff every node is reachable from ``root`` along directed edges."""
    if not (0 <= root < topo.n_nodes):
        raise TopologyError(f"root {root} outside 0..{topo.n_nodes - 1}")
    return _reachable(_out_neighbors(topo), root, topo.n_nodes)


def is_strongly_connected(topo: Topology) -> bool:
    """True iff every ordered node pair is mutually reachable."""
    if topo.n_nodes == 1:
        return True
    forward = _reachable(_out_neighbors(topo), 0, topo.n_nodes)
    reverse_topo = Topology(
        n_nodes=topo.n_nodes,
        edges=tuple((dst, src) for src, dst in topo.edges),
        has_leader=topo.has_leader,
    )
    backward = _reachable(_out_neighbors(reverse_topo), 0, topo.n_nodes)
    return forward and backward


def lemma3_spectra(L_PP: np.ndarray) -> SpectralData:
    """Diagonal scaling R and symmetric companion Q of a sensing-graph block.

    Solves (L_PP^T) gamma = 1 for the scaling vector, forms
    R = diag(gamma) and Q = R L_PP + L_PP^T R, and reports the extreme
    entries of R and the smallest eigenvalue of Q. A rooted sensing
    graph guarantees gamma > 0 and Q positive definite; inputs violating
    that are rejected as invalid topologies.
    """
    L_PP = np.asarray(L_PP, dtype=float)
    if L_PP.ndim != 2 or L_PP.shape[0] != L_PP.shape[1]:
        raise TopologyError(f"L_PP must be square, got shape {L_PP.shape}")
    try:
        gamma = np.linalg.solve(L_PP.T, np.ones(L_PP.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise TopologyError(
            "L_PP is singular; the sensing graph has no spanning tree rooted at the target"
        ) from exc
    scale = float(np.abs(gamma).max())
    if np.any(gamma <= _SPECTRAL_TOL * scale):
        raise TopologyError(
            "diagonal scaling has non-positive entries; the sensing graph violates "
            "the rooted-spanning-tree assumption"
        )
    R = np.diag(gamma)
    Q = R @ L_PP + L_PP.T @ R
    Q = 0.5 * (Q + Q.T)  # kill round-off asymmetry before the symmetric eigensolve
    lambda1_Q = float(np.linalg.eigvalsh(Q)[0])
    return SpectralData(
        R=R,
        Q=Q,
        lambda1_Q=lambda1_Q,
        lambda_max_R=float(gamma.max()),
        lambda_min_R=float(gamma.min()),
        fiedler=None,
    )


def mirror_fiedler(L_P: np.ndarray) -> float:
    """Connectivity measure of an actuation digraph's symmetric part.

    Returns the minimum of x^T S x / x^T x over zero-mean x, where
    S = (L_P + L_P^T)/2 is the mirror of the Laplacian. This is the
    second-smallest eigenvalue of S whenever the all-ones vector is an
    eigenvector of S (balanced digraphs); in general it is the exact
    constant lambda for which x^T S x >= lambda * ||x||^2 holds on the
    disagreement subspace, which is what the consensus gain floor needs.

    Logs a warning when the digraph is not strongly connected: the
    returned value may then be non-positive and the floor meaningless.
    """
    L_P = np.asarray(L_P, dtype=float)
    n = L_P.shape[0]
    if L_P.ndim != 2 or L_P.shape[1] != n:
        raise TopologyError(f"L_P must be square, got shape {L_P.shape}")
    if n < 2:
        raise TopologyError("mirror connectivity needs at least two nodes")

    # adjacency pattern from the off-diagonal entries, for the structure warning
    edges = [
        (j, i)
        for i in range(n)
        for j in range(n)
        if i != j and abs(L_P[i, j]) > 1e-12
    ]
    if not is_strongly_connected(Topology(n_nodes=n, edges=tuple(edges), has_leader=False)):
        logger.warning("actuation digraph is not strongly connected; mirror bound may be <= 0")

    S = 0.5 * (L_P + L_P.T)
    # orthonormal basis of the zero-mean subspace via a complete QR of the ones column
    ones = np.ones((n, 1))
    Q_full, _ = np.linalg.qr(ones, mode="complete")
    Z = Q_full[:, 1:]
    return float(np.linalg.eigvalsh(Z.T @ S @ Z)[0])


def observer_gain_floors(spec: SpectralData, A_T: np.ndarray) -> Tuple[float, float]:
    """Observer gain floors (K1_min, K2_min) from sensing-graph spectra.

    K1_min = 2 * lambda_max(R) * sigma_max(A_T) / lambda1(Q) and
    K2_min = 2 * lambda_max(R) / lambda1(Q). The Kronecker-product norm
    ||R (x) A_T||_2 factors exactly as lambda_max(R) * sigma_max(A_T)
    for diagonal positive R, so the big product is never formed.
    """
    if spec.lambda1_Q is None or spec.lambda1_Q <= 0:
        raise TopologyError("lambda1(Q) must be positive; sensing graph spectra invalid")
    sigma_max = float(np.linalg.norm(np.asarray(A_T, dtype=float), 2))
    K1_min = 2.0 * spec.lambda_max_R * sigma_max / spec.lambda1_Q
    K2_min = 2.0 * spec.lambda_max_R / spec.lambda1_Q
    return K1_min, K2_min


def controller_gain_floor(fiedler: float) -> float:
    """Consensus gain floor M2_min = 1/fiedler."""
    if fiedler <= 0:
        raise TopologyError(f"mirror connectivity must be positive, got {fiedler}")
    return 1.0 / fiedler
