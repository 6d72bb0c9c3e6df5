"""Graph-alignment benchmark instances and evaluation metrics.

An instance is a connected Erdos-Renyi graph, a hidden node permutation
applied to a copy of it, independent edge flips as structural noise, and the
two normalized all-pairs shortest-path matrices used as GW costs.  Solvers
see only the cost matrices and uniform marginals; the hidden permutation
provides ground truth for the alignment accuracy of a recovered coupling.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from ._backend import assignment_min_core
from .gw_core import CostMatrix, Marginals, gw_energy, marginal_residual

__all__ = [
    "AlignmentInstance",
    "MetricsRecord",
    "gen_er_connected",
    "permute_graph",
    "flip_noise",
    "apsp_normalized",
    "make_instance",
    "instance_seed",
    "hungarian_round",
    "permutation_accuracy",
    "evaluate",
    "save_instance",
    "load_instance",
    "InstanceFormatError",
]

RESAMPLE_CAP = 1000
INSTANCE_MAGIC = b"GWAI1"


@dataclass(frozen=True)
class AlignmentInstance:
    """Generated graph pair with ground truth and derived GW problem data."""

    adjacency_1: np.ndarray
    adjacency_2: np.ndarray
    perm_true: np.ndarray
    c1: CostMatrix
    c2: CostMatrix
    p: Marginals
    q: Marginals
    n: int
    p_edge: float
    eta: float
    seed: int


@dataclass(frozen=True)
class MetricsRecord:
    """Solver-run metrics of one benchmark cell."""

    loss: float
    sparsity: float
    feasibility: float
    accuracy: float
    time_s: float
    iters: int
    status: str


def _is_connected(adj):
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nxt = []
        for node in frontier:
            for nb in np.flatnonzero(adj[node]):
                if not seen[nb]:
                    seen[nb] = True
                    nxt.append(nb)
        frontier = nxt
    return bool(seen.all())


def _sample_er(n, p_edge, rng):
    upper = rng.random((n, n)) < p_edge
    adj = np.zeros((n, n), dtype=np.float64)
    iu = np.triu_indices(n, k=1)
    adj[iu] = upper[iu]
    adj += adj.T
    return adj


def gen_er_connected(n, p_edge, rng):
    """Sample a connected Erdos-Renyi graph, resampling when disconnected.

    Returns a symmetric 0/1 adjacency matrix with zero diagonal.  Raises
    RuntimeError when 1000 attempts all come out disconnected (the edge
    probability is too small for this size).
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if not 0.0 < p_edge < 1.0:
        raise ValueError("edge probability must lie strictly between 0 and 1")
    rng = np.random.default_rng(rng)
    for _ in range(RESAMPLE_CAP):
        adj = _sample_er(n, p_edge, rng)
        if _is_connected(adj):
            return adj
    raise RuntimeError(
        f"no connected graph in {RESAMPLE_CAP} attempts (n={n}, p_edge={p_edge})"
    )


def permute_graph(adj, perm):
    """Relabel nodes: node i of the input becomes node perm[i] of the output."""
    adj = np.asarray(adj)
    n = adj.shape[0]
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("perm is not a bijection on the node indices")
    out = np.empty_like(adj)
    out[np.ix_(perm, perm)] = adj
    return out


def flip_noise(adj, eta, rng):
    """Complement each off-diagonal edge independently with probability eta.

    Symmetry and the zero diagonal are preserved; the noisy graph is
    regenerated (up to 1000 times) until connected.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("flip probability must lie in [0, 1)")
    adj = np.asarray(adj, dtype=np.float64)
    rng = np.random.default_rng(rng)
    if eta == 0.0:
        return adj.copy()
    n = adj.shape[0]
    iu = np.triu_indices(n, k=1)
    for _ in range(RESAMPLE_CAP):
        flips = rng.random(iu[0].shape[0]) < eta
        noisy = np.zeros_like(adj)
        noisy[iu] = np.where(flips, 1.0 - adj[iu], adj[iu])
        noisy += noisy.T
        if _is_connected(noisy):
            return noisy
    raise RuntimeError(f"no connected noisy graph in {RESAMPLE_CAP} attempts (eta={eta})")


def apsp_normalized(adj):
    """All-pairs shortest-path hop distances divided by their maximum.

    Level-synchronous BFS from all sources at once (one boolean matrix
    product per distance level).  Raises ValueError on disconnected input.
    """
    adj = np.asarray(adj, dtype=np.float64)
    n = adj.shape[0]
    dist = np.zeros((n, n), dtype=np.float64)
    reached = np.eye(n, dtype=bool)
    frontier = reached.copy()
    level = 0
    while not reached.all():
        level += 1
        if level > n:
            raise ValueError("graph is disconnected: unreachable node pairs remain")
        frontier = (frontier.astype(np.float64) @ adj) > 0
        new = frontier & ~reached
        if not new.any():
            raise ValueError("graph is disconnected: unreachable node pairs remain")
        dist[new] = level
        reached |= new
    dist /= dist.max()
    return CostMatrix.from_entries(dist)


def instance_seed(base_seed, index):
    """Derived 64-bit instance seed: splittable hash of (base seed, index)."""
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1, np.uint64)[0])


def make_instance(n, p_edge, eta, seed):
    """Generate one alignment instance, deterministic in ``seed``.

    Pipeline: connected ER graph, hidden random permutation, edge-flip noise
    on the permuted copy, then normalized shortest-path cost matrices for
    both graphs.  Marginals are uniform.
    """
    rng = np.random.default_rng(seed)
    a1 = gen_er_connected(n, p_edge, rng)
    perm = rng.permutation(n)
    a2_clean = permute_graph(a1, perm)
    a2 = flip_noise(a2_clean, eta, rng)
    return AlignmentInstance(
        adjacency_1=a1,
        adjacency_2=a2,
        perm_true=perm.astype(np.int64),
        c1=apsp_normalized(a1),
        c2=apsp_normalized(a2),
        p=Marginals.uniform(n),
        q=Marginals.uniform(n),
        n=n,
        p_edge=float(p_edge),
        eta=float(eta),
        seed=int(seed),
    )


def hungarian_round(pi):
    """Permutation maximizing sum_i pi[i, sigma(i)] (Hungarian rounding).

    Solved as a minimum-cost assignment on the negated coupling with an
    O(n^3) augmenting-path method.  Ties break toward the smallest column
    index, so a constant coupling rounds to the identity.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise ValueError(f"Hungarian rounding needs a square coupling, got {pi.shape}")
    return assignment_min_core(np.ascontiguousarray(-pi))


def permutation_accuracy(sigma_pred, perm_true):
    """Fraction of nodes assigned to their ground-truth image."""
    sigma_pred = np.asarray(sigma_pred)
    perm_true = np.asarray(perm_true)
    return float(np.mean(sigma_pred == perm_true))


def evaluate(pi, instance, elapsed_s, iters, status, zero_threshold=0.0):
    """Compute the benchmark metrics of a returned coupling.

    Loss is the full GW energy; sparsity counts exact floating-point zeros
    (projections onto the orthant produce them, entropic scalings never do)
    unless a positive ``zero_threshold`` is given; feasibility is
    ||pi 1 - p||_2 + ||pi^T 1 - q||_2; accuracy compares the
    Hungarian-rounded permutation with the hidden one.
    """
    pi = np.asarray(pi, dtype=np.float64)
    n, m = pi.shape
    p = instance.p.weights
    q = instance.q.weights
    loss = gw_energy(pi, instance.c1.entries, instance.c2.entries, p, q)
    if zero_threshold > 0.0:
        zeros = int(np.count_nonzero(np.abs(pi) <= zero_threshold))
    else:
        zeros = pi.size - int(np.count_nonzero(pi))
    feas = float(np.linalg.norm(pi.sum(axis=1) - p)) + float(
        np.linalg.norm(pi.sum(axis=0) - q)
    )
    acc = permutation_accuracy(hungarian_round(pi), instance.perm_true)
    return MetricsRecord(
        loss=loss,
        sparsity=zeros / pi.size,
        feasibility=feas,
        accuracy=acc,
        time_s=float(elapsed_s),
        iters=int(iters),
        status=status,
    )


class InstanceFormatError(ValueError):
    """Raised when an instance file does not follow the container format."""


_HEADER = struct.Struct("<QQdd")  # n, seed, p_edge, eta


def save_instance(instance, path):
    """Write an instance as a self-describing binary container.

    Layout: magic "GWAI1"; little-endian header (u64 n, u64 seed, f64
    p_edge, f64 eta); row-major float64 payload A1, A2, C1, C2 followed by
    the true permutation as 64-bit indices; then a u64-length-prefixed JSON
    metadata block with the generation parameters.
    """
    n = instance.n
    meta = json.dumps(
        {
            "format": INSTANCE_MAGIC.decode(),
            "n": n,
            "seed": instance.seed,
            "p_edge": instance.p_edge,
            "eta": instance.eta,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(INSTANCE_MAGIC)
        fh.write(_HEADER.pack(n, instance.seed, instance.p_edge, instance.eta))
        for mat in (
            instance.adjacency_1,
            instance.adjacency_2,
            instance.c1.entries,
            instance.c2.entries,
        ):
            fh.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(instance.perm_true, dtype="<u8").tobytes())
        fh.write(struct.pack("<Q", len(meta)))
        fh.write(meta)


def load_instance(path):
    """Read an instance container written by ``save_instance``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(INSTANCE_MAGIC))
        if magic != INSTANCE_MAGIC:
            raise InstanceFormatError(
                f"{path}: bad magic {magic!r}, expected {INSTANCE_MAGIC!r}"
            )
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise InstanceFormatError(f"{path}: truncated header")
        n, seed, p_edge, eta = _HEADER.unpack(header)
        n = int(n)
        mats = []
        for _ in range(4):
            raw = fh.read(8 * n * n)
            if len(raw) != 8 * n * n:
                raise InstanceFormatError(f"{path}: truncated matrix payload")
            mats.append(np.frombuffer(raw, dtype="<f8").reshape(n, n).copy())
        raw = fh.read(8 * n)
        if len(raw) != 8 * n:
            raise InstanceFormatError(f"{path}: truncated permutation payload")
        perm = np.frombuffer(raw, dtype="<u8").astype(np.int64)
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode())
        if meta.get("format") != INSTANCE_MAGIC.decode():
            raise InstanceFormatError(f"{path}: metadata format tag mismatch")
    return AlignmentInstance(
        adjacency_1=mats[0],
        adjacency_2=mats[1],
        perm_true=perm,
        c1=CostMatrix.from_entries(mats[2]),
        c2=CostMatrix.from_entries(mats[3]),
        p=Marginals.uniform(n),
        q=Marginals.uniform(n),
        n=n,
        p_edge=float(p_edge),
        eta=float(eta),
        seed=int(seed),
    )
