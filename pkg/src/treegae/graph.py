"""Graph data model: refinement instances, validation, degree normalization.

A refinement instance is one problem: given noisy per-node features and an
over-complete candidate adjacency, recover the target adjacency (a forest).
Feature columns are fixed as

    [radius, px, py, pz, ox, oy, oz,
     var_radius, var_px, var_py, var_pz, var_ox, var_oy, var_oz]

i.e. seven means (local radius, 3-D position, unit tangent orientation)
followed by the seven matching variances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

FEATURE_DIM = 14
RADIUS_COL = 0
POSITION_COLS = slice(1, 4)
ORIENTATION_COLS = slice(4, 7)
VARIANCE_COLS = slice(7, 14)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass
class RefinementInstance:
    """One graph refinement problem.

    ``true_positions`` and ``true_radii`` are optional generator ground
    truth (pre-noise node geometry); they travel with the instance so that
    geometric evaluation can measure against the clean tree.
    Instances are immutable after construction and safe to share.
    """

    id: str
    features: np.ndarray             # N x 14
    candidate_adjacency: np.ndarray  # N x N, entries 0/1
    target_adjacency: np.ndarray     # N x N, entries 0/1
    true_positions: np.ndarray | None = field(default=None)
    true_radii: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.features = _frozen(np.atleast_2d(self.features))
        self.candidate_adjacency = _frozen(self.candidate_adjacency)
        self.target_adjacency = _frozen(self.target_adjacency)
        n = self.features.shape[0]
        for name in ("candidate_adjacency", "target_adjacency"):
            a = getattr(self, name)
            if a.shape != (n, n):
                raise ContractError(f"{name} must be {n}x{n}, got {a.shape}")
        if self.true_positions is not None:
            self.true_positions = _frozen(self.true_positions)
        if self.true_radii is not None:
            self.true_radii = _frozen(self.true_radii)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def observed_positions(self) -> np.ndarray:
        return self.features[:, POSITION_COLS]

    def reference_positions(self) -> np.ndarray:
        """Clean positions when available, observed ones otherwise."""
        if self.true_positions is not None:
            return self.true_positions
        return self.observed_positions()


def degrees(adjacency: np.ndarray) -> np.ndarray:
    """Per-node degree, the row sums of the adjacency."""
    return np.asarray(adjacency, dtype=np.float64).sum(axis=1)


def row_normalize(adjacency: np.ndarray) -> np.ndarray:
    """Divide each row by its degree; all-zero rows stay all-zero.

    This is the inverse-degree message weighting used by the encoder; the
    zero-row convention means an isolated node receives no neighbor message.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if np.any(a < 0):
        raise ContractError("row_normalize requires a nonnegative adjacency")
    deg = a.sum(axis=1, keepdims=True)
    out = np.zeros_like(a)
    np.divide(a, deg, out=out, where=deg > 0)
    return out


def count_components(adjacency: np.ndarray) -> int:
    """Number of connected components of an undirected adjacency matrix."""
    a = np.asarray(adjacency)
    n = a.shape[0]
    seen = np.zeros(n, dtype=bool)
    components = 0
    for start in range(n):
        if seen[start]:
            continue
        components += 1
        frontier = [start]
        seen[start] = True
        while frontier:
            i = frontier.pop()
            neighbors = np.nonzero(a[i] > 0)[0]
            for j in neighbors:
                if not seen[j]:
                    seen[j] = True
                    frontier.append(int(j))
    return components


def undirected_edge_count(adjacency: np.ndarray) -> int:
    a = np.asarray(adjacency)
    return int(np.triu(a, 1).sum())


def validate(instance: RefinementInstance) -> list[str]:
    """Check every instance invariant; returns all violations (empty = ok)."""
    violations: list[str] = []
    f = instance.features
    if f.ndim != 2 or f.shape[1] != FEATURE_DIM:
        violations.append(f"features must be N x {FEATURE_DIM}, got {f.shape}")
        return violations

    for name, a in (
        ("candidate adjacency", instance.candidate_adjacency),
        ("target adjacency", instance.target_adjacency),
    ):
        if not np.array_equal(a, a.T):
            violations.append(f"{name} not symmetric")
        if not np.isin(a, (0.0, 1.0)).all():
            violations.append(f"{name} entries must be 0 or 1")
        if np.any(np.diagonal(a) != 0):
            violations.append(f"{name} has nonzero diagonal")

    if np.any(instance.target_adjacency > instance.candidate_adjacency):
        violations.append("target edge not in candidates")

    if np.any(f[:, VARIANCE_COLS] < 0):
        violations.append("variance features must be nonnegative")

    norms = np.linalg.norm(f[:, ORIENTATION_COLS], axis=1)
    if np.any(norms < 0.99) or np.any(norms > 1.01):
        violations.append("orientation mean norm outside [0.99, 1.01]")

    a = instance.target_adjacency
    if undirected_edge_count(a) != instance.n - count_components(a):
        violations.append("target adjacency is not a forest")

    return violations


def permute(instance: RefinementInstance, perm) -> RefinementInstance:
    """Relabel nodes so that old index i becomes new index perm[i].

    Feature rows and both adjacencies are reindexed consistently; this is a
    group action: permute(permute(x, p), q) == permute(x, q o p).
    """
    perm = np.asarray(perm, dtype=np.intp)
    n = instance.n
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ContractError(f"perm must be a permutation of 0..{n - 1}")
    inv = np.empty(n, dtype=np.intp)
    inv[perm] = np.arange(n)
    return RefinementInstance(
        id=instance.id,
        features=instance.features[inv],
        candidate_adjacency=instance.candidate_adjacency[np.ix_(inv, inv)],
        target_adjacency=instance.target_adjacency[np.ix_(inv, inv)],
        true_positions=None if instance.true_positions is None else instance.true_positions[inv],
        true_radii=None if instance.true_radii is None else instance.true_radii[inv],
    )
