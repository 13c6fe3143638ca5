"""Similarity-based clustering and grade propagation (MLP-S).

Similarity between two solutions is the number of shared expressions divided
by the smaller solution's expression count. Clustering is either normalized
spectral clustering (K given) or affinity propagation (K inferred); one
representative per cluster is surfaced for instructor grading and its grade
propagated to the whole cluster.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import AffinityPropagation, KMeans

from .features import FeatureMatrix


class ZeroColumn(ValueError):
    pass


class MissingClusterGrade(KeyError):
    pass


class NonConvergence(Warning):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # cluster ids in {0..K-1}
    K: int

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


@dataclass(frozen=True)
class RepresentativeSet:
    indices: tuple  # one solution index per cluster, position = cluster id
    method: str  # "S" or "B"


def similarity(fm: FeatureMatrix) -> np.ndarray:
    """Pairwise similarity matrix: shared count over the smaller support."""
    Y = (fm.Y > 0).astype(np.int64)
    sizes = Y.sum(axis=0)
    if np.any(sizes == 0):
        raise ZeroColumn("every solution must contain at least one expression")
    common = Y.T @ Y
    mins = np.minimum.outer(sizes, sizes)
    S = common / mins
    np.fill_diagonal(S, 1.0)
    return S


def _check_similarity(S: np.ndarray):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("similarity matrix must be square")
    return S


def spectral_cluster(S: np.ndarray, K: int, seed: int = 0) -> ClusterAssignment:
    """Normalized spectral clustering with seeded k-means++ on the embedding.

    Solutions with zero total similarity to everything else are split into
    singleton clusters before embedding (degenerate degree guard).
    """
    S = _check_similarity(S)
    N = S.shape[0]
    if not 2 <= K <= N:
        raise ValueError(f"K={K} out of range [2, {N}]")

    off = S.copy()
    np.fill_diagonal(off, 0.0)
    degrees = off.sum(axis=1)
    isolated = np.flatnonzero(degrees == 0)
    core = np.flatnonzero(degrees > 0)

    labels = np.empty(N, dtype=np.int64)
    K_core = K - len(isolated)
    if K_core < 1 or len(core) == 0:
        # everything isolated (or K exhausted): deterministic singleton split
        order = np.argsort(np.arange(N))
        labels[order] = np.minimum(np.arange(N), K - 1)
        return ClusterAssignment(labels=labels, K=int(labels.max()) + 1)

    Sc = S[np.ix_(core, core)]
    if K_core == 1:
        core_labels = np.zeros(len(core), dtype=np.int64)
    elif K_core >= len(core):
        core_labels = np.arange(len(core), dtype=np.int64)
    else:
        d = Sc.sum(axis=1)
        d_isqrt = 1.0 / np.sqrt(d)
        M = Sc * np.outer(d_isqrt, d_isqrt)
        # bottom-K eigenvectors of L = I - M are the top-K of M
        w, vecs = np.linalg.eigh(M)
        U = vecs[:, -K_core:]
        norms = np.linalg.norm(U, axis=1)
        norms[norms == 0] = 1.0
        U = U / norms[:, None]
        km = KMeans(n_clusters=K_core, init="k-means++", n_init=10, random_state=seed)
        core_labels = km.fit_predict(U)

    labels[core] = core_labels
    next_k = int(core_labels.max()) + 1 if len(core) else 0
    for idx in isolated:
        labels[idx] = next_k
        next_k += 1
    return ClusterAssignment(labels=labels, K=next_k)


def affinity_propagation(
    S: np.ndarray,
    damping: float = 0.9,
    max_iter: int = 1000,
    convergence_iter: int = 50,
    seed: int = 0,
) -> tuple[ClusterAssignment, np.ndarray]:
    """Affinity propagation on S with self-preference = median off-diagonal.

    Returns the assignment and the exemplar indices; K is an output. On
    non-convergence the best labeling so far is returned with a warning.
    """
    S = _check_similarity(S)
    N = S.shape[0]
    if N < 1:
        raise ValueError("empty similarity matrix")
    if N == 1:
        return ClusterAssignment(labels=np.zeros(1, dtype=np.int64), K=1), np.array([0])

    off_diag = S[~np.eye(N, dtype=bool)]
    preference = float(np.median(off_diag))
    ap = AffinityPropagation(
        affinity="precomputed",
        damping=damping,
        max_iter=max_iter,
        convergence_iter=convergence_iter,
        preference=preference,
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ap.fit(S)
    labels = ap.labels_.astype(np.int64)
    exemplars = np.asarray(ap.cluster_centers_indices_)
    if exemplars is None or len(exemplars) == 0 or np.any(labels < 0):
        # degenerate non-convergence: fall back to one cluster around the
        # highest-degree solution, flagged
        warnings.warn("affinity propagation did not converge", NonConvergence)
        ex = int(np.argmax(S.sum(axis=1)))
        return ClusterAssignment(labels=np.zeros(N, dtype=np.int64), K=1), np.array([ex])
    if ap.n_iter_ >= max_iter:
        warnings.warn("affinity propagation hit the iteration cap", NonConvergence)
    return ClusterAssignment(labels=labels, K=len(exemplars)), exemplars


def select_representatives_s(
    S: np.ndarray, assignment: ClusterAssignment, seed: int = 0
) -> RepresentativeSet:
    """Per cluster, the member with the highest total similarity to everyone.

    Ties are broken by a seeded uniform choice.
    """
    S = _check_similarity(S)
    rng = np.random.default_rng(seed)
    row_sums = S.sum(axis=1)
    reps = []
    for k in range(assignment.K):
        members = assignment.members(k)
        if len(members) == 0:
            raise ValueError(f"cluster {k} is empty")
        sums = row_sums[members]
        best = members[np.flatnonzero(sums == sums.max())]
        reps.append(int(rng.choice(best)))
    return RepresentativeSet(indices=tuple(reps), method="S")


def propagate_grades_s(assignment: ClusterAssignment, rep_grades: dict) -> np.ndarray:
    """Every solution receives its cluster's instructor grade."""
    missing = [k for k in range(assignment.K) if k not in rep_grades]
    if missing:
        raise MissingClusterGrade(f"no instructor grade for clusters {missing}")
    grades = np.empty(len(assignment.labels), dtype=float)
    for k in range(assignment.K):
        grades[assignment.labels == k] = rep_grades[k]
    return grades
