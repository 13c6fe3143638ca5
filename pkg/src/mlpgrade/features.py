"""Bag-of-expressions features: vocabulary and the binary V x N matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import ARITHMETIC_ONLY, RawSolution, segment_to_canonical, tokenize_solution

BINARY = "Binary"
COUNTS = "Counts"


class EmptyCorpus(ValueError):
    pass


class AllBlank(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class SolutionFeatures:
    """Per-solution ordered canonical keys plus their vocabulary indices."""

    learner_id: str
    keys: tuple  # ordered, duplicates retained
    indices: tuple  # vocabulary index per key, same order
    distinct: frozenset = field(default=frozenset())

    @property
    def num_expressions(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class FeatureMatrix:
    vocabulary: tuple  # V canonical keys, first-appearance order
    Y: np.ndarray  # V x N
    mode: str = BINARY

    @property
    def num_features(self) -> int:
        return len(self.vocabulary)

    @property
    def num_solutions(self) -> int:
        return self.Y.shape[1]

    def index_of(self, key: str) -> int:
        return self.vocabulary.index(key)


def build_matrix(
    solutions: list[RawSolution],
    level: str = ARITHMETIC_ONLY,
    mode: str = BINARY,
    presplit: dict | None = None,
) -> tuple[FeatureMatrix, list[SolutionFeatures]]:
    """Build the vocabulary and feature matrix from a solution corpus.

    ``presplit`` optionally maps learner_id to an ordered expression list,
    bypassing tokenization for datasets that ship pre-split expressions.
    Pre-split entries are used verbatim as canonical keys.
    """
    if mode not in (BINARY, COUNTS):
        raise ValueError(f"unknown feature mode {mode!r}")
    if not solutions:
        raise EmptyCorpus("no solutions given")

    per_solution: list[SolutionFeatures] = []
    vocab: dict[str, int] = {}
    all_indices: list[list[int]] = []
    for sol in solutions:
        if presplit is not None and sol.learner_id in presplit:
            keys = [str(k) for k in presplit[sol.learner_id]]
        else:
            segments = tokenize_solution(sol)
            keys = [segment_to_canonical(seg, level).key for seg in segments]
        if not keys:
            raise AllBlank(f"solution {sol.learner_id!r} yields no features")
        idxs = []
        for k in keys:
            if k not in vocab:
                vocab[k] = len(vocab)
            idxs.append(vocab[k])
        all_indices.append(idxs)
        per_solution.append(
            SolutionFeatures(
                learner_id=sol.learner_id,
                keys=tuple(keys),
                indices=tuple(idxs),
                distinct=frozenset(idxs),
            )
        )

    V, N = len(vocab), len(solutions)
    Y = np.zeros((V, N), dtype=np.int64)
    for j, idxs in enumerate(all_indices):
        for i in idxs:
            Y[i, j] += 1
    if mode == BINARY:
        Y = (Y > 0).astype(np.int64)

    fm = FeatureMatrix(vocabulary=tuple(vocab), Y=Y, mode=mode)
    return fm, per_solution


def prefix_vector(fm: FeatureMatrix, s: SolutionFeatures, v: int) -> np.ndarray:
    """Binary feature vector of the first ``v`` expressions of a solution."""
    if not 1 <= v <= s.num_expressions:
        raise IndexOutOfRange(f"prefix length {v} not in [1, {s.num_expressions}]")
    y = np.zeros(fm.num_features, dtype=np.int64)
    for i in s.indices[:v]:
        y[i] = 1
    return y
