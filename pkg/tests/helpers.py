"""Small builders shared by the test modules."""

import numpy as np

from src.metric_core import PrototypeSet


def random_prototypes(rng: np.random.Generator, dim: int, rank: int, labels) -> PrototypeSet:
    labels = np.asarray(labels)
    return PrototypeSet(
        rng.standard_normal((dim, len(labels))),
        labels,
        rng.standard_normal((len(labels), dim, rank)),
    )


def identity_prototypes(positions, labels) -> PrototypeSet:
    positions = np.asarray(positions, dtype=float)
    d, s = positions.shape
    return PrototypeSet(positions, np.asarray(labels), np.tile(np.eye(d), (s, 1, 1)))


def brute_force_nearest(x, ps: PrototypeSet, mask=None) -> int:
    best, best_d = -1, np.inf
    for s in range(ps.size):
        if mask is not None and not mask[s]:
            continue
        w = ps.factors[s] @ ps.factors[s].T
        diff = x - ps.positions[:, s]
        d = diff @ w @ diff
        if d < best_d:
            best, best_d = s, d
    return best
