"""Delay-coordinate vectors built from an observed projection.

A delay vector stacks K consecutive observations. Observations are either
circle-valued angles (one coordinate, periodic with period 1) or planar
points (two Euclidean coordinates). Distances between delay vectors are the
Euclidean norm of the per-component distances, where a circle component
contributes its circle distance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, UsageError
from .torus import mod1

__all__ = [
    "EmbeddingConfig",
    "DelayCloud",
    "default_delay_count",
    "build_delay_cloud",
    "embedded_distance",
    "neighbor_tree",
    "estimate_separation",
]

CIRCLE = "circle"
EUCLIDEAN = "euclidean"


def default_delay_count(metric=CIRCLE, d_assumed=1):
    if metric == CIRCLE:
        return 7 if d_assumed == 1 else max(7, 2 * d_assumed + 1)
    return 5 if d_assumed == 2 else max(2, -(-(2 * d_assumed + 1) // 2))


@dataclass(frozen=True)
class EmbeddingConfig:
    K: int = 7
    component_metric: str = CIRCLE
    d_assumed: int = 1
    strict: bool = True  # False allows K*D < 2d+1, e.g. to show why small K fails

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("delay count K must be positive")
        if self.component_metric not in (CIRCLE, EUCLIDEAN):
            raise ConfigurationError(f"unknown component metric {self.component_metric!r}")
        if self.d_assumed < 1:
            raise ConfigurationError("torus dimension must be >= 1")
        if self.strict and self.K * self.observation_dim < 2 * self.d_assumed + 1:
            raise ConfigurationError(
                f"K*D = {self.K * self.observation_dim} < 2d+1 = {2 * self.d_assumed + 1}; "
                "the delay map cannot be an embedding"
            )

    @property
    def observation_dim(self):
        return 1 if self.component_metric == CIRCLE else 2


@dataclass
class DelayCloud:
    """Delay vectors and the raw angle increments, aligned by index.

    ``vectors`` has shape (M, K) for circle observations and (M, K, 2) for
    planar ones; ``deltas[n] = mod1(phi[n+1] - phi[n])``.
    """

    vectors: np.ndarray
    deltas: np.ndarray
    config: EmbeddingConfig

    def __len__(self):
        return len(self.deltas)

    @property
    def flat(self):
        return self.vectors.reshape(len(self.vectors), -1)


def build_delay_cloud(observations, config, phi=None):
    """Delay vectors Theta_n = (psi_n, ..., psi_{n+K-1}) and increments Delta_n.

    For circle observations ``phi`` defaults to the observations themselves;
    planar observations need the angle series ``phi`` (e.g. seen from a
    reference point) to define the increments.
    """
    obs = np.asarray(observations, dtype=float)
    K = config.K
    if config.component_metric == CIRCLE:
        if obs.ndim != 1:
            raise UsageError("circle observations must be a 1-d series")
        if np.any((obs < 0) | (obs >= 1)) or not np.all(np.isfinite(obs)):
            raise UsageError("angle observations must lie in [0, 1)")
        if phi is None:
            phi = obs
    else:
        if obs.ndim != 2 or obs.shape[1] != 2:
            raise UsageError("planar observations must have shape (N, 2)")
        if phi is None:
            raise UsageError("planar observations need an angle series for the increments")
    phi = np.asarray(phi, dtype=float)
    N = len(obs)
    if len(phi) != N:
        raise UsageError("angle series and observations differ in length")
    if N <= K:
        raise UsageError(f"need more than K = {K} observations, got {N}")
    M = min(N - K + 1, N - 1)
    if config.component_metric == CIRCLE:
        vectors = np.lib.stride_tricks.sliding_window_view(obs, K)[:M].copy()
    else:
        vectors = np.stack([obs[j : j + M] for j in range(K)], axis=1)
    deltas = mod1(phi[1 : M + 1] - phi[:M])
    return DelayCloud(vectors=vectors, deltas=np.atleast_1d(deltas), config=config)


def _component_diffs(u, v, config):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise UsageError(f"delay vectors differ in shape: {u.shape} vs {v.shape}")
    d = u - v
    if config.component_metric == CIRCLE:
        d = np.abs(mod1(d))
        d = np.minimum(d, 1.0 - d)
    return d


def embedded_distance(u, v, config):
    """Euclidean norm over components (circle distance for angle components).

    Circle vectors have shape (..., K); planar vectors (..., K, 2).
    """
    d = _component_diffs(u, v, config)
    if config.component_metric == EUCLIDEAN and d.ndim >= 2:
        return np.sqrt(np.sum(d * d, axis=(-2, -1)))
    return np.sqrt(np.sum(d * d, axis=-1))


def _boxsize(config, width, extra=0):
    if config.component_metric == CIRCLE:
        return np.concatenate([np.ones(width), np.zeros(extra)])
    return None if extra == 0 else np.zeros(width + extra)


def neighbor_tree(cloud, lifted=None):
    """KD-tree over the delay vectors, optionally with the lift as last coordinate."""
    X = cloud.flat
    if lifted is not None:
        X = np.column_stack([X, lifted])
    box = _boxsize(cloud.config, cloud.flat.shape[1], 0 if lifted is None else 1)
    return cKDTree(X, boxsize=box), X


def _separation_brute(X, lifted, shifts, config, chunk=512):
    # delay-space distances are shared by all shifts; only the last coordinate moves
    best = np.inf
    for s in range(0, len(X), chunk):
        a = X[s : s + chunk]
        acc = np.zeros((len(a), len(X)))
        for k in range(X.shape[1]):
            d = np.abs(a[:, k, None] - X[None, :, k])
            if config.component_metric == CIRCLE:
                np.minimum(d, 1.0 - d, out=d)
            acc += d * d
        gap = lifted[s : s + chunk, None] - lifted[None, :]
        for j in shifts:
            best = min(best, float(np.min(acc + (gap - j) ** 2)))
    return np.sqrt(best)


def estimate_separation(cloud, lift, max_shift=2, exhaustive=False, cap=None):
    """A-posteriori estimate of the gap between integer translates of the lifted graph.

    Minimum over index pairs and shifts 0 < |j| <= max_shift of the distance
    between (Theta_n1, hat Delta_n1) and (Theta_n2, hat Delta_n2 + j). Larger
    shifts only increase the last-coordinate gap. A continuation radius below
    this value keeps every match on one component.

    Only positive shifts are scanned (the distance set is symmetric in j).
    ``cap`` bounds the KD-tree search, which is much faster when translates
    are far apart; a result equal to ``cap`` then means "at least cap".
    """
    lifted = np.asarray(getattr(lift, "delta_hat", lift), dtype=float)
    if lifted.shape != cloud.deltas.shape or not np.all(np.isfinite(lifted)):
        raise UsageError("separation needs a fully assigned lift aligned with the cloud")
    shifts = list(range(1, max_shift + 1))
    if exhaustive:
        return float(_separation_brute(cloud.flat, lifted, shifts, cloud.config))
    tree, X = neighbor_tree(cloud, lifted)
    best = np.inf
    for j in shifts:
        Q = X.copy()
        Q[:, -1] += j
        d, _ = tree.query(Q, k=1, distance_upper_bound=np.inf if cap is None else cap)
        best = min(best, float(np.min(d)))
    return best if cap is None else min(best, cap)
