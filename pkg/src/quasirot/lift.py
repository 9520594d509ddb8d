"""Embedding continuation: choose integer parts of the angle increments.

Given a delay cloud (Theta_n, Delta_n), the lifted increment
hat Delta_n = Delta_n + m_n must vary continuously over the embedded torus.
Starting from m_0 = 0, an assigned index n1 passes its integer to an
unassigned n2 whenever

    || (Theta_n1, Delta_n1 + m_n1) - (Theta_n2, Delta_n2 + k) || < delta

for some integer k, in which case m_n2 = k. With delta below the separation
between integer translates of the lifted graph the choice is forced, and the
average of hat Delta_n converges to the rotation rate of the projection.

Because k = m_n1 + round(Delta_n1 - Delta_n2), each candidate pair carries a
fixed integer offset, so the propagation is a traversal of a graph with
integer edge labels. Every accepted edge is checked for consistency with the
final assignment; a contradiction means delta was too large.
"""

import math
from collections import deque
from dataclasses import dataclass, field, replace

import mpmath
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, depth_first_order
from scipy.spatial import cKDTree

from .birkhoff import EXTENDED_DPS, weighted_birkhoff_average
from .embedding import CIRCLE, estimate_separation, neighbor_tree
from .errors import IncompleteLiftError, LiftAmbiguityError, UsageError
from .torus import mod1

__all__ = [
    "ContinuationParams",
    "LiftedSeries",
    "RateReport",
    "ChainReport",
    "candidate_pairs",
    "continue_lift",
    "pilot_delta",
    "rotation_rate",
    "lift_oracle",
    "cloud_winding",
    "near_return_chain",
]

DEFAULT_DELTA = 0.05
# separations beyond this make no difference to the pilot radius (delta < 1/2)
SEPARATION_CAP = 0.5


@dataclass(frozen=True)
class ContinuationParams:
    """Settings for the continuation.

    delta : match radius in the product space (must be < 1/2)
    max_rounds : how many times the neighbor budget may be doubled when the
        first pass leaves indices unassigned
    neighbor_budget : nearest neighbors examined per point
    order : "fifo" (breadth first) or "lifo" (depth first) frontier
    exhaustive : scan all pairs instead of using a KD-tree (small N only)
    """

    delta: float = DEFAULT_DELTA
    max_rounds: int = 3
    neighbor_budget: int = 12
    order: str = "fifo"
    exhaustive: bool = False

    def __post_init__(self):
        if not (0 < self.delta < 0.5):
            raise UsageError(f"delta must lie in (0, 1/2), got {self.delta}")
        if self.max_rounds < 1 or self.neighbor_budget < 1:
            raise UsageError("max_rounds and neighbor_budget must be positive")
        if self.order not in ("fifo", "lifo"):
            raise UsageError(f"unknown frontier order {self.order!r}")


@dataclass
class LiftedSeries:
    deltas: np.ndarray
    offsets: np.ndarray  # int64; meaningful only where ``assigned``
    assigned: np.ndarray  # bool
    delta: float = None
    n_edges: int = 0
    rounds: int = 0
    largest_component_fraction: float = None

    @property
    def assigned_count(self):
        return int(np.count_nonzero(self.assigned))

    @property
    def complete(self):
        return bool(np.all(self.assigned))

    @property
    def fraction(self):
        return self.assigned_count / len(self.deltas)

    @property
    def delta_hat(self):
        out = self.deltas + self.offsets
        return np.where(self.assigned, out, np.nan)

    def shifted(self, k):
        return LiftedSeries(self.deltas, self.offsets + int(k), self.assigned.copy(), self.delta, self.n_edges, self.rounds,
                            self.largest_component_fraction)


@dataclass
class RateReport:
    rate: float
    unreduced: float
    n_used: int
    partial_values: list = field(default_factory=list)
    extended: "RateReport" = None  # extended-precision companion, when requested


def _brute_pairs(cloud, radius, chunk=1024):
    X = cloud.flat
    rows, cols, dists = [], [], []
    circle = cloud.config.component_metric == CIRCLE
    for s in range(0, len(X), chunk):
        d = np.abs(X[s : s + chunk, None, :] - X[None, :, :])
        if circle:
            d = np.minimum(d, 1.0 - d)
        dist = np.sqrt(np.sum(d * d, axis=-1))
        i, j = np.nonzero(dist < radius)
        keep = (i + s) != j
        rows.append(i[keep] + s)
        cols.append(j[keep])
        dists.append(dist[i[keep], j[keep]])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(dists)


def candidate_pairs(cloud, radius, budget=12, exhaustive=False):
    """Directed index pairs (i, j) with embedded distance < radius, and the distances.

    The KD-tree path keeps at most ``budget`` nearest neighbors per point;
    the exhaustive path keeps them all.
    """
    if exhaustive:
        return _brute_pairs(cloud, radius)
    tree, X = neighbor_tree(cloud)
    k = min(budget + 1, len(X))
    dist, idx = tree.query(X, k=k, distance_upper_bound=radius)
    n = len(X)
    rows = np.repeat(np.arange(n), k)
    cols = idx.ravel()
    dd = dist.ravel()
    keep = (cols < n) & (cols != rows)
    return rows[keep], cols[keep], dd[keep]


def _label_edges(deltas, rows, cols, theta_dist, delta):
    """Integer offset m_j - m_i forced by each pair, and which pairs are accepted."""
    diff = deltas[rows] - deltas[cols]
    off = np.rint(diff)
    resid = diff - off
    gamma2 = theta_dist**2 + resid**2
    accept = gamma2 < delta * delta
    # runner-up integer is the other neighbor of diff; it must be outside the radius
    runner = np.sqrt(theta_dist**2 + (1.0 - np.abs(resid)) ** 2)
    bad = accept & (runner < delta)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise LiftAmbiguityError(
            f"two integer offsets within delta for pair ({rows[i]}, {cols[i]})", pair=(int(rows[i]), int(cols[i]))
        )
    return off[accept].astype(np.int64), rows[accept], cols[accept]


def _propagate(n, rows, cols, off, order, root=0):
    # symmetric, de-duplicated directed edge list: m[dst] = m[src] + off
    src = np.concatenate([rows, cols])
    dst = np.concatenate([cols, rows])
    lab = np.concatenate([off, -off])
    key = src.astype(np.int64) * n + dst
    key, first = np.unique(key, return_index=True)
    src, dst, lab = src[first], dst[first], lab[first]
    graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n)).tocsr()
    traverse = breadth_first_order if order == "fifo" else depth_first_order
    visit, pred = traverse(graph, root, directed=True, return_predecessors=True)
    assigned = np.zeros(n, dtype=bool)
    tree_keys = pred[visit[1:]].astype(np.int64) * n + visit[1:]
    tree_lab = lab[np.searchsorted(key, tree_keys)]
    m = [0] * n
    p = pred.tolist()
    for j, l in zip(visit[1:].tolist(), tree_lab.tolist()):
        m[j] = m[p[j]] + l
    offsets = np.asarray(m, dtype=np.int64)
    assigned[visit] = True
    both = assigned[src] & assigned[dst]
    clash = both & (offsets[dst] - offsets[src] != lab)
    if np.any(clash):
        i = int(np.argmax(clash))
        raise LiftAmbiguityError(
            f"inconsistent integer offsets around pair ({src[i]}, {dst[i]}); delta exceeds the separation",
            pair=(int(src[i]), int(dst[i])),
        )
    _, labels = connected_components(graph, directed=False)
    return offsets, assigned, len(key) // 2, labels


# delay vectors closer than this are merged before the neighbor search
DUPLICATE_TOL = 1e-9


def _representatives(cloud):
    """Indices of distinct delay vectors and the map from every index to its representative.

    Periodic or nearly periodic data repeat the same vector many times; the
    copies would fill every neighbor budget and starve the search. The
    increment is a function of the delay vector, so copies share their lift.
    """
    key = np.floor(cloud.flat / DUPLICATE_TOL)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return first, inverse.ravel()


def continue_lift(cloud, params=None):
    """Assign integer offsets m_n so all lifted increments lie on one component.

    Returns a :class:`LiftedSeries`; an incomplete result (N too small for the
    chosen delta) is returned rather than raised, with ``complete`` False.
    Raises :class:`LiftAmbiguityError` when accepted matches contradict each
    other.
    """
    from .embedding import DelayCloud

    params = params or ContinuationParams()
    n = len(cloud)
    if n == 0:
        raise UsageError("empty delay cloud")
    deltas = np.asarray(cloud.deltas, dtype=float)
    first, inverse = _representatives(cloud)
    reps = DelayCloud(cloud.vectors[first], deltas[first], cloud.config)
    root = int(inverse[0])
    budget = params.neighbor_budget
    for rnd in range(1, params.max_rounds + 1):
        rows, cols, dist = candidate_pairs(reps, params.delta, budget, params.exhaustive)
        off, rows, cols = _label_edges(reps.deltas, rows, cols, dist, params.delta)
        rep_off, rep_assigned, n_edges, labels = _propagate(len(reps), rows, cols, off, params.order, root)
        if rep_assigned.all() or params.exhaustive:
            break
        budget *= 2
    # copies may sit on the other side of the 0/1 cut from their representative
    offsets = rep_off[inverse] + np.rint(deltas[first][inverse] - deltas).astype(np.int64)
    largest = np.bincount(labels[inverse]).max() / n
    return LiftedSeries(deltas, offsets, rep_assigned[inverse], params.delta, n_edges, rnd, largest)


def pilot_delta(cloud, n_pilot=10_000, fallback=DEFAULT_DELTA, fraction=0.25, params=None):
    """Continuation radius from a pilot run on the first ``n_pilot`` points.

    The pilot is lifted with the fallback radius, doubled while the pilot
    stays disconnected. The result is ``fraction`` of the measured gap between
    integer translates, raised to the radius the pilot needed to connect.
    Returns (delta, separation estimate); the estimate is None and delta the
    fallback when no pilot radius below 1/2 gives a consistent, complete lift.
    """
    from .embedding import DelayCloud

    m = min(n_pilot, len(cloud))
    sub = DelayCloud(cloud.vectors[:m], cloud.deltas[:m], cloud.config)
    base = params or ContinuationParams(delta=fallback)
    needed = base.delta
    while True:
        try:
            lift = continue_lift(sub, replace(base, delta=needed))
        except LiftAmbiguityError:
            return fallback, None
        if lift.complete:
            break
        needed *= 2
        if needed >= 0.5:
            return fallback, None
    eps = estimate_separation(sub, lift, cap=SEPARATION_CAP)
    delta = fraction * eps
    if needed > base.delta:
        delta = max(delta, needed)
    return min(max(delta, 1e-6), 0.49), eps


def rotation_rate(lift, p=1, precision="double", checkpoints=None, values=None):
    """Rotation rate mod 1 from the weighted Birkhoff average of the lifted increments.

    ``values`` may supply extended-precision increments that replace
    ``lift.deltas`` (the integer offsets are still taken from ``lift``).
    """
    if not lift.complete:
        raise IncompleteLiftError(f"lift covers {lift.assigned_count} of {len(lift.deltas)} indices")
    if values is None:
        series = lift.delta_hat
    else:
        with mpmath.workdps(EXTENDED_DPS):
            series = [mpmath.mpf(v) + int(m) for v, m in zip(values, lift.offsets)]
    report = weighted_birkhoff_average(series, p, checkpoints, precision)
    unreduced = report.value
    return RateReport(rate=_mod1_any(unreduced), unreduced=unreduced, n_used=report.n_used,
                      partial_values=report.partial_values)


def _mod1_any(x):
    if isinstance(x, float):
        return mod1(x)
    with mpmath.workdps(EXTENDED_DPS):
        return x - mpmath.floor(x)


def _unwrap_along(deltas, order, max_jump):
    m = np.zeros(len(deltas), dtype=np.int64)
    prev = order[0]
    for j in order[1:]:
        target = deltas[prev] + m[prev]
        k = round(target - deltas[j])
        if abs(target - deltas[j] - k) >= max_jump:
            raise UsageError(f"lifted increment jumps by >= {max_jump} between theta-neighbors {prev} and {j}")
        m[j] = k
        prev = j
    return m


def lift_oracle(theta_sequence, deltas, max_jump=0.25, neighbors=8):
    """Reference lift from the true torus coordinates (synthetic data only).

    For d = 1 indices are sorted by theta and the integer part is carried
    around the circle by continuity; for d > 1 it is carried over a
    nearest-neighbor graph in theta. The result is normalized to m_0 = 0 and
    is a valid lift up to one global integer.
    """
    theta = np.asarray(theta_sequence, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    theta = theta[: len(deltas)]
    if len(theta) != len(deltas):
        raise UsageError("need one theta per increment")
    n, d = theta.shape
    if d == 1:
        order = np.argsort(theta[:, 0], kind="stable")
        m = np.zeros(n, dtype=np.int64)
        m[order] = _unwrap_along(deltas[order], np.arange(n), max_jump)
        # closing the circle must not change the integer part
        last, first = order[-1], order[0]
        gap = deltas[last] + m[last] - deltas[first] - m[first]
        if abs(gap) >= max_jump:
            raise UsageError("lift does not close around the circle; theta sample too sparse")
    else:
        tree = cKDTree(mod1(theta), boxsize=1.0)
        _, idx = tree.query(mod1(theta), k=min(neighbors + 1, n))
        m = np.zeros(n, dtype=np.int64)
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in idx[i, 1:]:
                if seen[j]:
                    continue
                target = deltas[i] + m[i]
                k = round(target - deltas[j])
                if abs(target - deltas[j] - k) >= max_jump:
                    raise UsageError(f"lifted increment jumps between theta-neighbors {i} and {j}")
                m[j] = k
                seen[j] = True
                queue.append(j)
        if not seen.all():
            raise UsageError("theta neighbor graph is disconnected; sample too sparse")
        rows = np.repeat(np.arange(n), idx.shape[1] - 1)
        cols = idx[:, 1:].ravel()
        jump = np.abs(deltas[rows] + m[rows] - deltas[cols] - m[cols])
        if np.any(jump >= max_jump):
            raise UsageError("oracle lift is discontinuous on the theta graph")
    m = m - m[0]
    return LiftedSeries(deltas, m, np.ones(n, dtype=bool))


def cloud_winding(cloud, phi, radius, budget=12):
    """Degree of the angle map over the embedded torus, from unordered samples.

    Angles are unwrapped along a spanning tree of the delay-space neighbor
    graph; every remaining edge closes a cycle whose total angle change is an
    integer (zero for contractible cycles). The gcd of these integers is the
    factor by which the measured rate is multiplied, i.e. |W(P)| for a planar
    curve. Returns (gcd, counts) where counts maps |cycle sum| -> occurrences.
    """
    phi = np.asarray(phi, dtype=float)[: len(cloud)]
    n = len(cloud)
    rows, cols, _ = candidate_pairs(cloud, radius, budget)
    step = mod1(phi[cols] - phi[rows] + 0.5) - 0.5
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    visit, pred = breadth_first_order(graph, 0, directed=False, return_predecessors=True)
    if len(visit) < n:
        raise UsageError(f"neighbor graph reaches {len(visit)} of {n} points; increase radius")
    pot = np.zeros(n)
    p = pred.tolist()
    pt = pot.tolist()
    ph = phi.tolist()
    for j in visit[1:].tolist():
        i = p[j]
        pt[j] = pt[i] + (mod1(ph[j] - ph[i] + 0.5) - 0.5)
    pot = np.asarray(pt)
    cyc = np.rint(pot[rows] + step - pot[cols]).astype(np.int64)
    vals, counts = np.unique(np.abs(cyc[cyc != 0]), return_counts=True)
    g = 0
    for v in vals.tolist():
        g = math.gcd(g, v)
    return g, dict(zip(vals.tolist(), counts.tolist()))


@dataclass
class ChainReport:
    sigmas: list
    returns: list
    gcd: int
    hypothesis_ok: bool
    reachable: bool
    reached: int = 0


def _walk(N, s1, s2):
    """Subscripts visited by a_2 sigma_2 - a_1 sigma_1: step up by sigma_2 while below N, else down by sigma_1."""
    sub, chain = 0, [0]
    for _ in range(N + s1 + s2):
        sub = sub + s2 if sub + s2 < N else sub - s1
        if sub == 0 or sub < 0:
            break
        chain.append(sub)
    return chain


def _chain_reach(N, sigmas):
    # the walk seeds the search; extension passes then add or remove any
    # generator while the subscript stays in [0, N)
    reached = np.zeros(N, dtype=bool)
    reached[0] = True
    if len(sigmas) >= 2:
        reached[_walk(N, sigmas[0], sigmas[1])] = True
    edges = [(np.arange(N - s), np.arange(s, N)) for s in sigmas if s < N]
    if not edges:
        return reached
    rows = np.concatenate([e[0] for e in edges])
    cols = np.concatenate([e[1] for e in edges])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N)).tocsr()
    _, labels = connected_components(graph, directed=False)
    return reached | (labels == labels[0])


def near_return_chain(theta_sequence, delta1, N):
    """Near returns to theta_0 and whether they chain every index in [0, N).

    Return times are the n in (0, N) with torus_distance(theta_n, theta_0) < delta1.
    Generators are picked starting from the first return and adding returns in
    order of increasing max-coordinate distance to theta_0 while they lower the
    gcd and keep sigma_1 + sigma_P < N. The walk then alternates +sigma_2 and
    -sigma_1 steps, extends upward by sigma_2, and closes under the remaining
    generators.
    """
    theta = np.asarray(theta_sequence, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    if len(theta) < N:
        raise UsageError(f"need {N} points, got {len(theta)}")
    if delta1 <= 0:
        raise UsageError("delta1 must be positive")
    diff = mod1(theta[1:N] - theta[0])
    diff = np.minimum(diff, 1.0 - diff)
    l1 = diff.sum(axis=1)
    sup = diff.max(axis=1)
    idx = np.nonzero(l1 < delta1)[0]
    returns = (idx + 1).tolist()
    if not returns:
        return ChainReport([], [], 0, False, False, 1)
    s1 = returns[0]
    sigmas, g = [s1], s1
    for i in sorted(idx[1:], key=lambda i: sup[i]):
        s = int(i + 1)
        ng = math.gcd(g, s)
        if ng < g and s1 + max(max(sigmas), s) < N:
            sigmas.append(s)
            g = ng
        if g == 1:
            break
    ordered = [sigmas[0]] + sorted(sigmas[1:])
    hyp = g == 1 and len(sigmas) > 1 and ordered[0] + max(ordered) < N
    reached = _chain_reach(N, ordered)
    return ChainReport(sorted(sigmas), returns, g, hyp, bool(reached.all()), int(reached.sum()))
