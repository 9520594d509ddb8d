"""Planar circular restricted three-body problem in the rotating frame.

The planet (mass 1 - mu) sits at (-mu, 0) and the moon (mass mu) at
(1 - mu, 0). With generalized positions q and momenta p the Hamiltonian is

    H = (p1^2 + p2^2)/2 + p1 q2 - p2 q1 - (1 - mu)/d_planet - mu/d_moon.

Trajectories are integrated with a fixed-step explicit 8th-order Runge-Kutta
scheme (Cooper and Verner, 11 stages) and observed every ``output_Dt``.
Angles are in revolutions and rates in revolutions per time unit.
"""

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .birkhoff import weighted_birkhoff_average
from .errors import CollisionError, UndersampledError, UsageError
from .torus import mod1

__all__ = [
    "RHO_P_REFERENCE",
    "TABLEAU_ID",
    "BUTCHER_A",
    "BUTCHER_B",
    "BUTCHER_C",
    "Cr3bpParams",
    "Cr3bpState",
    "Trajectory",
    "symmetric_initial_state",
    "hamiltonian",
    "vector_field",
    "integrate_rk8",
    "continuous_angle_series",
    "rates_from_angles",
    "cr3bp_rotation_rates",
    "relation_residual",
    "find_quasiperiodic_orbit",
    "lagrange_point",
]

# rotation number of the return map of the reference orbit, quoted to 36 digits
RHO_P_REFERENCE = 0.0639617287574530971640777244014426955
TABLEAU_ID = "cooper-verner-8 (11 stages, order 8)"
COLLISION_TOL = 1e-6
# relative energy change between output samples treated as a close encounter
ENERGY_JUMP = 1e-6

_S21 = math.sqrt(21.0)


def _tableau():
    s = _S21
    A = np.zeros((11, 11))
    A[1, 0] = 1 / 2
    A[2, :2] = [1 / 4, 1 / 4]
    A[3, :3] = [1 / 7, (-7 - 3 * s) / 98, (21 + 5 * s) / 49]
    A[4, [0, 2, 3]] = [(11 + s) / 84, (18 + 4 * s) / 63, (21 - s) / 252]
    A[5, [0, 2, 3, 4]] = [(5 + s) / 48, (9 + s) / 36, (-231 + 14 * s) / 360, (63 - 7 * s) / 80]
    A[6, [0, 2, 3, 4, 5]] = [
        (10 - s) / 42, (-432 + 92 * s) / 315, (633 - 145 * s) / 90, (-504 + 115 * s) / 70, (63 - 13 * s) / 35,
    ]
    A[7, [0, 4, 5, 6]] = [1 / 14, (14 - 3 * s) / 126, (13 - 3 * s) / 63, 1 / 9]
    A[8, [0, 4, 5, 6, 7]] = [1 / 32, (91 - 21 * s) / 576, 11 / 72, (-385 - 75 * s) / 1152, (63 + 13 * s) / 128]
    A[9, [0, 4, 5, 6, 7, 8]] = [
        1 / 14, 1 / 9, (-733 - 147 * s) / 2205, (515 + 111 * s) / 504, (-51 - 11 * s) / 56, (132 + 28 * s) / 245,
    ]
    A[10, [4, 5, 6, 7, 8, 9]] = [
        (-42 + 7 * s) / 18, (-18 + 28 * s) / 45, (-273 - 53 * s) / 72, (301 + 53 * s) / 72, (28 - 28 * s) / 45,
        (49 - 7 * s) / 18,
    ]
    b = np.array([9, 0, 0, 0, 0, 0, 0, 49, 64, 49, 9]) / 180
    c = np.array([0, 0.5, 0.5, (7 + s) / 14, (7 + s) / 14, 0.5, (7 - s) / 14, (7 - s) / 14, 0.5, (7 + s) / 14, 1.0])
    return A, b, c


BUTCHER_A, BUTCHER_B, BUTCHER_C = _tableau()


@dataclass(frozen=True)
class Cr3bpParams:
    mu: float = 0.1
    step_h: float = 2e-5
    output_Dt: float = 1e-3

    def __post_init__(self):
        if not (0 < self.mu < 1):
            raise UsageError(f"mass ratio must lie in (0, 1), got {self.mu}")
        if self.step_h <= 0 or self.output_Dt <= 0:
            raise UsageError("step and output spacing must be positive")
        n = round(self.output_Dt / self.step_h)
        if n < 1 or abs(n * self.step_h - self.output_Dt) > 1e-9 * self.output_Dt:
            raise UsageError(f"output_Dt = {self.output_Dt} is not an integer multiple of step_h = {self.step_h}")

    @property
    def substeps(self):
        return round(self.output_Dt / self.step_h)


@dataclass(frozen=True)
class Cr3bpState:
    q1: float
    q2: float
    p1: float
    p2: float
    t: float = 0.0

    def as_array(self):
        return np.array([self.q1, self.q2, self.p1, self.p2])

    @classmethod
    def from_array(cls, y, t=0.0):
        return cls(*(float(v) for v in y[:4]), t=float(t))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 4): q1, q2, p1, p2
    params: Cr3bpParams
    tableau: str = TABLEAU_ID


def symmetric_initial_state(r0, v0, mu=0.1):
    """State on the q2 = 0 line left of the planet, moving perpendicular to it.

    Distance r0 from the planet and rotating-frame velocity dq2/dt = v0, so
    q1 = -mu - r0, p1 = 0, p2 = v0 + q1.
    """
    q1 = -mu - r0
    return Cr3bpState(q1, 0.0, 0.0, v0 + q1)


def _state_array(s):
    if isinstance(s, Cr3bpState):
        return s.as_array()
    y = np.asarray(s, dtype=float)
    if y.shape[-1] != 4:
        raise UsageError("state must have 4 components (q1, q2, p1, p2)")
    return y


def _distances(y, mu):
    q1, q2 = y[..., 0], y[..., 1]
    d_planet = np.hypot(q1 + mu, q2)
    d_moon = np.hypot(q1 - 1 + mu, q2)
    if np.any(d_planet < COLLISION_TOL) or np.any(d_moon < COLLISION_TOL):
        raise CollisionError(f"state within {COLLISION_TOL} of a primary")
    return d_planet, d_moon


def hamiltonian(s, params=None):
    """Energy of a state (or an (n, 4) array of states)."""
    mu = (params or Cr3bpParams()).mu
    y = _state_array(s)
    d_planet, d_moon = _distances(y, mu)
    q1, q2, p1, p2 = (y[..., i] for i in range(4))
    return 0.5 * (p1 * p1 + p2 * p2) + p1 * q2 - p2 * q1 - (1 - mu) / d_planet - mu / d_moon


def vector_field(s, params=None):
    """(dq1, dq2, dp1, dp2)/dt for a state or an (n, 4) array of states."""
    mu = (params or Cr3bpParams()).mu
    y = _state_array(s)
    d_planet, d_moon = _distances(y, mu)
    q1, q2, p1, p2 = (y[..., i] for i in range(4))
    dm3 = d_moon**3
    dp3 = d_planet**3
    return np.stack(
        [
            p1 + q2,
            p2 - q1,
            p2 - mu * (q1 - 1 + mu) / dm3 - (1 - mu) * (q1 + mu) / dp3,
            -p1 - mu * q2 / dm3 - (1 - mu) * q2 / dp3,
        ],
        axis=-1,
    )


@numba.njit(cache=True)
def _field(y, mu, out):
    q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
    dm2 = (q1 - 1 + mu) ** 2 + q2 * q2
    dp2 = (q1 + mu) ** 2 + q2 * q2
    if dm2 < 1e-12 or dp2 < 1e-12:
        return False
    dm3 = dm2 * math.sqrt(dm2)
    dp3 = dp2 * math.sqrt(dp2)
    out[0] = p1 + q2
    out[1] = p2 - q1
    out[2] = p2 - mu * (q1 - 1 + mu) / dm3 - (1 - mu) * (q1 + mu) / dp3
    out[3] = -p1 - mu * q2 / dm3 - (1 - mu) * q2 / dp3
    return True


@numba.njit(cache=True)
def _energy(y, mu):
    q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
    dm = math.sqrt((q1 - 1 + mu) ** 2 + q2 * q2)
    dp = math.sqrt((q1 + mu) ** 2 + q2 * q2)
    return 0.5 * (p1 * p1 + p2 * p2) + p1 * q2 - p2 * q1 - (1 - mu) / dp - mu / dm


@numba.njit(cache=True)
def _integrate(y0, mu, h, nsub, nout, A, b):
    # returns (states, index of the failing output interval or -1)
    out = np.empty((nout + 1, 4))
    y = y0.copy()
    comp = np.zeros(4)  # compensated (Kahan) state update
    k = np.zeros((11, 4))
    tmp = np.empty(4)
    out[0] = y
    e0 = _energy(y, mu)
    for o in range(nout):
        for _ in range(nsub):
            for i in range(11):
                for c in range(4):
                    acc = 0.0
                    for j in range(i):
                        acc += A[i, j] * k[j, c]
                    tmp[c] = y[c] + h * acc
                if not _field(tmp, mu, k[i]):
                    return out[: o + 1], o
            for c in range(4):
                acc = 0.0
                for i in range(11):
                    acc += b[i] * k[i, c]
                inc = h * acc - comp[c]
                t = y[c] + inc
                comp[c] = (t - y[c]) - inc
                y[c] = t
        # a pass too close to a primary for the step size shows up as an energy jump
        e = _energy(y, mu)
        if not (abs(e - e0) <= ENERGY_JUMP * max(1.0, abs(e0))):
            return out[: o + 1], o
        out[o + 1] = y
    return out, -1


def integrate_rk8(s0, params=None, t_end=1.0, backward=False):
    """Fixed-step RK8 trajectory sampled every ``output_Dt`` on [0, t_end].

    ``backward`` integrates with step -h (times are then negative), which is
    used to check reversibility. Raises :class:`CollisionError` when a stage
    comes within 1e-6 of a primary or the energy jumps by more than
    ``ENERGY_JUMP`` (relative) between output samples, which is how a pass
    too close for the fixed step shows up.
    """
    params = params or Cr3bpParams()
    if t_end <= 0:
        raise UsageError("t_end must be positive")
    nout = round(t_end / params.output_Dt)
    if nout < 1 or abs(nout * params.output_Dt - t_end) > 1e-9 * max(1.0, t_end):
        raise UsageError(f"t_end = {t_end} is not a multiple of output_Dt = {params.output_Dt}")
    y0 = _state_array(s0).astype(float)
    _distances(y0, params.mu)
    t0 = s0.t if isinstance(s0, Cr3bpState) else 0.0
    h = -params.step_h if backward else params.step_h
    states, fail = _integrate(y0, params.mu, h, params.substeps, nout, BUTCHER_A, BUTCHER_B)
    sign = -1.0 if backward else 1.0
    if fail >= 0:
        when = t0 + sign * (fail + 1) * params.output_Dt
        raise CollisionError(f"collision or unresolved close approach to a primary before t = {when:.6g}", time=when)
    times = t0 + sign * np.arange(nout + 1) * params.output_Dt
    return Trajectory(times, states, params)


Q_PLANE = "q-plane"
R_RPRIME_PLANE = "r-rprime-plane"


def continuous_angle_series(states, center, coordinate_choice=Q_PLANE, params=None, max_increment=0.45):
    """Unwrapped angle (revolutions) of the observed planar point about ``center``.

    q-plane: the point (q1, q2). r-rprime-plane: the point (r, r') with
    r = |q - planet| and r' = dr/dt. Each increment is taken in [-1/2, 1/2);
    an increment of magnitude >= ``max_increment`` is too close to the
    ambiguous half turn and raises :class:`UndersampledError`.
    """
    mu = (params or Cr3bpParams()).mu
    Y = np.asarray(states.states if isinstance(states, Trajectory) else states, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != 4 or len(Y) < 2:
        raise UsageError("need an (n, 4) array of at least two states")
    cx, cy = center
    if coordinate_choice == Q_PLANE:
        x, y = Y[:, 0] - cx, Y[:, 1] - cy
    elif coordinate_choice == R_RPRIME_PLANE:
        q1, q2, p1, p2 = Y.T
        r = np.hypot(q1 + mu, q2)
        rp = ((q1 + mu) * (p1 + q2) + q2 * (p2 - q1)) / r
        x, y = r - cx, rp - cy
    else:
        raise UsageError(f"unknown coordinate choice {coordinate_choice!r}")
    ang = np.arctan2(y, x) / (2 * np.pi)
    inc = mod1(np.diff(ang) + 0.5) - 0.5
    big = np.max(np.abs(inc))
    if big >= max_increment:
        raise UndersampledError(f"angle increment {big:.3f} rev per sample; reduce output_Dt")
    return ang[0] + np.concatenate([[0.0], np.cumsum(inc)])


def _checkpoints(n, count=10):
    # log-spaced prefix lengths over the last decade
    pts = np.unique(np.round(np.geomspace(max(n // 10, 2), n, count)).astype(int))
    return [int(c) for c in pts]


def rates_from_angles(lifted, Dt, p=2, tol=1e-4):
    """Rate (rev per time unit) from the WB average of per-sample increments.

    Returns (rate, spread, reliable) where spread is the range of the rate
    over prefix lengths spanning the last decade of the series.
    """
    inc = np.diff(np.asarray(lifted, dtype=float))
    rep = weighted_birkhoff_average(inc, p, _checkpoints(len(inc)))
    vals = [v / Dt for _, v in rep.partial_values]
    spread = max(vals) - min(vals)
    return rep.value / Dt, spread, spread <= tol


def relation_residual(rho_theta, rho_phi, target=RHO_P_REFERENCE):
    """min over signs of |mod1(+-rho_phi/rho_theta) - target|, and the sign used."""
    ratio = rho_phi / rho_theta
    best = min((abs(mod1(s * ratio) - target), s) for s in (1, -1))
    return best[0], best[1]


def cr3bp_rotation_rates(s0, params=None, t_end=500.0, p=2, q_center=None, r_center=(0.15, 0.0), trajectory=None):
    """Rotation rates of theta (q-plane angle) and phi (r-r' angle) for one orbit.

    Returns a flat record with both rates, the sidereal rate, the precession
    difference, the relation residual and the integration metadata. The
    rates are flagged unreliable when the WB estimate still moves by more
    than 1e-4 over the last decade of samples.
    """
    params = params or Cr3bpParams()
    if q_center is None:
        q_center = (-params.mu, 0.0)
    traj = trajectory if trajectory is not None else integrate_rk8(s0, params, t_end)
    theta = continuous_angle_series(traj, q_center, Q_PLANE, params)
    phi = continuous_angle_series(traj, r_center, R_RPRIME_PLANE, params)
    rho_theta, spread_t, ok_t = rates_from_angles(theta, params.output_Dt, p)
    rho_phi, spread_p, ok_p = rates_from_angles(phi, params.output_Dt, p)
    resid, sign = relation_residual(rho_theta, rho_phi)
    sidereal = rho_theta + 1 / (2 * np.pi)
    H = hamiltonian(traj.states, params)
    state0 = _state_array(s0)
    return {
        "rho_theta": rho_theta,
        "rho_phi": rho_phi,
        "rho_theta_sidereal": sidereal,
        "precession": rho_phi - sidereal,
        "relation_residual": resid,
        "relation_sign": sign,
        "rho_P_reference": RHO_P_REFERENCE,
        "spread_theta": spread_t,
        "spread_phi": spread_p,
        "reliable": bool(ok_t and ok_p),
        "energy": float(H[0]),
        "energy_drift": float(np.max(np.abs(H - H[0]))),
        "tableau": TABLEAU_ID,
        "h": params.step_h,
        "Dt": params.output_Dt,
        "mu": params.mu,
        "N": len(traj.states) - 1,
        "t_end": float(traj.times[-1] - traj.times[0]),
        "p": p,
        "initial_state": [float(v) for v in state0],
    }


def lagrange_point(params=None, guess=(0.4, 0.866)):
    """Equilibrium of the rotating-frame field near ``guess`` (position), with p = (-q2, q1)."""
    from scipy.optimize import fsolve

    params = params or Cr3bpParams()

    def f(q):
        y = np.array([q[0], q[1], -q[1], q[0]])
        return vector_field(y, params)[2:]

    q = fsolve(f, guess, xtol=1e-15)
    return Cr3bpState(q[0], q[1], -q[1], q[0])


@dataclass(frozen=True)
class OrbitSearchResult:
    r0: float
    v0: float
    state: Cr3bpState
    rates: dict
    evaluations: int

    def to_dict(self):
        out = asdict(self)
        out["state"] = [self.state.q1, self.state.q2, self.state.p1, self.state.p2]
        return out


def find_quasiperiodic_orbit(
    r0=0.2737,
    v_range=(1.24, 1.30),
    seed=0,
    n_scan=6,
    t_search=500.0,
    search_params=None,
    target=RHO_P_REFERENCE,
    tol=1e-10,
    max_iter=30,
):
    """Search the symmetric-line family for a quasiperiodic orbit with the reference rotation ratio.

    Starting states are ``symmetric_initial_state(r0, v0)``. A seeded random
    scan of v0 over ``v_range`` keeps the orbits whose WB estimates converge,
    a sign change of mod1(ratio) - target is bracketed, and the secant method
    (falling back to bisection) refines v0. Searching runs at a coarser step
    than production runs; the returned state is meant to be frozen in a
    config and re-checked at full resolution.
    """
    params = search_params or Cr3bpParams(step_h=1e-4)
    rng = np.random.default_rng(seed)
    evals = 0

    def g(v):
        nonlocal evals
        evals += 1
        s = symmetric_initial_state(r0, v, params.mu)
        try:
            rates = cr3bp_rotation_rates(s, params, t_search)
        except (CollisionError, UndersampledError):
            return None, None
        if not rates["reliable"]:
            return None, rates
        ratio = rates["rho_phi"] / rates["rho_theta"]
        vals = [mod1(sg * ratio) - target for sg in (1, -1)]
        return min(vals, key=abs), rates

    vs = np.sort(rng.uniform(*v_range, size=n_scan))
    scan = [(v, *g(v)) for v in vs]
    good = [(v, f, r) for v, f, r in scan if f is not None and abs(f) < 0.1]
    bracket = None
    for (va, fa, _), (vb, fb, _) in zip(good, good[1:]):
        if fa * fb <= 0:
            bracket = (va, fa, vb, fb)
            break
    if bracket is None:
        raise UsageError("no sign change of the rotation ratio found in the scanned range")
    va, fa, vb, fb = bracket
    rates = None
    for _ in range(max_iter):
        v = vb - fb * (vb - va) / (fb - fa)
        if not (min(va, vb) < v < max(va, vb)):
            v = 0.5 * (va + vb)
        fv, rates = g(v)
        if fv is None:
            v = 0.5 * (va + vb)
            fv, rates = g(v)
            if fv is None:
                raise UsageError(f"orbit at v0 = {v} lost quasiperiodicity during the search")
        if abs(fv) < tol:
            break
        if fa * fv <= 0:
            vb, fb = v, fv
        else:
            va, fa = v, fv
    return OrbitSearchResult(r0, float(v), symmetric_initial_state(r0, v, params.mu), rates, evals)
