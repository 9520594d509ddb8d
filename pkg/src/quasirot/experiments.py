"""End-to-end pipelines: synthetic experiments and the observations-only entry point.

Each planar pipeline turns observations into angles seen from a reference
point, builds a delay cloud of K consecutive angles, lifts the increments by
embedding continuation and averages them with the weighted Birkhoff average.
"""

import configparser
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np

from . import cr3bp as cr
from .birkhoff import EXTENDED_DPS, convergence_curve
from .embedding import EmbeddingConfig, build_delay_cloud
from .errors import ConfigurationError, DataFormatError, IncompleteLiftError, UsageError, WindingRefusal
from .io import (
    ANGLE_COLUMNS,
    CONVERGENCE_COLUMNS,
    LIFT_COLUMNS,
    PLANAR_COLUMNS,
    TRAJECTORY_COLUMNS,
    read_observations,
    write_columns,
    write_json,
)
from .lift import ContinuationParams, cloud_winding, continue_lift, pilot_delta, rotation_rate
from .projections import (
    FISH,
    FLOWER,
    angle_from_reference,
    curve_winding_number,
    delay_pair_series,
    eval_fourier,
    loop_degrees,
    tilted_radial_projection,
    torus_map_3d,
)
from .torus import check_irrational, mod1, rigid_orbit

log = logging.getLogger(__name__)

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "estimate_from_file",
    "lift_angles",
]

EXPERIMENTS = (
    "fish",
    "flower",
    "fish-delay-pair",
    "flower-delay-pair",
    "fish-torus",
    "flower-torus",
    "cr3bp",
    "custom",
)
CURVES = {"fish": FISH, "flower": FLOWER}
NAMED_CONSTANTS = {
    "golden": (lambda: (mpmath.sqrt(5) - 1) / 2),
    "sqrt3/2": (lambda: mpmath.sqrt(3) / 2),
}
CONVERGENCE_POINTS = 24


@dataclass
class ExperimentConfig:
    experiment: str
    N: int = 100_000
    K: int = 7
    delta: float = None  # None: pilot estimate
    p: int = 1
    ref: tuple = None
    ref2: tuple = None
    out_dir: str = None
    seed: int = 0
    precision: str = "double"
    allow_winding: bool = False
    input: str = None
    curve: str = None
    rho: str = "golden"
    theta0: float = 0.0
    y_rate: str = None
    alpha: float = 0.05  # tilt, in units of pi
    cr3bp: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.N < 2 * self.K + 2:
            raise ConfigurationError(f"N = {self.N} is too small for K = {self.K}")
        if self.delta is not None and not (0 < self.delta < 0.5):
            raise ConfigurationError(f"delta must lie in (0, 1/2), got {self.delta}")
        if self.p < 1:
            raise ConfigurationError("p must be >= 1")
        if self.precision not in ("double", "extended"):
            raise ConfigurationError(f"unknown precision {self.precision!r}")
        if self.experiment == "custom" and not self.input:
            raise ConfigurationError("the custom experiment needs an input file")
        if self.input and not Path(self.input).exists():
            raise ConfigurationError(f"input file {self.input} does not exist")


def _constant(text, extended=False):
    text = str(text).strip()
    if text in NAMED_CONSTANTS:
        if extended:
            return NAMED_CONSTANTS[text]()
        with mpmath.workdps(EXTENDED_DPS):
            return float(NAMED_CONSTANTS[text]())
    return mpmath.mpf(text) if extended else float(text)


def _point(text):
    if text is None or text == "":
        return None
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    parts = [v for v in str(text).replace(",", " ").split()]
    if len(parts) != 2:
        raise ConfigurationError(f"expected a point 'x, y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _bundled_ini():
    parser = configparser.ConfigParser()
    parser.read_string(resources.files("quasirot").joinpath("data/experiments.ini").read_text())
    return parser


def _user_ini(path):
    parser = configparser.ConfigParser(default_section="__none__")
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, UnicodeDecodeError, configparser.Error) as exc:
        raise DataFormatError(f"cannot read config {path}: {exc}") from exc
    return parser


_CR3BP_KEYS = {"mu", "h", "Dt", "t_end", "r0", "v0", "q_center", "r_center"}


def _apply(values, section):
    out = dict(values)
    for key, raw in section.items():
        if key in ("n", "k"):
            key = key.upper()
        if key == "dt":
            key = "Dt"
        out[key] = raw
    return out


def load_config(experiment, overrides=None, config_path=None):
    """Bundled defaults for ``experiment``, then ``overrides``, then a user config file.

    The user file may hold a section named after the experiment and/or a
    ``[run]`` section; its values win over command-line overrides.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    values = _apply({}, _bundled_ini()[experiment])
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if config_path:
        user = _user_ini(config_path)
        for name in ("run", experiment):
            if user.has_section(name):
                values = _apply(values, user[name])
    return _build_config(experiment, values)


def _flag(v):
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _build_config(experiment, v):
    delta = v.get("delta", "auto")
    delta = None if delta in (None, "auto") else float(delta)
    crv = {}
    for key in _CR3BP_KEYS:
        if key in v:
            crv[key] = _point(v[key]) if key.endswith("center") else float(v[key])
    try:
        return ExperimentConfig(
            experiment=experiment,
            N=int(v.get("N", 100_000)),
            K=int(v.get("K", 7)),
            delta=delta,
            p=int(v.get("p", 1)),
            ref=_point(v.get("ref")),
            ref2=_point(v.get("ref2")),
            out_dir=v.get("out_dir"),
            seed=int(v.get("seed", 0)),
            precision=v.get("precision", "double"),
            allow_winding=_flag(v.get("allow_winding", False)),
            input=v.get("input"),
            curve=v.get("curve"),
            rho=v.get("rho", "golden"),
            theta0=float(v.get("theta0", 0.0)),
            y_rate=v.get("y_rate"),
            alpha=float(v.get("alpha", 0.05)),
            cr3bp=crv,
        )
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise ConfigurationError(f"bad configuration value: {exc}") from exc


# -- lifting -----------------------------------------------------------------


def _checkpoints(n):
    return sorted({int(c) for c in np.geomspace(min(100, n), n, CONVERGENCE_POINTS).round()} | {n})


def lift_angles(phi, K=7, delta=None, p=1, precision="double", extended_deltas=None):
    """Angle series -> (cloud, lift, rate report, delta used, separation estimate)."""
    cloud = build_delay_cloud(np.asarray(phi, dtype=float), EmbeddingConfig(K=K))
    eps = None
    if delta is None:
        delta, eps = pilot_delta(cloud)
    lift = continue_lift(cloud, ContinuationParams(delta=delta))
    if not lift.complete:
        return cloud, lift, None, delta, eps
    report = rotation_rate(lift, p, checkpoints=_checkpoints(len(cloud)))
    if precision == "extended":
        values = None
        if extended_deltas is not None:
            with mpmath.workdps(EXTENDED_DPS):
                values = [_align(x, d) for x, d in zip(extended_deltas, cloud.deltas)]
        ext = rotation_rate(lift, p, precision="extended", values=values)
        report.extended = ext
    return cloud, lift, report, delta, eps


def _align(x_mp, d):
    # extended and double increments may straddle the 0/1 cut
    return x_mp + round(d - float(x_mp))


# -- synthetic observations --------------------------------------------------


@dataclass
class Projection:
    name: str
    points: np.ndarray
    ref: tuple
    winding: int
    expected: float  # rate mod 1 for the positive orientation
    extended: object = None  # callable returning extended-precision increments
    degrees: tuple = None  # winding along the two generator loops (torus only)


@dataclass(frozen=True)
class _LiftSettings:
    K: int
    delta: float
    p: int
    precision: str


def _theta(cfg, n_points):
    rho = _constant(cfg.rho)
    check_irrational(rho)
    return rigid_orbit(rho, cfg.theta0, n_points - 1)[:, 0]


def _extended_curve_increments(curve, cfg, n_points, delay_pair):
    px, py = (mpmath.mpf(repr(v)) for v in cfg.ref)

    def run():
        with mpmath.workdps(EXTENDED_DPS):
            rho = _constant(cfg.rho, extended=True)
            two_pi = 2 * mpmath.pi
            coeffs = [(k, mpmath.mpc(c)) for k, c in curve.coefficients]

            def gamma(t):
                z = mpmath.expjpi(2 * t)
                return mpmath.fsum(c * z**k for k, c in coeffs)

            start = -1 if delay_pair else 0
            vals = [gamma(mpmath.frac(n * rho + cfg.theta0)) for n in range(start, n_points)]
            if delay_pair:
                pts = [(vals[i].real, vals[i + 1].real) for i in range(n_points)]
            else:
                pts = [(v.real, v.imag) for v in vals]
            phi = [mpmath.frac(mpmath.atan2(y - py, x - px) / two_pi) for x, y in pts]
            return [mpmath.frac(b - a) for a, b in zip(phi, phi[1:])]

    return run


def _curve_projection(cfg):
    curve = CURVES[cfg.curve]
    delay_pair = cfg.experiment.endswith("delay-pair")
    rho = _constant(cfg.rho)
    if delay_pair:
        theta = _theta(cfg, cfg.N + 1)
        pts = delay_pair_series(curve.complex_value(theta).real)

        def closed(t):
            return np.stack([curve.complex_value(t - rho).real, curve.complex_value(t).real], axis=-1)

    else:
        pts = eval_fourier(curve, _theta(cfg, cfg.N))

        def closed(t):
            return eval_fourier(curve, t)

    w = curve_winding_number(closed, cfg.ref)
    ext = _extended_curve_increments(curve, cfg, cfg.N, delay_pair) if cfg.precision == "extended" else None
    return [Projection(cfg.experiment, pts, cfg.ref, w, rho, ext)]


def _torus_projections(cfg):
    curve = CURVES[cfg.curve]
    rho = _constant(cfg.rho)
    y_rate = _constant(cfg.y_rate)
    alpha = cfg.alpha * np.pi
    orbit = rigid_orbit([rho, y_rate], [cfg.theta0, 0.0], cfg.N - 1)

    def proj1(theta, y):
        return torus_map_3d(curve, theta, y)[..., :2]

    def proj2(theta, y):
        return tilted_radial_projection(torus_map_3d(curve, theta, y), alpha)

    out = []
    for name, proj, ref in (("projection-1", proj1, cfg.ref), ("projection-2", proj2, cfg.ref2)):
        a = loop_degrees(proj, ref)
        expected = mod1(a[0] * rho + a[1] * y_rate)
        w = math.gcd(abs(a[0]), abs(a[1]))
        # the expected rate already carries the orientation of a
        out.append(Projection(name, proj(orbit[:, 0], orbit[:, 1]), ref, w, expected, degrees=a))
    return out


def synthetic_projections(cfg):
    if cfg.experiment.endswith("-torus"):
        return _torus_projections(cfg)
    return _curve_projection(cfg)


# -- running -------------------------------------------------------------------


def _check_winding(w, allow, ref):
    if abs(w) != 1 and not allow:
        raise WindingRefusal(
            f"winding number {w} at reference point {ref}: the measured rate would be |W| = {abs(w)} times "
            "the true rate (use --allow-winding to proceed anyway)",
            winding=w,
        )


def _write_lift(out, tag, cloud, lift):
    if out is None:
        return
    n = np.arange(len(cloud), dtype=np.int64)
    write_columns(out / f"lift{tag}.csv", LIFT_COLUMNS, [n, cloud.deltas, lift.offsets, lift.delta_hat])


def _analyse(points, phi, ref, winding, cfg, out, tag, extended=None):
    """Run the lift on one angle series and write its artifacts."""
    if out is not None:
        n = np.arange(len(phi), dtype=np.int64)
        if points is not None:
            write_columns(out / f"observations{tag}.csv", PLANAR_COLUMNS, [n, points[:, 0], points[:, 1]])
        else:
            write_columns(out / f"observations{tag}.csv", ANGLE_COLUMNS, [n, phi])
    ext = extended() if extended is not None and cfg.precision == "extended" else None
    cloud, lift, report, delta, eps = lift_angles(phi, cfg.K, cfg.delta, cfg.p, cfg.precision, ext)
    _write_lift(out, tag, cloud, lift)
    rec = {
        "reference_point": list(ref) if ref is not None else None,
        "winding": winding,
        "N_observations": len(phi),
        "N_increments": len(cloud),
        "K": cfg.K,
        "delta": delta,
        "separation_estimate": eps,
        "assigned": lift.assigned_count,
        "complete": lift.complete,
        "largest_component_fraction": lift.largest_component_fraction,
    }
    if not lift.complete:
        raise IncompleteLiftError(
            f"continuation assigned {lift.assigned_count} of {len(cloud)} increments "
            f"(largest connected fraction {lift.largest_component_fraction:.3f}); increase N or delta"
        )
    dh = lift.delta_hat
    rec.update(
        {
            "p": cfg.p,
            "rate": report.rate,
            "unreduced_rate": report.unreduced,
            "lift_min": float(dh.min()),
            "lift_max": float(dh.max()),
            "lift_range": float(dh.max() - dh.min()),
        }
    )
    if report.extended is not None:
        rec["rate_extended"] = mpmath.nstr(report.extended.rate, EXTENDED_DPS - 5)
    if out is not None:
        cps = [c for c, _ in report.partial_values]
        write_columns(
            out / f"convergence{tag}.csv",
            CONVERGENCE_COLUMNS,
            [np.array(cps, dtype=np.int64), [mod1(v) for _, v in report.partial_values]],
        )
    return rec, report


def _rate_error(rate, expected):
    return min(abs(rate - expected), abs(rate - mod1(1 - expected)))


def _run_synthetic(cfg, out):
    records = []
    projections = synthetic_projections(cfg)
    settings = _LiftSettings(cfg.K, cfg.delta, cfg.p, cfg.precision)
    for i, proj in enumerate(projections):
        _check_winding(proj.winding, cfg.allow_winding, proj.ref)
        phi = angle_from_reference(proj.points, proj.ref)
        tag = f"_{i + 1}" if len(projections) > 1 else ""
        rec, report = _analyse(proj.points, phi, proj.ref, proj.winding, settings, out, tag, proj.extended)
        rec["projection"] = proj.name
        rec["expected_rates"] = sorted({proj.expected, mod1(1 - proj.expected)})
        rec["error"] = _rate_error(report.rate, proj.expected)
        if proj.degrees is not None:
            rec["loop_degrees"] = list(proj.degrees)
        if report.extended is not None:
            with mpmath.workdps(EXTENDED_DPS):
                exact = _constant(cfg.rho, extended=True)
                r = report.extended.rate
                rec["error_extended"] = mpmath.nstr(min(abs(r - exact), abs(r - (1 - exact))), 5)
        records.append(rec)
    return records


def _run_cr3bp(cfg, out):
    c = cfg.cr3bp
    params = cr.Cr3bpParams(mu=c.get("mu", 0.1), step_h=c.get("h", 2e-5), output_Dt=c.get("Dt", 1e-3))
    s0 = cr.symmetric_initial_state(c.get("r0", 0.2737), c.get("v0", 1.26719232967924), params.mu)
    traj = cr.integrate_rk8(s0, params, c.get("t_end", 500.0))
    rates = cr.cr3bp_rotation_rates(
        s0, params, p=cfg.p, q_center=c.get("q_center"), r_center=c.get("r_center", (0.15, 0.0)), trajectory=traj
    )
    if out is not None:
        H = cr.hamiltonian(traj.states, params)
        write_columns(out / "trajectory.csv", TRAJECTORY_COLUMNS, [traj.times, *traj.states.T, H])
        theta = cr.continuous_angle_series(traj, c.get("q_center") or (-params.mu, 0.0), cr.Q_PLANE, params)
        phi = cr.continuous_angle_series(traj, c.get("r_center", (0.15, 0.0)), cr.R_RPRIME_PLANE, params)
        for name, ang in (("theta", theta), ("phi", phi)):
            inc = np.diff(ang)
            cps = _checkpoints(len(inc))
            curve = convergence_curve(inc, cfg.p, cps)
            write_columns(
                out / f"convergence_{name}.csv",
                CONVERGENCE_COLUMNS,
                [np.array(cps, dtype=np.int64), [v / params.output_Dt for _, v in curve]],
            )
    return rates


def run_experiment(cfg):
    """Run one configured experiment; returns the summary record (also written as summary.json).

    Errors from the pipeline propagate; the CLI maps them to exit codes.
    """
    t0 = time.perf_counter()
    out = Path(cfg.out_dir) if cfg.out_dir else None
    summary = {"experiment": cfg.experiment, "precision": cfg.precision, "seed": cfg.seed}
    try:
        if cfg.experiment == "cr3bp":
            summary.update(_run_cr3bp(cfg, out))
            summary["status"] = "ok" if summary["reliable"] else "unreliable"
        elif cfg.experiment == "custom":
            rec = estimate_from_file(
                cfg.input, cfg.K, cfg.delta, cfg.p, cfg.ref, cfg.allow_winding, cfg.precision, out_dir=out
            )
            summary.update(rec)
            summary["status"] = "ok"
        else:
            recs = _run_synthetic(cfg, out)
            summary["N"] = cfg.N
            summary["rho"] = _constant(cfg.rho)
            if len(recs) == 1:
                summary.update(recs[0])
            else:
                summary["projections"] = recs
                summary["rates"] = [r["rate"] for r in recs]
            summary["status"] = "ok"
    except Exception as exc:
        summary["status"] = type(exc).__name__
        summary["error_message"] = str(exc)
        summary["runtime_s"] = time.perf_counter() - t0
        if out is not None:
            write_json(out / "summary.json", summary)
        raise
    summary["runtime_s"] = time.perf_counter() - t0
    if out is not None:
        write_json(out / "summary.json", summary)
    return summary


def estimate_from_file(path, K=7, delta=None, p=1, ref=None, allow_winding=False, precision="double", out_dir=None):
    """Rotation rate from an observation file alone.

    One angle column is used directly. Two columns are planar points, turned
    into angles seen from ``ref``; the winding number of the observed curve
    around ``ref`` is estimated from the delay cloud and the run is refused
    when it is not +-1 (unless ``allow_winding``).
    """
    kind, data = read_observations(path)
    out = Path(out_dir) if out_dir else None
    if kind == "planar":
        if ref is None:
            raise UsageError("planar observations need a reference point (--ref-x/--ref-y)")
        phi = angle_from_reference(data, ref)
        cloud = build_delay_cloud(phi, EmbeddingConfig(K=K))
        radius = delta if delta is not None else 0.05
        w, counts = cloud_winding(cloud, phi, radius)
        _check_winding(w, allow_winding, ref)
        points = data
    else:
        phi, points, w = data, None, None
    rec, _ = _analyse(points, phi, ref, w, _LiftSettings(K, delta, p, precision), out, "")
    rec["input"] = str(path)
    rec["observation_kind"] = kind
    return rec
