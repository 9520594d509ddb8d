import numpy as np
import pytest

from quasirot.embedding import EmbeddingConfig, build_delay_cloud
from quasirot.errors import IncompleteLiftError, LiftAmbiguityError, UsageError
from quasirot.lift import (
    ContinuationParams,
    candidate_pairs,
    cloud_winding,
    continue_lift,
    lift_oracle,
    near_return_chain,
    pilot_delta,
    rotation_rate,
)
from quasirot.projections import FISH, FLOWER, angle_from_reference, eval_fourier
from quasirot.torus import mod1, rigid_orbit

from helpers import GOLDEN, golden_distance


def _cloud(phi, K=7, d=1):
    return build_delay_cloud(phi, EmbeddingConfig(K=K, d_assumed=d))


def _edge_offsets_consistent(cloud, lift):
    """Every candidate pair within delta: the chosen integer is inside delta, the others outside."""
    rows, cols, dist = candidate_pairs(cloud, lift.delta, budget=12)
    h = lift.delta_hat
    gap = h[rows] - h[cols]
    g_chosen = np.sqrt(dist**2 + gap**2)
    accepted = g_chosen < lift.delta
    for k in (-2, -1, 1, 2):
        assert np.all(np.sqrt(dist[accepted] ** 2 + (gap[accepted] + k) ** 2) >= lift.delta)
    return int(accepted.sum())


def test_params_validation():
    for bad in (0.0, 0.5, -1.0):
        with pytest.raises(UsageError):
            ContinuationParams(delta=bad)
    with pytest.raises(UsageError):
        ContinuationParams(order="random")
    with pytest.raises(UsageError):
        ContinuationParams(max_rounds=0)


def test_pure_rotation_lifts_to_zero_offsets():
    phi = rigid_orbit(GOLDEN, 0.0, 4999)[:, 0]
    cloud = _cloud(phi)
    lift = continue_lift(cloud, ContinuationParams(delta=0.2))
    assert lift.complete
    assert np.all(lift.offsets == 0)
    assert rotation_rate(lift).rate == pytest.approx(GOLDEN, abs=1e-12)
    oracle = lift_oracle(phi, cloud.deltas)
    assert np.all(oracle.offsets == 0)


@pytest.mark.parametrize("case, span, tol", [("fish_case", 0.87, 0.05), ("flower_case", 1.2, 0.1)])
def test_planar_maps_lift_and_rate(case, span, tol, request):
    c = request.getfixturevalue(case)
    assert c.lift.complete
    h = c.lift.delta_hat
    assert abs((h.max() - h.min()) - span) < tol
    assert c.lift.offsets[0] == 0
    assert golden_distance(rotation_rate(c.lift).rate) < 1e-12


@pytest.mark.parametrize("case", ["fish_case", "flower_case"])
def test_lift_matches_oracle_up_to_one_integer(case, request):
    c = request.getfixturevalue(case)
    oracle = lift_oracle(c.theta, c.cloud.deltas)
    assert len(np.unique(c.lift.offsets - oracle.offsets)) == 1


@pytest.mark.parametrize("case", ["fish_case", "flower_case"])
def test_rate_is_stable_under_delta_halving(case, request):
    c = request.getfixturevalue(case)
    half = continue_lift(c.cloud, ContinuationParams(delta=c.delta / 2))
    assert half.complete
    assert abs(rotation_rate(half).rate - rotation_rate(c.lift).rate) < 1e-13


def test_fifo_and_lifo_agree(fish_case):
    lifo = continue_lift(fish_case.cloud, ContinuationParams(delta=fish_case.delta, order="lifo"))
    np.testing.assert_array_equal(lifo.offsets, fish_case.lift.offsets)


def test_lift_consistency(flower_case):
    assert _edge_offsets_consistent(flower_case.cloud, flower_case.lift) > len(flower_case.cloud)


def test_reversed_observations_give_complementary_rate(fish_case):
    forward = rotation_rate(fish_case.lift).rate
    cloud = _cloud(fish_case.phi[::-1].copy())
    delta, _ = pilot_delta(cloud)
    backward = rotation_rate(continue_lift(cloud, ContinuationParams(delta=delta))).rate
    assert abs(backward - mod1(1 - forward)) < 1e-12


def test_exhaustive_matches_kd_search():
    theta = rigid_orbit(GOLDEN, 0.0, 4999)[:, 0]
    cloud = _cloud(angle_from_reference(eval_fourier(FLOWER, theta), (0.5, 1.5)))
    kd = continue_lift(cloud, ContinuationParams(delta=0.05))
    brute = continue_lift(cloud, ContinuationParams(delta=0.05, exhaustive=True))
    assert kd.complete and brute.complete
    np.testing.assert_array_equal(kd.offsets, brute.offsets)


def test_integer_vector_rate_on_two_torus():
    rho = np.array([GOLDEN, np.sqrt(2) - 1])
    theta = rigid_orbit(rho, np.zeros(2), 99_999)
    phi = mod1(2 * theta[:, 0] - theta[:, 1] + 0.05 * np.sin(2 * np.pi * theta[:, 0]))
    cloud = _cloud(phi, K=7, d=2)
    delta, _ = pilot_delta(cloud)
    lift = continue_lift(cloud, ContinuationParams(delta=delta))
    assert lift.complete
    assert abs(rotation_rate(lift).rate - mod1(2 * rho[0] - rho[1])) < 1e-12
    assert len(np.unique(lift.offsets - lift_oracle(theta, cloud.deltas).offsets)) == 1


def test_under_embedded_cloud_is_ambiguous(flower_case):
    # with K = 1 distinct sheets of the lifted graph overlap, so accepted matches contradict
    cloud = build_delay_cloud(flower_case.phi, EmbeddingConfig(K=1, strict=False))
    with pytest.raises(LiftAmbiguityError) as exc:
        continue_lift(cloud, ContinuationParams(delta=0.3))
    assert exc.value.exit_code == 3 and len(exc.value.pair) == 2


def test_small_sample_gives_partial_lift():
    theta = rigid_orbit(GOLDEN, 0.0, 499)[:, 0]
    cloud = _cloud(angle_from_reference(eval_fourier(FISH, theta), (8.25, 4.4)))
    lift = continue_lift(cloud, ContinuationParams(delta=0.005))
    assert not lift.complete
    assert 0 < lift.fraction < 1
    assert lift.largest_component_fraction < 1
    assert np.isnan(lift.delta_hat[~lift.assigned]).all()
    with pytest.raises(IncompleteLiftError):
        rotation_rate(lift)
    with pytest.raises(UsageError):
        rotation_rate(lift)


def test_shifted_lift_has_same_rate(flower_case):
    r0 = rotation_rate(flower_case.lift).rate
    assert rotation_rate(flower_case.lift.shifted(3)).rate == pytest.approx(r0, abs=1e-12)


def test_oracle_refuses_sparse_theta():
    theta = np.array([0.0, 0.5])
    with pytest.raises(UsageError):
        lift_oracle(theta, np.array([0.1, 0.6]))


@pytest.mark.parametrize(
    "rho, delta1, N, expected",
    [
        (np.pi - 3, 0.01, 200, {7, 113}),
        (mod1(np.sqrt([3.0, 5.0])), 0.13, 100, {4, 93}),
        (mod1(np.sqrt([3.0, 5.0])), 0.011, 20_000, {4109, 11700}),
    ],
)
def test_near_return_chains(rho, delta1, N, expected):
    theta = rigid_orbit(rho, np.zeros(np.size(rho)), N - 1)
    report = near_return_chain(theta, delta1, N)
    assert expected <= set(report.sigmas)
    assert report.gcd == 1 and report.hypothesis_ok
    assert report.reachable and report.reached == N


def test_no_near_return_gives_empty_report():
    theta = rigid_orbit(GOLDEN, 0.0, 9)
    report = near_return_chain(theta, 1e-6, 10)
    assert report.sigmas == [] and not report.reachable


def test_chain_input_errors():
    theta = rigid_orbit(GOLDEN, 0.0, 9)
    with pytest.raises(UsageError):
        near_return_chain(theta, 0.1, 50)
    with pytest.raises(UsageError):
        near_return_chain(theta, 0.0, 10)


def test_cloud_winding_counts_reference_degree():
    theta = rigid_orbit(GOLDEN, 0.0, 19_999)[:, 0]
    pts = eval_fourier(FLOWER, theta)
    cloud = build_delay_cloud(pts, EmbeddingConfig(K=5, component_metric="euclidean", d_assumed=2),
                              phi=np.zeros(len(pts)))
    for ref, w in [((0.5, 1.5), 1), ((0.0, 0.0), 6)]:
        phi = angle_from_reference(pts, ref)
        g, _ = cloud_winding(cloud, phi, radius=0.05)
        assert g == w
