import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skt_hang.errors import DegenerateForward, DegeneratePath, DegenerateTrajectory
from skt_hang.geometry import (
    GravityVector,
    SE3Pose,
    SKTrajectory,
    arc_lengths,
    augment_trajectory,
    make_rotation,
    relative_grasp,
    resample_path,
)

G = GravityVector()


def random_pose(rng):
    f = rng.normal(size=3)
    while np.linalg.norm(np.cross(f, G.direction)) < 1e-3:
        f = rng.normal(size=3)
    return SE3Pose(make_rotation(f, G), rng.normal(size=3))


# --- make_rotation -----------------------------------------------------------

def test_make_rotation_axis_aligned():
    r = make_rotation(np.array([1.0, 0.0, 0.0]), G)
    assert np.allclose(r[:, 0], [1, 0, 0])
    assert np.allclose(r[:, 1], [0, 1, 0])
    assert np.allclose(r[:, 2], [0, 0, 1])


def test_make_rotation_yaw_90():
    r = make_rotation(np.array([0.0, 1.0, 0.0]), G)
    assert np.allclose(r[:, 0], [0, 1, 0])
    assert np.allclose(r[:, 1], [-1, 0, 0])
    assert np.allclose(r[:, 2], [0, 0, 1])


def test_make_rotation_tilted_forward_matches_cross_product_oracle():
    f = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
    r = make_rotation(f, G)
    # independent construction straight from the cross-product definition
    x = f / np.linalg.norm(f)
    y = np.cross(x, G.direction)
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    expected = np.stack([x, y, z], axis=1)
    assert np.allclose(r, expected, atol=1e-12)
    assert np.abs(r.T @ r - np.eye(3)).max() < 1e-9


def test_make_rotation_rejects_parallel_to_gravity():
    with pytest.raises(DegenerateForward):
        make_rotation(np.array([0.0, 0.0, -1.0]), G)
    with pytest.raises(DegenerateForward):
        make_rotation(np.zeros(3), G)


def test_make_rotation_bulk_orthonormal_and_horizontal_y():
    rng = np.random.default_rng(0)
    n_bad = 0
    for _ in range(10_000):
        f = rng.normal(size=3)
        if np.linalg.norm(np.cross(f / np.linalg.norm(f), G.direction)) < 1e-5:
            n_bad += 1
            continue
        r = make_rotation(f, G)
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(r) - 1.0) < 1e-9
        assert abs(np.dot(r[:, 1], G.direction)) < 1e-9
    assert n_bad < 10  # nearly all random directions are valid


# --- augment_trajectory ------------------------------------------------------

def test_augment_straight_line_axes_point_toward_hung_end():
    # waypoints run away from the hung end along +x, so travel is along -x
    pts = np.array([[0.0, 0, 0.2], [0.05, 0, 0.2], [0.10, 0, 0.2], [0.15, 0, 0.2]])
    traj = augment_trajectory(pts, G)
    assert not traj.positions_only
    for w in traj.waypoints:
        assert np.allclose(w.rotation[:, 0], [-1, 0, 0], atol=1e-12)
    assert np.array_equal(traj.positions, pts)


def test_augment_two_waypoints_share_rotation():
    pts = np.array([[0.0, 0, 0], [0.1, 0.05, 0]])
    traj = augment_trajectory(pts, G)
    assert np.allclose(traj.waypoints[0].rotation, traj.waypoints[1].rotation)


def test_augment_quarter_circle_tangents_match_analytic_arc():
    # quarter circle in the xz-plane: p(theta) = (R sin, 0, R (1 - cos))
    radius = 0.1
    t = 41
    theta = np.linspace(0.0, np.pi / 2.0, t)
    pts = np.stack(
        [radius * np.sin(theta), np.zeros(t), radius * (1.0 - np.cos(theta))], axis=1
    )
    # index 0 is the hung end, so travel at waypoint i is toward index i-1:
    # the analytic tangent is -dp/dtheta.
    traj = augment_trajectory(pts, G)
    chord = radius * 2.0 * np.sin((theta[1] - theta[0]) / 2.0)
    max_angle = chord / radius  # chord direction deviates below this bound
    for i in range(1, t):
        tangent = -np.array([radius * np.cos(theta[i]), 0.0, radius * np.sin(theta[i])])
        tangent /= np.linalg.norm(tangent)
        x = traj.waypoints[i].rotation[:, 0]
        angle = np.arccos(np.clip(np.dot(x, tangent), -1, 1))
        assert angle < max_angle


def test_augment_rejects_coincident_points():
    pts = np.zeros((5, 3))
    with pytest.raises(DegenerateTrajectory):
        augment_trajectory(pts, G)


def test_augment_vertical_step_falls_back_to_previous_axis():
    pts = np.array([[0.0, 0, 0], [0.0, 0, 0.05], [0.1, 0, 0.05]])
    traj = augment_trajectory(pts, G)
    # segment 2->1 travels -x; segment 1->0 is straight down (degenerate)
    assert np.allclose(traj.waypoints[2].rotation[:, 0], [-1, 0, 0])
    assert np.allclose(traj.waypoints[1].rotation[:, 0], [-1, 0, 0])
    assert np.allclose(traj.waypoints[0].rotation[:, 0], [-1, 0, 0])


def test_augment_preserves_translations_exactly():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(12, 3))
    traj = augment_trajectory(pts, G)
    assert np.array_equal(traj.positions, pts)


# --- relative_grasp ----------------------------------------------------------

def test_relative_grasp_identity_frame():
    rng = np.random.default_rng(1)
    t_ee = random_pose(rng)
    rel = relative_grasp(SE3Pose.identity(), t_ee)
    assert np.allclose(rel.rotation, t_ee.rotation)
    assert np.allclose(rel.translation, t_ee.translation)


def test_relative_grasp_self_is_identity():
    rng = np.random.default_rng(2)
    t = random_pose(rng)
    rel = relative_grasp(t, t)
    assert np.allclose(rel.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(rel.translation, 0.0, atol=1e-12)


def test_relative_grasp_round_trip_random_pairs():
    rng = np.random.default_rng(4)
    for _ in range(50):
        t_kpt, t_ee = random_pose(rng), random_pose(rng)
        rel = relative_grasp(t_kpt, t_ee)
        # brute-force 4x4 homogeneous multiply as the oracle
        def hom(p):
            m = np.eye(4)
            m[:3, :3] = p.rotation
            m[:3, 3] = p.translation
            return m
        recomposed = hom(t_kpt) @ hom(rel)
        assert np.abs(recomposed - hom(t_ee)).max() < 1e-9


# --- resample_path -----------------------------------------------------------

def test_resample_two_point_segment():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    out = resample_path(pts, 10)
    assert out.shape == (10, 3)
    assert np.allclose(out[:, 0], np.linspace(0, 1, 10))
    assert np.allclose(out[:, 1:], 0.0)


def test_resample_idempotent_on_uniform_input():
    pts = np.stack([np.linspace(0, 1, 7), np.linspace(0, 2, 7), np.zeros(7)], axis=1)
    out = resample_path(pts, 7)
    assert np.abs(out - pts).max() < 1e-12


def test_resample_noisy_polyline_against_arc_length_table():
    rng = np.random.default_rng(7)
    pts = np.cumsum(rng.normal(scale=0.02, size=(100, 3)), axis=0)
    t = 20
    out = resample_path(pts, t)
    assert np.allclose(out[0], pts[0])
    assert np.allclose(out[-1], pts[-1])
    # oracle: walk the cumulative arc-length table by hand per target
    s = arc_lengths(pts)
    targets = np.linspace(0, s[-1], t)
    for j, target in enumerate(targets):
        i = int(np.searchsorted(s, target, side="right")) - 1
        i = min(max(i, 0), len(pts) - 2)
        alpha = (target - s[i]) / (s[i + 1] - s[i])
        expected = pts[i] + alpha * (pts[i + 1] - pts[i])
        assert np.abs(out[j] - expected).max() < 1e-9
    # spacing is uniform in INPUT arc length: recover each output point's
    # parameter on the input polyline and check the parameter increments
    params = []
    for j in range(t):
        d = np.linalg.norm(pts - out[j], axis=1)
        i = int(np.searchsorted(s, targets[j], side="right")) - 1
        i = min(max(i, 0), len(pts) - 2)
        seg = pts[i + 1] - pts[i]
        alpha = float(np.dot(out[j] - pts[i], seg) / np.dot(seg, seg))
        params.append(s[i] + alpha * (s[i + 1] - s[i]))
        del d
    steps = np.diff(params)
    assert np.abs(steps - steps.mean()).max() < 1e-9


def test_resample_rejects_zero_length():
    with pytest.raises(DegeneratePath):
        resample_path(np.zeros((4, 3)), 10)


# --- SE3Pose invariants ------------------------------------------------------

def test_pose_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        SE3Pose(np.eye(3) * 1.1, np.zeros(3))


def test_pose_rejects_reflection():
    r = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        SE3Pose(r, np.zeros(3))


def test_pose_compose_inverse_round_trip():
    rng = np.random.default_rng(5)
    p = random_pose(rng)
    q = p.compose(p.inverse())
    assert np.allclose(q.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(q.translation, 0.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_pose_apply_matches_homogeneous_multiply(seed):
    rng = np.random.default_rng(seed)
    p = random_pose(rng)
    pts = rng.normal(size=(5, 3))
    expected = (p.rotation @ pts.T).T + p.translation
    assert np.allclose(p.apply(pts), expected, atol=1e-12)


# --- serialization -----------------------------------------------------------

def test_trajectory_json_round_trip():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(10, 3))
    traj = augment_trajectory(pts, G, frame_id="item-0")
    text = traj.to_json()
    back = SKTrajectory.from_json(text)
    assert back.frame_id == "item-0"
    assert back.positions_only == traj.positions_only
    assert np.allclose(back.positions, traj.positions)
    for a, b in zip(back.waypoints, traj.waypoints):
        assert np.allclose(a.rotation, b.rotation)


def test_positions_only_trajectory_round_trip():
    traj = SKTrajectory.from_positions(np.zeros((3, 3)) + [[0, 0, 0], [1, 0, 0], [2, 0, 0]], "f")
    back = SKTrajectory.from_json(traj.to_json())
    assert back.positions_only
    assert np.allclose(back.positions, traj.positions)
