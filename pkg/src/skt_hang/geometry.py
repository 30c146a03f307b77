"""Rigid-pose algebra and keypoint-trajectory containers.

Everything is expressed in the supporting item's frame. Waypoint index 0 is
the hung end of a trajectory; execution walks the waypoints from the free
end (index T-1) down to index 0. Rotations are derived from the direction
of travel and the gravity direction, so a position-only trajectory carries
enough information to reconstruct full 6D poses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateForward, DegeneratePath, DegenerateTrajectory

ORTHONORMAL_TOL = 1e-9
# minimum angle (rad) between forward and gravity before the frame degenerates
PARALLEL_TOL = 1e-6

WORLD_X = np.array([1.0, 0.0, 0.0])


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(3)
    a = a.copy()
    a.flags.writeable = False
    return a


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize a vector; raises on (near-)zero input."""
    n = float(np.linalg.norm(v))
    if n <= 1e-12:
        raise DegenerateForward("cannot normalize a zero vector")
    return np.asarray(v, dtype=np.float64) / n


@dataclass(frozen=True)
class GravityVector:
    """Unit gravity direction, fixed to -z in the item frame."""

    direction: np.ndarray = field(default_factory=lambda: _as_vec3([0.0, 0.0, -1.0]))

    def __post_init__(self):
        d = _as_vec3(self.direction)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-12:
            d = _as_vec3(np.asarray(d) / n)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class SE3Pose:
    """Rotation (3x3, row-major) plus translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3).copy()
        t = _as_vec3(self.translation)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err >= ORTHONORMAL_TOL:
            raise ValueError(f"rotation not orthonormal (|R^T R - I|_max = {err:.3e})")
        det = float(np.linalg.det(r))
        if abs(det - 1.0) >= 1e-9:
            raise ValueError(f"rotation determinant {det:.12f} != +1")
        r.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "SE3Pose":
        return SE3Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        """self o other: apply other first, then self."""
        return SE3Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "SE3Pose":
        rt = self.rotation.T
        return SE3Pose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack of points (M, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def translated(self, delta: np.ndarray) -> "SE3Pose":
        return SE3Pose(self.rotation, self.translation + np.asarray(delta))


@dataclass
class SKTrajectory:
    """Ordered waypoint poses in a supporting item's frame.

    Index 0 is the hung end. ``positions_only`` marks a trajectory whose
    rotations have not been derived yet (all identity placeholders).
    """

    waypoints: list
    frame_id: str
    positions_only: bool = False

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def positions(self) -> np.ndarray:
        return np.array([w.translation for w in self.waypoints])

    @staticmethod
    def from_positions(positions: np.ndarray, frame_id: str) -> "SKTrajectory":
        pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        wps = [SE3Pose(np.eye(3), p) for p in pts]
        return SKTrajectory(wps, frame_id, positions_only=True)

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "positions_only": bool(self.positions_only),
            "waypoints": [
                {"t": [float(x) for x in w.translation],
                 "R": [[float(v) for v in row] for row in w.rotation]}
                for w in self.waypoints
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "SKTrajectory":
        wps = [SE3Pose(np.array(w["R"]), np.array(w["t"])) for w in doc["waypoints"]]
        return SKTrajectory(wps, doc["frame_id"], bool(doc["positions_only"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_json(text: str) -> "SKTrajectory":
        return SKTrajectory.from_dict(json.loads(text))


def make_rotation(forward: np.ndarray, gravity: GravityVector) -> np.ndarray:
    """Build the keypoint rotation from a forward direction and gravity.

    Columns of the result are (x, y, z) where x is the unit forward
    direction, y = unit(x cross g) is horizontal, and z = x cross y.
    """
    f = np.asarray(forward, dtype=np.float64).reshape(3)
    nf = float(np.linalg.norm(f))
    if nf <= 1e-9:
        raise DegenerateForward("forward direction has zero length")
    x = f / nf
    g = gravity.direction
    cross = np.cross(x, g)
    # |x cross g| = sin(angle between forward and gravity)
    if float(np.linalg.norm(cross)) < PARALLEL_TOL:
        raise DegenerateForward("forward direction parallel to gravity")
    y = cross / np.linalg.norm(cross)
    z = np.cross(x, y)
    return np.column_stack([x, y, z])


def augment_trajectory(
    positions: np.ndarray,
    gravity: GravityVector,
    frame_id: str = "",
) -> SKTrajectory:
    """Lift position-only waypoints to full poses.

    The x-axis at waypoint i (i >= 1) points along the direction of travel
    toward the hung end, unit(p[i-1] - p[i]); waypoint 0 copies the axis of
    waypoint 1. Degenerate directions (parallel to gravity or zero-length
    steps) fall back to the previous waypoint's axis, then to world +x.
    """
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    t = pts.shape[0]
    if t < 2:
        raise DegenerateTrajectory("need at least two waypoints")
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if not np.any(steps > 1e-9):
        raise DegenerateTrajectory("all waypoints coincide")

    # execution walks i = T-1 .. 0, so the axis "previous" to waypoint i is
    # the one at i+1; fill in descending order to keep the frame continuous
    # across degenerate (vertical or zero-length) steps.
    axes = np.empty((t, 3))
    prev_axis = None
    for i in range(t - 1, 0, -1):
        d = pts[i - 1] - pts[i]
        axis = None
        if np.linalg.norm(d) > 1e-9:
            x = d / np.linalg.norm(d)
            if np.linalg.norm(np.cross(x, gravity.direction)) >= PARALLEL_TOL:
                axis = x
        if axis is None:
            axis = prev_axis if prev_axis is not None else WORLD_X
        axes[i] = axis
        prev_axis = axis
    axes[0] = axes[1]

    wps = [SE3Pose(make_rotation(axes[i], gravity), pts[i]) for i in range(t)]
    return SKTrajectory(wps, frame_id, positions_only=False)


def relative_grasp(t_kpt: SE3Pose, t_ee: SE3Pose) -> SE3Pose:
    """Transform of the end effector expressed in the keypoint frame."""
    return t_kpt.inverse().compose(t_ee)


def arc_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length along a polyline, starting at 0."""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_path(points: np.ndarray, t: int) -> np.ndarray:
    """Resample a polyline to t points uniform in arc length.

    Endpoints are preserved exactly; interior points are linearly
    interpolated on the input polyline.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 2:
        raise DegeneratePath("need at least two input points")
    if t < 2:
        raise DegeneratePath("need at least two output points")
    s = arc_lengths(pts)
    total = s[-1]
    if total <= 1e-9:
        raise DegeneratePath("zero-length path")

    targets = np.linspace(0.0, total, t)
    # searchsorted over the cumulative table; clamp to valid segment range
    idx = np.searchsorted(s, targets, side="right") - 1
    idx = np.clip(idx, 0, pts.shape[0] - 2)
    seg_len = s[idx + 1] - s[idx]
    # zero-length segments contribute nothing; alpha is irrelevant there
    alpha = np.where(seg_len > 0, (targets - s[idx]) / np.where(seg_len > 0, seg_len, 1.0), 0.0)
    out = pts[idx] + alpha[:, None] * (pts[idx + 1] - pts[idx])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out
