"""Quasi-static geometric hanging oracle.

Replaces a dynamics engine with three primitives: signed clearance between
the posed object and the item's capsule chain, a parity test for the chain
piercing the ring aperture, and a monotone gravity descent with tangential
sliding. Trials are judged by executing a trajectory pose-by-pose and then
letting the object settle at the final waypoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidTrajectory, NoStableContact
from .geometry import GravityVector, SE3Pose, SKTrajectory, make_rotation
from .scenegen import HangObject, SupportItem

RING_SAMPLES = 64
# penetration depth treated as sliding contact rather than a collision
EXECUTION_TOLERANCE = 0.002

_THETA = 2.0 * np.pi * np.arange(RING_SAMPLES) / RING_SAMPLES
_COS = np.cos(_THETA)
_SIN = np.sin(_THETA)


class FailureMode(str, Enum):
    NONE = "none"
    COLLISION_DURING_EXECUTION = "collision_during_execution"
    NOT_LINKED_AT_END = "not_linked_at_end"
    SLIPPED_OFF_ON_SETTLE = "slipped_off_on_settle"


@dataclass
class HangOutcome:
    success: bool
    failure_mode: FailureMode
    max_penetration: float
    settled_pose: SE3Pose

    def to_dict(self) -> dict:
        return {
            "success": bool(self.success),
            "failure_mode": self.failure_mode.value,
            "max_penetration": float(self.max_penetration),
            "settled_t": self.settled_pose.translation.tolist(),
        }


@dataclass
class SettleResult:
    pose: SE3Pose
    converged: bool          # False means the iteration budget ran out
    iterations: int


@dataclass
class ContactInfo:
    contact_point: np.ndarray
    p_hang: np.ndarray
    p_front: np.ndarray
    forward: np.ndarray
    settled_pose: SE3Pose


def ring_world_points(ring_pose: SE3Pose, obj: HangObject, n: int = RING_SAMPLES) -> np.ndarray:
    """Sample the ring circumference circle in world coordinates."""
    if n == RING_SAMPLES:
        cos, sin = _COS, _SIN
    else:
        theta = 2.0 * np.pi * np.arange(n) / n
        cos, sin = np.cos(theta), np.sin(theta)
    e1 = ring_pose.rotation[:, 1]
    e2 = ring_pose.rotation[:, 2]
    center = ring_pose.translation + ring_pose.rotation @ obj.ring_center
    return center + obj.ring_radius * (cos[:, None] * e1 + sin[:, None] * e2)


def _points_to_segments(points: np.ndarray, a: np.ndarray, d: np.ndarray, dd: np.ndarray):
    """Closest distance from each point to each segment; returns (M, S)."""
    ap = points[:, None, :] - a[None, :, :]
    t = np.einsum("msj,sj->ms", ap, d) / dd
    t = np.clip(t, 0.0, 1.0)
    diff = ap - t[:, :, None] * d[None, :, :]
    return np.sqrt(np.einsum("msj,msj->ms", diff, diff)), t


def _segment_to_segments(p0, p1, a, d, dd):
    """Closest distance from one segment to each chain segment; returns (S,)."""
    d1 = p1 - p0
    aa = float(d1 @ d1)
    r = p0 - a
    b = d @ d1
    c = r @ d1 if r.ndim == 1 else np.einsum("sj,j->s", r, d1)
    f = np.einsum("sj,sj->s", d, r)
    denom = aa * dd - b * b
    s = np.where(denom > 1e-18, np.clip((b * f - c * dd) / np.where(denom > 1e-18, denom, 1.0), 0.0, 1.0), 0.0)
    if aa > 1e-18:
        t = np.clip((b * s + f) / dd, 0.0, 1.0)
        s = np.clip((b * t - c) / aa, 0.0, 1.0)
    else:
        t = np.clip(f / dd, 0.0, 1.0)
    cp = p0 + s[:, None] * d1
    cq = a + t[:, None] * d
    return np.linalg.norm(cp - cq, axis=1)


def clearance(ring_pose: SE3Pose, obj: HangObject, item: SupportItem) -> float:
    """Signed gap between the posed object and the item; negative = penetration."""
    a = item.centerline[:-1]
    d = item.centerline[1:] - a
    dd = np.einsum("sj,sj->s", d, d)
    ring = ring_world_points(ring_pose, obj)
    dist, _ = _points_to_segments(ring, a, d, dd)
    ring_clear = (dist - item.radii[None, :]).min() - obj.tube_radius

    body = obj.body_extent
    b0 = ring_pose.apply(body.p0)
    b1 = ring_pose.apply(body.p1)
    seg_dist = _segment_to_segments(b0, b1, a, d, dd)
    body_clear = (seg_dist - item.radii).min() - body.radius
    return float(min(ring_clear, body_clear))


def linked(ring_pose: SE3Pose, obj: HangObject, item: SupportItem) -> bool:
    """True iff the centerline pierces the ring's disc an odd number of times."""
    center = ring_pose.translation + ring_pose.rotation @ obj.ring_center
    normal = ring_pose.rotation[:, 0]
    f = (item.centerline - center) @ normal
    # half-open convention: points exactly on the plane count as the + side
    side = f >= 0.0
    crossings = 0
    for i in range(len(f) - 1):
        if side[i] == side[i + 1]:
            continue
        t = f[i] / (f[i] - f[i + 1])
        x = item.centerline[i] + t * (item.centerline[i + 1] - item.centerline[i])
        if np.linalg.norm(x - center) < obj.ring_radius:
            crossings += 1
    return crossings % 2 == 1


def _clearance_gradient(pose: SE3Pose, obj, item, h: float) -> np.ndarray:
    g = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = clearance(pose.translated(e), obj, item) - clearance(pose.translated(-e), obj, item)
    return g / (2.0 * h)


def settle(
    start_pose: SE3Pose,
    obj: HangObject,
    item: SupportItem,
    *,
    step: float = 1e-3,
    projection_step: float = 5e-4,
    max_iterations: int = 2000,
) -> SettleResult:
    """Translate the object down gravity, sliding tangentially on contact.

    Accepted moves strictly lower the keypoint; the routine stops when no
    feasible height-reducing step remains (rest) or the budget runs out
    (reported via ``converged=False``, e.g. free fall).
    """
    pose = start_pose
    down = np.array([0.0, 0.0, -step])
    for it in range(1, max_iterations + 1):
        trial = pose.translated(down)
        if clearance(trial, obj, item) >= 0.0:
            pose = trial
            continue
        grad = _clearance_gradient(pose, obj, item, projection_step)
        gn = float(np.linalg.norm(grad))
        if gn < 1e-9:
            return SettleResult(pose, True, it)
        ghat = grad / gn
        slide = np.array([0.0, 0.0, -1.0])
        slide = slide - (slide @ ghat) * ghat
        sn = float(np.linalg.norm(slide))
        if sn < 0.05:
            # gravity is (nearly) parallel to the contact normal: at rest
            return SettleResult(pose, True, it)
        trial = pose.translated(step * slide / sn)
        c = clearance(trial, obj, item)
        if c < 0.0:
            # push back onto the constraint surface along its gradient
            g2 = _clearance_gradient(trial, obj, item, projection_step)
            n2 = float(np.linalg.norm(g2))
            if n2 < 1e-9:
                return SettleResult(pose, True, it)
            trial = trial.translated((-c + 1e-6) * g2 / n2)
            if clearance(trial, obj, item) < -1e-9:
                return SettleResult(pose, True, it)
        if trial.translation[2] >= pose.translation[2] - 1e-9:
            return SettleResult(pose, True, it)
        pose = trial
    return SettleResult(pose, False, max_iterations)


APPROACH_AXIS = np.array([1.0, 0.0, 0.0])
FRONT_OFFSET = 0.15


def find_contact(item: SupportItem, obj: HangObject) -> ContactInfo:
    """Settle the threaded reference ring and extract the contact geometry.

    The ring is threaded onto the chain at the first point (walking from
    the tip toward the mount) whose local tangent crosses the ring plane,
    then released. The hang position, a front reference position on the
    approach axis, and the forward direction follow from the rest pose.
    """
    gravity = GravityVector()
    rot = make_rotation(-APPROACH_AXIS, gravity)
    cl = item.centerline
    # walk candidate threading points from the tip inward at ~5 mm spacing
    candidates = []
    for i in range(len(cl) - 1, 0, -1):
        seg = cl[i] - cl[i - 1]
        length = np.linalg.norm(seg)
        tangent = seg / length
        n_sub = max(1, int(np.ceil(length / 0.005)))
        for s in range(n_sub):
            p = cl[i] - (s / n_sub) * seg
            candidates.append((p, tangent))
    start = None
    for p, tangent in candidates:
        if abs(float(tangent @ APPROACH_AXIS)) < 0.35:
            continue
        pose = SE3Pose(rot, p)
        if clearance(pose, obj, item) >= 0.0 and linked(pose, obj, item):
            start = pose
            break
    if start is None:
        raise NoStableContact(f"cannot thread the ring anywhere on {item.item_id}")

    result = settle(start, obj, item)
    if not result.converged or not linked(result.pose, obj, item):
        raise NoStableContact(f"ring does not come to rest on {item.item_id}")

    # contact point: item surface point nearest the settled ring circle
    ring = ring_world_points(result.pose, obj, 256)
    a = item.centerline[:-1]
    d = item.centerline[1:] - a
    dd = np.einsum("sj,sj->s", d, d)
    dist, t = _points_to_segments(ring, a, d, dd)
    gaps = dist - item.radii[None, :]
    m, s = np.unravel_index(np.argmin(gaps), gaps.shape)
    axis_point = a[s] + t[m, s] * d[s]
    radial = ring[m] - axis_point
    radial /= max(np.linalg.norm(radial), 1e-12)
    contact_point = axis_point + item.radii[s] * radial

    p_hang = result.pose.translation.copy()
    p_front = p_hang + FRONT_OFFSET * APPROACH_AXIS
    forward = (p_hang - p_front) / FRONT_OFFSET
    return ContactInfo(contact_point, p_hang, p_front, forward, result.pose)


def execute_and_judge(
    skt: SKTrajectory,
    obj: HangObject,
    item: SupportItem,
    *,
    tolerance: float = EXECUTION_TOLERANCE,
    max_step: float = 0.002,
) -> HangOutcome:
    """Run a trajectory from the free end to waypoint 0 and judge the hang."""
    if skt.positions_only or len(skt) < 2:
        raise InvalidTrajectory("need an augmented trajectory with T >= 2")

    max_pen = 0.0
    wps = skt.waypoints
    for i in range(len(wps) - 1, 0, -1):
        p_from = wps[i].translation
        p_to = wps[i - 1].translation
        rot = wps[i].rotation
        dist = float(np.linalg.norm(p_to - p_from))
        n_steps = max(1, int(np.ceil(dist / max_step)))
        start_s = 0 if i == len(wps) - 1 else 1
        for s in range(start_s, n_steps + 1):
            alpha = s / n_steps
            pose = SE3Pose(rot, p_from + alpha * (p_to - p_from))
            c = clearance(pose, obj, item)
            if c < 0.0:
                max_pen = max(max_pen, -c)
            if -c > tolerance:
                return HangOutcome(False, FailureMode.COLLISION_DURING_EXECUTION, max_pen, pose)

    end_pose = SE3Pose(wps[0].rotation, wps[0].translation)
    if not linked(end_pose, obj, item):
        return HangOutcome(False, FailureMode.NOT_LINKED_AT_END, max_pen, end_pose)
    result = settle(end_pose, obj, item)
    if not result.converged or not linked(result.pose, obj, item):
        return HangOutcome(False, FailureMode.SLIPPED_OFF_ON_SETTLE, max_pen, result.pose)
    return HangOutcome(True, FailureMode.NONE, max_pen, result.pose)
