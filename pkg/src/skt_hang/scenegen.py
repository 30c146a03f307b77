"""Procedural supporting items, ring objects, and partial-cloud capture.

Items are capsule chains in their own frame: the mount sits at the origin
on a virtual wall (the yz-plane), the hook extends along +x, and openings
face upward. Difficulty tiers trade a single bend (easy) up to a re-entrant
multi-bend weave (very hard). All generators are pure functions of their
seed, so dataset generation is reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import AllNoise, EmptyView, InsufficientPoints
from .geometry import SE3Pose, make_rotation, GravityVector


class Difficulty(str, Enum):
    EASY = "easy"
    NORMAL = "normal"
    HARD = "hard"
    VERY_HARD = "very_hard"


class Category(str, Enum):
    REFERENCE = "reference"
    MUG = "mug"
    COOKING_UTENSIL = "cooking_utensil"
    SCISSOR = "scissor"
    TOOL = "tool"
    OTHER = "other"


DIFFICULTIES = [Difficulty.EASY, Difficulty.NORMAL, Difficulty.HARD, Difficulty.VERY_HARD]
NON_REFERENCE_CATEGORIES = [
    Category.MUG, Category.COOKING_UTENSIL, Category.SCISSOR, Category.TOOL, Category.OTHER,
]


@dataclass
class Capsule:
    """Capsule between two endpoints (meters)."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float


@dataclass
class SupportItem:
    centerline: np.ndarray          # (K, 3) ordered from wall mount to free tip
    radii: np.ndarray               # (K-1,) per-segment capsule radius
    anchor: np.ndarray              # canonical hang-region surface point
    difficulty: Difficulty
    seed: int

    @property
    def item_id(self) -> str:
        return f"{self.difficulty.value}_{self.seed:06d}"

    @property
    def tip(self) -> np.ndarray:
        return self.centerline[-1]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        r = float(self.radii.max())
        return self.centerline.min(axis=0) - r, self.centerline.max(axis=0) + r

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "centerline": self.centerline.tolist(),
            "radii": self.radii.tolist(),
            "anchor": self.anchor.tolist(),
            "difficulty": self.difficulty.value,
            "seed": int(self.seed),
        }

    @staticmethod
    def from_dict(doc: dict) -> "SupportItem":
        return SupportItem(
            centerline=np.array(doc["centerline"], dtype=np.float64),
            radii=np.array(doc["radii"], dtype=np.float64),
            anchor=np.array(doc["anchor"], dtype=np.float64),
            difficulty=Difficulty(doc["difficulty"]),
            seed=int(doc["seed"]),
        )


@dataclass
class HangObject:
    """Grasped object reduced to its keypoint frame plus a rigid ring.

    The object's own frame IS the keypoint frame: the ring circle lies in
    the frame's yz-plane (x is the ring normal), centered at the origin,
    and the body capsule hangs along -z below the ring.
    """

    keypoint_pose: SE3Pose
    ring_center: np.ndarray
    ring_radius: float
    tube_radius: float
    category: Category
    body_extent: Capsule
    seed: int = 0

    @property
    def object_id(self) -> str:
        return f"{self.category.value}_{self.seed:06d}"

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "ring_center": self.ring_center.tolist(),
            "ring_radius": float(self.ring_radius),
            "tube_radius": float(self.tube_radius),
            "category": self.category.value,
            "body": {
                "p0": self.body_extent.p0.tolist(),
                "p1": self.body_extent.p1.tolist(),
                "radius": float(self.body_extent.radius),
            },
            "seed": int(self.seed),
        }

    @staticmethod
    def from_dict(doc: dict) -> "HangObject":
        return HangObject(
            keypoint_pose=SE3Pose.identity(),
            ring_center=np.array(doc["ring_center"], dtype=np.float64),
            ring_radius=float(doc["ring_radius"]),
            tube_radius=float(doc["tube_radius"]),
            category=Category(doc["category"]),
            body_extent=Capsule(
                np.array(doc["body"]["p0"], dtype=np.float64),
                np.array(doc["body"]["p1"], dtype=np.float64),
                float(doc["body"]["radius"]),
            ),
            seed=int(doc["seed"]),
        )


@dataclass
class PointCloud:
    points: np.ndarray              # (N, 3) in the item frame
    source_view: str = ""

    def to_dict(self) -> dict:
        return {"source_view": self.source_view, "points": self.points.tolist()}

    @staticmethod
    def from_dict(doc: dict) -> "PointCloud":
        return PointCloud(np.array(doc["points"], dtype=np.float64), doc["source_view"])


def _rng(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(parts)))


# --- item generation ---------------------------------------------------------

def _walk(start, theta0):
    """Tangent walk in the xz-plane; returns (points list, tangent angles)."""
    return [np.array(start, dtype=np.float64)], [float(theta0)]


def _dir(theta: float) -> np.ndarray:
    return np.array([np.cos(theta), 0.0, np.sin(theta)])


def _straight(pts, thetas, length: float):
    pts.append(pts[-1] + length * _dir(thetas[-1]))
    thetas.append(thetas[-1])


def _arc(pts, thetas, radius: float, sweep: float, max_step=np.deg2rad(12.0)):
    """Append a circular arc of signed sweep, polygonized with exact chords."""
    n = max(2, int(np.ceil(abs(sweep) / max_step)))
    dtheta = sweep / n
    chord = 2.0 * radius * np.sin(abs(dtheta) / 2.0)
    for _ in range(n):
        theta = thetas[-1]
        pts.append(pts[-1] + chord * _dir(theta + dtheta / 2.0))
        thetas.append(theta + dtheta)


def _cup_bottom_index(pts) -> int:
    """Index of the lowest centerline point (the hang cup bottom)."""
    arr = np.asarray(pts)
    return int(np.argmin(arr[:, 2]))


def _apply_wobble(pts: np.ndarray, amp: float, freq: int, phase: float) -> np.ndarray:
    if amp <= 0.0:
        return pts
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    s = s / max(s[-1], 1e-9)
    out = pts.copy()
    out[:, 1] += amp * np.sin(2.0 * np.pi * freq * s + phase)
    return out


def generate_item(seed: int, difficulty: Difficulty) -> SupportItem:
    """Build one supporting item; deterministic for a fixed (seed, tier)."""
    rng = _rng(9001, int(seed), DIFFICULTIES.index(difficulty))
    yaw = rng.uniform(-np.deg2rad(8.0), np.deg2rad(8.0))

    if difficulty is Difficulty.EASY:
        pitch = rng.uniform(np.deg2rad(2.0), np.deg2rad(8.0))
        length = rng.uniform(0.12, 0.20)
        up_len = rng.uniform(0.03, 0.055)
        back = rng.uniform(0.0, np.deg2rad(15.0))
        radius = rng.uniform(0.0035, 0.0065)
        d = np.array([np.cos(pitch), 0.0, -np.sin(pitch)])
        crook = length * d
        tip = crook + up_len * np.array([-np.sin(back), 0.0, np.cos(back)])
        pts = np.array([np.zeros(3), crook, tip])
        anchor_idx = 1
        wobble = (0.0, 1, 0.0)
    elif difficulty is Difficulty.NORMAL:
        r_cup = rng.uniform(0.032, 0.055)
        s1 = rng.uniform(0.05, 0.09)
        drop = rng.uniform(0.01, 0.05)
        sweep_c = rng.uniform(np.deg2rad(150.0), np.deg2rad(195.0))
        radius = rng.uniform(0.0035, 0.006)
        pts_l, th = _walk([0, 0, 0], 0.0)
        _straight(pts_l, th, s1)
        _arc(pts_l, th, 0.025, -np.pi / 2.0)
        _straight(pts_l, th, drop)
        _arc(pts_l, th, r_cup, sweep_c)
        pts = np.array(pts_l)
        anchor_idx = _cup_bottom_index(pts_l)
        wobble = (0.0, 1, 0.0)
    elif difficulty is Difficulty.HARD:
        s1 = rng.uniform(0.04, 0.07)
        r_a = rng.uniform(0.03, 0.05)
        r_b = rng.uniform(0.03, 0.05)
        r_c = rng.uniform(0.032, 0.05)
        sweep_a = rng.uniform(np.deg2rad(35.0), np.deg2rad(55.0))
        tilt = rng.uniform(0.0, np.deg2rad(15.0))
        drop = rng.uniform(0.0, 0.03)
        sweep_c = rng.uniform(np.deg2rad(140.0), np.deg2rad(185.0))
        radius = rng.uniform(0.003, 0.0055)
        pts_l, th = _walk([0, 0, 0], 0.0)
        _straight(pts_l, th, s1)
        _arc(pts_l, th, r_a, sweep_a)                      # rise
        _arc(pts_l, th, r_b, -(sweep_a + np.pi / 2.0 + tilt))  # over the hump, down
        _straight(pts_l, th, drop)
        _arc(pts_l, th, r_c, sweep_c + tilt)               # cup, tip rising
        pts = np.array(pts_l)
        anchor_idx = _cup_bottom_index(pts_l)
        wobble = (rng.uniform(0.0, 0.015), int(rng.integers(1, 3)), rng.uniform(0, 2 * np.pi))
    else:
        s1 = rng.uniform(0.035, 0.06)
        r_a = rng.uniform(0.035, 0.055)
        r_b = rng.uniform(0.035, 0.055)
        r_c = rng.uniform(0.035, 0.05)
        r_d = rng.uniform(0.015, 0.025)
        sweep_a = rng.uniform(np.deg2rad(45.0), np.deg2rad(65.0))
        tilt = rng.uniform(0.0, np.deg2rad(12.0))
        drop = rng.uniform(0.0, 0.02)
        sweep_c = rng.uniform(np.deg2rad(165.0), np.deg2rad(200.0))
        sweep_d = rng.uniform(np.deg2rad(50.0), np.deg2rad(90.0))
        radius = rng.uniform(0.003, 0.005)
        pts_l, th = _walk([0, 0, 0], 0.0)
        _straight(pts_l, th, s1)
        _arc(pts_l, th, r_a, sweep_a)
        _arc(pts_l, th, r_b, -(sweep_a + np.pi / 2.0 + tilt))
        _straight(pts_l, th, drop)
        _arc(pts_l, th, r_c, sweep_c + tilt)
        _arc(pts_l, th, r_d, sweep_d)                      # re-entrant tip curl
        pts = np.array(pts_l)
        anchor_idx = _cup_bottom_index(pts_l)
        wobble = (rng.uniform(0.008, 0.022), int(rng.integers(1, 3)), rng.uniform(0, 2 * np.pi))

    pts = _apply_wobble(pts, *wobble)
    # yaw the whole item about the z axis through the mount
    cz, sz = np.cos(yaw), np.sin(yaw)
    rot = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    pts = pts @ rot.T
    anchor = pts[anchor_idx] + np.array([0.0, 0.0, radius])
    radii = np.full(len(pts) - 1, radius)
    return SupportItem(pts, radii, anchor, difficulty, int(seed))


def generate_object(seed: int, category: Category) -> HangObject:
    """Build one graspable ring object; deterministic per (seed, category)."""
    rng = _rng(7321, int(seed), list(Category).index(category))
    if category is Category.REFERENCE:
        ring, tube = 0.020, 0.004
        body_len, body_r = 0.025, 0.004
    elif category is Category.MUG:
        ring = rng.uniform(0.022, 0.035)
        tube = rng.uniform(0.0035, 0.0055)
        body_len, body_r = rng.uniform(0.07, 0.11), rng.uniform(0.030, 0.045)
    elif category is Category.COOKING_UTENSIL:
        ring = rng.uniform(0.012, 0.020)
        tube = rng.uniform(0.0030, 0.0045)
        body_len, body_r = rng.uniform(0.18, 0.28), rng.uniform(0.008, 0.016)
    elif category is Category.SCISSOR:
        ring = rng.uniform(0.014, 0.024)
        tube = rng.uniform(0.0040, 0.0060)
        body_len, body_r = rng.uniform(0.10, 0.16), rng.uniform(0.007, 0.012)
    elif category is Category.TOOL:
        ring = rng.uniform(0.010, 0.016)
        tube = rng.uniform(0.0025, 0.0040)
        body_len, body_r = rng.uniform(0.10, 0.22), rng.uniform(0.010, 0.020)
    else:
        ring = rng.uniform(0.012, 0.030)
        tube = rng.uniform(0.0030, 0.0060)
        body_len, body_r = rng.uniform(0.05, 0.18), rng.uniform(0.008, 0.025)

    top = -(ring + tube + 0.002)
    body = Capsule(
        np.array([0.0, 0.0, top]),
        np.array([0.0, 0.0, top - body_len]),
        float(body_r),
    )
    return HangObject(
        keypoint_pose=SE3Pose.identity(),
        ring_center=np.zeros(3),
        ring_radius=float(ring),
        tube_radius=float(tube),
        category=category,
        body_extent=body,
        seed=int(seed),
    )


# --- surface sampling and capture --------------------------------------------

def sample_surface(item: SupportItem, n: int, seed: int = 0) -> np.ndarray:
    """Draw n points on the capsule-chain union surface, area-weighted.

    Candidates drawn on one capsule that land inside a neighboring capsule
    are interior to the union and get rejected.
    """
    rng = _rng(551, int(item.seed), int(seed))
    kept = []
    total = 0
    while total < n:
        batch = _sample_capsules(item, max(n, 1024), rng)
        sd = surface_distance(batch, item)
        batch = batch[sd > -1e-9]
        kept.append(batch)
        total += len(batch)
    return np.concatenate(kept)[:n]


def _sample_capsules(item: SupportItem, n: int, rng: np.random.Generator) -> np.ndarray:
    segs0 = item.centerline[:-1]
    segs1 = item.centerline[1:]
    lengths = np.linalg.norm(segs1 - segs0, axis=1)
    radii = item.radii
    cyl_area = 2.0 * np.pi * radii * lengths
    sphere_area = 4.0 * np.pi * np.concatenate([radii, [radii[-1]]]) ** 2
    areas = np.concatenate([cyl_area, sphere_area])
    probs = areas / areas.sum()
    choice = rng.choice(len(areas), size=n, p=probs)
    u = rng.random(n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    cos_t = rng.uniform(-1.0, 1.0, n)

    out = np.empty((n, 3))
    n_seg = len(lengths)
    for k in range(len(areas)):
        mask = choice == k
        if not mask.any():
            continue
        if k < n_seg:
            a, b, r = segs0[k], segs1[k], radii[k]
            axis = (b - a) / max(lengths[k], 1e-12)
            # any stable orthonormal frame around the axis
            ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
            e1 = np.cross(axis, ref)
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(axis, e1)
            centers = a + u[mask, None] * (b - a)
            out[mask] = centers + r * (
                np.cos(phi[mask, None]) * e1 + np.sin(phi[mask, None]) * e2
            )
        else:
            j = k - n_seg
            c = item.centerline[j]
            r = radii[min(j, n_seg - 1)]
            st = np.sqrt(1.0 - cos_t[mask] ** 2)
            out[mask] = c + r * np.stack(
                [st * np.cos(phi[mask]), st * np.sin(phi[mask]), cos_t[mask]], axis=1
            )
    return out


def surface_distance(points: np.ndarray, item: SupportItem) -> np.ndarray:
    """Signed distance from each point to the capsule-chain surface."""
    p = np.asarray(points, dtype=np.float64)
    a = item.centerline[:-1]
    d = item.centerline[1:] - a
    dd = np.einsum("ij,ij->i", d, d)
    ap = p[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("mij,ij->mi", ap, d) / np.maximum(dd, 1e-18), 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(p[:, None, :] - closest, axis=2) - item.radii[None, :]
    return dist.min(axis=1)


def generate_cameras(item: SupportItem, n_views: int, seed: int = 0) -> list[SE3Pose]:
    """Deterministic front-hemisphere viewpoints looking at the item centroid."""
    rng = _rng(811, int(item.seed), int(seed))
    target = item.centerline.mean(axis=0)
    poses = []
    for v in range(n_views):
        az = np.deg2rad(rng.uniform(-60.0, 60.0))
        el = np.deg2rad(rng.uniform(10.0, 45.0))
        dist = rng.uniform(0.35, 0.8)
        offset = np.array([
            np.cos(el) * np.cos(az),
            np.cos(el) * np.sin(az),
            np.sin(el),
        ])
        eye = target + dist * offset
        view_dir = (target - eye) / np.linalg.norm(target - eye)
        rot = make_rotation(view_dir, GravityVector())
        poses.append(SE3Pose(rot, eye))
    return poses


def capture_partial_cloud(
    item: SupportItem,
    camera_pose: SE3Pose,
    n_out: int,
    *,
    candidates: int = 20_000,
    cell: float = 0.005,
    depth_tol: float = 0.003,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> PointCloud:
    """Single-view capture: dense samples, z-buffer cull, then FPS to n_out.

    The z-buffer records the nearest depth per 5 mm image cell; samples
    deeper than that by more than depth_tol are treated as occluded.
    """
    samples = sample_surface(item, candidates, seed=seed)
    eye = camera_pose.translation
    view = camera_pose.rotation[:, 0]
    right = camera_pose.rotation[:, 1]
    up = camera_pose.rotation[:, 2]

    rel = samples - eye
    depth = rel @ view
    in_front = depth > 1e-6
    if not in_front.any():
        raise EmptyView("camera sees no surface sample")
    u = rel @ right
    w = rel @ up
    iu = np.floor(u / cell).astype(np.int64)
    iw = np.floor(w / cell).astype(np.int64)
    # per-cell min depth via a single lexicographic sort (key, then depth);
    # behind-camera samples must never define a cell's front depth
    depth = np.where(in_front, depth, np.inf)
    key = (iu - iu.min()) * (iw.max() - iw.min() + 1) + (iw - iw.min())
    order = np.lexsort((depth, key))
    sorted_key = key[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_key[1:] != sorted_key[:-1]
    group_min = depth[order][first]
    group_id = np.cumsum(first) - 1
    cell_min = np.empty(len(samples))
    cell_min[order] = group_min[group_id]
    visible = in_front & (depth <= cell_min + depth_tol)
    kept = samples[visible]
    if kept.shape[0] == 0:
        raise EmptyView("all samples occluded")
    if kept.shape[0] < n_out:
        raise InsufficientPoints(
            f"only {kept.shape[0]} visible samples for n_out={n_out}; raise candidates"
        )
    idx = farthest_point_sample(kept, n_out)
    pts = kept[idx]
    if noise_sigma > 0.0:
        rng = _rng(613, int(item.seed), int(seed))
        pts = pts + rng.normal(scale=noise_sigma, size=pts.shape)
    return PointCloud(pts)


def farthest_point_sample(points: np.ndarray, k: int) -> np.ndarray:
    """Greedy max-min subset selection; always starts at index 0."""
    p = np.asarray(points, dtype=np.float64)
    m = p.shape[0]
    if k < 1 or m < k:
        raise InsufficientPoints(f"cannot pick {k} of {m} points")
    picked = np.empty(k, dtype=np.int64)
    picked[0] = 0
    d = np.linalg.norm(p - p[0], axis=1)
    for i in range(1, k):
        j = int(np.argmax(d))
        picked[i] = j
        d = np.minimum(d, np.linalg.norm(p - p[j], axis=1))
    return picked


def denoise_dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density clustering; returns indices of the largest cluster.

    Ties between equally large clusters go to the one containing the
    lowest point index. Neighborhood counts include the point itself.
    """
    p = np.asarray(points, dtype=np.float64)
    tree = cKDTree(p)
    neighborhoods = tree.query_ball_point(p, eps)
    core = np.array([len(nb) >= min_pts for nb in neighborhoods])
    if not core.any():
        raise AllNoise("no core point at this eps/min_pts")

    labels = np.full(len(p), -1, dtype=np.int64)
    current = 0
    for i in range(len(p)):
        if labels[i] != -1 or not core[i]:
            continue
        # breadth-first expansion from this core point
        labels[i] = current
        queue = [i]
        while queue:
            q = queue.pop(0)
            if not core[q]:
                continue
            for nb in neighborhoods[q]:
                if labels[nb] == -1:
                    labels[nb] = current
                    queue.append(nb)
        current += 1

    best_label, best_size, best_min = -1, -1, len(p)
    for lab in range(current):
        members = np.flatnonzero(labels == lab)
        if len(members) > best_size or (len(members) == best_size and members[0] < best_min):
            best_label, best_size, best_min = lab, len(members), members[0]
    return np.flatnonzero(labels == best_label)


def write_ply(path, points: np.ndarray, values: np.ndarray | None = None,
              extra_points: np.ndarray | None = None) -> None:
    """ASCII point cloud export; optional scalar channel and extra vertices.

    Scalar values are baked both as a float quality channel and as a
    red-blue heat color so standard viewers show the map directly. Extra
    points (e.g. trajectory waypoints) are written in green and chained
    with edges.
    """
    pts = np.asarray(points, dtype=np.float64)
    n_extra = 0 if extra_points is None else len(extra_points)
    has_q = values is not None
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(pts) + n_extra}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        if has_q:
            f.write("property float quality\n")
        if n_extra:
            f.write(f"element edge {n_extra - 1}\n")
            f.write("property int vertex1\nproperty int vertex2\n")
        f.write("end_header\n")
        for i, p in enumerate(pts):
            if has_q:
                q = float(values[i])
                r, b = int(round(255 * q)), int(round(255 * (1.0 - q)))
                f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {r} 0 {b} {q:.6f}\n")
            else:
                f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} 160 160 160\n")
        for p in (extra_points if n_extra else []):
            line = f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} 0 255 0"
            f.write(line + (" 1.000000\n" if has_q else "\n"))
        for i in range(n_extra - 1):
            f.write(f"{len(pts) + i} {len(pts) + i + 1}\n")
