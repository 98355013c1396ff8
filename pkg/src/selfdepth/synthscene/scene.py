"""Ray-cast rendering of small textured scenes with exact depth and poses.

Scenes are built from a plane perpendicular to the world z-axis, axis-aligned
boxes, and an optional height-field relief. Cameras look roughly along +z,
so "in front" means larger z. Textures are smooth procedural fields, which
keeps bilinear-resampling error small when frames are warped onto each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor
from ..geometry import CameraIntrinsics, DepthMap, RigidPose, relative_pose

SKY_COLOR = (0.62, 0.70, 0.80)
_RAY_EPS = 1e-3
_NOISE_LATTICE = 64  # periodic lattice cells per axis


@dataclass(frozen=True)
class TextureSpec:
    """Procedural surface color: smooth checker + value noise + ramp."""

    checker_period: float = 2.0
    checker_amplitude: float = 0.10
    noise_cell: float = 1.2
    noise_amplitude: float = 0.45
    gradient_amplitude: float = 0.15
    seed: int = 0


@dataclass(frozen=True)
class HeightField:
    """Relief pushed toward the camera from a base plane at ``base_z``:
    surface z = base_z - bilinear(values) over an (x, y) grid."""

    origin: tuple[float, float]
    cell: float
    values: tuple[tuple[float, ...], ...]
    base_z: float

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class SceneSpec:
    """Geometry (plane z, boxes, optional height field) plus texture."""

    plane_z: float | None = None
    boxes: tuple[tuple[tuple[float, float, float], tuple[float, float, float]], ...] = ()
    height_field: HeightField | None = None
    texture: TextureSpec = field(default_factory=TextureSpec)

    def __post_init__(self):
        if self.plane_z is None and not self.boxes and self.height_field is None:
            raise ValueError("scene needs at least one geometry element")
        for lo, hi in self.boxes:
            if not all(l < h for l, h in zip(lo, hi)):
                raise ValueError(f"degenerate box extents {lo}..{hi}")


@dataclass
class Trajectory:
    """World-to-camera pose per frame plus the shared intrinsics.

    Consecutive camera centers must stay within the configured baseline
    range: too small a baseline starves the parallax signal, too large a
    baseline breaks frame overlap.
    """

    poses: list[RigidPose]
    intrinsics: CameraIntrinsics
    min_baseline: float = 1e-4
    max_baseline: float = 5.0

    def __post_init__(self):
        if len(self.poses) < 1:
            raise ValueError("trajectory needs at least one pose")
        centers = [self.camera_center(i) for i in range(len(self.poses))]
        for i in range(1, len(centers)):
            base = float(np.linalg.norm(centers[i] - centers[i - 1]))
            if not self.min_baseline <= base <= self.max_baseline:
                raise ValueError(
                    f"baseline {base:.6g} between frames {i - 1} and {i} outside "
                    f"[{self.min_baseline}, {self.max_baseline}]")

    def __len__(self) -> int:
        return len(self.poses)

    def camera_center(self, index: int) -> np.ndarray:
        m = self.poses[index].matrix()
        r, t = m[:3, :3], m[:3, 3]
        return -r.T @ t


def make_linear_trajectory(num_frames: int, intrinsics: CameraIntrinsics,
                           start=(0.0, 0.0, 0.0), step=(0.15, 0.0, 0.0),
                           pitch_deg: float = 0.0,
                           max_baseline: float = 5.0) -> Trajectory:
    """Constant-velocity camera with a fixed pitch about the x-axis."""
    theta = np.deg2rad(pitch_deg)
    axis_angle = np.array([theta, 0.0, 0.0])
    rot = _rotation_x(theta)
    poses = []
    for k in range(num_frames):
        center = np.asarray(start, dtype=np.float64) + k * np.asarray(step, dtype=np.float64)
        poses.append(RigidPose(axis_angle, -rot @ center))
    return Trajectory(poses, intrinsics, max_baseline=max_baseline)


def _rotation_x(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


# -- procedural texture --------------------------------------------------------

def _noise_lattice(seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(size=(_NOISE_LATTICE, _NOISE_LATTICE))


def _value_noise(u: np.ndarray, v: np.ndarray, lattice: np.ndarray) -> np.ndarray:
    """Smooth periodic value noise: bilinear lattice lookup with a
    smoothstep fade, C1 everywhere."""
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(v).astype(np.int64)
    fu = u - i0
    fv = v - j0
    fu = fu * fu * (3.0 - 2.0 * fu)
    fv = fv * fv * (3.0 - 2.0 * fv)
    n = _NOISE_LATTICE
    i0, i1 = i0 % n, (i0 + 1) % n
    j0, j1 = j0 % n, (j0 + 1) % n
    a = lattice[i0, j0] * (1 - fu) * (1 - fv)
    b = lattice[i1, j0] * fu * (1 - fv)
    c = lattice[i0, j1] * (1 - fu) * fv
    d = lattice[i1, j1] * fu * fv
    return a + b + c + d


def _texture_rgb(points: np.ndarray, spec: TextureSpec) -> np.ndarray:
    """Color each world point [N, 3]; returns [3, N] in [0, 1]."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    p = spec.checker_period
    checker = 0.25 * (1 + np.sin(2 * np.pi * x / p)) * (1 + np.sin(2 * np.pi * y / p)) \
        + 0.25 * (1 + np.sin(2 * np.pi * y / p)) * (1 + np.sin(2 * np.pi * z / p))
    checker = spec.checker_amplitude * (checker - 1.0)
    ramp = spec.gradient_amplitude * 0.5 * (np.sin(0.31 * x + 0.17 * y) + 1.0)
    channels = []
    for ch in range(3):
        lat_xy = _noise_lattice(spec.seed * 7919 + ch * 3 + 1)
        lat_yz = _noise_lattice(spec.seed * 7919 + ch * 3 + 2)
        lat_xz = _noise_lattice(spec.seed * 7919 + ch * 3 + 3)
        noise = (_value_noise(x / spec.noise_cell, y / spec.noise_cell, lat_xy)
                 + _value_noise(y / spec.noise_cell, z / spec.noise_cell, lat_yz)
                 + _value_noise(x / spec.noise_cell, z / spec.noise_cell, lat_xz)) / 3.0
        base = 0.45 + 0.08 * ch
        val = base + spec.noise_amplitude * (noise - 0.5) + checker + ramp
        channels.append(val)
    return np.clip(np.stack(channels), 0.02, 0.98)


# -- ray casting ---------------------------------------------------------------

def _cast_plane(origin, dirs, z0: float) -> np.ndarray:
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (z0 - origin[2]) / dz
    s = np.where((np.abs(dz) > 1e-12) & (s > _RAY_EPS), s, np.inf)
    return s


def _cast_box(origin, dirs, lo, hi) -> np.ndarray:
    t_near = np.full(dirs.shape[0], -np.inf)
    t_far = np.full(dirs.shape[0], np.inf)
    for k in range(3):
        d = dirs[:, k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[k] - origin[k]) / d
            t2 = (hi[k] - origin[k]) / d
        parallel = np.abs(d) < 1e-12
        inside = (origin[k] >= lo[k]) & (origin[k] <= hi[k])
        t_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        t_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        t_near = np.maximum(t_near, t_lo)
        t_far = np.minimum(t_far, t_hi)
    hit = (t_near <= t_far) & (t_near > _RAY_EPS)
    return np.where(hit, t_near, np.inf)


def _cast_height_field(origin, dirs, hf: HeightField, steps: int = 96) -> np.ndarray:
    """First crossing of z_ray(s) = base_z - h(x, y), by marching plus bisection."""
    grid = hf.array()
    h_max = float(grid.max())

    def surface_h(pts):
        u = (pts[:, 0] - hf.origin[0]) / hf.cell
        v = (pts[:, 1] - hf.origin[1]) / hf.cell
        i0 = np.clip(np.floor(v).astype(np.int64), 0, grid.shape[0] - 2)
        j0 = np.clip(np.floor(u).astype(np.int64), 0, grid.shape[1] - 2)
        fv = np.clip(v - i0, 0.0, 1.0)
        fu = np.clip(u - j0, 0.0, 1.0)
        out = (grid[i0, j0] * (1 - fv) * (1 - fu) + grid[i0 + 1, j0] * fv * (1 - fu)
               + grid[i0, j0 + 1] * (1 - fv) * fu + grid[i0 + 1, j0 + 1] * fv * fu)
        outside = (u < 0) | (u > grid.shape[1] - 1) | (v < 0) | (v > grid.shape[0] - 1)
        return np.where(outside, 0.0, out)

    def above(s):
        pts = origin[None, :] + s[:, None] * dirs
        return pts[:, 2] - (hf.base_z - surface_h(pts)) < 0

    s_far = _cast_plane(origin, dirs, hf.base_z)
    s_near = _cast_plane(origin, dirs, hf.base_z - h_max)
    s_near = np.where(np.isfinite(s_near), s_near, _RAY_EPS)
    castable = np.isfinite(s_far)
    lo = np.where(castable, s_near, 0.0)
    hi = np.where(castable, s_far, 1.0)
    found = np.zeros(dirs.shape[0], dtype=bool)
    lo_b = lo.copy()
    hi_b = hi.copy()
    prev = lo.copy()
    for k in range(1, steps + 1):
        cur = lo + (hi - lo) * (k / steps)
        crossed = castable & ~found & ~above(cur)
        lo_b = np.where(crossed, prev, lo_b)
        hi_b = np.where(crossed, cur, hi_b)
        found |= crossed
        prev = cur
    for _ in range(30):
        mid = 0.5 * (lo_b + hi_b)
        is_above = above(mid)
        lo_b = np.where(found & is_above, mid, lo_b)
        hi_b = np.where(found & ~is_above, mid, hi_b)
    s = 0.5 * (lo_b + hi_b)
    return np.where(found & (s > _RAY_EPS), s, np.inf)


def cast_scene(scene: SceneSpec, pose: RigidPose,
               intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Depth [H, W] (camera-frame Z), hit mask, and world hit points [N, 3]."""
    h, w = intrinsics.height, intrinsics.width
    us, vs = intrinsics.pixel_grid()
    d_cam = np.stack([(us - intrinsics.cx) / intrinsics.fx,
                      (vs - intrinsics.cy) / intrinsics.fy,
                      np.ones_like(us)], axis=-1).reshape(-1, 3)
    m = pose.matrix()
    rot, t = m[:3, :3], m[:3, 3]
    origin = -rot.T @ t
    dirs = d_cam @ rot  # rot.T applied to each row

    s = np.full(dirs.shape[0], np.inf)
    if scene.plane_z is not None and scene.height_field is None:
        s = np.minimum(s, _cast_plane(origin, dirs, scene.plane_z))
    if scene.height_field is not None:
        s = np.minimum(s, _cast_height_field(origin, dirs, scene.height_field))
        if scene.plane_z is not None and scene.plane_z != scene.height_field.base_z:
            s = np.minimum(s, _cast_plane(origin, dirs, scene.plane_z))
    for lo, hi in scene.boxes:
        s = np.minimum(s, _cast_box(origin, dirs, lo, hi))

    hit = np.isfinite(s)
    points = origin[None, :] + np.where(hit, s, 0.0)[:, None] * dirs
    depth = np.where(hit, s, np.nan).reshape(h, w)
    return depth, hit.reshape(h, w), points


def render_sequence(scene: SceneSpec, traj: Trajectory
                    ) -> tuple[list[Tensor], list[DepthMap], list[RigidPose]]:
    """Render every trajectory frame.

    Returns RGB frames [3, H, W] in [0, 1], exact per-pixel depth maps
    (sky pixels invalid), and the exact frame-to-frame relative poses
    (entry t maps camera points of frame t into frame t+1).
    """
    frames: list[Tensor] = []
    depths: list[DepthMap] = []
    h, w = traj.intrinsics.height, traj.intrinsics.width
    for idx in range(len(traj)):
        depth, hit, points = cast_scene(scene, traj.poses[idx], traj.intrinsics)
        if not hit.any():
            raise ValueError(f"frame {idx}: no ray hits any geometry")
        rgb = _texture_rgb(points, scene.texture).reshape(3, h, w)
        flat_hit = hit.reshape(-1)
        for ch in range(3):
            rgb[ch].reshape(-1)[~flat_hit] = SKY_COLOR[ch]
        frames.append(Tensor(rgb))
        depths.append(DepthMap(np.where(hit, depth, 0.0), hit))
    rel = [relative_pose(traj.poses[t], traj.poses[t + 1]) for t in range(len(traj) - 1)]
    return frames, depths, rel


def inject_dynamic_patch(frames: list[Tensor], size: int = 16,
                         position: tuple[int, int] | None = None,
                         velocity_px: tuple[float, float] = (0.0, 0.0),
                         seed: int = 99) -> list[Tensor]:
    """Paste a textured square moving at a fixed image-space velocity.

    With the default zero velocity the patch sits at the same pixels in every
    frame, mimicking an object that travels with the camera: exactly the
    degenerate case auto-masking is meant to exclude.
    """
    rng = np.random.default_rng(seed)
    _, h, w = frames[0].shape
    patch = 0.2 + 0.6 * rng.uniform(size=(3, size, size))
    if position is None:
        position = (h // 2 - size // 2, w // 2 - size // 2)
    out = []
    for t, frame in enumerate(frames):
        img = frame.data.copy()
        top = int(round(position[0] + t * velocity_px[1]))
        left = int(round(position[1] + t * velocity_px[0]))
        top = max(0, min(h - size, top))
        left = max(0, min(w - size, left))
        img[:, top:top + size, left:left + size] = patch
        out.append(Tensor(img))
    return out
