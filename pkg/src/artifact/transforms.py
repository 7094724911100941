"""Rotation and rigid-pose helpers.

Batched functions accept arrays with arbitrary leading dimensions. 3x3 products
are written as explicit broadcast sums so each batch row is computed with the
same arithmetic regardless of batch size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


def mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched 3x3 @ 3x3."""
    return (a[..., :, :, None] * b[..., None, :, :]).sum(axis=-2)


def mv(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batched 3x3 @ 3-vector."""
    return (a * v[..., None, :]).sum(axis=-1)


def mtv(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batched 3x3.T @ 3-vector."""
    return (a * v[..., :, None]).sum(axis=-2)


def skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rotation vector -> rotation matrix (Rodrigues)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.sqrt((phi * phi).sum(axis=-1))
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(theta) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(theta)) / safe**2)
    k = skew(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * mm(k, k)


def so3_log(rot: np.ndarray) -> np.ndarray:
    """Rotation matrix -> rotation vector, robust near 0 and pi."""
    rot = np.asarray(rot, dtype=float)
    if rot.ndim == 2:
        return so3_log(rot[None])[0]
    tr = rot[..., 0, 0] + rot[..., 1, 1] + rot[..., 2, 2]
    cos_t = np.clip((tr - 1.0) * 0.5, -1.0, 1.0)
    w = np.stack(
        [
            rot[..., 2, 1] - rot[..., 1, 2],
            rot[..., 0, 2] - rot[..., 2, 0],
            rot[..., 1, 0] - rot[..., 0, 1],
        ],
        axis=-1,
    )
    # atan2 keeps full precision near 0 and pi where arccos does not
    theta = np.arctan2(0.5 * np.sqrt((w * w).sum(axis=-1)), cos_t)
    sin_t = np.sin(theta)
    small = theta < 1e-6
    near_pi = cos_t < -0.99
    safe_sin = np.where(small | near_pi, 1.0, sin_t)
    scale = np.where(small, 0.5 + theta**2 / 12.0, theta / (2.0 * safe_sin))
    out = scale[..., None] * w
    if np.any(near_pi):
        # near pi the antisymmetric part vanishes; use the symmetric part
        idx = np.nonzero(near_pi)
        r = rot[idx]
        th = theta[idx]
        diag = np.stack([r[:, 0, 0], r[:, 1, 1], r[:, 2, 2]], axis=-1)
        axis = np.sqrt(np.clip((diag - cos_t[idx][:, None]) / (1.0 - cos_t[idx][:, None]), 0.0, None))
        k = np.argmax(axis, axis=-1)
        rows = np.arange(len(k))
        col = r[rows, k, :] + r[rows, :, k]
        col[rows, k] = 2.0 * axis[rows, k] ** 2 * (1.0 - cos_t[idx])
        col = col / np.linalg.norm(col, axis=-1, keepdims=True)
        wsub = w[idx]
        sign = np.where((col * wsub).sum(axis=-1) < 0.0, -1.0, 1.0)
        out[idx] = (sign * th)[:, None] * col
    return out


def so3_right_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = np.sqrt((phi * phi).sum(axis=-1))
    small = theta < 1e-5
    safe = np.where(small, 1.0, theta)
    c = np.where(
        small,
        1.0 / 12.0 + theta**2 / 720.0,
        1.0 / safe**2 - (1.0 + np.cos(safe)) / (2.0 * safe * np.sin(safe)),
    )
    k = skew(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + 0.5 * k + c[..., None, None] * mm(k, k)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - z * w)
    out[..., 0, 2] = 2 * (x * z + y * w)
    out[..., 1, 0] = 2 * (x * y + z * w)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - x * w)
    out[..., 2, 0] = 2 * (x * z - y * w)
    out[..., 2, 1] = 2 * (y * z + x * w)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def matrix_to_quat(rot: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns (w, x, y, z) with w >= 0."""
    r = np.asarray(rot, dtype=float)
    lead = r.shape[:-2]
    r = r.reshape(-1, 3, 3)
    out = np.empty((r.shape[0], 4))
    for i, m in enumerate(r):
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0:
            s = np.sqrt(tr + 1.0) * 2
            q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] > m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        q = np.asarray(q)
        if q[0] < 0:
            q = -q
        out[i] = q / np.linalg.norm(q)
    return out.reshape(lead + (4,))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < _EPS:
        raise ValueError(f"degenerate quaternion {q}")
    q = q / n
    return -q if q[0] < 0 else q


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: position in meters and unit quaternion (w, x, y, z)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3).copy()
        q = _as_quat(self.orientation)
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, rot: np.ndarray, pos) -> "Pose":
        return cls(np.asarray(pos, dtype=float), matrix_to_quat(rot))

    @classmethod
    def from_xyz_rotvec(cls, xyz, rotvec=(0.0, 0.0, 0.0)) -> "Pose":
        return cls.from_matrix(so3_exp(np.asarray(rotvec, dtype=float)), xyz)

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def compose(self, other: "Pose") -> "Pose":
        pos = self.position + self.rotation @ other.position
        return Pose(pos, quat_mul(self.orientation, other.orientation))

    __matmul__ = compose

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        q = self.orientation * np.array([1.0, -1.0, -1.0, -1.0])
        return Pose(-rt @ self.position, q)

    def transform_point(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.position

    def translated(self, delta) -> "Pose":
        return Pose(self.position + np.asarray(delta, dtype=float), self.orientation)

    def rotation_error(self, other: "Pose") -> float:
        """Angle in radians of the relative rotation."""
        return float(np.linalg.norm(so3_log(self.rotation @ other.rotation.T)))

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.position, other.position, atol=atol)
            and self.rotation_error(other) <= atol
        )

    def to_dict(self) -> dict:
        return {"xyz": self.position.tolist(), "quat": self.orientation.tolist()}

    @classmethod
    def from_dict(cls, d: dict | None) -> "Pose":
        if d is None:
            return cls()
        return cls(d.get("xyz", [0.0, 0.0, 0.0]), d.get("quat", [1.0, 0.0, 0.0, 0.0]))

    def __repr__(self) -> str:
        p = np.array2string(self.position, precision=4)
        q = np.array2string(self.orientation, precision=4)
        return f"Pose(position={p}, orientation={q})"
