"""3D vector for game-space coordinates (meters, tank-anchored origin)."""

from __future__ import annotations

import math
from typing import NamedTuple


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def add(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def sub(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scale(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def unit(self) -> "Vec3":
        """Unit vector; the zero vector maps to itself."""
        n = self.norm()
        if n == 0.0:
            return ZERO
        return Vec3(self.x / n, self.y / n, self.z / n)

    def clamp_norm(self, limit: float) -> "Vec3":
        """Scale down to ``limit`` if longer; direction preserved."""
        n = self.norm()
        if n <= limit:
            return self
        k = limit / n
        return Vec3(self.x * k, self.y * k, self.z * k)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    def planar_distance(self, other: "Vec3") -> float:
        """Distance in the table plane (x, y only)."""
        return math.hypot(self.x - other.x, self.y - other.y)


ZERO = Vec3(0.0, 0.0, 0.0)
