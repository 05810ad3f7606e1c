"""Procedural box-city scenes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Aabb, TriangleMesh

# face order used for per-face colors
BOX_FACES = ("roof", "+x", "-x", "+y", "-y", "bottom")

_BOX_CORNERS = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                         [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=np.float64)
# two outward-facing triangles per face, in BOX_FACES order
_BOX_TRIS = np.array([
    [4, 5, 6], [4, 6, 7],      # roof
    [1, 2, 6], [1, 6, 5],      # +x
    [0, 4, 7], [0, 7, 3],      # -x
    [3, 7, 6], [3, 6, 2],      # +y
    [0, 1, 5], [0, 5, 4],      # -y
    [0, 3, 2], [0, 2, 1],      # bottom
])

_PALETTE = ((0.85, 0.45, 0.35), (0.4, 0.55, 0.85), (0.9, 0.8, 0.45), (0.75, 0.5, 0.8),
            (0.5, 0.8, 0.8), (0.8, 0.8, 0.8))


@dataclass(frozen=True)
class BoxSpec:
    footprint: tuple[float, float, float, float]  # x0, y0, x1, y1
    height: float
    colors: tuple = ((0.7, 0.7, 0.7),) * 6

    def __post_init__(self):
        x0, y0, x1, y1 = self.footprint
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"empty footprint {self.footprint}")
        if self.height <= 0:
            raise ValueError("box height must be positive")
        if len(self.colors) != 6:
            raise ValueError("a box needs six face colors")

    def overlaps(self, other: "BoxSpec", gap: float = 0.0) -> bool:
        a, b = self.footprint, other.footprint
        return a[0] < b[2] + gap and b[0] < a[2] + gap and a[1] < b[3] + gap and b[1] < a[3] + gap

    def aabb(self) -> Aabb:
        x0, y0, x1, y1 = self.footprint
        return Aabb((x0, y0, 0.0), (x1, y1, self.height))

    def to_dict(self) -> dict:
        return {"footprint": list(self.footprint), "height": self.height, "colors": [list(c) for c in self.colors]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoxSpec":
        return cls(tuple(d["footprint"]), float(d["height"]), tuple(tuple(c) for c in d["colors"]))


@dataclass(frozen=True)
class SceneSpec:
    ground_extent: float = 100.0
    boxes: tuple[BoxSpec, ...] = ()
    ground_color: tuple[float, float, float] = (0.45, 0.5, 0.4)
    seed: int = 0

    def __post_init__(self):
        if self.ground_extent <= 0:
            raise ValueError("ground extent must be positive")
        half = self.ground_extent / 2
        for i, box in enumerate(self.boxes):
            x0, y0, x1, y1 = box.footprint
            if x0 < -half or y0 < -half or x1 > half or y1 > half:
                raise ValueError(f"box {i} footprint leaves the ground plane")
            for j in range(i):
                if box.overlaps(self.boxes[j]):
                    raise ValueError(f"boxes {j} and {i} overlap")

    @property
    def max_height(self) -> float:
        return max((b.height for b in self.boxes), default=0.0)

    def aabb(self) -> Aabb:
        half = self.ground_extent / 2
        return Aabb((-half, -half, 0.0), (half, half, self.max_height))

    @classmethod
    def random(cls, n_boxes: int = 4, ground_extent: float = 100.0, heights=(8.0, 30.0), sizes=(12.0, 24.0),
               gap: float = 6.0, border: float = 12.0, seed: int = 0) -> "SceneSpec":
        """Rejection-sample ``n_boxes`` non-overlapping buildings; deterministic per seed."""
        rng = np.random.default_rng(seed)
        half = ground_extent / 2 - border
        boxes: list[BoxSpec] = []
        for _ in range(10000):
            if len(boxes) == n_boxes:
                break
            w, d = rng.uniform(*sizes, size=2)
            x0 = rng.uniform(-half, half - w)
            y0 = rng.uniform(-half, half - d)
            base = _PALETTE[len(boxes) % len(_PALETTE)]
            cand = BoxSpec(tuple(round(float(v), 3) for v in (x0, y0, x0 + w, y0 + d)),
                           round(float(rng.uniform(*heights)), 3), (base,) * len(BOX_FACES))
            if not any(cand.overlaps(b, gap) for b in boxes):
                boxes.append(cand)
        else:
            raise ValueError(f"could not place {n_boxes} boxes on a {ground_extent} m plane")
        return cls(ground_extent, tuple(boxes), seed=seed)

    def to_dict(self) -> dict:
        return {"ground_extent": self.ground_extent, "boxes": [b.to_dict() for b in self.boxes],
                "ground_color": list(self.ground_color), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(float(d["ground_extent"]), tuple(BoxSpec.from_dict(b) for b in d["boxes"]),
                   tuple(d["ground_color"]), int(d["seed"]))


def box_mesh(box: BoxSpec) -> TriangleMesh:
    lo, hi = box.aabb().min, box.aabb().max
    verts = lo + _BOX_CORNERS * (hi - lo)
    colors = np.repeat(np.asarray(box.colors, dtype=np.float64), 2, axis=0)
    return TriangleMesh(verts, _BOX_TRIS.copy(), colors)


def ground_mesh(extent: float, color) -> TriangleMesh:
    h = extent / 2
    verts = np.array([[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]])
    return TriangleMesh(verts, np.array([[0, 1, 2], [0, 2, 3]]), np.array([color, color], dtype=np.float64))


def build_scene(spec: SceneSpec) -> TriangleMesh:
    """Ground quad (2 triangles) followed by 12 triangles per box, with face colors."""
    return TriangleMesh.concatenate([ground_mesh(spec.ground_extent, spec.ground_color)]
                                    + [box_mesh(b) for b in spec.boxes])
