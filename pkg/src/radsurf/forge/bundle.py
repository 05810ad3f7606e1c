"""Dataset bundle: images, cameras, radar cloud, ground-truth mesh, metadata.

Directory layout::

    images/view_0000.png ...   8-bit RGB
    cameras.txt                JSON document, one entry per image
    radar.xyz                  "x y z [intensity]" per line
    gt_mesh.ply                ASCII PLY with per-face colors
    meta.txt                   JSON document
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import CameraModel, PointCloud, TriangleMesh

CAMERAS_FILE = "cameras.txt"
RADAR_FILE = "radar.xyz"
MESH_FILE = "gt_mesh.ply"
META_FILE = "meta.txt"
IMAGE_DIR = "images"


class BundleError(ValueError):
    pass


@dataclass
class DatasetBundle:
    images: list[np.ndarray]
    cameras: list[CameraModel]
    cloud: PointCloud
    mesh: TriangleMesh
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.images) != len(self.cameras):
            raise BundleError(f"{len(self.images)} images but {len(self.cameras)} cameras")
        for i, (img, cam) in enumerate(zip(self.images, self.cameras)):
            if img.shape != (cam.image_height, cam.image_width, 3) or img.dtype != np.uint8:
                raise BundleError(f"image {i} does not match its camera ({img.shape}, {img.dtype})")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_xyz(cloud: PointCloud, path) -> None:
    cols = [cloud.points] if cloud.intensity is None else [cloud.points, cloud.intensity[:, None]]
    data = np.hstack(cols)
    with open(path, "w") as f:
        for row in data:
            f.write(" ".join(_fmt(v) for v in row) + "\n")


def read_xyz(path) -> PointCloud:
    path = Path(path)
    rows = [line.split() for line in path.read_text().splitlines() if line.strip()]
    if not rows:
        return PointCloud(np.zeros((0, 3)))
    widths = {len(r) for r in rows}
    if widths not in ({3}, {4}):
        raise BundleError(f"{path.name}: expected 3 or 4 columns per line")
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise BundleError(f"{path.name}: {exc}") from exc
    return PointCloud(data[:, :3], data[:, 3] if data.shape[1] == 4 else None)


def write_ply(mesh: TriangleMesh, path) -> None:
    lines = ["ply", "format ascii 1.0", f"element vertex {len(mesh.vertices)}",
             "property double x", "property double y", "property double z",
             f"element face {len(mesh.faces)}", "property list uchar int vertex_indices"]
    if mesh.face_colors is not None:
        lines += ["property double red", "property double green", "property double blue"]
    lines.append("end_header")
    lines += [" ".join(_fmt(c) for c in v) for v in mesh.vertices]
    for i, f in enumerate(mesh.faces):
        row = "3 " + " ".join(str(int(k)) for k in f)
        if mesh.face_colors is not None:
            row += " " + " ".join(_fmt(c) for c in mesh.face_colors[i])
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply(path) -> TriangleMesh:
    path = Path(path)
    lines = path.read_text().splitlines()
    try:
        end = lines.index("end_header")
        header = lines[:end]
        if header[:2] != ["ply", "format ascii 1.0"]:
            raise BundleError(f"{path.name}: not an ASCII PLY file")
        n_vert = n_face = 0
        for line in header:
            parts = line.split()
            if parts[:2] == ["element", "vertex"]:
                n_vert = int(parts[2])
            elif parts[:2] == ["element", "face"]:
                n_face = int(parts[2])
        has_color = "property double red" in header
        body = lines[end + 1:]
        verts = np.array([body[i].split() for i in range(n_vert)], dtype=np.float64).reshape(-1, 3)
        face_rows = [body[n_vert + i].split() for i in range(n_face)]
        faces = np.array([r[1:4] for r in face_rows], dtype=np.int64).reshape(-1, 3)
        colors = np.array([r[4:7] for r in face_rows], dtype=np.float64).reshape(-1, 3) if has_color else None
    except (ValueError, IndexError) as exc:
        raise BundleError(f"{path.name}: corrupt PLY ({exc})") from exc
    return TriangleMesh(verts, faces, colors)


def save_bundle(bundle: DatasetBundle, directory) -> Path:
    root = Path(directory)
    (root / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(bundle.images):
        Image.fromarray(img).save(root / IMAGE_DIR / f"view_{i:04d}.png")
    (root / CAMERAS_FILE).write_text(json.dumps({"cameras": [c.to_dict() for c in bundle.cameras]}, indent=1))
    write_xyz(bundle.cloud, root / RADAR_FILE)
    write_ply(bundle.mesh, root / MESH_FILE)
    (root / META_FILE).write_text(json.dumps(bundle.metadata, indent=1, sort_keys=True))
    return root


def _require(path: Path) -> Path:
    if not path.is_file():
        raise BundleError(f"missing bundle file: {path.name}")
    return path


def load_bundle(directory) -> DatasetBundle:
    root = Path(directory)
    if not root.is_dir():
        raise BundleError(f"bundle directory not found: {root}")
    try:
        cameras = [CameraModel.from_dict(c) for c in json.loads(_require(root / CAMERAS_FILE).read_text())["cameras"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise BundleError(f"{CAMERAS_FILE}: corrupt camera file ({exc})") from exc
    try:
        metadata = json.loads(_require(root / META_FILE).read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"{META_FILE}: corrupt metadata ({exc})") from exc
    cloud = read_xyz(_require(root / RADAR_FILE))
    mesh = read_ply(_require(root / MESH_FILE))
    images = []
    for i in range(len(cameras)):
        path = _require(root / IMAGE_DIR / f"view_{i:04d}.png")
        try:
            with Image.open(path) as im:
                images.append(np.asarray(im.convert("RGB")).copy())
        except OSError as exc:
            raise BundleError(f"{path.name}: unreadable image ({exc})") from exc
    return DatasetBundle(images, cameras, cloud, mesh, metadata)
