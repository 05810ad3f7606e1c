"""Synthetic urban datasets: scenes, views, radar-like clouds, registration and bundle I/O."""
from __future__ import annotations

from dataclasses import asdict

from .bundle import BundleError, DatasetBundle, load_bundle, save_bundle
from .icp import IcpResult, icp_register
from .radar import RadarSimSpec, sample_radar_points
from .scene import BoxSpec, SceneSpec, build_scene
from .views import CameraTemplate, TrajectorySpec, render_views


def forge_bundle(scene: SceneSpec, trajectory: TrajectorySpec, template: CameraTemplate = CameraTemplate(),
                 radar: RadarSimSpec = RadarSimSpec()) -> DatasetBundle:
    mesh = build_scene(scene)
    images, cameras = render_views(mesh, trajectory, template)
    cloud = sample_radar_points(mesh, trajectory, radar)
    box = scene.aabb()
    metadata = {
        "units": "m",
        "scene_min": box.min.tolist(),
        "scene_max": box.max.tolist(),
        "view_count": len(images),
        "point_count": len(cloud),
        "scene": scene.to_dict(),
        "trajectory": trajectory.to_dict(),
        "camera_template": asdict(template),
        "radar": asdict(radar),
    }
    return DatasetBundle(images, cameras, cloud, mesh, metadata)


__all__ = [
    "BoxSpec", "BundleError", "CameraTemplate", "DatasetBundle", "IcpResult", "RadarSimSpec", "SceneSpec",
    "TrajectorySpec", "build_scene", "forge_bundle", "icp_register", "load_bundle", "render_views",
    "sample_radar_points", "save_bundle",
]
