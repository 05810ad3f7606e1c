import pytest

from radsurf.forge import CameraTemplate, RadarSimSpec, SceneSpec, TrajectorySpec, forge_bundle
from radsurf.field import FieldConfig
from radsurf.trainer import TrainConfig

SMALL_FIELD = FieldConfig(pos_freqs=3, dir_freqs=2, hidden_width=32, hidden_depth=3, color_width=16, color_depth=1)


def small_config(**kw) -> TrainConfig:
    base = dict(iterations=10, rays_per_iter=32, n_samples=16, eikonal_points=32, surface_warmup=0, field=SMALL_FIELD)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def default_bundle():
    return forge_bundle(SceneSpec.random(seed=0), TrajectorySpec())


@pytest.fixture(scope="session")
def small_bundle():
    return forge_bundle(SceneSpec.random(seed=1), TrajectorySpec(view_count=3), CameraTemplate(32, 32),
                        RadarSimSpec(density=0.1))


# acceptance bookkeeping: number -> (title, passed, detail); one summary line per criterion
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    details = [v for k, v in item.user_properties if k == "detail"]
    detail = "; ".join(details)
    if report.failed and not details and call.excinfo is not None:
        detail = call.excinfo.exconly().splitlines()[0][:200]
    ACCEPTANCE[number] = (title, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
