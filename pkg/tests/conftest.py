import numpy as np
import pytest

from suctiongrasp.geometry.bvh import SceneIndex

# criterion number -> {"title", "outcomes": [bool], "details": [str]}
_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        num, title = mark.args
        entry = _CRITERIA.setdefault(num, {"title": title, "outcomes": [], "details": []})
        entry["outcomes"].append(rep.passed)
        for name, value in item.user_properties:
            if name == "detail":
                entry["details"].append(str(value))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        ok = all(e["outcomes"])
        tr.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {e['title']}")
        for d in e["details"]:
            tr.write_line(f"    {d}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the ray kernels once so per-test timings are not skewed
    from suctiongrasp.fixtures import box_on_plane_scene
    SceneIndex(box_on_plane_scene()).cast(np.array([[0.0, 0.0, 1.0]]), np.array([[0.0, 0.0, -1.0]]), 2.0)
