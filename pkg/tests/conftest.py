import pytest

from specflow.cover import build_cover, pushforward_fundamental, star_cover_sets
from specflow.family import monopole_center, monopole_family
from specflow.mesh import BallRegion, s3_mesh


@pytest.fixture(scope="session")
def s3():
    return s3_mesh()


@pytest.fixture(scope="session")
def small_s3():
    return s3_mesh(6)


@pytest.fixture(scope="session")
def star_sets(s3):
    return star_cover_sets(s3, 0.3)


@pytest.fixture(scope="session")
def ball(s3):
    p = s3.positions[monopole_center(s3)]
    return BallRegion.geodesic(s3, p, 1.2, 0.8)


@pytest.fixture(scope="session")
def monopoles(s3):
    return {k: monopole_family(s3, k) for k in (-2, -1, 0, 1, 2)}


@pytest.fixture(scope="session")
def monopole_cover(s3, star_sets, monopoles):
    c = build_cover(monopoles[1], sets=star_sets)
    return c, pushforward_fundamental(c, s3)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
