import pytest

from chainplace.topology import build_bcube, build_fat_tree, k_shortest_paths

# (number, title, passed, detail) appended by the acceptance tests
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture(scope="session")
def bcube4():
    g = build_bcube(2, 1)
    return g, k_shortest_paths(g, 8)


@pytest.fixture(scope="session")
def fat_tree16():
    g = build_fat_tree(4)
    return g, k_shortest_paths(g, 8)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
