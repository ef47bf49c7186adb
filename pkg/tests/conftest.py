import pytest

from mym.ontology import Taxonomy, sample_taxonomy


@pytest.fixture
def small_tax():
    """root -> {Music -> {Jazz, Rock}, Sport -> {Soccer}}"""
    t = Taxonomy("Interest")
    music = t.add_concept(t.root, "Music")
    sport = t.add_concept(t.root, "Sport")
    ids = {
        "root": t.root,
        "Music": music,
        "Sport": sport,
        "Jazz": t.add_concept(music, "Jazz"),
        "Rock": t.add_concept(music, "Rock"),
        "Soccer": t.add_concept(sport, "Soccer"),
    }
    return t, ids


@pytest.fixture(scope="session")
def campus():
    return sample_taxonomy()


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for key in ("passed", "failed")
        for rep in terminalreporter.stats.get(key, [])
        if rep.when == "call"
        for name, value in rep.user_properties
        if name == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
