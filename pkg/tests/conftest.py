import pytest

from forestgen.config import load_config, sample_config_path

_REPORT: list[str] = []


class FixedRng:
    """Stand-in stream whose every draw is the same number."""

    def __init__(self, value: float = 0.0):
        self.value = value

    def random(self):
        return self.value

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.value


def report(line: str) -> None:
    print(line)
    _REPORT.append(line)


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sample_config():
    return load_config(sample_config_path())


@pytest.fixture(scope="session")
def sample_engine(sample_config):
    from forestgen.engine import generate

    return generate(sample_config)


def small_config_dict(tmp_dir, mode="batch"):
    """Sample scene shrunk to a 30 m patch and tiny frames for fast end-to-end runs."""
    import yaml

    with open(sample_config_path()) as fh:
        raw = yaml.safe_load(fh)
    raw["terrain"]["width"] = 30
    raw["quadtree"]["max_depth"] = 2
    raw["species"] = raw["species"][:2]
    for s in raw["species"]:
        s["iterations"] = [3, 4]
    raw["ecosystem"]["steps"] = 200
    raw["ecosystem"]["variants"] = 1
    raw["render"].update(width=64, height=48, shadow_map_size=256)
    raw["output"] = {
        "mode": mode,
        "frame_path": str(tmp_dir / "batch_{index:02d}.png"),
        "views": [{"position": [0, 3, -14], "yaw": 0.0, "pitch": 0.0},
                  {"position": [-8, 6, -10], "yaw": 0.5, "pitch": -0.2}],
    }
    return raw


@pytest.fixture
def small_config_file(tmp_path):
    import yaml

    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(small_config_dict(tmp_path)))
    return path
