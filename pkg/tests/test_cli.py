import io
import json

import numpy as np
import pytest
import yaml

from forestgen import cli
from forestgen.io import read_png

from conftest import small_config_dict


def test_missing_config_exits_with_config_code(tmp_path, capsys):
    assert cli.run(["--config", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_invalid_config_names_field(tmp_path, capsys):
    raw = small_config_dict(tmp_path)
    raw["terrain"]["width"] = -5
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert cli.run(["--config", str(path)]) == cli.EXIT_CONFIG
    assert "terrain.width" in capsys.readouterr().err


def test_unwritable_output_exits_with_io_code(tmp_path):
    raw = small_config_dict(tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    raw["output"]["frame_path"] = str(blocker / "f_{index}.png")
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert cli.run(["--config", str(path)]) == cli.EXIT_IO


def test_batch_writes_frames_stats_and_meshes(small_config_file, tmp_path):
    out = io.StringIO()
    code = cli.run(["--config", str(small_config_file), "--stats", "--dump-hdr",
                    "--export-meshes", str(tmp_path / "meshes")], stdout=out)
    assert code == cli.EXIT_OK
    stats = json.loads(out.getvalue())
    assert stats["trees"] > 0 and stats["vertices_high"] > stats["vertices_low"]
    for i in range(2):
        assert read_png(tmp_path / f"batch_{i:02d}.png").shape == (48, 64, 3)
        assert (tmp_path / f"batch_{i:02d}.pfm").exists()
    assert list((tmp_path / "meshes").glob("*.obj"))


@pytest.fixture(scope="module")
def session(tmp_path_factory):
    from forestgen.config import config_from_dict
    from forestgen.engine import generate

    engine = generate(config_from_dict(small_config_dict(tmp_path_factory.mktemp("s"))))
    return cli.Session(engine, engine.camera(engine.config.output.views[0]))


@pytest.mark.parametrize("line, reply", [
    ("pos 1 2 3", "ok"),
    ("look 0.5 -0.2", "ok"),
    ("look 0 2", "err range"),
    ("look 0 -1.5708", "err range"),
    ("tilt 3", "err parse"),
    ("", "err parse"),
    ("pos 1 2", "err parse"),
    ("pos a b c", "err parse"),
    ("pos nan 0 0", "err parse"),
    ("frame", "err parse"),
    ("stats extra", "err parse"),
])
def test_command_replies(session, line, reply):
    assert cli.handle_command(line, session) == reply


def test_rejected_look_keeps_camera(session):
    cli.handle_command("look 0.25 0.1", session)
    before = session.camera
    assert cli.handle_command("look 0.9 3", session) == "err range"
    assert session.camera == before


def test_stats_reply_is_json(session):
    reply = cli.handle_command("stats", session)
    assert reply.startswith("ok ")
    assert json.loads(reply[3:])["trees"] > 0


def test_frame_to_bad_path_is_io_error(session, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.handle_command(f"frame {blocker}/x.png", session) == "err io"


def test_async_frames_match_batch(small_config_file, tmp_path):
    assert cli.run(["--config", str(small_config_file)]) == cli.EXIT_OK
    lines = [
        "pos -8 6 -10", "look 0.5 -0.2", f"frame {tmp_path}/a1.png",
        "pos 0 3 -14", "look 0 0", f"frame {tmp_path}/a0.png",
        "bogus", "quit", "pos 1 1 1",
    ]
    out = io.StringIO()
    code = cli.run(["--config", str(small_config_file), "--mode", "async"],
                   stdin=io.StringIO("\n".join(lines) + "\n"), stdout=out)
    assert code == cli.EXIT_OK
    assert out.getvalue().splitlines() == ["ok"] * 6 + ["err parse", "ok"]
    assert np.array_equal(read_png(tmp_path / "a0.png"), read_png(tmp_path / "batch_00.png"))
    assert np.array_equal(read_png(tmp_path / "a1.png"), read_png(tmp_path / "batch_01.png"))


def test_no_culling_flag_gives_identical_frames(small_config_file, tmp_path):
    assert cli.run(["--config", str(small_config_file)]) == cli.EXIT_OK
    first = read_png(tmp_path / "batch_01.png")
    assert cli.run(["--config", str(small_config_file), "--no-culling"]) == cli.EXIT_OK
    assert np.array_equal(read_png(tmp_path / "batch_01.png"), first)
