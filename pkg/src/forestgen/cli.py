"""Command-line entry point: batch rendering and the stdin/stdout session protocol.

Async protocol, one reply line per request line::

    pos x y z          move the camera            -> ok
    look yaw pitch     orient it (radians)        -> ok | err range
    frame <path>       render and write a PNG     -> ok | err io
    stats              scene statistics as JSON   -> ok {...}
    quit               end the session            -> ok

Anything else, or wrong arity, replies ``err parse``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, load_config
from .engine import Engine, generate
from .io import export_obj, write_pfm, write_png
from .render.camera import Camera

log = logging.getLogger("forestgen")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forestgen", description="Generate and render a procedural forest.")
    p.add_argument("--config", required=True, help="scene YAML file")
    p.add_argument("--mode", choices=("batch", "async"), help="override output.mode")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--export-meshes", metavar="DIR", help="write one OBJ per pooled tree geometry")
    p.add_argument("--dump-hdr", action="store_true", help="write a float PFM next to every PNG")
    p.add_argument("--stats", action="store_true", help="print scene statistics as JSON")
    p.add_argument("--no-culling", action="store_true", help="disable frustum culling")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def write_frame(engine: Engine, camera: Camera, path, dump_hdr: bool = False) -> None:
    frame = engine.render(camera)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_png(frame.ldr, path)
    if dump_hdr:
        write_pfm(frame.hdr, path.with_suffix(".pfm"))


def export_meshes(engine: Engine, directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = [s.name for s in engine.config.species]
    paths = []
    for key in engine.scene.pool.keys():
        s, it, var = key
        path = out / f"{names[s]}_i{it}_v{var}.obj"
        export_obj(engine.scene.pool[key].geometry.combined(), path)
        paths.append(path)
    return paths


@dataclass
class Session:
    engine: Engine
    camera: Camera
    dump_hdr: bool = False
    frames: int = 0
    done: bool = False


def _floats(args, n):
    if len(args) != n:
        raise ValueError
    vals = [float(a) for a in args]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError
    return vals


def handle_command(line: str, state: Session) -> str:
    parts = line.split()
    if not parts:
        return "err parse"
    verb, args = parts[0], parts[1:]
    cam = state.camera
    try:
        if verb == "pos":
            x, y, z = _floats(args, 3)
            state.camera = Camera((x, y, z), cam.yaw, cam.pitch, cam.fov_y, cam.aspect, cam.far)
            return "ok"
        if verb == "look":
            yaw, pitch = _floats(args, 2)
            if not -math.pi / 2 < pitch < math.pi / 2:
                return "err range"
            state.camera = Camera(cam.position, yaw, pitch, cam.fov_y, cam.aspect, cam.far)
            return "ok"
        if verb == "frame":
            if len(args) != 1:
                return "err parse"
            try:
                write_frame(state.engine, state.camera, args[0], state.dump_hdr)
            except OSError:
                return "err io"
            state.frames += 1
            return "ok"
        if verb == "stats" and not args:
            sel = state.engine.selection(state.camera)
            return "ok " + json.dumps(state.engine.scene.stats(sel), sort_keys=True)
        if verb == "quit" and not args:
            state.done = True
            return "ok"
    except ValueError:
        return "err parse"
    return "err parse"


def run_async(engine: Engine, dump_hdr: bool, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    views = engine.config.output.views
    state = Session(engine, engine.camera(views[0]), dump_hdr)
    for line in stdin:
        stdout.write(handle_command(line.strip(), state) + "\n")
        stdout.flush()
        if state.done:
            break
    return EXIT_OK


def run_batch(engine: Engine, dump_hdr: bool) -> int:
    template = engine.config.output.frame_path
    for index, view in enumerate(engine.config.output.views):
        path = template.format(index=index)
        write_frame(engine, engine.camera(view), path, dump_hdr)
        log.info("wrote %s", path)
    return EXIT_OK


def run(argv=None, stdin=None, stdout=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        print(f"forestgen: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.no_culling:
        cfg = cfg.replace(render=dataclasses.replace(cfg.render, culling=False))
    mode = args.mode or cfg.output.mode
    try:
        engine = generate(cfg)
        if args.export_meshes:
            export_meshes(engine, args.export_meshes)
        if args.stats:
            stream = sys.stderr if mode == "async" else (stdout or sys.stdout)
            print(json.dumps(engine.scene.stats(), sort_keys=True), file=stream)
        if mode == "async":
            return run_async(engine, args.dump_hdr, stdin, stdout)
        return run_batch(engine, args.dump_hdr)
    except OSError as exc:
        print(f"forestgen: io error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
