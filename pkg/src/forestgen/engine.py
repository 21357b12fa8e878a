"""End-to-end scene generation and frame rendering from a :class:`SceneConfig`."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RngStream, SceneConfig, View
from .ecosystem import Population, init_population, simulate
from .render.camera import Camera
from .render.lighting import LightingEnv
from .render.pipeline import Frame, render_frame
from .render.raster import GeometryStore
from .render.shadow import ShadowMap, shadow_pass
from .render.sky import direction_from_angles, estimate_sun, procedural_sky
from .render.textures import TextureSet
from .scene import (Scene, build_pool, build_scene, finalize_population, place_on_terrain,
                    scatter_ground_cover, visible_quads)
from .terrain import build_terrain

log = logging.getLogger(__name__)


def sun_setup(cfg: SceneConfig):
    """Sun position and equirectangular sky for the lighting config."""
    light = cfg.lighting
    distance = 2.0 * cfg.terrain.width
    if light.hdri:
        from .io import read_hdr_image

        sky = read_hdr_image(light.hdri)
        sun = np.asarray(light.sun_position, float) if light.sun_position is not None else estimate_sun(sky, distance)
        return sun, sky
    if light.sun_position is not None:
        sun = np.asarray(light.sun_position, float)
    else:
        sun = distance * direction_from_angles(light.sun_azimuth, light.sun_elevation)
    return sun, procedural_sky(sun / np.linalg.norm(sun))


@dataclass
class Engine:
    config: SceneConfig
    scene: Scene
    population: Population
    env: LightingEnv
    sky: np.ndarray
    shadow_map: ShadowMap
    timings: dict = field(default_factory=dict)

    def camera(self, view: View) -> Camera:
        r = self.config.render
        return Camera(tuple(view.position), view.yaw, view.pitch, r.fov_y, r.width / r.height, r.far)

    def selection(self, camera: Camera, culling: bool | None = None):
        culling = self.config.render.culling if culling is None else culling
        return visible_quads(self.scene, camera.position, self.config.quadtree.threshold,
                             camera.view_projection(), culling=culling)

    def render(self, camera: Camera, culling: bool | None = None, settings=None) -> Frame:
        draws = self.scene.draw_list(self.selection(camera, culling))
        return render_frame(self.scene.store, self.scene.textures, draws, camera, self.env,
                            settings or self.config.render, self.shadow_map, self.sky)


def generate(cfg: SceneConfig) -> Engine:
    """Terrain, ecosystem, tree pool, ground cover, quadtree and the shadow pre-pass."""
    rng = RngStream(cfg.seed)
    timings = {}
    t0 = time.perf_counter()

    def lap(name):
        nonlocal t0
        now = time.perf_counter()
        timings[name] = now - t0
        log.info("%s: %.2fs", name, now - t0)
        t0 = now

    depth = cfg.quadtree.max_depth
    terrain = build_terrain(cfg.terrain, depth, rng.fork("terrain"))
    lap("terrain")
    species = list(cfg.species)
    pop = init_population(species, cfg.ecosystem, cfg.terrain.width, rng.fork("ecosystem-init"))
    if species:
        simulate(pop, species, cfg.ecosystem, rng.fork("ecosystem"))
    lap("ecosystem")
    instances = place_on_terrain(finalize_population(pop, species, cfg.ecosystem.variants, rng.fork("finalize")),
                                 terrain)
    store, textures = GeometryStore(), TextureSet()
    pool = build_pool(instances, species, rng.fork("pool"), store, textures)
    lap("trees")
    ground = scatter_ground_cover(cfg, terrain, rng.fork("ground"))
    scene = build_scene(cfg, instances, terrain, pool, ground, store, textures)
    lap("scene")
    sun, sky = sun_setup(cfg)
    light = cfg.lighting
    env = LightingEnv(sun, np.asarray(light.sun_color, float), light.ambient, light.translucency)
    shadow_draws = scene.all_items(cfg.render.shadow_lod)
    _, alpha = textures.arrays
    smap = shadow_pass(store, shadow_draws.mesh, shadow_draws.model, shadow_draws.key, shadow_draws.alpha_texture,
                       alpha, sun, cfg.terrain.width, cfg.render.shadow_map_size)
    lap("shadow")
    return Engine(cfg, scene, pop, env, sky, smap, timings)
