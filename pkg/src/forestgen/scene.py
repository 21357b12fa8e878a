"""Quadtree scene graph, tree mesh pool, LOD selection and frustum culling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SceneConfig
from .ecosystem import Population, finalize_plant
from .groundcover import GroundCoverLayer, scatter
from .mesh import Mesh, rotation_y, scaling, translation
from .render.camera import frustum_planes
from .render.pipeline import MATERIALS, DrawItem, DrawList
from .render.raster import GeometryStore
from .render.textures import TextureSet
from .species import build_tree
from .terrain import Terrain, TerrainBoundsError

HIGH, LOW = "high", "low"
TERRAIN_COLOR = (0.36, 0.3, 0.22)


class SceneError(ValueError):
    pass


@dataclass
class QuadtreeNode:
    center: tuple
    width: float
    depth: int
    index: tuple                       # (ix, iz) among the nodes of this depth
    children: list = field(default_factory=list)
    trees: list = field(default_factory=list)   # TreeInstance, leaves only
    ident: int = 0

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def contains(self, x: float, z: float) -> bool:
        h = 0.5 * self.width
        return abs(x - self.center[0]) <= h + 1e-9 and abs(z - self.center[1]) <= h + 1e-9

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def build_quadtree(width: float, max_depth: int) -> QuadtreeNode:
    counter = [0]

    def make(cx, cz, w, d, ix, iz):
        node = QuadtreeNode((cx, cz), w, d, (ix, iz), ident=counter[0])
        counter[0] += 1
        if d < max_depth:
            q = 0.25 * w
            for a in (0, 1):
                for b in (0, 1):
                    node.children.append(make(cx + (2 * a - 1) * q, cz + (2 * b - 1) * q, 0.5 * w, d + 1,
                                              2 * ix + a, 2 * iz + b))
        return node

    return make(0.0, 0.0, float(width), 0, 0, 0)


@dataclass
class TreeInstance:
    species: int
    iterations: int
    variant: int
    position: tuple
    yaw: float
    scale: float

    @property
    def pool_key(self):
        return (self.species, self.iterations, self.variant)

    @property
    def matrix(self) -> np.ndarray:
        return translation(self.position) @ rotation_y(self.yaw) @ scaling(self.scale)


@dataclass
class PoolEntry:
    geometry: object                       # TreeGeometry with low_lod
    parts: dict = field(default_factory=dict)   # lod -> list of (mesh id, material, texture, alpha, color)


class MeshPool:
    """Tree geometries keyed by (species, iterations, variant)."""

    def __init__(self):
        self.entries: dict[tuple, PoolEntry] = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def __getitem__(self, key) -> PoolEntry:
        return self.entries[key]

    def keys(self):
        return sorted(self.entries)

    def add(self, key, geometry, store: GeometryStore, textures: TextureSet, sp) -> PoolEntry:
        entry = PoolEntry(geometry)
        bark = textures.get(sp.textures.get("bark", "bark"))
        leaf_name = sp.textures.get("leaf", "needle" if sp.leaf_model == "needle" else "leaf")
        leaf = textures.get(leaf_name)
        for lod, g in ((HIGH, geometry), (LOW, geometry.low_lod or geometry)):
            parts = []
            if g.branch_mesh.vertex_count:
                parts.append((store.add(g.branch_mesh), MATERIALS.index("bark"), bark, False, sp.bark_color))
            for k in sorted(g.submodel_batches):
                m = g.submodel_batches[k]
                if m.vertex_count:
                    parts.append((store.add(m), MATERIALS.index("leaf"), leaf, textures.has_alpha(leaf), sp.leaf_color))
            entry.parts[lod] = parts
        self.entries[key] = entry
        return entry


def finalize_population(pop: Population, species, variants: int, rng) -> list[TreeInstance]:
    """Growth stage, scale, rotation and variant for every surviving plant (y filled in later)."""
    out = []
    for k in range(len(pop)):
        s = int(pop.species[k])
        r = rng.fork(f"plant{k}")
        it, scale, yaw = finalize_plant(int(pop.age[k]), species[s], r)
        variant = r.integers(0, max(1, variants))
        out.append(TreeInstance(s, it, variant, (float(pop.x[k]), 0.0, float(pop.z[k])), yaw, scale))
    return out


def build_pool(instances, species, rng, store: GeometryStore, textures: TextureSet) -> MeshPool:
    pool = MeshPool()
    for key in sorted({t.pool_key for t in instances}):
        s, it, var = key
        sp = species[s]
        geom = build_tree(sp, it, rng.fork(f"tree/{sp.name}/{it}/{var}"))
        pool.add(key, geom, store, textures, sp)
    return pool


@dataclass
class Piece:
    """One drawable of a leaf node, with a build-time key shared by both LODs."""
    key: int
    items: dict        # lod -> list of DrawItem


@dataclass
class Scene:
    config: SceneConfig
    root: QuadtreeNode
    terrain: Terrain
    pool: MeshPool
    store: GeometryStore
    textures: TextureSet
    instances: list
    ground_cover: list
    pieces: dict = field(default_factory=dict)     # leaf ident -> list of Piece
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def max_depth(self) -> int:
        return self.config.quadtree.max_depth

    def leaf_nodes(self):
        return list(self.root.leaves())

    def node_items(self, node: QuadtreeNode, lod: str) -> list:
        """Draw items for a node; inner nodes gather their leaves' pieces."""
        key = (node.ident, lod)
        if key not in self._cache:
            items = []
            for leaf in node.leaves():
                for piece in self.pieces.get(leaf.ident, ()):
                    items.extend(piece.items[lod])
            self._cache[key] = items
        return self._cache[key]

    def draw_list(self, selection) -> DrawList:
        items = []
        for node, lod in selection:
            items.extend(self.node_items(node, lod))
        return DrawList.from_items(items)

    def all_items(self, lod: str) -> DrawList:
        return self.draw_list([(self.root, lod)])

    def stats(self, selection=None) -> dict:
        per_depth: dict[int, int] = {}
        for n in self.root.walk():
            per_depth[n.depth] = per_depth.get(n.depth, 0) + 1
        out = {
            "nodes_per_depth": per_depth,
            "trees": len(self.instances),
            "pool_size": len(self.pool),
            "ground_cover_instances": sum(layer.instance_count for layer in self.ground_cover),
        }
        for lod in (HIGH, LOW):
            out[f"vertices_{lod}"] = self._vertices(self.all_items(lod))
        if selection is not None:
            out["visible_nodes"] = len(selection)
            out["visible_vertices"] = self._vertices(self.draw_list(selection))
        return out

    def _vertices(self, dl: DrawList) -> int:
        counts = self.store.packed["vert_count"]
        return int(counts[dl.mesh].sum()) if len(dl) else 0


def _ground_cover_pieces(layer: GroundCoverLayer, tile):
    """World-space batches of one layer in one tile: (model, high mesh, low mesh)."""
    out = []
    for group in layer.tiles.get(tile, ()):
        model = layer.models[group.model]
        hi = Mesh.concat([model.high.transformed(m) for m in group.matrices])
        lo = Mesh.concat([model.low.transformed(m) for m in group.matrices])
        out.append((model, hi, lo))
    return out


def build_scene(cfg: SceneConfig, instances, terrain: Terrain, pool: MeshPool, ground_cover,
                store: GeometryStore, textures: TextureSet) -> Scene:
    """Assign trees, terrain tiles and ground-cover batches to quadtree leaves and enumerate draw keys."""
    root = build_quadtree(terrain.width, cfg.quadtree.max_depth)
    if terrain.depth != cfg.quadtree.max_depth:
        raise SceneError("terrain tiles must match the quadtree leaf depth")
    leaves = {leaf.index: leaf for leaf in root.leaves()}
    for t in instances:
        try:
            ix, iz = terrain.tile_index(t.position[0], t.position[2])
        except TerrainBoundsError as exc:
            raise SceneError(str(exc)) from None
        leaf = leaves[(int(ix), int(iz))]
        if not leaf.contains(t.position[0], t.position[2]):
            raise SceneError(f"plant at {t.position} outside its leaf")
        leaf.trees.append(t)

    scene = Scene(cfg, root, terrain, pool, store, textures, list(instances), list(ground_cover))
    terrain_tex = textures.get("terrain")
    key = 0
    for index in sorted(leaves):
        leaf = leaves[index]
        pieces = []
        mid = store.add(terrain.tiles[index].mesh)
        item = DrawItem(mid, np.eye(4), key, terrain_tex, MATERIALS.index("terrain"), TERRAIN_COLOR)
        pieces.append(Piece(key, {HIGH: [item], LOW: [item]}))
        key += 1
        for layer in ground_cover:
            for model, hi, lo in _ground_cover_pieces(layer, index):
                tex = textures.get(model.texture)
                mat = MATERIALS.index(model.material)
                alpha = model.material != "bark" and textures.has_alpha(tex)
                ids = {HIGH: store.add(hi), LOW: store.add(lo)}
                pieces.append(Piece(key, {lod: [DrawItem(ids[lod], np.eye(4), key, tex, mat, model.color, alpha)]
                                          for lod in (HIGH, LOW)}))
                key += 1
        for t in leaf.trees:
            entry = pool[t.pool_key]
            m = t.matrix
            n_parts = max(len(entry.parts[HIGH]), len(entry.parts[LOW]))
            items = {lod: [DrawItem(mesh, m, key + j, tex, mat, color, alpha)
                           for j, (mesh, mat, tex, alpha, color) in enumerate(entry.parts[lod])]
                     for lod in (HIGH, LOW)}
            pieces.append(Piece(key, items))
            key += n_parts
        scene.pieces[leaf.ident] = pieces
    return scene


def place_on_terrain(instances, terrain: Terrain) -> list[TreeInstance]:
    if not instances:
        return []
    xs = np.array([t.position[0] for t in instances])
    zs = np.array([t.position[2] for t in instances])
    ys = terrain.height_at(xs, zs)
    for t, y in zip(instances, np.atleast_1d(ys)):
        t.position = (t.position[0], float(y), t.position[2])
    return instances


def scatter_ground_cover(cfg: SceneConfig, terrain: Terrain, rng) -> list[GroundCoverLayer]:
    return [scatter(spec, terrain, rng.fork(f"ground{k}")) for k, spec in enumerate(cfg.ground_cover)]


# --- visibility -------------------------------------------------------------

def sphere_frustum_test(node: QuadtreeNode, planes: np.ndarray) -> bool:
    """True when either bounding sphere (radius 2w, at ground level and 2w up) meets the frustum."""
    r = 2.0 * node.width
    for y in (0.0, r):
        c = np.array([node.center[0], y, node.center[1]])
        if np.all(planes[:, :3] @ c + planes[:, 3] >= -r):
            return True
    return False


def stop_recursion(node: QuadtreeNode, camera_position, threshold: float, max_depth: int) -> bool:
    far = (abs(node.center[0] - camera_position[0]) > threshold * node.width
           and abs(node.center[1] - camera_position[2]) > threshold * node.width)
    return far or node.depth == max_depth


def visible_quads(scene_or_root, camera_position, threshold: float, view_projection=None, max_depth=None,
                  culling: bool = True):
    """Nodes to draw with their LOD; nodes outside the frustum are dropped when culling."""
    root = scene_or_root.root if isinstance(scene_or_root, Scene) else scene_or_root
    if max_depth is None:
        max_depth = scene_or_root.max_depth if isinstance(scene_or_root, Scene) else \
            max(n.depth for n in root.walk())
    planes = frustum_planes(view_projection) if (culling and view_projection is not None) else None
    out = []

    def visit(node):
        if planes is not None and not sphere_frustum_test(node, planes):
            return
        if stop_recursion(node, camera_position, threshold, max_depth):
            out.append((node, HIGH if node.depth >= max_depth - 1 else LOW))
        else:
            for child in node.children:
                visit(child)

    visit(root)
    return out


def chebyshev_distance(node: QuadtreeNode, camera_position) -> float:
    return max(abs(node.center[0] - camera_position[0]), abs(node.center[1] - camera_position[2]))

