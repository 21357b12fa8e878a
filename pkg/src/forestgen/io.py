"""File formats: Wavefront OBJ meshes, PNG frames and float images (PFM, Radiance HDR)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh


def export_obj(mesh: Mesh, path) -> None:
    """Write positions, normals, uvs and 1-based ``v/vt/vn`` faces."""
    if mesh.vertex_count == 0 or mesh.triangle_count == 0:
        raise ValueError("cannot export an empty mesh")
    lines = ["# forestgen mesh"]
    lines += [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.positions]
    lines += [f"vt {u:.6f} {v:.6f}" for u, v in mesh.uvs]
    lines += [f"vn {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.normals]
    for a, b, c in np.asarray(mesh.triangles, dtype=np.int64) + 1:
        lines.append(f"f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path) -> Mesh:
    """Parse the subset of OBJ written by :func:`export_obj` (shared v/vt/vn indices, triangles)."""
    v, vt, vn, faces = [], [], [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag, rest = parts[0], parts[1:]
        if tag == "v":
            v.append([float(x) for x in rest[:3]])
        elif tag == "vt":
            vt.append([float(x) for x in rest[:2]])
        elif tag == "vn":
            vn.append([float(x) for x in rest[:3]])
        elif tag == "f":
            if len(rest) != 3:
                raise ValueError("only triangular faces are supported")
            faces.append([int(r.split("/")[0]) - 1 for r in rest])
    n = len(v)
    pos = np.array(v, dtype=float).reshape(n, 3)
    nrm = np.array(vn, dtype=float).reshape(-1, 3) if len(vn) == n else np.zeros((n, 3))
    uv = np.array(vt, dtype=float).reshape(-1, 2) if len(vt) == n else np.zeros((n, 2))
    return Mesh(pos, nrm, np.zeros((n, 3)), uv, np.array(faces, dtype=np.int32).reshape(-1, 3))


def write_png(image, path) -> None:
    """Save an (H, W, 3) image in [0, 1] as 8-bit PNG."""
    from PIL import Image

    arr = np.clip(np.rint(np.asarray(image, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path, format="PNG")


def read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_pfm(image, path) -> None:
    """Little-endian colour PFM; rows are stored bottom-up as the format requires."""
    arr = np.asarray(image, dtype="<f4")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file")
        dims = fh.readline().split()
        while not dims:
            dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        channels = 3 if header == b"PF" else 1
        data = np.frombuffer(fh.read(w * h * channels * 4), dtype=dtype)
    img = data.reshape(h, w, channels)[::-1].astype(np.float64)
    return img if channels == 3 else np.repeat(img, 3, axis=2)


def read_hdr_image(path) -> np.ndarray:
    """Load an equirectangular HDR map (Radiance ``.hdr`` or PFM) as linear RGB floats."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(path)
    if p.suffix.lower() in (".pfm", ".ppm"):
        return read_pfm(p)
    import cv2  # Radiance RGBE decoding

    bgr = cv2.imread(str(p), cv2.IMREAD_ANYDEPTH | cv2.IMREAD_COLOR)
    if bgr is None:
        raise ValueError(f"{path}: could not decode HDR image")
    return bgr[..., ::-1].astype(np.float64)
