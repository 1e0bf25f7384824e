"""Image files and the light-field container.

A container is a directory holding ``manifest.json`` plus one image file per
view and, optionally, one PFM disparity file per view::

    {"U": 5, "H": 64, "W": 64, "C": 3,
     "views": [{"u": 0, "image": "view_00.pfm", "disparity": "disp_00.pfm"}, ...],
     "dmax": 2.0}
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
import png

from .lightfield import LightField

MANIFEST = "manifest.json"


class ContainerError(ValueError):
    """Malformed or inconsistent light-field container."""


def write_pfm(path, data) -> None:
    """Write a float image as little-endian PFM (rows stored bottom-to-top)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        header = "Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = "PF"
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr[::-1], dtype="<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file; returns ``(H, W)`` for greyscale, ``(H, W, 3)`` for colour."""
    with open(path, "rb") as f:
        raw = f.read()
    # header: identifier, dimensions, scale -- whitespace separated
    m = re.match(rb"(P[Ff])\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", raw)
    if m is None:
        raise ContainerError(f"{path}: not a PFM file")
    colour = m.group(1) == b"PF"
    w, h = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    dtype = "<f4" if scale < 0 else ">f4"
    nch = 3 if colour else 1
    count = w * h * nch
    body = raw[m.end():]
    if len(body) < 4 * count:
        raise ContainerError(f"{path}: truncated PFM data")
    arr = np.frombuffer(body, dtype=dtype, count=count).astype(np.float32)
    arr = arr.reshape((h, w, 3) if colour else (h, w))
    return arr[::-1].copy()


def write_png16(path, img) -> None:
    """Write an image in [0, 1] as a 16-bit PNG (greyscale or RGB)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    q = np.round(np.clip(arr, 0.0, 1.0) * 65535).astype(np.uint16)
    h, w = q.shape[:2]
    greyscale = q.ndim == 2
    writer = png.Writer(w, h, greyscale=greyscale, bitdepth=16)
    rows = q.reshape(h, -1)
    with open(path, "wb") as f:
        writer.write(f, rows.tolist())


def read_png(path) -> np.ndarray:
    """Read an 8- or 16-bit PNG into ``(H, W, C)`` floats in [0, 1]."""
    w, h, rows, info = png.Reader(filename=str(path)).asDirect()
    planes = info["planes"]
    arr = np.vstack([np.asarray(r, dtype=np.float64) for r in rows]).reshape(h, w, planes)
    arr /= float(2 ** info["bitdepth"] - 1)
    if info.get("alpha"):
        arr = arr[:, :, :-1]
    return arr


def read_image(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    if path.suffix.lower() == ".pfm":
        arr = read_pfm(path)
        return arr[:, :, None] if arr.ndim == 2 else arr
    if path.suffix.lower() == ".png":
        return read_png(path)
    raise ContainerError(f"unsupported image format: {path.suffix}")


def write_image(path, img) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        write_pfm(path, img)
    elif path.suffix.lower() == ".png":
        write_png16(path, img)
    else:
        raise ContainerError(f"unsupported image format: {path.suffix}")


def save_lf(lf: LightField, path, fmt: str = "pfm") -> Path:
    """Write ``lf`` as a container directory; ``fmt`` picks the view format."""
    if fmt not in ("pfm", "png"):
        raise ValueError(f"unknown view format {fmt!r}")
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    H, W, C = lf.shape
    entries = []
    for i, u in enumerate(lf.indices):
        name = f"view_{u:02d}.{fmt}"
        write_image(root / name, lf.views[i])
        disp = None
        if lf.disparities is not None:
            disp = f"disparity_{u:02d}.pfm"
            write_pfm(root / disp, lf.disparities[i])
        entries.append({"u": int(u), "image": name, "disparity": disp})
    manifest = {"U": lf.U, "H": H, "W": W, "C": C, "views": entries,
                "dmax": None if lf.dmax is None else float(lf.dmax)}
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2))
    return root


def load_lf(path) -> LightField:
    """Load a container written by :func:`save_lf` (or by hand)."""
    root = Path(path)
    mpath = root / MANIFEST
    if not mpath.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {root}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{mpath}: invalid JSON ({exc})") from None
    for key in ("U", "H", "W", "C", "views"):
        if key not in manifest:
            raise ContainerError(f"{mpath}: missing key {key!r}")
    U, H, W, C = (int(manifest[k]) for k in ("U", "H", "W", "C"))
    entries = manifest["views"]
    if len(entries) != U:
        raise ContainerError(f"{mpath}: declares U={U} but lists {len(entries)} views")

    views, disps, indices = [], [], []
    for entry in entries:
        u = entry.get("u")
        if u is None or "image" not in entry:
            raise ContainerError(f"{mpath}: view entry {entry!r} lacks 'u' or 'image'")
        ipath = root / entry["image"]
        if not ipath.exists():
            raise FileNotFoundError(f"view u={u}: missing image file {ipath}")
        img = read_image(ipath)
        if img.shape != (H, W, C):
            raise ContainerError(
                f"view u={u}: image shape {img.shape} does not match manifest {(H, W, C)}")
        views.append(img)
        indices.append(int(u))
        dname = entry.get("disparity")
        if dname:
            dpath = root / dname
            if not dpath.exists():
                raise FileNotFoundError(f"view u={u}: missing disparity file {dpath}")
            d = read_pfm(dpath)
            if d.shape != (H, W):
                raise ContainerError(
                    f"view u={u}: disparity shape {d.shape} does not match manifest {(H, W)}")
            disps.append(d)
    if disps and len(disps) != U:
        raise ContainerError(f"{mpath}: disparity maps given for only some views")
    return LightField(np.stack(views), np.stack(disps) if disps else None,
                      manifest.get("dmax"), indices)
