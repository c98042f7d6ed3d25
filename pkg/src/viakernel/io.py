"""Kernel files, slice exports and the generated plotting script.

A kernel is stored as two files sharing a stem:

``<stem>.json``
    plain-text header: window, shape, absorbing faces, every meta field,
    and the encoding of the mask file;
``<stem>.mask``
    the membership mask as packed bits (``numpy.packbits``, most significant
    bit first) in row-major cell order, axes in declaration order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .viability import GridSpec, KernelGrid

FORMAT = "viakernel-kernel/1"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_kernel(kernel: KernelGrid, stem) -> tuple[Path, Path]:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header_path = stem.with_suffix(".json")
    mask_path = stem.with_suffix(".mask")
    bits = np.packbits(kernel.mask.ravel(order="C"))
    mask_path.write_bytes(bits.tobytes())
    header = {
        "format": FORMAT,
        "mask_file": mask_path.name,
        "mask_encoding": "packbits-msb-first, row-major (C) cell order",
        "cells": kernel.spec.size,
        "members": kernel.count,
        "grid": kernel.spec.to_spec(),
        "meta": _jsonable(kernel.meta),
    }
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return header_path, mask_path


def read_kernel(path) -> KernelGrid:
    """Load a kernel from its header (``.json``) or mask (``.mask``) path or stem."""
    path = Path(path)
    header_path = path if path.suffix == ".json" else path.with_suffix(".json")
    header = json.loads(header_path.read_text())
    if header.get("format") != FORMAT:
        raise ValueError(f"{header_path} is not a kernel header")
    spec = GridSpec.from_spec(header["grid"])
    raw = np.frombuffer((header_path.parent / header["mask_file"]).read_bytes(), dtype=np.uint8)
    mask = np.unpackbits(raw)[: spec.size].astype(bool)
    if mask.size != spec.size:
        raise ValueError("mask file is shorter than the grid")
    return KernelGrid(spec, mask.reshape(spec.shape), header["meta"])


def write_centers(kernel: KernelGrid, path) -> None:
    centers = kernel.member_centers()
    header = ",".join(f"x{i + 1}" for i in range(kernel.spec.ndim))
    np.savetxt(path, centers, delimiter=",", header=header, comments="", fmt="%.17g")


def slice_2d(kernel: KernelGrid, axes: tuple[int, int], fixed: dict | None = None) -> np.ndarray:
    """2-D section through the mask; unlisted axes are fixed at their middle index."""
    a, b = axes
    index = []
    for ax in range(kernel.spec.ndim):
        if ax in (a, b):
            index.append(slice(None))
        else:
            index.append((fixed or {}).get(ax, kernel.spec.shape[ax] // 2))
    section = kernel.mask[tuple(index)].astype(int)
    return section if a < b else section.T


def projection_2d(kernel: KernelGrid, axes: tuple[int, int]) -> np.ndarray:
    """Number of member cells above each cell of the ``axes`` plane."""
    a, b = axes
    others = tuple(ax for ax in range(kernel.spec.ndim) if ax not in (a, b))
    proj = kernel.mask.sum(axis=others) if others else kernel.mask.astype(int)
    return proj if a < b else proj.T


def default_slice_axes(ndim: int) -> list[tuple[int, int]]:
    if ndim < 2:
        return []
    if ndim == 4:
        return [(0, 1), (2, 3)]
    return [(0, 1)]


def write_slices(kernel: KernelGrid, outdir, prefix: str = "kernel") -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for a, b in default_slice_axes(kernel.spec.ndim):
        for kind, data in (("slice", slice_2d(kernel, (a, b))), ("proj", projection_2d(kernel, (a, b)))):
            path = outdir / f"{prefix}_{kind}_x{a + 1}_x{b + 1}.csv"
            np.savetxt(path, data, delimiter=",", fmt="%d")
            written.append(path)
    return written


PLOT_TEMPLATE = '''"""Render kernel slice CSVs written next to this script.

Usage: python {name} [output.png]
"""
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
WINDOWS = {windows!r}

files = sorted(HERE.glob("*_x*_x*.csv"))
fig, axes = plt.subplots(1, max(1, len(files)), figsize=(4 * max(1, len(files)), 4), squeeze=False)
for ax, path in zip(axes[0], files):
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    prefix, kind, xa, xb = path.stem.rsplit("_", 3)
    a, b = int(xa[1:]) - 1, int(xb[1:]) - 1
    lo, hi = WINDOWS.get(prefix, WINDOWS[next(iter(WINDOWS))])
    extent = [lo[b], hi[b], lo[a], hi[a]]
    ax.imshow(data, origin="lower", extent=extent, aspect="auto", cmap="viridis")
    ax.set_xlabel(xb)
    ax.set_ylabel(xa)
    ax.set_title(f"{{prefix}} {{kind}}")
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else HERE / "kernel_slices.png", dpi=120)
'''


def write_plot_script(outdir, windows: dict, name: str = "plot_slices.py") -> Path:
    """``windows`` maps a slice prefix to its ``(lower, upper)`` window."""
    path = Path(outdir) / name
    clean = {k: (list(map(float, lo)), list(map(float, hi))) for k, (lo, hi) in windows.items()}
    path.write_text(PLOT_TEMPLATE.format(name=name, windows=clean))
    return path
