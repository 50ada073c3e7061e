"""Dataset directories: binary arrays plus a JSON manifest.

A dataset directory holds::

    manifest.json   roles -> file names, shapes, generator parameters
    y.bin           packed measurements (coil-major, sampled raster order)
    mask.bin        phase-encode lines, bool
    maps.bin        coil sensitivities
    sigma2.bin      measurement noise variance, float64 of shape (1,)
    truth.bin       ground-truth image (simulated data only)

Only ``y``, ``mask`` and ``maps`` are required.  When ``sigma2`` is absent
it is estimated from the k-space corners of the gridded data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .forward_model import ForwardOperator, estimate_noise_variance
from .io import FORMAT_VERSION, FormatError, read_array, read_json, write_array, write_json
from .sampling import SamplingMask

__all__ = ["Dataset", "save_dataset", "load_dataset", "MANIFEST", "ROLES"]

MANIFEST = "manifest.json"
ROLES = ("y", "mask", "maps", "sigma2", "truth")
REQUIRED = ("y", "mask", "maps")


@dataclass
class Dataset:
    y: np.ndarray
    mask: SamplingMask
    maps: np.ndarray
    image_shape: tuple
    sigma2: float | None = None
    truth: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @cached_property
    def op(self) -> ForwardOperator:
        return ForwardOperator(self.maps, self.mask, self.image_shape)

    def noise_variance(self) -> float:
        """Stored ``sigma2``, else a corner estimate on the gridded k-space."""
        if self.sigma2 is not None:
            return self.sigma2
        op = self.op
        return estimate_noise_variance(op.grid(self.y), pattern=op.pattern)


def save_dataset(directory, ds: Dataset) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    arrays = {"y": ds.y, "mask": ds.mask.lines, "maps": ds.maps}
    if ds.sigma2 is not None:
        arrays["sigma2"] = np.array([ds.sigma2], dtype=np.float64)
    if ds.truth is not None:
        arrays["truth"] = ds.truth
    files, shapes = {}, {}
    for role, arr in arrays.items():
        files[role] = f"{role}.bin"
        shapes[role] = list(np.shape(arr))
        write_array(d / files[role], arr)
    write_json(
        d / MANIFEST,
        {
            "format_version": FORMAT_VERSION,
            "files": files,
            "shapes": shapes,
            "image_shape": list(ds.image_shape),
            "mask_kind": ds.mask.kind,
            "acs_width": ds.mask.acs_width,
            **ds.meta,
        },
    )


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    if not (d / MANIFEST).is_file():
        raise FormatError(f"{d} is not a dataset directory (no {MANIFEST})")
    man = read_json(d / MANIFEST)
    if man.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported dataset format version {man.get('format_version')}")
    files = man.get("files", {})
    missing = [r for r in REQUIRED if r not in files]
    if missing:
        raise FormatError(f"manifest lacks required roles {missing}")
    arrays = {}
    for role, name in files.items():
        if role not in ROLES:
            raise FormatError(f"unknown role {role!r} in manifest")
        path = d / name
        if not path.is_file():
            raise FormatError(f"manifest references missing file {name}")
        arrays[role] = read_array(path)
        expected = man.get("shapes", {}).get(role)
        if expected is not None and list(arrays[role].shape) != list(expected):
            raise FormatError(f"{name} has shape {arrays[role].shape}, manifest says {expected}")
    meta = {k: v for k, v in man.items()
            if k not in ("format_version", "files", "shapes", "image_shape", "mask_kind", "acs_width")}
    mask = SamplingMask(arrays["mask"], man.get("acs_width", 0), man.get("mask_kind", "custom"))
    sigma2 = float(arrays["sigma2"].reshape(-1)[0]) if "sigma2" in arrays else None
    ds = Dataset(arrays["y"], mask, arrays["maps"], tuple(man["image_shape"]), sigma2, arrays.get("truth"), meta)
    if ds.y.shape != (ds.op.num_measurements,):
        raise FormatError(f"y has {ds.y.size} samples, mask and maps imply {ds.op.num_measurements}")
    return ds
