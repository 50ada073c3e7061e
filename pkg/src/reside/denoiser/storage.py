"""On-disk denoiser parameters and the per-iteration denoiser bank."""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..io import FORMAT_VERSION, FormatError, decode_array, encode_array, read_json, write_json
from .network import DenoiserParams

__all__ = ["save_params", "load_params", "encode_params", "decode_params", "DenoiserBank"]

PARAMS_MAGIC = b"RSDTHETA"
BANK_MANIFEST = "manifest.json"


def encode_params(params: DenoiserParams) -> bytes:
    body = b"".join(encode_array(a) for a in params.arrays)
    header = {
        "architecture": params.architecture(),
        "iteration": int(params.iteration),
        "num_arrays": len(params.arrays),
        "crc32": zlib.crc32(body),
        "meta": params.meta,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return PARAMS_MAGIC + struct.pack("<HI", FORMAT_VERSION, len(hbytes)) + hbytes + body


def decode_params(buf: bytes) -> DenoiserParams:
    if len(buf) < 14 or buf[:8] != PARAMS_MAGIC:
        raise FormatError("not a denoiser parameter file (bad magic)")
    version, hlen = struct.unpack_from("<HI", buf, 8)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported parameter format version {version}")
    start = 14 + hlen
    if len(buf) < start:
        raise FormatError("truncated parameter header")
    try:
        header = json.loads(buf[14:start])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt parameter header: {exc}") from exc
    body = buf[start:]
    if zlib.crc32(body) != header.get("crc32"):
        raise FormatError("parameter payload checksum mismatch (truncated or corrupt)")
    arrays, pos = [], 0
    for _ in range(header["num_arrays"]):
        arr, pos = decode_array(body, pos, exact=False)
        arrays.append(arr)
    if pos != len(body):
        raise FormatError("trailing bytes after parameter arrays")
    arch = header["architecture"]
    params = DenoiserParams(arrays[0::2], arrays[1::2], arch["ndim"], header["iteration"], header.get("meta", {}))
    if params.architecture() != arch:
        raise FormatError(f"architecture mismatch: header {arch}, arrays {params.architecture()}")
    return params


def save_params(params: DenoiserParams, path) -> None:
    Path(path).write_bytes(encode_params(params))


def load_params(path) -> DenoiserParams:
    return decode_params(Path(path).read_bytes())


class DenoiserBank:
    """Denoisers ``theta_t`` for ``t = 1..T`` with the realized ``s_t^2`` schedule.

    With ``stride > 1`` only every ``stride``-th denoiser is kept (always
    including ``t = 1``); iteration ``t`` then reuses the nearest earlier
    stored denoiser.
    """

    def __init__(self, num_iterations: int, stride: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.num_iterations = int(num_iterations)
        self.stride = int(stride)
        self.params: dict[int, DenoiserParams] = {}
        self.noise_vars: list[float] = []

    def __len__(self) -> int:
        return self.num_iterations

    def should_store(self, t: int) -> bool:
        return (t - 1) % self.stride == 0

    def add(self, t: int, params: DenoiserParams, noise_var: float) -> None:
        """Record iteration ``t`` (1-based); ``noise_var`` is ``s_{t-1}^2`` used in training."""
        self.noise_vars.append(float(noise_var))
        if self.should_store(t):
            stored = params.copy()
            stored.iteration = t
            self.params[t] = stored

    @property
    def stored_iterations(self) -> list[int]:
        return sorted(self.params)

    def architecture(self) -> dict:
        if not self.params:
            return {}
        return self.params[self.stored_iterations[0]].architecture()

    def for_iteration(self, t: int) -> DenoiserParams:
        if not self.params:
            raise LookupError("denoiser bank is empty")
        keys = [k for k in self.stored_iterations if k <= t]
        if not keys:
            raise LookupError(f"no stored denoiser at or before iteration {t}")
        return self.params[keys[-1]]

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = []
        for t in self.stored_iterations:
            name = f"theta_{t:04d}.bin"
            save_params(self.params[t], d / name)
            files.append(name)
        write_json(
            d / BANK_MANIFEST,
            {
                "format_version": FORMAT_VERSION,
                "num_iterations": self.num_iterations,
                "stride": self.stride,
                "architecture": self.architecture(),
                "stored_iterations": self.stored_iterations,
                "files": files,
                "noise_var_schedule": self.noise_vars,
            },
        )

    @classmethod
    def load(cls, directory) -> "DenoiserBank":
        d = Path(directory)
        if not (d / BANK_MANIFEST).exists():
            raise FormatError(f"{d} has no {BANK_MANIFEST}")
        man = read_json(d / BANK_MANIFEST)
        if man.get("format_version") != FORMAT_VERSION:
            raise FormatError(f"unsupported bank format version {man.get('format_version')}")
        bank = cls(man["num_iterations"], man["stride"])
        bank.noise_vars = [float(v) for v in man["noise_var_schedule"]]
        for t, name in zip(man["stored_iterations"], man["files"]):
            params = load_params(d / name)
            if params.iteration != t:
                raise FormatError(f"{name} holds iteration {params.iteration}, manifest says {t}")
            if params.architecture() != man["architecture"]:
                raise FormatError(f"{name} architecture differs from manifest")
            bank.params[t] = params
        return bank
