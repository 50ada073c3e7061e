"""``reside`` command line: simulate, reconstruct, train, infer, metrics, convert.

Hyperparameters come from, in increasing precedence: the ``--preset``,
a flat ``key = value`` file given with ``--config``, and individual flags
(``--tau 0.9``, ``--patch-shape 32x32``, ...).  Each run that reconstructs
writes ``resolved-config.txt`` next to its outputs; passing that file back
with ``--config`` repeats the run exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import Dataset, load_dataset, save_dataset
from .denoiser import DenoiserBank, TrainingError
from .io import FormatError, array_to_text, read_array, write_array, write_json
from .metrics import quality_report
from .numerics import make_rng
from .phantom import PhantomSpec, make_dynamic_phantom, make_static_phantom, simulate_acquisition
from .sampling import make_mask_m1, make_mask_m2, make_mask_m3
from .solver import (
    PRESETS,
    ConfigurationError,
    DivergenceError,
    MeasurementSet,
    SolverConfig,
    reside_m_infer,
    reside_m_train,
    run_pnp,
)

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4
EXIT_CONFIG = 5

THREADS_ENV = "RESIDE_NUM_THREADS"
RESOLVED_CONFIG = "resolved-config.txt"

EXIT_HELP = f"""exit codes:
  {EXIT_OK}  success
  {EXIT_ARGS}  invalid arguments
  {EXIT_FORMAT}  unreadable, corrupt or inconsistent input files
  {EXIT_NUMERIC}  divergence or denoiser training failure
  {EXIT_CONFIG}  invalid configuration (unknown key, bad value, bank mismatch)

environment:
  {THREADS_ENV}  default for --threads (else the number of logical cores)
"""

METHODS = {"reside-s": "cnn", "pnp-baseline": "baseline", "pnp-identity": "identity"}
# keys a config file may hold besides SolverConfig fields
RUN_KEYS = ("method", "data", "out")


class ArgumentError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsing shared by flags and config files


def parse_shape(text: str) -> tuple:
    try:
        shape = tuple(int(p) for p in str(text).lower().split("x"))
    except ValueError:
        raise ArgumentError(f"bad shape {text!r}; expected e.g. 128x128") from None
    if not shape or any(s < 1 for s in shape):
        raise ArgumentError(f"bad shape {text!r}")
    return shape


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


_DEFAULTS = SolverConfig()


def parse_config_value(key: str, text: str):
    """Convert ``text`` to the type of ``SolverConfig.<key>``."""
    default = getattr(_DEFAULTS, key)
    text = str(text).strip()
    try:
        if key == "patch_shape":
            return parse_shape(text)
        if key in ("nu", "sigma2", "s0_sq"):
            return None if text.lower() == "none" else float(text)
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except (ValueError, ArgumentError) as exc:
        raise ConfigurationError(f"{key}: cannot parse {text!r}") from exc
    return text


def format_config_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "x".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; unknown keys rejected."""
    allowed = set(SolverConfig.field_names()) | set(RUN_KEYS)
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in allowed:
            raise ConfigurationError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value if key in RUN_KEYS else parse_config_value(key, value)
    return out


def write_config_file(path, cfg: SolverConfig, run: dict) -> None:
    lines = [f"{k} = {run[k]}" for k in RUN_KEYS if run.get(k) is not None]
    lines += [f"{k} = {format_config_value(v)}" for k, v in cfg.to_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n")


def resolve_config(args, fixed: dict | None = None, defaults: dict | None = None):
    """Merge preset, ``defaults``, config file and flags into a ``SolverConfig``.

    ``fixed`` entries override everything.  Returns the config and the
    run keys (method, data, out) found in the config file.
    """
    values = {**PRESETS[args.preset], **(defaults or {})}
    run = {}
    if args.config:
        for k, v in read_config_file(args.config).items():
            (run if k in RUN_KEYS else values)[k] = v
    for f in fields(SolverConfig):
        flag = getattr(args, "cfg_" + f.name, None)
        if flag is not None:
            values[f.name] = parse_config_value(f.name, flag)
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    values.update(fixed or {})
    try:
        cfg = SolverConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return cfg, run


# ---------------------------------------------------------------------------
# threads


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ArgumentError(f"{THREADS_ENV}={env!r} is not an integer") from None
        return n
    return os.cpu_count() or 1


@contextmanager
def thread_limit(n: int):
    if n < 1:
        raise ArgumentError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


# ---------------------------------------------------------------------------
# outputs


def save_png(path, image, scale: float) -> None:
    try:
        from PIL import Image
    except ImportError:
        raise ArgumentError("--png needs Pillow (pip install 'artifact[png]')") from None
    mag = np.abs(np.asarray(image))
    if mag.ndim == 3:
        mag = np.concatenate(list(mag), axis=1)
    u8 = np.clip(np.round(255 * mag / scale if scale > 0 else 0 * mag), 0, 255).astype(np.uint8)
    Image.fromarray(u8).save(path)


def write_outputs(out: Path, x_hat, trace, truth=None, png=False, name="xhat"):
    out.mkdir(parents=True, exist_ok=True)
    write_array(out / f"{name}.bin", np.asarray(x_hat, dtype=np.complex128))
    trace.to_csv(out / ("trace.csv" if name == "xhat" else f"trace_{name}.csv"))
    report = None
    if truth is not None:
        report = quality_report(truth, x_hat).to_dict()
        write_json(out / ("metrics.json" if name == "xhat" else f"metrics_{name}.json"), report)
    if png:
        scale = float(np.abs(truth).max()) if truth is not None else float(np.abs(x_hat).max())
        save_png(out / f"{name}.png", x_hat, scale)
        if truth is not None:
            save_png(out / f"{name}_error_x5.png", 5 * np.abs(np.asarray(x_hat) - truth), scale)
    return report


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _progress(args):
    def report(t, trace):
        if args.quiet or (t % 10 and t != 1):
            return
        c = trace.c_t[-1]
        r = trace.rsnr_db[-1]
        print(f"t={t:4d} residual={trace.residual_sq[-1]:.4e}"
              + ("" if c is None else f" c_t={c:.4f}")
              + ("" if r is None else f" rsnr={r:.2f}dB"), file=sys.stderr)

    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    if args.accel < 1:
        raise ArgumentError(f"--accel must be >= 1, got {args.accel}")
    shape = parse_shape(args.shape)
    if len(shape) != 2:
        raise ArgumentError("--shape takes two sizes, e.g. 128x128")
    spec = PhantomSpec(shape, args.coils, args.dynamic, args.frames, seed=args.seed)
    try:
        x, maps = (make_dynamic_phantom if args.dynamic else make_static_phantom)(spec)
        rng = make_rng(args.seed, 5)
        n = shape[0]
        if args.mask == "m3":
            if not args.dynamic:
                raise ArgumentError("mask m3 is for dynamic series; add --dynamic")
            mask = make_mask_m3(rng, n, args.frames, args.accel)
        else:
            gen = make_mask_m1 if args.mask == "m1" else make_mask_m2
            mask = gen(rng, n, args.accel, args.acs)
            if args.dynamic:
                from .sampling import SamplingMask

                mask = SamplingMask(np.tile(mask.lines, (args.frames, 1)), mask.acs_width, mask.kind)
        acq = simulate_acquisition(x, maps, mask, args.snr_db, make_rng(args.seed, 6))
    except ValueError as exc:
        raise ArgumentError(str(exc)) from exc
    meta = {
        "seed": args.seed,
        "generator": {
            "shape": list(shape),
            "coils": args.coils,
            "dynamic": args.dynamic,
            "frames": args.frames if args.dynamic else 1,
            "mask": args.mask,
            "target_acceleration": args.accel,
            "snr_db": args.snr_db,
        },
        "acceleration": acq.acceleration,
    }
    ds = Dataset(acq.y, acq.mask, acq.maps, x.shape, acq.sigma2, x, meta)
    save_dataset(args.out, ds)
    _log(args, f"wrote {args.out}: R={acq.acceleration:.3f} sigma2={acq.sigma2:.4e}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg, run = resolve_config(args)
    method = args.method or run.get("method") or "reside-s"
    if method not in METHODS:
        raise ArgumentError(f"unknown method {method!r}")
    cfg = SolverConfig(**{**cfg.to_dict(), "denoiser": METHODS[method]})
    data = args.data or run.get("data")
    out = Path(args.out or run.get("out") or "")
    if not data or not str(out):
        raise ArgumentError("reconstruct needs --data and --out")
    ds = load_dataset(data)
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(out / RESOLVED_CONFIG, cfg, {"method": method, "data": data, "out": str(out)})
    sigma2 = ds.noise_variance()
    t0 = time.perf_counter()
    if method == "reside-s":
        res = reside_m_train(MeasurementSet([ds.op], [ds.y], [sigma2]), cfg,
                             None if ds.truth is None else [ds.truth], _progress(args))
    else:
        res = run_pnp(ds.op, ds.y, cfg, sigma2, ds.truth)
    _log(args, f"{method}: {cfg.iterations} iterations in {time.perf_counter() - t0:.1f}s")
    report = write_outputs(out, res.x, res.trace, ds.truth, args.png)
    if report is not None:
        _log(args, f"rsnr={report['rsnr_db']} ssim={report['ssim']:.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, run = resolve_config(args, {"denoiser": "cnn"})
    if args.k is not None and args.k != len(args.data):
        raise ArgumentError(f"--k {args.k} but {len(args.data)} datasets given")
    sets = [load_dataset(d) for d in args.data]
    shapes = {ds.image_shape for ds in sets}
    if len(shapes) != 1:
        raise FormatError(f"training sets differ in image shape: {sorted(shapes)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(out / RESOLVED_CONFIG, cfg, {"method": "reside-m"})
    mset = MeasurementSet([ds.op for ds in sets], [ds.y for ds in sets], [ds.noise_variance() for ds in sets])
    truths = [ds.truth for ds in sets]
    t0 = time.perf_counter()
    res = reside_m_train(mset, cfg, truths if any(t is not None for t in truths) else None, _progress(args))
    _log(args, f"trained {len(sets)} sets x {cfg.iterations} iterations in {time.perf_counter() - t0:.1f}s")
    res.bank.save(out)
    res.trace.to_csv(out / "trace.csv")
    for k, (ds, x) in enumerate(zip(sets, res.images)):
        write_array(out / f"xhat_{k}.bin", np.asarray(x, dtype=np.complex128))
        if ds.truth is not None:
            write_json(out / f"metrics_{k}.json", quality_report(ds.truth, x).to_dict())
    return EXIT_OK


def cmd_infer(args) -> int:
    bank = DenoiserBank.load(args.bank)
    cfg, _ = resolve_config(args, {"denoiser": "cnn"}, {"iterations": len(bank)})
    ds = load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(out / RESOLVED_CONFIG, cfg, {"method": "infer", "data": args.data, "out": str(out)})
    t0 = time.perf_counter()
    res = reside_m_infer(ds.op, ds.y, bank, cfg, ds.noise_variance(), ds.truth)
    _log(args, f"inference: {cfg.iterations} iterations in {time.perf_counter() - t0:.2f}s")
    write_outputs(out, res.x, res.trace, ds.truth, args.png)
    return EXIT_OK


def cmd_metrics(args) -> int:
    truth, recon = read_array(args.truth), read_array(args.recon)
    if truth.shape != recon.shape:
        raise FormatError(f"shape mismatch: truth {truth.shape} vs recon {recon.shape}")
    try:
        report = quality_report(truth, recon).to_dict()
    except ValueError as exc:
        raise ArgumentError(str(exc)) from exc
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_convert(args) -> int:
    src = Path(args.input)
    if src.suffix == ".npy":
        try:
            arr = np.load(src, allow_pickle=False)
        except (ValueError, OSError) as exc:
            raise FormatError(f"{src}: {exc}") from exc
        if not args.out:
            raise ArgumentError("importing .npy needs --out file.bin")
        write_array(args.out, arr)
        return EXIT_OK
    text = array_to_text(read_array(src))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p):
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads for BLAS-backed code (default: ${THREADS_ENV} or all cores)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def _add_solver_flags(p):
    g = p.add_argument_group("solver hyperparameters (override --config and --preset)")
    g.add_argument("--config", help="flat key = value file; unknown keys are rejected")
    g.add_argument("--preset", choices=sorted(PRESETS), default="desk",
                   help="starting values: 'full' (published network size) or 'desk' (default)")
    g.add_argument("--seed", type=int, default=None)
    for f in fields(SolverConfig):
        if f.name in ("seed", "denoiser"):
            continue
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="V", default=None,
                       help=f"default {format_config_value(getattr(_DEFAULTS, f.name))}")
    p.add_argument("--png", action="store_true", help="also write magnitude and x5 error-map PNGs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reside",
        description="Self-calibrated plug-and-play MRI reconstruction.",
        epilog=EXIT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated phantom dataset", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", required=True, help="dataset directory")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--static", dest="dynamic", action="store_false", help="single image (default)")
    kind.add_argument("--dynamic", dest="dynamic", action="store_true", help="image series")
    p.set_defaults(dynamic=False)
    p.add_argument("--shape", default="128x128")
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--mask", choices=("m1", "m2", "m3"), default="m1")
    p.add_argument("--accel", type=float, default=4.0, help="target acceleration R >= 1")
    p.add_argument("--acs", type=int, default=None, help="ACS lines (default 10%% of lines)")
    p.add_argument("--snr-db", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct one dataset", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--out", help="output directory")
    p.add_argument("--method", choices=sorted(METHODS), default=None, help="default reside-s")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train", help="train a denoiser bank on K datasets", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", nargs="+", required=True, help="K dataset directories")
    p.add_argument("--k", type=int, default=None, help="expected number of datasets")
    p.add_argument("--out", required=True, help="bank directory")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="reconstruct with a stored denoiser bank", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--bank", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("metrics", help="rSNR and SSIM of a reconstruction as JSON", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--truth", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--out", help="also write the JSON here")
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("convert", help="dump an array file as text, or import a .npy", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input", help=".bin array file (dumped as text) or .npy (imported)")
    p.add_argument("--out", help="output path (stdout for text dumps if omitted)")
    _add_common(p)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = args.threads if args.threads is not None else default_threads()
        with thread_limit(threads):
            return args.func(args)
    except ArgumentError as exc:
        print(f"reside: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except FormatError as exc:
        print(f"reside: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (DivergenceError, TrainingError) as exc:
        print(f"reside: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigurationError as exc:
        print(f"reside: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"reside: I/O error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
