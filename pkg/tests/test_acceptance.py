"""End-to-end acceptance checks, one test (or group) per criterion.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.  The reconstruction criteria (6, 7, 8) run the
desk preset at full 128 x 128 size and take most of the suite's runtime.
"""

import json
import time

import mpmath
import numpy as np
import pytest

from reside import cli
from reside.denoiser import init_params
from reside.forward_model import ForwardOperator, operator_norm_sq
from reside.metrics import rsnr, ssim
from reside.numerics import make_rng
from reside.phantom import PhantomSpec, make_static_phantom, simulate_acquisition
from reside.sampling import SamplingMask, make_mask_m1
from reside.solver import (
    MeasurementSet,
    SolverConfig,
    discrepancy_update,
    pds_pnp,
    reside_m_infer,
    reside_m_train,
    reside_s,
    run_pnp,
)

from conftest import crandn, dft_matrix, fd_check

SEEDS = (1, 2, 3)
TRAIN_SEEDS = (21, 22, 23, 24)
UNSEEN_SEED = SEEDS[0]


def desk_config(**overrides):
    return SolverConfig.preset("desk", **{"iterations": 80, **overrides})


def acquisition(seed, n=128, coils=4, R=4.0, snr_db=30.0):
    x, maps = make_static_phantom(PhantomSpec(image_shape=(n, n), num_coils=coils, seed=seed))
    mask = make_mask_m1(make_rng(seed, 5), n, R)
    return simulate_acquisition(x, maps, mask, snr_db, make_rng(seed, 6))


def detail(request, text):
    request.node.user_properties.append(("detail", text))


@pytest.fixture(scope="session")
def reside_s_runs():
    """Lazily computed ReSiDe-S results and wall times, shared across criteria."""
    cache = {}

    def get(seed):
        if seed not in cache:
            acq = acquisition(seed)
            t0 = time.perf_counter()
            res = reside_s(acq.op, acq.y, desk_config(), acq.sigma2, acq.x)
            cache[seed] = (acq, res, time.perf_counter() - t0)
        return cache[seed]

    return get


# 1 ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_adjoint_dot_product(request):
    t0 = time.perf_counter()
    rng = make_rng(2024)
    worst = 0.0
    for i in range(24):
        ny, nx = rng.integers(2, 40, size=2)
        coils = int(rng.integers(1, 9))
        frames = None if i % 3 else int(rng.integers(1, 5))
        lines = rng.random(ny if frames is None else (frames, ny)) < rng.uniform(0.2, 0.9)
        lines.flat[0] = True
        image_shape = (ny, nx) if frames is None else (frames, ny, nx)
        op = ForwardOperator(crandn(rng, (coils, ny, nx)), SamplingMask(lines), image_shape)
        x = crandn(rng, image_shape)
        y = crandn(rng, op.num_measurements)
        ax = op.apply(x)
        gap = abs(np.vdot(y, ax) - np.vdot(op.adjoint(y), x))
        worst = max(worst, gap / (np.linalg.norm(ax) * np.linalg.norm(y)))
    elapsed = time.perf_counter() - t0
    detail(request, f"24 instances, worst normalized gap {worst:.1e}, {elapsed:.2f} s")
    assert worst < 1e-10 and elapsed < 10


# 2 ---------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_dense_operator_oracle(request):
    t0 = time.perf_counter()
    rng = make_rng(7)
    f2 = np.kron(dft_matrix(8), dft_matrix(8))
    worst = 0.0
    for lines in ([1, 0, 1, 1, 0, 0, 1, 0], [0, 0, 0, 1, 0, 0, 0, 0], [1] * 8):
        lines = np.array(lines, bool)
        maps = crandn(rng, (2, 8, 8))
        op = ForwardOperator(maps, SamplingMask(lines))
        pat = np.repeat(lines, 8)
        dense = np.vstack([f2[pat] @ np.diag(maps[c].ravel()) for c in range(2)])
        x = crandn(rng, (8, 8))
        y = crandn(rng, op.num_measurements)
        top = np.linalg.eigvalsh(dense.conj().T @ dense)[-1]
        gaps = [
            np.linalg.norm(op.apply(x) - dense @ x.ravel()) / np.linalg.norm(dense @ x.ravel()),
            np.linalg.norm(op.adjoint(y).ravel() - dense.conj().T @ y) / np.linalg.norm(dense.conj().T @ y),
            abs(operator_norm_sq(op, make_rng(0), iters=2000, tol=1e-14) - top) / top,
        ]
        worst = max(worst, *gaps)
    elapsed = time.perf_counter() - t0
    detail(request, f"worst relative gap {worst:.1e}, {elapsed:.2f} s")
    assert worst < 1e-6 and elapsed < 30


# 3 ---------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_denoiser_gradients(request):
    t0 = time.perf_counter()
    rng = make_rng(11)
    worst = 0.0
    for ndim, shape in ((2, (3, 6, 5)), (3, (2, 4, 4, 3))):
        params = init_params(rng, ndim, num_layers=2, num_kernels=3, dtype=np.float64, final_scale=1.0)
        for b in params.biases:
            b[:] = 0.1 * rng.standard_normal(b.shape)
        worst = max(worst, fd_check(params, crandn(rng, shape), crandn(rng, shape)))
    elapsed = time.perf_counter() - t0
    detail(request, f"worst relative gradient gap {worst:.1e}, {elapsed:.2f} s")
    assert worst < 1e-4 and elapsed < 60


# 4 ---------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_correction_term_arithmetic(request):
    mpmath.mp.dps = 50
    worst = 0.0
    m, sigma2 = 65536, 2.5e-4
    for tau in (0.65, 0.9, 1.15):
        for alpha in (0.1, 0.5, 1.0):
            for ratio in (1e-3, 0.2, 0.65, 1.0, 4.0, 1e3):
                residual = ratio * m * sigma2
                c, _ = discrepancy_update(1.0, residual, m, sigma2, tau, alpha)
                exact = (mpmath.mpf(tau) * m * mpmath.mpf(sigma2) / mpmath.mpf(residual)) ** mpmath.mpf(alpha)
                worst = max(worst, abs(c - float(exact)) / float(exact))
    detail(request, f"54 grid points, worst relative error {worst:.1e}")
    assert worst <= 1e-12


# 5 ---------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_pds_identity_noiseless_full_sampling(request):
    x, maps = make_static_phantom(PhantomSpec(image_shape=(64, 64), num_coils=1, seed=0))
    op = ForwardOperator(maps, SamplingMask(np.ones(64, bool)))
    xh, trace = pds_pnp(op, op.apply(x), lambda u: u, 1e-12, iterations=20)
    value = rsnr(x, xh)
    detail(request, f"rSNR after {len(trace)} iterations {value:.1f} dB")
    assert len(trace) == 20 and value > 60


# 6 ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_reside_s_convergence(request, reside_s_runs):
    _, res, wall = reside_s_runs(SEEDS[0])
    c_last = res.trace.c_t[-1]
    trace = np.asarray(res.trace.rsnr_db)
    gap = trace.max() - trace[-1]
    detail(request, f"c_T {c_last:.4f}, final rSNR {trace[-1]:.2f} dB, {gap:.2f} dB below max, {wall / 60:.1f} min")
    assert len(trace) == 80
    assert abs(c_last - 1) < 0.1 and gap <= 0.5 and wall < 30 * 60


# 7 ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(7)
@pytest.mark.parametrize("seed", SEEDS)
def test_quality_ordering(request, reside_s_runs, seed):
    acq, res, _ = reside_s_runs(seed)
    base = run_pnp(acq.op, acq.y, desk_config(denoiser="baseline"), acq.sigma2)
    recons = {"reside": res.x, "baseline": base.x, "zero-filled": acq.op.adjoint(acq.y)}
    r = {k: rsnr(acq.x, v) for k, v in recons.items()}
    s = {k: ssim(np.abs(acq.x), np.abs(v)) for k, v in recons.items()}
    detail(request, f"seed {seed} rSNR " + "/".join(f"{v:.2f}" for v in r.values())
           + " SSIM " + "/".join(f"{v:.3f}" for v in s.values()))
    assert r["reside"] - r["baseline"] >= 1 and r["baseline"] - r["zero-filled"] >= 1
    assert s["reside"] > s["baseline"] > s["zero-filled"]


# 8 ---------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_reside_m_single_set_is_reside_s(request):
    acq = acquisition(5)
    cfg = desk_config(iterations=4, seed=3)
    a = reside_s(acq.op, acq.y, cfg, acq.sigma2)
    b = reside_m_train(MeasurementSet([acq.op], [acq.y], [acq.sigma2]), cfg)
    same = a.x.tobytes() == b.x.tobytes() and a.trace.residual_sq == b.trace.residual_sq
    detail(request, f"(a) K=1 bit-identical: {same}")
    assert same


@pytest.fixture(scope="session")
def bank_inference(reside_s_runs):
    train = [acquisition(s) for s in TRAIN_SEEDS]
    trained = reside_m_train(MeasurementSet.from_acquisitions(train), desk_config(), [a.x for a in train])
    acq, single, single_wall = reside_s_runs(UNSEEN_SEED)
    t0 = time.perf_counter()
    inferred = reside_m_infer(acq.op, acq.y, trained.bank, desk_config(), acq.sigma2)
    return acq, single, single_wall, inferred, time.perf_counter() - t0


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_bank_inference_matches_reside_s(request, bank_inference):
    acq, single, _, inferred, _ = bank_inference
    r_s, r_m = rsnr(acq.x, single.x), rsnr(acq.x, inferred.x)
    detail(request, f"(b) unseen phantom rSNR S {r_s:.2f} dB, M {r_m:.2f} dB")
    assert abs(r_s - r_m) <= 1.0


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_bank_inference_is_fast(request, bank_inference):
    _, _, single_wall, _, infer_wall = bank_inference
    detail(request, f"(c) inference {infer_wall:.1f} s vs ReSiDe-S {single_wall:.1f} s")
    assert infer_wall <= single_wall / 10


# 9 ---------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_metrics_oracles(request):
    rng = make_rng(9)
    x = crandn(rng, (32, 32))
    half = rsnr(x, x / 2)
    mag = np.abs(x)
    same = ssim(mag, mag)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    worst = abs(ssim(a, b, 1.0) - _direct_ssim(a, b, 1.0))
    detail(request, f"rsnr(x, x/2) {half:.7f}, ssim(x, x) {same!r}, 16x16 oracle gap {worst:.1e}")
    assert abs(half - 6.0206) <= 1e-6
    assert same == 1.0
    assert worst < 1e-10


def _direct_ssim(a, b, data_range, size=11, sigma=1.5):
    # oracle: SSIM formula evaluated window by window over fully contained windows
    k = np.arange(size) - size // 2
    g = np.exp(-(k**2) / (2 * sigma**2))
    w = np.outer(g, g) / np.outer(g, g).sum()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    vals = []
    for i in range(a.shape[0] - size + 1):
        for j in range(a.shape[1] - size + 1):
            pa, pb = a[i:i + size, j:j + size], b[i:i + size, j:j + size]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * pa * pa).sum() - ma**2
            vb = (w * pb * pb).sum() - mb**2
            cov = (w * pa * pb).sum() - ma * mb
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


# 10 --------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_cli_reconstruct_is_deterministic(request, tmp_path):
    data = tmp_path / "ds"
    assert cli.main(["simulate", "--out", str(data), "--seed", "4", "--quiet"]) == 0
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = cli.main(["reconstruct", "--data", str(data), "--out", str(out), "--seed", "8",
                         "--iterations", "4", "--quiet"])
        assert code == 0
        outs.append(out)
    same = (outs[0] / "xhat.bin").read_bytes() == (outs[1] / "xhat.bin").read_bytes()
    report = json.loads((outs[0] / "metrics.json").read_text())
    detail(request, f"x-hat byte-identical: {same}, rSNR {report['rsnr_db']:.2f} dB")
    assert same
