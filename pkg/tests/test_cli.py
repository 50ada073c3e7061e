import json

import numpy as np
import pytest

from reside import cli
from reside.dataset import Dataset, load_dataset, save_dataset
from reside.io import FormatError, read_array, write_array
from reside.phantom import PhantomSpec, make_static_phantom
from reside.sampling import SamplingMask

TINY_FLAGS = ["--iterations", "2", "--num-patches", "4", "--patch-shape", "16x16", "--epochs", "1",
              "--num-kernels", "4", "--num-layers", "2", "--norm-iters", "20", "--quiet"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_ds(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "ds"
    assert run("simulate", "--out", d, "--shape", "32x32", "--coils", "2", "--seed", "3", "--quiet") == 0
    return d


def test_simulate_reports_acceleration(tmp_path):
    d = tmp_path / "ds"
    code = run("simulate", "--static", "--shape", "128x128", "--coils", "4", "--mask", "m1", "--accel", "4",
               "--snr-db", "30", "--seed", "7", "--out", d, "--quiet")
    assert code == 0
    man = json.loads((d / "manifest.json").read_text())
    assert 3.9 <= man["acceleration"] <= 4.1
    assert man["seed"] == 7 and man["image_shape"] == [128, 128]
    ds = load_dataset(d)
    assert ds.truth.shape == (128, 128) and ds.sigma2 > 0


def test_simulate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--shape", "32x32", "--seed", "5", "--mask", "m2", "--out", tmp_path / name,
                   "--quiet") == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_simulate_dynamic_m3(tmp_path):
    assert run("simulate", "--dynamic", "--frames", "4", "--shape", "32x32", "--mask", "m3", "--out",
               tmp_path / "d", "--quiet") == 0
    assert load_dataset(tmp_path / "d").truth.shape == (4, 32, 32)


@pytest.mark.parametrize("argv", [["--accel", "0.5"], ["--shape", "12x"], ["--mask", "m3"],
                                  ["--shape", "8x8"]])
def test_simulate_argument_errors(tmp_path, argv):
    assert run("simulate", "--out", tmp_path / "x", "--quiet", *argv) == cli.EXIT_ARGS


def test_unknown_flag_is_argument_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        run("simulate", "--out", tmp_path, "--bogus")
    assert info.value.code == cli.EXIT_ARGS


def test_pnp_identity_on_noiseless_full_sampling(tmp_path):
    x, maps = make_static_phantom(PhantomSpec(image_shape=(32, 32), num_coils=2, seed=1))
    ds = Dataset(None, SamplingMask(np.ones(32, bool)), maps, x.shape, 1e-12, x)
    ds.y = ds.op.apply(x)
    save_dataset(tmp_path / "full", ds)
    assert run("reconstruct", "--method", "pnp-identity", "--data", tmp_path / "full", "--out",
               tmp_path / "r", "--iterations", "20", "--quiet") == 0
    report = json.loads((tmp_path / "r" / "metrics.json").read_text())
    assert report["rsnr_db"] == "inf" or report["rsnr_db"] > 60


def test_reconstruct_outputs_and_config_round_trip(small_ds, tmp_path):
    out = tmp_path / "r1"
    assert run("reconstruct", "--data", small_ds, "--out", out, "--seed", "2", "--png", *TINY_FLAGS) == 0
    for name in ("xhat.bin", "trace.csv", "metrics.json", "resolved-config.txt", "xhat.png",
                 "xhat_error_x5.png"):
        assert (out / name).exists()
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "t,residual_sq,c_t,s_t_sq,rsnr_db" and len(lines) == 3
    out2 = tmp_path / "r2"
    assert run("reconstruct", "--config", out / "resolved-config.txt", "--out", out2, "--quiet") == 0
    assert (out / "xhat.bin").read_bytes() == (out2 / "xhat.bin").read_bytes()
    assert (out / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()


def test_flags_override_config_file(small_ds, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nmethod = pnp-baseline\niterations = 2\nbaseline_strength = 0.5\n")
    assert run("reconstruct", "--config", cfg, "--data", small_ds, "--out", tmp_path / "o", "--iterations", "3",
               "--quiet") == 0
    resolved = (tmp_path / "o" / "resolved-config.txt").read_text()
    assert "iterations = 3" in resolved and "baseline_strength = 0.5" in resolved
    assert "denoiser = baseline" in resolved


def test_config_errors(small_ds, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("tua = 0.65\n")
    assert run("reconstruct", "--config", bad, "--data", small_ds, "--out", tmp_path / "o", "--quiet") == cli.EXIT_CONFIG
    bad.write_text("tau = abc\n")
    assert run("reconstruct", "--config", bad, "--data", small_ds, "--out", tmp_path / "o", "--quiet") == cli.EXIT_CONFIG
    assert run("reconstruct", "--data", small_ds, "--out", tmp_path / "o", "--tau", "-1", "--quiet") == cli.EXIT_CONFIG


def test_format_errors(small_ds, tmp_path):
    assert run("reconstruct", "--data", tmp_path, "--out", tmp_path / "o", "--quiet") == cli.EXIT_FORMAT
    broken = tmp_path / "broken"
    broken.mkdir()
    for f in small_ds.iterdir():
        (broken / f.name).write_bytes(f.read_bytes())
    (broken / "y.bin").write_bytes((broken / "y.bin").read_bytes()[:-4])
    assert run("reconstruct", "--data", broken, "--out", tmp_path / "o", "--quiet") == cli.EXIT_FORMAT
    assert run("metrics", "--truth", broken / "truth.bin", "--recon", broken / "mask.bin") == cli.EXIT_FORMAT


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(small_ds, tmp_path):
    code = run("reconstruct", "--data", small_ds, "--out", tmp_path / "o", *TINY_FLAGS,
               "--learning-rate", "1e30")
    assert code == cli.EXIT_NUMERIC


def test_train_then_infer(tmp_path):
    sets = []
    for s in (1, 2):
        d = tmp_path / f"ds{s}"
        run("simulate", "--shape", "32x32", "--coils", "2", "--seed", s, "--out", d, "--quiet")
        sets.append(d)
    bank = tmp_path / "bank"
    assert run("train", "--data", *sets, "--k", "2", "--out", bank, *TINY_FLAGS) == 0
    man = json.loads((bank / "manifest.json").read_text())
    assert man["stored_iterations"] == [1, 2] and all(v > 0 for v in man["noise_var_schedule"])
    assert (bank / "xhat_1.bin").exists() and (bank / "metrics_0.json").exists()
    held_out = tmp_path / "ds9"
    run("simulate", "--shape", "32x32", "--coils", "2", "--seed", "9", "--out", held_out, "--quiet")
    assert run("infer", "--bank", bank, "--data", held_out, "--out", tmp_path / "inf", "--quiet") == 0
    report = json.loads((tmp_path / "inf" / "metrics.json").read_text())
    assert np.isfinite(report["rsnr_db"]) and np.isfinite(report["ssim"])
    # asking for more iterations than the bank holds is a configuration error
    assert run("infer", "--bank", bank, "--data", held_out, "--out", tmp_path / "inf2", "--iterations", "5",
               "--quiet") == cli.EXIT_CONFIG
    assert run("train", "--data", *sets, "--k", "3", "--out", bank, "--quiet") == cli.EXIT_ARGS


def test_metrics_identical_files(small_ds, capsys):
    assert run("metrics", "--truth", small_ds / "truth.bin", "--recon", small_ds / "truth.bin") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ssim"] == 1.0 and report["rsnr_db"] == "inf"


def test_convert_dump_and_import(tmp_path, capsys):
    arr = np.arange(6, dtype=np.float64).reshape(2, 3)
    np.save(tmp_path / "a.npy", arr)
    assert run("convert", tmp_path / "a.npy", "--out", tmp_path / "a.bin") == 0
    np.testing.assert_array_equal(read_array(tmp_path / "a.bin"), arr)
    assert run("convert", tmp_path / "a.bin") == 0
    assert capsys.readouterr().out.splitlines()[1] == "0.0,1.0,2.0"
    (tmp_path / "junk.bin").write_bytes(b"junk")
    assert run("convert", tmp_path / "junk.bin") == cli.EXIT_FORMAT


def test_threads_flag_and_env(small_ds, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert cli.default_threads() == 1
    assert run("metrics", "--truth", small_ds / "truth.bin", "--recon", small_ds / "truth.bin", "--threads", "2") == 0
    assert run("metrics", "--truth", small_ds / "truth.bin", "--recon", small_ds / "truth.bin",
               "--threads", "0") == cli.EXIT_ARGS
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    assert run("metrics", "--truth", small_ds / "truth.bin", "--recon", small_ds / "truth.bin") == cli.EXIT_ARGS


def test_dataset_noise_estimate_when_sigma2_missing(small_ds, tmp_path):
    ds = load_dataset(small_ds)
    ds2 = Dataset(ds.y, ds.mask, ds.maps, ds.image_shape, None, None)
    save_dataset(tmp_path / "nosig", ds2)
    loaded = load_dataset(tmp_path / "nosig")
    assert loaded.sigma2 is None and loaded.noise_variance() > 0


def test_dataset_manifest_validation(small_ds, tmp_path):
    man = json.loads((small_ds / "manifest.json").read_text())
    d = tmp_path / "m"
    d.mkdir()
    for f in small_ds.iterdir():
        (d / f.name).write_bytes(f.read_bytes())
    bad = dict(man, files={**man["files"], "extra": "y.bin"})
    (d / "manifest.json").write_text(json.dumps(bad))
    with pytest.raises(FormatError):
        load_dataset(d)
    bad = dict(man, format_version=9)
    (d / "manifest.json").write_text(json.dumps(bad))
    with pytest.raises(FormatError):
        load_dataset(d)
    (d / "manifest.json").write_text(json.dumps(man))
    write_array(d / "y.bin", np.zeros(5, complex))
    with pytest.raises(FormatError):
        load_dataset(d)


def test_help_lists_exit_codes(capsys):
    with pytest.raises(SystemExit):
        run("--help")
    out = capsys.readouterr().out
    assert "exit codes" in out and "divergence" in out
