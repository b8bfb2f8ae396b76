import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from pwlcodec.cli import main
from pwlcodec.container import read_raw, write_raw


@pytest.fixture
def traj(tmp_path):
    rng = np.random.default_rng(0)
    x = np.cumsum(rng.normal(0, 0.01, (600, 9)), axis=0).astype(np.float32)
    path = str(tmp_path / "in.raw")
    write_raw(path, x)
    return path, x


def test_compress_verify_decompress(traj, tmp_path, capsys):
    path, x = traj
    out = str(tmp_path / "c.hrtc")
    assert main(["compress", path, out, "--eps", "0.01"]) == 0
    assert "bits_per_sample=" in capsys.readouterr().err
    assert main(["verify", path, out]) == 0
    assert capsys.readouterr().out.startswith("PASS")
    back = str(tmp_path / "back.raw")
    assert main(["decompress", out, back]) == 0
    y = read_raw(back)
    assert y.shape == x.shape
    assert np.max(np.abs(y.astype(np.float64) - x)) <= 0.01 + 1e-6


def test_verify_fails_against_other_data(traj, tmp_path, capsys):
    path, x = traj
    out = str(tmp_path / "c.hrtc")
    main(["compress", path, out, "--eps", "0.01"])
    other = str(tmp_path / "other.raw")
    write_raw(other, x + 1)
    assert main(["verify", other, out]) == 1
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize("kernel", ["divfree", "reference"])
def test_kernel_flag(traj, tmp_path, kernel):
    path, _ = traj
    out = str(tmp_path / f"{kernel}.hrtc")
    assert main(["compress", path, out, "--eps", "0.02", "--lambda", "0.3", "--block", "100",
                 "--chunk", "16", "--kernel", kernel]) == 0
    assert main(["verify", path, out]) == 0


def test_stats(traj, tmp_path, capsys):
    path, _ = traj
    out = str(tmp_path / "c.hrtc")
    main(["compress", path, out, "--eps", "0.01", "--block", "256"])
    capsys.readouterr()
    assert main(["stats", out, "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["frames"] == 600 and info["nd"] == 9
    assert len(info["block_bytes"]) == 3
    assert sum(info["segment_length_histogram"].values()) == info["support_vectors"]
    assert info["total_bytes"] == (tmp_path / "c.hrtc").stat().st_size


def test_usage_errors(traj, tmp_path):
    path, _ = traj
    out = str(tmp_path / "c.hrtc")
    assert main(["compress", path, out, "--eps", "0"]) == 2
    assert main(["compress", path, out, "--eps", "0.1", "--lambda", "0"]) == 2
    assert main(["compress", path, out, "--eps", "0.1", "--block", "1"]) == 2
    assert main(["compress", path, out, "--eps", "0.1", "--bounds", "1", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["compress", path, out])
    assert exc.value.code == 2


def test_data_errors(traj, tmp_path):
    path, _ = traj
    empty = tmp_path / "empty.hrtc"
    empty.write_bytes(b"")
    assert main(["stats", str(empty)]) == 1
    junk = tmp_path / "junk.hrtc"
    junk.write_bytes(b"not a container at all")
    assert main(["decompress", str(junk), str(tmp_path / "o.raw")]) == 1
    nosidecar = tmp_path / "nosidecar.raw"
    nosidecar.write_bytes(b"\x00" * 16)
    assert main(["compress", str(nosidecar), str(tmp_path / "o.hrtc"), "--eps", "0.1"]) == 1
    # declared bounds narrower than the data
    assert main(["compress", path, str(tmp_path / "o.hrtc"), "--eps", "0.1",
                 "--bounds", "-0.01", "0.01"]) == 1


def test_jobs_manifest(traj, tmp_path, capsys):
    path, _ = traj
    out = str(tmp_path / "par.hrtc")
    assert main(["compress", path, out, "--eps", "0.01", "--jobs", "2"]) == 0
    manifest = json.load(open(out))
    assert [p["dims"] for p in manifest["parts"]] == [[0, 4], [4, 9]]
    assert main(["verify", path, out]) == 0


def test_stdin_stdout_pipeline(traj, tmp_path):
    path, x = traj
    raw = x.astype("<f4").tobytes()
    cmd = [sys.executable, "-m", "pwlcodec.cli"]
    comp = subprocess.run(cmd + ["compress", "-", "-", "--eps", "0.01", "--nd", "9",
                                 "--bounds", "-5", "5"], input=raw, capture_output=True, check=True)
    dec = subprocess.run(cmd + ["decompress", "-", "-"], input=comp.stdout, capture_output=True,
                         check=True)
    y = np.frombuffer(dec.stdout, dtype="<f4").reshape(-1, 9)
    assert y.shape == x.shape
    assert np.max(np.abs(y.astype(np.float64) - x)) <= 0.01 + 1e-6


def test_stdin_requires_bounds():
    assert main(["compress", "-", "out", "--eps", "0.1", "--nd", "3"]) == 2


def test_gen_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("HRTC_SEED", "5")
    a, b = str(tmp_path / "a.raw"), str(tmp_path / "b.raw")
    args = ["--particles", "8", "--steps", "50", "--equil", "10"]
    assert main(["gen", a] + args) == 0
    assert main(["gen", b] + args) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    assert read_raw(a).shape == (50, 24)
    c = str(tmp_path / "c.raw")
    main(["gen", c, "--seed", "6"] + args)
    assert open(a, "rb").read() != open(c, "rb").read()


def test_bench_csv(traj, tmp_path, capsys):
    path, _ = traj
    assert main(["bench", "--sweep", "eps", "--input", path, "--values", "1e-3,1e-2,1e-1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0])[:5] == ["parameter", "compressed_bytes", "bits_per_sample", "max_error",
                                 "wall_time"]
    bits = [float(r["bits_per_sample"]) for r in rows]
    assert bits == sorted(bits, reverse=True)
    assert all(float(r["max_error"]) <= float(r["parameter"]) * (1 + 1e-9) for r in rows)


@pytest.mark.parametrize("sweep, values", [("lambda", "0.1,0.5,1"), ("subsample", "1,4")])
def test_bench_other_sweeps(traj, tmp_path, sweep, values):
    path, _ = traj
    out = str(tmp_path / "b.csv")
    assert main(["bench", "--sweep", sweep, "--input", path, "--values", values, "--output", out]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == len(values.split(","))
