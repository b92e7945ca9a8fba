"""Command-line interface: exit codes, JSON payloads, file outputs."""

import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from dblsh import Dataset, load_fvecs, write_fvecs
from dblsh.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def separated_file(tmp_path):
    coords = np.zeros((40, 4))
    coords[:, 0] = 10.0 * np.arange(40)
    path = tmp_path / "sep.fvecs"
    write_fvecs(Dataset(4, coords), path)
    return path


class TestGen:
    def test_writes_expected_record_count(self, capsys, tmp_path):
        out = tmp_path / "data.fvecs"
        code, stdout, _ = run_cli(
            capsys, "gen", "--n", "1000", "--d", "32",
            "--dist", "clusters:10,0.05", "--seed", "1", "-o", str(out),
        )
        assert code == 0
        ds = load_fvecs(out)
        assert ds.n == 1000 and ds.dim == 32
        assert "1000" in stdout

    def test_byte_identical_reruns(self, capsys, tmp_path):
        a, b = tmp_path / "a.fvecs", tmp_path / "b.fvecs"
        args = ["gen", "--n", "50", "--d", "8", "--seed", "3"]
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_zero_n_exits_2(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "gen", "--n", "0", "--d", "4", "-o", str(tmp_path / "x.fvecs")
        )
        assert code == 2
        assert "--n" in err


class TestParams:
    def test_derivation_json(self, capsys):
        code, stdout, _ = run_cli(
            capsys, "params", "--n", "10000", "--t", "10", "--c", "2", "--w0", "1"
        )
        assert code == 0
        payload = json.loads(stdout)
        assert payload["K"] == 5
        assert payload["L"] == 60
        assert payload["rho_star"] == pytest.approx(0.59164, abs=1e-4)
        assert payload["bound"]["rho_star_le_bound"] is True

    def test_gamma_alpha(self, capsys):
        code, stdout, _ = run_cli(capsys, "params", "--gamma", "2", "--c", "2")
        assert code == 0
        payload = json.loads(stdout)
        assert payload["alpha"] == pytest.approx(4.746, abs=1e-3)
        assert payload["w0"] == pytest.approx(16.0)

    def test_c_must_exceed_one(self, capsys):
        code, _, err = run_cli(capsys, "params", "--c", "1", "--w0", "4")
        assert code == 2
        assert "c" in err


class TestBuildAndQuery:
    def _build(self, capsys, data, index, tmp_path, mode_args):
        return run_cli(
            capsys, "build", "--data", str(data), "-o", str(index), *mode_args
        )

    def test_round_trip_query(self, capsys, tmp_path, separated_file):
        index = tmp_path / "sep.idx"
        code, stdout, _ = self._build(
            capsys, separated_file, index, tmp_path,
            ["--mode", "practical", "--K", "3", "--L", "4", "--t", "20",
             "--c", "1.5", "--w0", "2.0", "--seed", "5"],
        )
        assert code == 0
        assert "K=3" in stdout and "L=4" in stdout

        ds = load_fvecs(separated_file)
        vec = ",".join(str(x) for x in ds.point(7))
        code, stdout, _ = run_cli(
            capsys, "query", "--index", str(index), "--data", str(separated_file),
            "--vec", vec, "--k", "1",
        )
        assert code == 0
        payload = json.loads(stdout)
        first = payload["results"][0]["neighbors"][0]
        assert first == [7, 0.0]

    def test_theoretical_mode_accepted(self, capsys, tmp_path, separated_file):
        index = tmp_path / "t.idx"
        code, stdout, _ = self._build(
            capsys, separated_file, index, tmp_path,
            ["--mode", "theoretical", "--t", "4", "--c", "2", "--w0", "4"],
        )
        assert code == 0
        assert index.exists()

    def test_rebuild_same_seed_same_hash(self, capsys, tmp_path, separated_file):
        args = ["--mode", "practical", "--K", "2", "--L", "2", "--t", "5",
                "--c", "2", "--w0", "4", "--seed", "9"]
        i1, i2 = tmp_path / "h1.idx", tmp_path / "h2.idx"
        assert self._build(capsys, separated_file, i1, tmp_path, args)[0] == 0
        assert self._build(capsys, separated_file, i2, tmp_path, args)[0] == 0
        h1 = hashlib.sha256(i1.read_bytes()).hexdigest()
        h2 = hashlib.sha256(i2.read_bytes()).hexdigest()
        assert h1 == h2

    def test_k_neighbors_emitted(self, capsys, tmp_path, separated_file):
        index = tmp_path / "k.idx"
        self._build(
            capsys, separated_file, index, tmp_path,
            ["--K", "2", "--L", "2", "--t", "30", "--c", "2", "--w0", "4"],
        )
        ds = load_fvecs(separated_file)
        vec = ",".join(str(x) for x in ds.point(0))
        code, stdout, _ = run_cli(
            capsys, "query", "--index", str(index), "--data", str(separated_file),
            "--vec", vec, "--k", "20",
        )
        assert code == 0
        payload = json.loads(stdout)
        assert len(payload["results"][0]["neighbors"]) == 20

    def test_explain_adds_round_detail(self, capsys, tmp_path, separated_file):
        index = tmp_path / "e.idx"
        self._build(
            capsys, separated_file, index, tmp_path,
            ["--K", "2", "--L", "3", "--t", "10", "--c", "2", "--w0", "4"],
        )
        ds = load_fvecs(separated_file)
        vec = ",".join(str(x) for x in ds.point(3))
        code, stdout, _ = run_cli(
            capsys, "query", "--index", str(index), "--data", str(separated_file),
            "--vec", vec, "--explain",
        )
        payload = json.loads(stdout)
        detail = payload["results"][0]["explain"]
        rounds = [e for e in detail if "r" in e]
        assert rounds and all("w" in e and "per_table_new" in e for e in rounds)

    def test_dimension_mismatch_exits_2(self, capsys, tmp_path, separated_file):
        index = tmp_path / "d.idx"
        self._build(
            capsys, separated_file, index, tmp_path,
            ["--K", "2", "--L", "2", "--t", "5", "--c", "2", "--w0", "4"],
        )
        code, _, err = run_cli(
            capsys, "query", "--index", str(index), "--data", str(separated_file),
            "--vec", "1.0,2.0",
        )
        assert code == 2

    def test_missing_data_file_exits_1(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "build", "--data", str(tmp_path / "nope.fvecs"),
            "-o", str(tmp_path / "x.idx"), "--K", "2", "--L", "2", "--t", "5",
        )
        assert code == 1


@pytest.fixture()
def bench_world(tmp_path, capsys):
    data = tmp_path / "data.fvecs"
    queries = tmp_path / "queries.fvecs"
    main(["gen", "--n", "600", "--d", "8", "--dist", "clusters:5,0.05",
          "--seed", "1", "-o", str(data)])
    main(["gen", "--n", "6", "--d", "8", "--dist", "clusters:5,0.05",
          "--seed", "2", "-o", str(queries)])
    capsys.readouterr()
    return data, queries


class TestBench:
    def test_grid_report_and_figures(self, capsys, tmp_path, bench_world):
        data, queries = bench_world
        out_dir = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, "bench", "--data", str(data), "--queries", str(queries),
            "--out-dir", str(out_dir), "--algs", "db-lsh,fb-lsh",
            "--k", "5", "--cs", "1.5", "--seeds", "0",
        )
        assert code == 0
        report = (out_dir / "report.csv").read_text()
        assert "db-lsh" in report and "fb-lsh" in report
        assert (out_dir / "report.json").exists()
        assert (out_dir / "curves.csv").exists()
        assert (out_dir / "recall_vs_time.png").exists()
        assert (out_dir / "ratio_vs_time.png").exists()

    def test_no_figures_flag(self, capsys, tmp_path, bench_world):
        data, queries = bench_world
        out_dir = tmp_path / "plain"
        code, _, _ = run_cli(
            capsys, "bench", "--data", str(data), "--queries", str(queries),
            "--out-dir", str(out_dir), "--algs", "oracle", "--k", "5",
            "--no-figures",
        )
        assert code == 0
        assert not (out_dir / "recall_vs_time.png").exists()

    def test_oracle_row_perfect(self, capsys, tmp_path, bench_world):
        data, queries = bench_world
        out_dir = tmp_path / "oracle"
        run_cli(
            capsys, "bench", "--data", str(data), "--queries", str(queries),
            "--out-dir", str(out_dir), "--algs", "oracle", "--k", "5",
            "--no-figures",
        )
        rows = json.loads((out_dir / "report.json").read_text())
        assert rows[0]["recall"] == 1.0
        assert rows[0]["overall_ratio"] == 1.0

    def test_config_file_with_flag_override(self, capsys, tmp_path, bench_world):
        data, queries = bench_world
        conf = tmp_path / "bench.conf"
        out_dir = tmp_path / "conf-out"
        conf.write_text(
            "\n".join(
                [
                    "# small smoke grid",
                    f"data = {data}",
                    f"queries = {queries}",
                    f"out_dir = {out_dir}",
                    "algs = db-lsh",
                    "k = 5",
                    "K = 4",
                    "L = 3",
                    "t = 20",
                    "cs = 1.5,2.0",
                    "seeds = 0",
                    "figures = false",
                ]
            )
        )
        code, _, _ = run_cli(capsys, "bench", "--config", str(conf), "--k", "3")
        assert code == 0
        rows = json.loads((out_dir / "report.json").read_text())
        assert all(r["k"] == 3 for r in rows)  # flag overrode the file
        assert {r["c"] for r in rows} == {1.5, 2.0}

    def test_theoretical_grid(self, capsys, tmp_path, bench_world):
        data, queries = bench_world
        conf = tmp_path / "theory.conf"
        out_dir = tmp_path / "theory-out"
        conf.write_text(
            "\n".join(
                [
                    f"data = {data}",
                    f"queries = {queries}",
                    f"out_dir = {out_dir}",
                    "algs = db-lsh",
                    "mode = theoretical",
                    "t = 10",
                    "w0 = 1",
                    "cs = 2.0",
                    "k = 5",
                    "figures = false",
                ]
            )
        )
        code, _, _ = run_cli(capsys, "bench", "--config", str(conf))
        assert code == 0
        rows = json.loads((out_dir / "report.json").read_text())
        assert rows[0]["mode"] == "theoretical"
        assert not rows[0]["error"]

    def test_identical_quality_on_rerun(self, capsys, tmp_path, bench_world):
        data, queries = bench_world
        outs = []
        for name in ("r1", "r2"):
            out_dir = tmp_path / name
            run_cli(
                capsys, "bench", "--data", str(data), "--queries", str(queries),
                "--out-dir", str(out_dir), "--algs", "db-lsh", "--k", "5",
                "--seeds", "0,1", "--no-figures",
            )
            rows = json.loads((out_dir / "report.json").read_text())
            outs.append([(r["recall"], r["overall_ratio"], r["mean_candidates"]) for r in rows])
        assert outs[0] == outs[1]


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "dblsh.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "dblsh" in proc.stdout
