"""End-to-end command tests driving the argparse entry point in process."""

import json

import pytest

from nlscma.cli import main
from nlscma.codebook import load_codebook, save_codebook
from nlscma.simulator import CSV_COLUMNS

from conftest import make_nonlinear


@pytest.fixture
def cb_file(tmp_path):
    cb = make_nonlinear(seed=7, identity_p=True)
    path = tmp_path / "cb.json"
    save_codebook(cb, path)
    return str(path)


SIM_FAST = [
    "--detector",
    "map",
    "--snr-start",
    "8",
    "--max-frames",
    "1000",
    "--min-errors",
    "10",
]


class TestParsing:
    def test_version_banner(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "nlscma 0.1.0" in out
        assert "codebook schema 1" in out
        assert "results schema 1" in out

    def test_missing_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["lattice", "--bogus"])
        assert exc.value.code == 2

    def test_bad_choice_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["lattice", "--lattice", "leech"])
        assert exc.value.code == 2


class TestLattice:
    def test_stdout_json(self, capsys):
        assert main(["lattice", "--lattice", "gaussian", "--window", "rectangular"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["points"]) == 64
        assert doc["med"] == pytest.approx(0.378, abs=0.005)
        assert doc["mean_energy"] == pytest.approx(1.5, rel=1e-9)

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "lat.json"
        assert main(["lattice", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["points"]) == 64
        assert capsys.readouterr().out == ""


class TestDesign:
    def test_algorithm1_deterministic_files(self, tmp_path, capsys):
        args = [
            "design",
            "--algorithm",
            "1",
            "--iters",
            "30",
            "--seed",
            "3",
            "--lattice",
            "gaussian",
            "--window",
            "rectangular",
        ]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        cb = load_codebook(a)
        assert cb.graph.J == 6
        capsys.readouterr()

    def test_design_then_analyze_round_trip(self, tmp_path, capsys):
        out = tmp_path / "cb.json"
        assert (
            main(
                [
                    "design",
                    "--algorithm",
                    "1",
                    "--iters",
                    "20",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        capsys.readouterr()
        assert main(["analyze", "--codebook", str(out)]) == 0
        head, _, table = capsys.readouterr().out.partition("\n\n")
        kpis = json.loads(head)
        assert kpis["med_phi"] > 0
        assert kpis["full_diversity"] is True
        assert "med_phi" in table


class TestAnalyze:
    def test_missing_file_exits_1(self, capsys):
        assert main(["analyze", "--codebook", "nope.json"]) == 1
        assert "file not found" in capsys.readouterr().err

    def test_report_fields(self, cb_file, capsys):
        assert main(["analyze", "--codebook", cb_file]) == 0
        head, _, table = capsys.readouterr().out.partition("\n\n")
        kpis = json.loads(head)
        for key in (
            "med_phi",
            "med_per_rn",
            "mpd",
            "med_suep",
            "med_muep",
            "layer_meds",
            "full_diversity",
            "shape_gain",
        ):
            assert key in kpis
        assert len(kpis["med_per_rn"]) == 4
        assert "metric" in table


class TestSimulate:
    def test_csv_to_stdout(self, cb_file, capsys):
        assert main(["simulate", "--codebook", cb_file] + SIM_FAST) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 2
        assert lines[1].split(",")[1] == "ebn0"

    def test_missing_codebook_exits_1(self, capsys):
        assert main(["simulate", "--codebook", "gone.json"] + SIM_FAST) == 1
        assert "file not found" in capsys.readouterr().err

    def test_grid_flags(self, cb_file, capsys):
        args = ["simulate", "--codebook", cb_file] + SIM_FAST
        args += ["--snr-stop", "10", "--snr-step", "2"]
        assert main(args) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert [l.split(",")[0] for l in lines[1:]] == ["8.0", "10.0"]

    def test_bad_grid_exits_1(self, cb_file, capsys):
        args = ["simulate", "--codebook", cb_file] + SIM_FAST
        args += ["--snr-stop", "4"]
        assert main(args) == 1
        assert "snr stop" in capsys.readouterr().err

    def test_rerun_and_worker_files_identical(self, cb_file, tmp_path, capsys):
        base = ["simulate", "--codebook", cb_file] + SIM_FAST
        outs = [tmp_path / f"r{i}.json" for i in range(3)]
        assert main(base + ["--out", str(outs[0])]) == 0
        assert main(base + ["--out", str(outs[1])]) == 0
        assert main(base + ["--workers", "3", "--out", str(outs[2])]) == 0
        blobs = [o.read_bytes() for o in outs]
        assert blobs[0] == blobs[1] == blobs[2]
        assert json.loads(blobs[0])["points"][0]["frames"] == 1000
        capsys.readouterr()

    def test_noiseless_zero_errors(self, cb_file, capsys):
        args = ["simulate", "--codebook", cb_file, "--noiseless"] + SIM_FAST
        assert main(args) == 0
        row = capsys.readouterr().out.strip().split("\n")[1].split(",")
        assert row[3] == "0" and row[5] == "0.0"


class TestCompare:
    def test_merged_table(self, tmp_path, capsys):
        paths = []
        for seed in (7, 8):
            p = tmp_path / f"cb{seed}.json"
            save_codebook(make_nonlinear(seed=seed, identity_p=True), p)
            paths.append(str(p))
        args = ["compare", "--codebook", paths[0], "--codebook", paths[1]] + SIM_FAST
        assert main(args) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "codebook," + ",".join(CSV_COLUMNS)
        assert len(lines) == 3
        assert lines[1].startswith("cb7,")
        assert lines[2].startswith("cb8,")

    def test_requires_at_least_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["compare"] + SIM_FAST)
        assert exc.value.code == 2


class TestExport:
    def test_constellation_csv(self, cb_file, capsys):
        assert main(["export", "--codebook", cb_file]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "index,re,im"
        assert len(lines) == 65

    def test_table_json(self, cb_file, capsys):
        assert main(["export", "--codebook", cb_file, "--what", "table", "--format", "json"]) == 0
        rows = json.loads(capsys.readouterr().out)
        assert len(rows) == 4096
        assert rows[1]["symbol_u0"] == 1
        assert "re_k3" in rows[0]
