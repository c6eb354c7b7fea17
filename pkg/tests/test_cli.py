import struct

import pytest

from bladeas.cli import load_config, run
from bladeas.errors import BladeASError
from bladeas.evaluation import ingest_results, read_designs

N = 240  # small campaign keeps the CLI tests quick


def files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def campaign(tmp_path_factory):
    d = tmp_path_factory.mktemp("campaign")
    assert run(["sample", "-n", str(N), "-m", "20", "--seed", "5", "-o", str(d / "designs.csv")]) == 0
    assert run(["evaluate", "--designs", str(d / "designs.csv"), "-o", str(d / "dataset.csv")]) == 0
    return d


def test_sample_is_byte_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run(["sample", "-n", "1100", "-m", "20", "--seed", "42",
                    "-o", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.meta").read_bytes() == (tmp_path / "b.csv.meta").read_bytes()
    mu, meta = read_designs(tmp_path / "a.csv")
    assert mu.shape == (1100, 20)
    assert meta["seed"] == "42" and "baseline_file_sha256" in meta


def test_usage_errors(capsys):
    assert run(["analyze", "--badflag"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["frobnicate"]) == 2
    assert run([]) == 2


def test_domain_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("mu_1,mu_2,kt\n0,0,1\n")
    assert run(["ingest", "--input", str(bad), "-o", str(tmp_path / "out.csv")]) == 1
    err = capsys.readouterr().err
    assert "SchemaError" in err and "missing output column" in err


def test_evaluate_jobs_do_not_change_output(campaign, tmp_path):
    out = tmp_path / "par.csv"
    assert run(["evaluate", "--designs", str(campaign / "designs.csv"), "--jobs", "2",
                "-o", str(out)]) == 0
    assert out.read_bytes() == (campaign / "dataset.csv").read_bytes()
    ds = ingest_results(out)
    assert ds.X.shape == (N, 20) and ds.metadata["source"] == "surrogate"


def test_ingest_round_trip(campaign, tmp_path):
    out = tmp_path / "ing.csv"
    assert run(["ingest", "--input", str(campaign / "dataset.csv"), "-m", "20", "-o", str(out)]) == 0
    assert ingest_results(out).Y.tobytes() == ingest_results(campaign / "dataset.csv").Y.tobytes()


def test_build(campaign, tmp_path):
    assert run(["build", "--designs", str(campaign / "designs.csv"), "--rows", "0,3",
                "--n-radial", "6", "--section-points", "20", "-o", str(tmp_path)]) == 0
    raw = (tmp_path / "design_0003.stl").read_bytes()
    # 5 blades, 6 radial rows, 39 chordwise points
    assert struct.unpack("<I", raw[80:84])[0] == 5 * 2 * 5 * 38
    assert run(["build", "--designs", str(campaign / "designs.csv"), "--rows", "1",
                "--format", "grid-csv", "--single-blade", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "design_0001.csv").exists()


def test_output_dir_from_environment(campaign, tmp_path, monkeypatch):
    monkeypatch.setenv("BLADEAS_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(["analyze", "--dataset", str(campaign / "dataset.csv")]) == 0
    assert (tmp_path / "env" / "subspace_shared.csv").exists()


def write_config(path, **extra):
    lines = ["# demo campaign", "seed = 5", f"n_samples = {N}", "m = 20",
             "advance_ratio = 1.019", "rps = 20"]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_pipeline_equals_composition(tmp_path):
    cfg = write_config(tmp_path / "demo.cfg")
    assert run(["pipeline", "--config", str(cfg), "-o", str(tmp_path / "pipe")]) == 0

    d = tmp_path / "steps"
    steps = [
        ["fit-baseline", "-o", str(d / "baseline")],
        ["sample", "-n", str(N), "-m", "20", "--seed", "5", "-o", str(d / "designs.csv")],
        ["evaluate", "--designs", str(d / "designs.csv"), "-o", str(d / "dataset.csv")],
        ["analyze", "--dataset", str(d / "dataset.csv"), "-o", str(d / "analysis")],
        ["optimize", "--dataset", str(d / "dataset.csv"),
         "--subspace", str(d / "analysis" / "subspace_shared.csv"),
         "-o", str(d / "optimization")],
    ]
    d.mkdir()
    for argv in steps:
        assert run(argv) == 0, argv
    pipe = files(tmp_path / "pipe")
    assert pipe == files(d)
    for name in ("designs.csv", "dataset.csv", "analysis/subspace_shared.csv",
                 "analysis/eigenvalues.csv", "analysis/sensitivity.txt",
                 "optimization/report.txt", "optimization/report.csv",
                 "optimization/rs_pmax.csv", "optimization/optimal_pitch.csv",
                 "optimization/optimal_camber.csv", "baseline/curves/pitch.txt"):
        assert any(str(p) == name for p in pipe), name


def test_config_errors(tmp_path):
    with pytest.raises(BladeASError, match="not found"):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(BladeASError, match="unknown key"):
        load_config(write_config(tmp_path / "a.cfg", colour="red"))
    with pytest.raises(BladeASError, match="bad value"):
        load_config(write_config(tmp_path / "b.cfg", jobs="many"))
    with pytest.raises(BladeASError, match="baseline file not found"):
        load_config(write_config(tmp_path / "c.cfg", baseline=str(tmp_path / "nope.txt")))
    assert run(["pipeline", "--config", str(tmp_path / "a.cfg")]) == 1


def test_config_values(tmp_path):
    cfg = load_config(write_config(tmp_path / "d.cfg", degree="auto", active_dim=1,
                                   build_rows="0,2"))
    assert cfg["seed"] == 5 and cfg["degree"] == "auto" and cfg["active_dim"] == 1
    assert cfg["build_rows"] == [0, 2] and cfg["advance_ratio"] == 1.019
