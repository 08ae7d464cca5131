import os

import numpy as np
import pytest

from conformal_spc import calibration as cal
from conformal_spc import charts, cli, persist, render, scores, simulate
from conformal_spc.datafile import read_table, write_individuals, write_labeled, write_vectors
from conformal_spc.core import LabeledPoint


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def fields(out):
    return dict(line.split("\t", 1) for line in out.splitlines() if "\t" in line)


@pytest.fixture
def individuals(tmp_path):
    path = tmp_path / "calib.csv"
    write_individuals(path, np.arange(1, 20, dtype=float))
    return path


def test_calibrate_nineteen_values(capsys, tmp_path, individuals):
    out_path = tmp_path / "m.json"
    code, out, err = run(capsys, "calibrate", individuals, "--alpha", "0.05", "--out", out_path)
    assert code == 0
    f = fields(out)
    assert f["n"] == "19" and f["k"] == "19"
    # median 10, largest |x - 10| is 9
    assert float(f["q"]) == 9.0
    assert err == ""
    assert persist.load(out_path).calibration.q == 9.0


def test_calibrate_clamp_warning(capsys, tmp_path):
    path = tmp_path / "c.csv"
    write_individuals(path, np.random.default_rng(0).normal(size=100))
    code, out, err = run(capsys, "calibrate", path, "--alpha", "0.0027", "--out", tmp_path / "m.json")
    assert code == 0
    assert "370" in err and "warning" in err
    assert "clamped" in fields(out)


def test_calibrate_missing_file(capsys, tmp_path):
    missing = tmp_path / "nope.csv"
    code, _, err = run(capsys, "calibrate", missing, "--out", tmp_path / "m.json")
    assert code == 2
    assert str(missing) in err


def test_calibrate_bad_row_names_line(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("value\n1.0\n2.0\nabc\n")
    code, _, err = run(capsys, "calibrate", path, "--out", tmp_path / "m.json")
    assert code == 2
    assert "line 4" in err


def test_invalid_alpha_rejected(capsys, individuals, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["calibrate", str(individuals), "--alpha", "1.5", "--out", str(tmp_path / "m.json")])
    assert exc.value.code == 2


def _calibrated(capsys, tmp_path, individuals, alpha="0.05"):
    arch = tmp_path / "m.json"
    assert run(capsys, "calibrate", individuals, "--alpha", alpha, "--out", arch)[0] == 0
    return arch


def test_monitor_exit_codes(capsys, tmp_path, individuals):
    arch = _calibrated(capsys, tmp_path, individuals)
    quiet = tmp_path / "quiet.csv"
    write_individuals(quiet, [10.0, 12.0, 5.0, 19.0])
    code, out, _ = run(capsys, "monitor", arch, quiet)
    assert code == 0 and out == ""

    loud = tmp_path / "loud.csv"
    write_individuals(loud, [10.0, 25.0, 11.0])
    code, out, _ = run(capsys, "monitor", arch, loud)
    assert code == 1
    lines = out.splitlines()
    assert len(lines) == 1
    tag, index, score, pv = lines[0].split("\t")
    assert (tag, index, float(score)) == ("alarm", "1", 15.0)
    assert float(pv) == pytest.approx(1 / 20)

    broken = tmp_path / "broken.json"
    broken.write_text(arch.read_text()[:-40])
    code, _, err = run(capsys, "monitor", broken, loud)
    assert code == 2 and "corrupt archive" in err


def test_monitor_kind_mismatch(capsys, tmp_path, individuals):
    arch = _calibrated(capsys, tmp_path, individuals)
    vec = tmp_path / "v.csv"
    write_vectors(vec, np.zeros((3, 2)))
    assert run(capsys, "monitor", arch, vec)[0] == 2


def test_monitor_matches_library(capsys, tmp_path):
    rng = np.random.default_rng(1)
    calib_path, stream_path = tmp_path / "c.csv", tmp_path / "s.csv"
    write_individuals(calib_path, rng.exponential(size=400))
    write_individuals(stream_path, rng.exponential(size=300) * 1.5)
    arch = tmp_path / "m.json"
    run(capsys, "calibrate", calib_path, "--alpha", "0.01", "--out", arch)
    series_path = tmp_path / "series.json"
    code, out, _ = run(capsys, "monitor", arch, stream_path, "--out", series_path)

    calib = read_table(calib_path).items
    stream = read_table(stream_path).items
    scorer = scores.fit_individual(calib)
    model = cal.calibrate(scorer, calib, 0.01)
    direct = charts.conformal_score_chart(model, scorer, stream)
    assert persist.load_series(series_path) == direct
    s = scorer.score_many(stream)
    pv = cal.p_values(model, s)
    expected = [f"alarm\t{direct.points[i].index}\t{float(s[i])!r}\t{float(pv[i])!r}" for i in direct.flagged_indices]
    assert out.splitlines() == expected
    assert code == (1 if expected else 0)


def test_calibrate_vectors_matches_library(capsys, tmp_path):
    rng = np.random.default_rng(2)
    V = rng.normal(size=(400, 3))
    path = tmp_path / "v.csv"
    write_vectors(path, V)
    arch = tmp_path / "m.json"
    code, out, _ = run(capsys, "calibrate", path, "--detector", "mahalanobis", "--alpha", "0.05",
                       "--split", "0.5", "--seed", "4", "--out", arch)
    assert code == 0
    items = read_table(path).items
    train, calib = cal.split(items, cal.SplitSpec(0.5, 4))
    from conformal_spc.multivariate import calibrate_detector, train_mahalanobis
    det = train_mahalanobis(train)
    model = calibrate_detector(det, calib, 0.05)
    assert persist.load(arch).calibration == model
    assert fields(out)["q"] == repr(model.q)


def test_detector_flag_only_for_vectors(capsys, tmp_path, individuals):
    code, _, err = run(capsys, "calibrate", individuals, "--detector", "knn", "--out", tmp_path / "m.json")
    assert code == 2


def _labeled(tmp_path, name, pts):
    path = tmp_path / name
    write_labeled(path, pts)
    return path


def test_interval_chart_requires_residual_archive(capsys, tmp_path, individuals):
    arch = _calibrated(capsys, tmp_path, individuals)
    stream = _labeled(tmp_path, "s.csv", [LabeledPoint((0.0,), 1.0)])
    code, _, err = run(capsys, "chart", "--kind", "interval", "--archive", arch, "--stream", stream,
                       "--out", tmp_path / "c.svg")
    assert code == 2
    assert "chart kind requires model-residual archive" in err


def test_interval_chart(capsys, tmp_path):
    spec = simulate.SimulationSpec(simulate.Normal(), 300, 50, None, seed=3)
    train, calib, stream = simulate.generate_labeled(spec, 300)
    data = _labeled(tmp_path, "d.csv", train + calib)
    arch = tmp_path / "m.json"
    run(capsys, "calibrate", data, "--alpha", "0.1", "--out", arch)
    svg = tmp_path / "c.svg"
    code, out, _ = run(capsys, "chart", "--kind", "interval", "--archive", arch,
                       "--stream", _labeled(tmp_path, "s.csv", stream), "--out", svg)
    assert code == 0
    assert svg.read_text().count('class="band"') == 50


def test_spike_chart(capsys, tmp_path):
    spec = simulate.PRESET_SPIKE
    train, calib, stream = simulate.generate_labeled(spec, 1000)
    data = _labeled(tmp_path, "d.csv", train + calib)
    arch = tmp_path / "m.json"
    code, _, _ = run(capsys, "calibrate", data, "--scorer", "normalized", "--k", "20", "--alpha", "0.05",
                     "--split", str(len(train) / (len(train) + len(calib))), "--out", arch)
    assert code == 0
    svg = tmp_path / "spike.svg"
    code, out, _ = run(capsys, "chart", "--kind", "spike", "--archive", arch,
                       "--stream", _labeled(tmp_path, "s.csv", stream), "--width-alpha", "0.05", "--out", svg)
    assert code == 0
    text = svg.read_text()
    assert text.count('class="flag spike"') > 0
    assert text.count('class="flag spike"') + text.count('class="flag limit"') == int(out.split("flagged=")[1])


def test_p_value_chart_has_alpha_line(capsys, tmp_path, individuals):
    arch = _calibrated(capsys, tmp_path, individuals)
    stream = tmp_path / "s.csv"
    write_individuals(stream, [10.0, 30.0, 12.0])
    svg = tmp_path / "p.svg"
    code, _, _ = run(capsys, "chart", "--kind", "p_value", "--archive", arch, "--stream", stream, "--out", svg)
    assert code == 0
    assert svg.read_text().count('class="alpha-line"') == 1


def test_chart_from_series_matches_render(capsys, tmp_path, individuals):
    arch = _calibrated(capsys, tmp_path, individuals)
    stream = tmp_path / "s.csv"
    write_individuals(stream, [10.0, 30.0, 12.0])
    series_path = tmp_path / "series.json"
    run(capsys, "monitor", arch, stream, "--out", series_path)
    svg = tmp_path / "c.svg"
    assert run(capsys, "chart", "--series", series_path, "--out", svg)[0] == 0
    assert svg.read_text() == render.render_chart(persist.load_series(series_path))


def test_shewhart_chart(capsys, tmp_path, individuals):
    stream = tmp_path / "s.csv"
    write_individuals(stream, [10.0, 40.0])
    svg = tmp_path / "s.svg"
    code, out, _ = run(capsys, "chart", "--kind", "shewhart", "--calibration", individuals,
                       "--stream", stream, "--out", svg)
    assert code == 0 and "flagged=1" in out


def _simulate(capsys, out_dir, *extra):
    return run(capsys, "simulate", "--generator", "exponential", "--n-calibration", "999",
               "--n-stream", "100", "--reps", "3", "--seed", "11", "--out", out_dir, *extra)


def test_simulate_outputs_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _simulate(capsys, a)[0] == 0
    assert _simulate(capsys, b)[0] == 0
    names = sorted(os.listdir(a))
    assert names == ["conformal.svg", "report.tsv", "shewhart.svg", "summary.tsv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_matches_library(capsys, tmp_path):
    out = tmp_path / "r"
    _simulate(capsys, out, "--shift", "none")
    spec = simulate.SimulationSpec(simulate.Exponential(1.0), 999, 100, None, 11)
    report = simulate.compare_charts(spec, 0.0027, 3)
    assert (out / "report.tsv").read_text() == render.render_report(report)
    shew, conf = simulate.run_once(spec, 0.0027, 0)
    assert (out / "conformal.svg").read_text() == render.render_chart(conf)


def test_module_entry_point_help():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "conformal_spc", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("calibrate", "monitor", "chart", "simulate"):
        assert cmd in res.stdout
