import csv
import io
import json
import math

import numpy as np
import pytest
from scipy.integrate import simpson

from hyperfrac import cli
from hyperfrac.geometry import HyperbolicSpace, volume_density
from hyperfrac.inequalities import kernel_tail
from hyperfrac.kernels import log_weighted_subordinated_h3


@pytest.fixture(autouse=True)
def cache_dir(tmp_path, monkeypatch):
    path = tmp_path / "cache"
    monkeypatch.setenv(cli.CACHE_ENV, str(path))
    return path


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


KERNEL_ARGS = ("kernel", "--family", "poisson", "--n", "3", "--sigma", "0.5", "--y", "1.0", "--r", "0:5:0.01")


def test_kernel_table_and_mass(capsys):
    code, out, _ = run(capsys, *KERNEL_ARGS)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 501
    r = np.array([float(x["r"]) for x in rows])
    v = np.array([float(x["value"]) for x in rows])
    inside = simpson(v * volume_density(HyperbolicSpace(3), r), x=r)
    # the weighted kernel decays like r^{-3/2}; the part beyond r = 5 is far from negligible
    const = -0.5 * math.log(4.0) - math.lgamma(0.5)
    tail = kernel_tail(HyperbolicSpace(3), lambda d: const + log_weighted_subordinated_h3(d, 1.0, -0.5), 5.0)
    assert 0.5 < inside < 0.9
    assert inside + tail == pytest.approx(1.0, abs=1e-6)


def test_kernel_cache_is_byte_identical(capsys, cache_dir):
    _, first, _ = run(capsys, *KERNEL_ARGS)
    assert len(list(cache_dir.glob("*.json"))) == 1
    _, second, _ = run(capsys, *KERNEL_ARGS)
    assert first == second


def test_kernel_cache_entry_reused(capsys, cache_dir):
    run(capsys, *KERNEL_ARGS)
    entry = next(cache_dir.glob("*.json"))
    data = json.loads(entry.read_text())
    data["rows"][0][4] = 123.0
    entry.write_text(json.dumps(data))
    _, out, _ = run(capsys, *KERNEL_ARGS)
    assert "123.0" in out.splitlines()[1]


def test_kernel_rejects_sigma(capsys):
    code, _, err = run(capsys, "kernel", "--sigma", "1.5")
    assert code == 2 and "sigma" in err


def test_kernel_formats(capsys):
    code, out, _ = run(capsys, "kernel", "--r", "0:0.02:0.01", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data) == 3 and isinstance(data[0]["value"], float)
    _, out, _ = run(capsys, "kernel", "--r", "0:0.02:0.01", "--format", "plot_columns")
    assert out.startswith("# family n params r value method")


def test_kernel_output_file(capsys, tmp_path):
    target = tmp_path / "k.csv"
    code, out, _ = run(capsys, "kernel", "--r", "0:0.1:0.05", "-o", str(target))
    assert code == 0 and out == ""
    assert len(target.read_text().splitlines()) == 4
    code, _, err = run(capsys, "kernel", "-o", str(tmp_path / "missing" / "k.csv"))
    assert code == 2 and "does not exist" in err


def test_config_file_and_override(capsys, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\nfamily = heat\nt = 0.5, 1.0\nr = 0:0.1:0.1\n")
    code, out, _ = run(capsys, "kernel", "--config", str(conf))
    assert code == 0 and len(out.splitlines()) == 5
    code, out, _ = run(capsys, "kernel", "--config", str(conf), "--t", "2")
    assert len(out.splitlines()) == 3


def test_malformed_config(capsys, tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("family = heat\n\nbogus = 1\n")
    code, _, err = run(capsys, "kernel", "--config", str(conf))
    assert code == 2 and f"{conf}:3: unknown field 'bogus'" in err
    conf.write_text("no equals sign\n")
    code, _, err = run(capsys, "kernel", "--config", str(conf))
    assert code == 2 and ":1:" in err
    code, _, err = run(capsys, "kernel", "--config", str(tmp_path / "none.conf"))
    assert code == 2


def test_range_parsing():
    assert cli._range("0:1:0.25").tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli._range("0.5, 2").tolist() == [0.5, 2.0]
    for bad in ("1:0:0.5", "0:1:0", "0:1", ""):
        with pytest.raises(cli.ConfigError):
            cli._range(bad)
    assert cli._float_list("1, 2,3") == [1.0, 2.0, 3.0]


def test_validate_default_passes(capsys):
    code, out, _ = run(capsys, "validate")
    rows = list(csv.DictReader(io.StringIO(out)))
    # riesz and bgr: 3 orders x 2 regimes; poisson: 3 sigma x (2 regimes at y = 0.5,
    # far only at y = 1 and 2, where r^2 + y^2 >= 1 everywhere)
    assert code == 0 and len(rows) == 24
    assert all(r["pass"] == "True" for r in rows)


def test_validate_negative_control(capsys):
    code, out, _ = run(capsys, "validate", "--family", "poisson", "--override-exponent", "-1")
    assert code == 1 and "False" in out


def test_validate_empty_grid(capsys):
    code, _, err = run(capsys, "validate", "--r", "1:0:0.1")
    assert code == 2 and "empty grid" in err


def test_validate_heat_and_lq(capsys):
    code, out, _ = run(capsys, "validate", "--checks", "heat,lq", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["passed"]
    kinds = [r["kind"] for r in data["reports"]]
    assert kinds.count("lq") == 3 and kinds.count("estimate") == 1


def test_inequality_isometry_only(capsys):
    code, out, _ = run(capsys, "inequality", "--only", "isometry", "--sigma", "0.5", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["reports"]) == 1
    assert data["reports"][0]["lhs"] == pytest.approx(2.0, rel=1e-6)


def test_inequality_rejects_sigma(capsys):
    code, _, err = run(capsys, "inequality", "--sigma", "1.5")
    assert code == 2 and "sigma" in err


def test_inequality_workers_do_not_change_output(capsys):
    args = ("inequality", "--only", "pointwise", "--sigma", "0.25", "--format", "json")
    _, serial, _ = run(capsys, *args)
    _, parallel, _ = run(capsys, *args, "--workers", "2")
    assert json.loads(serial)["reports"] == json.loads(parallel)["reports"]


def test_transform_ops(capsys):
    code, out, _ = run(capsys, "transform", "--lambda", "0:2:1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    assert float(rows[1]["value"]) == pytest.approx(math.exp(-2.0), rel=1e-10)
    code, out, _ = run(capsys, "transform", "--op", "roundtrip", "--r", "0:2:1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[1]["value"]) == pytest.approx(float(rows[1]["original"]), rel=1e-6)
    code, out, _ = run(capsys, "transform", "--function", "bump:center=1,width=0.5",
                       "--op", "fractional", "--sigma", "0.3", "--r", "0:1:0.5")
    assert code == 0 and len(out.splitlines()) == 4


@pytest.mark.filterwarnings("ignore::hyperfrac.transform.TruncationWarning")
def test_transform_neumann_matches_fractional(capsys):
    args = ("transform", "--sigma", "0.4", "--r", "0:2:0.5")
    _, frac, _ = run(capsys, *args, "--op", "fractional")
    _, neu, _ = run(capsys, *args, "--op", "neumann")
    a = np.array([float(r["value"]) for r in csv.DictReader(io.StringIO(frac))])
    b = np.array([float(r["value"]) for r in csv.DictReader(io.StringIO(neu))])
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) < 2e-2


def test_transform_input_csv(capsys, tmp_path):
    path = tmp_path / "f.csv"
    r = np.linspace(0, 8, 801)
    path.write_text("r,value\n" + "".join(f"{float(x)!r},{math.exp(-x * x)!r}\n" for x in r))
    code, out, _ = run(capsys, "transform", "--input", str(path), "--lambda", "0:1:1")
    assert code == 0 and len(out.splitlines()) == 3
    path.write_text("r,value\n1,abc\n")
    code, _, err = run(capsys, "transform", "--input", str(path))
    assert code == 2
    code, _, err = run(capsys, "transform", "--function", "cauchy")
    assert code == 2 and "unknown function" in err


def test_report_merges_bundles(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "validate", "--checks", "lq", "--format", "json", "-o", str(a))
    run(capsys, "inequality", "--only", "isometry", "--sigma", "0.5", "--format", "json", "-o", str(b))
    code, out, _ = run(capsys, "report", str(a), str(b), "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["reports"]) == 4 and data["command"] == "report"
    (tmp_path / "c.json").write_text("[1]")
    code, _, err = run(capsys, "report", str(tmp_path / "c.json"))
    assert code == 2 and "not a report bundle" in err
    code, _, _ = run(capsys, "report")
    assert code == 2


def test_version_and_help(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
