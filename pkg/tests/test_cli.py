import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from stochnewton.cli import dispatch


def run(argv, capsys):
    code = dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _manifest(err):
    lines = [json.loads(line) for line in err.splitlines() if line.startswith("{")]
    return next(l["manifest"] for l in lines if "manifest" in l)


def test_find_roots_json(capsys):
    code, out, err = run(["find-roots", "--poly", "2 - 2z + z^3", "--radius", "0.75", "--seed", "7", "--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "stochnewton.find-roots/1"
    oracle = np.roots([1, 0, -2, 2])
    got = [complex(*r["value"]) for r in doc["roots"]]
    assert len(got) == 3
    for x in oracle:
        assert min(abs(x - y) for y in got) < 1e-10
    assert all(r["residual"] < 1e-10 for r in doc["roots"])
    assert doc["theorem_hypotheses_met"] is True
    m = _manifest(err)
    assert m["seed"] == 7 and m["command"] == "find-roots" and m["version"]


def test_find_roots_text_and_file_input(tmp_path, capsys):
    src = tmp_path / "p.txt"
    src.write_text("-1 + z^2\n")
    code, out, _ = run(["find-roots", "--poly", str(src)], capsys)
    assert code == 0
    assert out.count("root ") == 2


def test_trap_demo_table(capsys):
    code, out, _ = run(["trap-demo"], capsys)
    assert code == 0
    assert "cycle of length 2" in out
    frac = float(out.splitlines()[2].split()[2].rstrip("%"))
    assert frac >= 99.9


def test_lyapunov_relaxed_newton(capsys):
    code, out, _ = run(
        ["lyapunov", "--family", "relaxed-newton", "--poly", "−1 + z^2", "--point", "1", "--radius", "0.75", "--json"],
        capsys,
    )
    doc = json.loads(out)
    assert code == 0
    assert doc["lyapunov"] == pytest.approx(math.log(0.75) - 0.5, abs=1e-12)
    assert doc["stderr"] == 0 and doc["classification"] == "attracting"


def test_lyapunov_infinity_quadratic(capsys):
    code, out, _ = run(
        ["lyapunov", "--family", "quadratic", "--measure", '{"atoms": [[0.5, 0.5], [6, 0.5]]}', "--point", "0", "--json"],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["lyapunov"] == pytest.approx(0.5 * math.log(3))


def test_markov_text_and_json(capsys):
    measure = '{"atoms": [[0.3, 1.0]]}'
    code, out, _ = run(["markov", "--family", "rotation", "--n", "2", "--measure", measure], capsys)
    assert code == 0
    assert out.splitlines()[0].split()[:3] == ["#", "period", "lyapunov"]
    code, out, _ = run(["markov", "--family", "rotation", "--n", "2", "--measure", measure, "--json"], capsys)
    doc = json.loads(out)
    assert doc["schema"] == "stochnewton.markov/1"
    assert doc["minimal_sets"][0]["period"] == 2


def test_markov_embedded_family(capsys):
    code, out, _ = run(
        [
            "markov", "--family", "embedded-markov", "--points", "[0, 0.5, [0, 0.5]]",
            "--maps", "[[1, 2, 0], [0, 0, 0]]", "--measure", '{"atoms": [[0.01, 0.5, 0], [0.02, 0.5, 1]]}', "--json",
        ],
        capsys,
    )
    assert code == 0
    (rep,) = json.loads(out)["minimal_sets"]
    assert rep["period"] == 1 and len(rep["points"]) == 3


@pytest.mark.parametrize(
    "atoms, expected",
    [("[[0.5, 0.5], [6, 0.5]]", "Ic"), ("[[0.5, 0.8], [6, 0.2]]", "Ib"), ("[[0.5, 1.0]]", "Ia")],
)
def test_classify(atoms, expected, capsys):
    code, out, _ = run(["classify", "--measure", f'{{"atoms": {atoms}}}', "--json"], capsys)
    assert code == 0
    assert json.loads(out)["type"] == expected


def test_basin_map_outputs(tmp_path, capsys):
    csv_path, png_path, man = tmp_path / "b.csv", tmp_path / "b.png", tmp_path / "m.json"
    argv = [
        "basin-map", "--poly=-1+z^2", "--res", "8,6", "--runs", "4",
        "--csv", str(csv_path), "--png", str(png_path), "--manifest", str(man),
    ]
    code, _, err = run(argv, capsys)
    assert code == 0 and err == ""
    manifest = json.loads(man.read_text())
    hashes = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    assert hashes[str(csv_path)] == hashlib.sha256(csv_path.read_bytes()).hexdigest()
    assert len(csv_path.read_text().splitlines()) == 1 + 8 * 6
    # re-running the manifest's config reproduces identical hashes
    first = csv_path.read_bytes()
    run(argv, capsys)
    assert csv_path.read_bytes() == first


def test_rate_check(capsys):
    code, out, _ = run(["rate-check", "--runs", "100", "--json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["within_0_1"] and doc["traced"] == 100


def test_seed_env_and_config_precedence(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STOCHNEWTON_SEED", "11")
    _, _, err = run(["find-roots", "--poly", "z^2 - 1"], capsys)
    assert _manifest(err)["seed"] == 11
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 4, "radius": 0.6}))
    _, out, err = run(["find-roots", "--poly", "z^2 - 1", "--config", str(cfg), "--json"], capsys)
    assert _manifest(err)["seed"] == 4
    assert json.loads(out)["measure"] == {"kind": "uniform_disk", "radius": 0.6, "seed": 4}
    _, out, err = run(["find-roots", "--poly", "z^2 - 1", "--config", str(cfg), "--seed", "9", "--radius", "0.7", "--json"], capsys)
    assert json.loads(out)["measure"] == {"kind": "uniform_disk", "radius": 0.7, "seed": 9}


def test_same_seed_same_bytes(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        run(["trap-demo", "--runs", "200", "--seed", "3", "--json", str(p)], capsys)
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["no-such-command"],
        ["find-roots", "--poly", "zz"],
        ["find-roots", "--poly", "z^2", "--radius", "1.5"],
        ["classify"],
        ["lyapunov", "--family", "quadratic", "--point", "0"],
        ["find-roots", "--radius", "abc"],
    ],
)
def test_bad_arguments_exit_1(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert "error" in json.loads(err.strip().splitlines()[-1])


def test_algorithmic_failure_exit_2(capsys):
    code, _, err = run(["find-roots", "--poly", "1 + z^2 + z^5", "--max-iter", "1", "--z0", "40"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "IncompleteFactorization"


def test_console_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "stochnewton.cli", "lyapunov", "--poly", "z^3 - 1", "--point", "inf", "--json"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["classification"] == "expanding"
