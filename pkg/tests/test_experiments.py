import json
import time

import numpy as np
import pytest

from fracbn.domain import Box, CoefficientField, build_grid
from fracbn.exceptions import NumericalError, PreconditionError
from fracbn.experiments import cli
from fracbn.experiments.cache import SpectralCache
from fracbn.experiments.config import config_from_dict, load_config
from fracbn.experiments.report import dumps, strip_timing, validate_report, write_table
from fracbn.experiments.runner import COMMANDS

SMALL = {
    "eig": """
[problem]
s = 0.5
[domain]
kind = "box"
resolution = 9
""",
    "solve": """
[problem]
s = 0.5
lam_ratio = 0.5
[domain]
kind = "box"
resolution = 9
[solver]
n_starts = 2
""",
    "certify": """
[problem]
s = 0.4
lam_ratio = 0.5
x0 = [0.0, 0.0]
[domain]
kind = "disc"
resolution = 9
[field]
kind = "prototype"
A0 = [[1.0, 0.0], [0.0, 1.0]]
x0 = [0.0, 0.0]
sigma = 1.5
[sweep]
kind = "interior"
k_min = 2
k_max = 5
""",
    "audit": """
[problem]
s = 0.5
lam = 0.0
[domain]
kind = "disc"
resolution = 9
[audit]
levels = [9, 17]
lams = [0.0]
[solver]
n_starts = 1
""",
    "extension-check": """
[problem]
s = 0.5
[domain]
kind = "box"
resolution = 9
[cylinder]
levels = 2
""",
    "sweep": """
[problem]
s = 0.4
lam_ratio = 0.5
x0 = [0.0, 0.0]
[domain]
kind = "disc"
resolution = 9
[field]
kind = "prototype"
A0 = [[1.0, 0.0], [0.0, 1.0]]
x0 = [0.0, 0.0]
sigma = 1.5
[sweep]
kind = "interior"
k_min = 2
k_max = 7
drop = 1
radii = [16.0, 32.0, 64.0, 128.0, 256.0]
""",
}


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _run(tmp_path, command, text=None, extra=()):
    cfg = _write(tmp_path, text if text is not None else SMALL[command])
    out = tmp_path / "out"
    code, _ = cli.run([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, json.loads((out / "report.json").read_text()), out


# configuration


def test_config_defaults_and_lam():
    cfg = config_from_dict({"problem": {"s": 0.5}, "domain": {"kind": "box"}})
    assert cfg.resolution == 33 and cfg.lam_ratio == 0.5
    assert cfg.resolve_lam(2.0) == 1.0
    assert cfg.audit.levels == [17, 33, 65]
    cfg = config_from_dict({"problem": {"s": 0.5, "lam": -1.0}, "domain": {"kind": "box"}})
    assert cfg.resolve_lam(2.0) == -1.0


@pytest.mark.parametrize("raw, match", [
    ({"problem": {"s": 0.5}}, r"\[problem\] and \[domain\]"),
    ({"problem": {"s": 0.5}, "domain": {"kind": "box"}, "solver": {"tol": 1}}, "unknown keys"),
    ({"problem": {"s": 0.5, "lam": 1, "lam_ratio": 0.5}, "domain": {"kind": "box"}}, "either"),
    ({"problem": {"s": 1.5}, "domain": {"kind": "box"}}, "s"),
    ({"problem": {"s": 0.5}, "domain": {"kind": "box"}, "sweep": {"kind": "edge"}}, "sweep.kind"),
    ({"problem": {"s": 0.5}, "domain": {"kind": "box"}, "cylinder": {"ratio": 0.9}}, "ratio"),
])
def test_config_validation(raw, match):
    with pytest.raises(PreconditionError, match=match):
        config_from_dict(raw)


def test_config_overrides_and_hash(tmp_path):
    p = _write(tmp_path, SMALL["solve"])
    a, b = load_config(p), load_config(p, {"run.seed": 11})
    assert b.run.seed == 11 and a.run.seed == 0
    assert a.hash != b.hash and a.hash == load_config(p).hash


def test_shipped_configs_load():
    from pathlib import Path
    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.toml"))
    assert len(paths) >= 6
    for p in paths:
        load_config(p)


# cache


def test_cache_roundtrip_and_key(tmp_path):
    g = build_grid(Box(), 9)
    f = CoefficientField.constant(np.eye(2))
    c = SpectralCache(tmp_path)
    S1 = c.spectrum(g, f)
    S2 = c.spectrum(g, f)
    assert c.stats() == {"hits": 1, "misses": 1, "rebuilt": 0}
    np.testing.assert_array_equal(S1.eigenvalues, S2.eigenvalues)
    np.testing.assert_array_equal(S1.eigenvectors, S2.eigenvectors)
    assert c.key(g, f, 1e-8) != c.key(g, f, 1e-8, K=5)
    assert c.key(g, f, 1e-8) != c.key(g, CoefficientField.constant(2 * np.eye(2)), 1e-8)


@pytest.mark.parametrize("damage", ["truncate", "flip"])
def test_cache_corruption_rebuilds(tmp_path, damage):
    g = build_grid(Box(), 9)
    f = CoefficientField.constant(np.eye(2))
    c = SpectralCache(tmp_path)
    S1 = c.spectrum(g, f)
    path = c.path(c.key(g, f, 1e-8))
    data = path.read_bytes()
    if damage == "truncate":
        path.write_bytes(data[: len(data) // 2])
    else:
        with np.load(path) as z:
            arrays = {k: z[k] for k in z.files}
        arrays["eigenvalues"] = arrays["eigenvalues"] * (1 + 1e-12)
        np.savez(path, **arrays)
    S2 = c.spectrum(g, f)
    assert c.rebuilt == 1 and c.misses == 2
    np.testing.assert_allclose(S1.eigenvalues, S2.eigenvalues, rtol=1e-12)
    assert c.load(c.key(g, f, 1e-8)) is not None


def test_cache_speedup(tmp_path):
    g = build_grid(Box(), 49)
    f = CoefficientField.constant(np.eye(2))
    c = SpectralCache(tmp_path)
    t0 = time.perf_counter()
    c.spectrum(g, f)
    cold = time.perf_counter() - t0
    t0 = time.perf_counter()
    c.spectrum(g, f)
    warm = time.perf_counter() - t0
    assert c.hits == 1
    assert cold >= 10 * warm, (cold, warm)


# CLI and reports


@pytest.mark.parametrize("command", sorted(SMALL))
def test_every_command_writes_valid_report(tmp_path, command):
    code, rep, out = _run(tmp_path, command)
    assert code == 0, rep.get("message")
    validate_report(rep)
    assert rep["command"] == command and rep["status"] == "ok"
    for rel in rep["tables"] + rep["fields"]:
        lines = (out / rel).read_text().splitlines()
        assert len(lines) >= 2 and "," in lines[0]
    assert set(rep["timing"]) >= {"stages", "total", "cache"}


def test_solve_outputs(tmp_path):
    code, rep, out = _run(tmp_path, "solve")
    r = rep["results"]
    assert r["minimizer"]["converged"]
    assert "fields/minimizer.csv" in rep["fields"]
    rows = (out / "fields/minimizer.csv").read_text().splitlines()
    assert rows[0] == "x0,x1,u" and len(rows) == 1 + 49


def test_refused_exit_code(tmp_path, capsys):
    text = SMALL["solve"].replace("lam_ratio = 0.5", "lam_ratio = 1.5")
    code, rep, _ = _run(tmp_path, "solve", text)
    assert code == cli.EXIT_REFUSED == 2
    assert rep["status"] == "refused" and "lambda_1s" in rep["message"]
    validate_report(rep)
    assert "refused" in capsys.readouterr().out


def test_bad_config_refused(tmp_path):
    code, rep, _ = _run(tmp_path, "eig", SMALL["eig"] + "\n[solver]\nbogus = 1\n")
    assert code == 2 and "unknown keys" in rep["message"]


def test_failed_exit_code(tmp_path, monkeypatch):
    def boom(ctx):
        raise NumericalError("did not converge", residual=1.0)

    monkeypatch.setitem(COMMANDS, "eig", boom)
    code, rep, _ = _run(tmp_path, "eig")
    assert code == cli.EXIT_FAILED == 1 and rep["status"] == "failed"
    validate_report(rep)


def test_main_returns_code(tmp_path):
    cfg = _write(tmp_path, SMALL["eig"])
    assert cli.main(["eig", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    with pytest.raises(SystemExit):
        cli.main(["nope"])


@pytest.mark.parametrize("command", ["solve", "certify", "audit"])
def test_determinism(tmp_path, command):
    reps = []
    for i in range(2):
        cfg = _write(tmp_path, SMALL[command], f"c{i}.toml")
        out = tmp_path / f"out{i}"
        code, _ = cli.run([command, "--config", str(cfg), "--out", str(out), "--seed", "5",
                           "--cache", str(tmp_path / "cache")])
        assert code == 0
        reps.append(json.loads((out / "report.json").read_text()))
        tables = {rel: (out / rel).read_bytes() for rel in reps[-1]["tables"] + reps[-1]["fields"]}
        reps[-1]["_files"] = tables
    assert reps[0]["timing"]["cache"]["misses"] >= 1 and reps[1]["timing"]["cache"]["hits"] >= 1
    assert dumps(strip_timing({k: v for k, v in reps[0].items() if k != "_files"})) == \
        dumps(strip_timing({k: v for k, v in reps[1].items() if k != "_files"}))
    assert reps[0]["_files"] == reps[1]["_files"]


def test_write_table_roundtrip(tmp_path):
    p = write_table(tmp_path / "t.csv", ["a", "b"], [[1, 0.1], [2, np.float64(1 / 3)]])
    lines = p.read_text().splitlines()
    assert lines == ["a,b", "1,0.1", "2,0.3333333333333333"]
