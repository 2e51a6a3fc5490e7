import json
import math

import pytest

from vord.cli import (EXIT_FAIL, EXIT_INVALID, EXIT_OK, ConfigError, build_config, compare_runs, main,
                      parse_config_text, resolved_range)
from vord.grid import read_grid_csv

SOLVE = """
kind = solve
domain.d = 2
domain.n = 16
domain.L = 6.283185307179586
order.alpha_star = 0.5
u0.kind = mode
u0.k = 1, 0
times = 1
"""

VO = """
kind = solve
domain.d = 2
domain.n = 32
domain.L = 16
order.alpha_star = 0.5
order.alpha_m = 0.5
order.alpha_M = 0.7
order.region = ball
order.size = 1.6
order.kappa = 0.7
u0.kind = gaussian
u0.sigma = 1
times = 0.5, 2
"""


def write(tmp_path, text, name="cfg.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, text, *extra, name="cfg.txt"):
    cfg = write(tmp_path, text, name)
    out = tmp_path / "runs"
    return main(["run", str(cfg), "--out", str(out), *extra]), out


def only_run(out):
    dirs = [d for d in out.iterdir() if not d.name.startswith(".")]
    assert len(dirs) == 1
    return dirs[0]


def test_parse():
    c = parse_config_text("a = 1  # comment\n\n# full line\nb.c=x y\n")
    assert c == {"a": "1", "b.c": "x y"}
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("novalue\n")


def test_solve_single_mode(tmp_path):
    code, out = run(tmp_path, SOLVE)
    assert code == EXIT_OK
    d = only_run(out)
    man = json.loads((d / "manifest.json").read_text())
    assert man["checks"]["mittag_leffler_t1"]["passed"]
    assert man["checks"]["mittag_leffler_t1"]["relative_error"] < 1e-6
    u = read_grid_csv(d / "solution_t1.csv")
    assert u.domain.n == 16
    assert set(man["outputs"]) == {"solution_t1.csv", "summary.csv"}


def test_missing_alpha_star_is_invalid(tmp_path):
    code, out = run(tmp_path, SOLVE.replace("order.alpha_star = 0.5\n", ""))
    assert code == EXIT_INVALID
    assert not out.exists() or not any(out.iterdir())


@pytest.mark.parametrize("edit", [
    ("kind = solve", "kind = banana"),
    ("domain.n = 16", "domain.n = 12"),
    ("u0.k = 1, 0", "u0.k = 0.3, 0"),
    ("times = 1", "times = 1\ncontour.refine_tol = -1"),
])
def test_invalid_configs(tmp_path, edit):
    code, _ = run(tmp_path, SOLVE.replace(*edit))
    assert code == EXIT_INVALID


def test_gaussian_margin_rule():
    raw = parse_config_text(VO.replace("u0.sigma = 1", "u0.sigma = 2"))
    with pytest.raises(ConfigError):
        build_config(raw)
    # a looser support threshold accepts the same data
    build_config(parse_config_text(VO.replace("u0.sigma = 1", "u0.sigma = 2") + "u0.support_tol = 1e-2\n"))


def test_suite_failure_still_writes_manifest(tmp_path):
    code, out = run(tmp_path, SOLVE + "check.tol = 1e-30\n")
    assert code == EXIT_FAIL
    man = json.loads((only_run(out) / "manifest.json").read_text())
    assert not man["checks"]["mittag_leffler_t1"]["passed"]


def test_error_in_suite_exit_1(tmp_path):
    code, out = run(tmp_path, SOLVE + "contour.max_doublings = 0\ncontour.n_arc = 2\ncontour.n_ray = 8\n")
    assert code == EXIT_FAIL
    man = json.loads((only_run(out) / "manifest.json").read_text())
    assert man["status"] == "error" and "QuadratureError" in man["error"]


def test_rerun_and_threads_bit_identical(tmp_path):
    code1, out = run(tmp_path, VO, "--threads", "1")
    d = only_run(out)
    first = {p.name: p.read_bytes() for p in d.glob("*.csv")}
    code2, _ = run(tmp_path, VO, "--threads", "3")
    assert code1 == code2 == EXIT_OK
    d2 = only_run(out)
    assert d2.name == d.name
    assert {p.name: p.read_bytes() for p in d2.glob("*.csv")} == first
    rep = compare_runs(d, d2)
    assert rep["identical"] and rep["max_relative_deviation"] == 0.0


def test_hash_depends_on_seed(tmp_path):
    a = build_config(parse_config_text(SOLVE), seed=0)
    b = build_config(parse_config_text(SOLVE), seed=1)
    assert a.digest() != b.digest()


def test_compare_grid_refinement(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, out_a = run(tmp_path / "a", VO)
    _, out_b = run(tmp_path / "b", VO.replace("domain.n = 32", "domain.n = 64"))
    rep = compare_runs(only_run(out_a), only_run(out_b))
    assert not rep["identical"]
    assert 0 < rep["files"]["solution_t2.csv"]["max_relative_deviation"] < 0.05


def test_compare_schema_mismatch(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, out_a = run(tmp_path / "a", SOLVE)
    _, out_b = run(tmp_path / "b", SOLVE.replace("times = 1", "times = 2"))
    assert main(["compare", str(only_run(out_a)), str(only_run(out_b))]) == EXIT_INVALID


def test_verify_lemma_small(tmp_path):
    text = VO.replace("kind = solve", "kind = verify-lemma") + "lemma.r_min = 1e-4\nlemma.r_max = 1\nlemma.r_count = 3\n"
    code, out = run(tmp_path, text)
    d = only_run(out)
    man = json.loads((d / "manifest.json").read_text())
    assert man["checks"]["contraction"]["passed"]
    rows = (d / "lemma.csv").read_text().splitlines()
    assert rows[0] == "r,beta,quantity,value,bound,pass"
    assert len(rows) == 1 + 3 * 9
    assert code in (EXIT_OK, EXIT_FAIL)


def test_verify_resolvent_small(tmp_path):
    text = VO.replace("kind = solve", "kind = verify-resolvent") + "resolvent.r = 0.01, 100\n"
    code, out = run(tmp_path, text)
    assert code == EXIT_OK
    man = json.loads((only_run(out) / "manifest.json").read_text())
    assert man["checks"]["resolvent_bound"]["violations"] == 0


def test_env_default_root(tmp_path, monkeypatch):
    monkeypatch.setenv("VORD_OUT", str(tmp_path / "envroot"))
    cfg = write(tmp_path, SOLVE)
    assert main(["run", str(cfg)]) == EXIT_OK
    assert only_run(tmp_path / "envroot").name.startswith("solve-")


def test_resolved_range_bounds():
    from vord.grid import Domain
    from vord.order_field import build_order_field
    from vord.grid import Ball
    dom = Domain(2, 4.0, 32)
    fld = build_order_field(dom, 0.5, 0.5, 0.7, Ball((0.0, 0.0), 1.0), 0.7)
    r = resolved_range(dom, fld, 5)
    assert r[0] < r[-1]
    k_max = math.pi * 32 / 8
    assert r[-1] ** 0.5 == pytest.approx((k_max / 2) ** 2)
