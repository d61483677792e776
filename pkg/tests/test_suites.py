"""Suites pass at small parameters and fail when their expected values are perturbed."""

import pytest

from theta_lab import suites
from theta_lab.core_arith import var
from theta_lab.report import CheckReport, run_suite
from theta_lab.suites import REGISTRY

z = var("z")


def test_registry_names_are_unique_and_documented():
    for name, s in REGISTRY.items():
        assert s.name == name
        assert s.summary


@pytest.mark.parametrize("name,params", [
    ("core.diffeq", {"order": 6}),
    ("core.series", {}),
    ("yangian.tbar-2dim", {"a": "1/3"}),
    ("yangian.theta-2dim", {"order": 4}),
    ("yangian.rmatrix-2dim-negpref", {"depth": 5}),
    ("yangian.verma", {"depth": 3, "modes": 3}),
    ("qloop.fg-ratio", {"order": 6}),
    ("qloop.asym", {"depth": 4, "c": "q^-2"}),
    ("qloop.dual", {"depth": 4}),
])
def test_suite_passes_at_small_parameters(name, params):
    report = run_suite(REGISTRY[name], **params)
    assert report.passed, report.text()


def test_unknown_parameter_is_rejected():
    with pytest.raises(TypeError):
        run_suite(REGISTRY["core.series"], depth=3)


def test_perturbed_rmatrix_golden_fails(monkeypatch):
    real = suites._negpref_r_expected

    def shifted(dim, kind):
        out = real(dim, kind)
        if kind == "R":
            out[(1, 1)] = out[(1, 1)].map(lambda v: v + 1)
        return out

    monkeypatch.setattr(suites, "_negpref_r_expected", shifted)
    report = run_suite(REGISTRY["yangian.rmatrix-2dim-negpref"], depth=4)
    assert not report.passed
    assert all(loc.startswith("R[1,1]") for loc, _, _ in report.residuals)


def test_wrong_partition_count_fails(monkeypatch):
    monkeypatch.setattr(suites, "bounded_partitions", lambda k, m: 1)
    assert not run_suite(REGISTRY["yangian.verma"], depth=3, modes=3).passed


def test_report_json_is_exact_and_stable():
    r = CheckReport("x", {"order": 3, "a": var("q") / 2}, False, [("loc", 0, z + 1)], elapsed=1.5)
    doc = r.to_json()
    assert "elapsed" not in doc
    assert doc["pass"] is False
    assert doc["parameters"]["order"] == 3
    assert doc["residuals"][0]["location"] == "loc"
    assert r.dumps() == CheckReport("x", {"a": var("q") / 2, "order": 3}, False, [("loc", 0, z + 1)]).dumps()
