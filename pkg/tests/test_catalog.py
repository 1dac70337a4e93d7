"""Catalog loading, validation and the Killing causal audit."""
import json

import numpy as np
import pytest

from horizonkit.catalog import available, check_invariants, from_dict, killing_causal_audit, load, validate
from horizonkit.errors import CorruptSpecError, GeometryError, UnknownSpacetimeError
from horizonkit.frame import HorizonLocus, flow_foliation
from horizonkit.geometry.fields import vector_field
from cached import spec


def raw(name):
    return json.loads(json.dumps(spec(name).source))


def test_registry():
    assert available() == ["degenerate_control", "misner2d", "misner_x_t2", "nonvacuum_control"]


def test_misner_entry():
    s = spec("misner2d")
    assert s.dim == 2 and s.extends and s.vacuum
    assert s.periods == {"psi": pytest.approx(2 * np.pi)}
    np.testing.assert_array_equal(s.killing.at(np.array([0.3, 1.0])), [0.0, -2.0])
    np.testing.assert_array_equal(s.metric.at(np.array([0.3, 1.0])), [[0.0, 1.0], [1.0, 0.3]])


def test_product_entry():
    s = spec("misner_x_t2")
    assert s.dim == 4
    assert s.horizon_coords == [1, 2, 3]
    g = s.metric.at(np.array([0.2, 0.0, 0.0, 0.0]))
    np.testing.assert_array_equal(g[2:, 2:], np.eye(2))


def test_nonvacuum_control_curvature_on_horizon():
    s = spec("nonvacuum_control")
    assert not s.vacuum
    P = np.array([[0.0, 1.0, 2.0]])
    assert np.abs(s.ricci.at(P)).max() >= 0.5


@pytest.mark.parametrize("name", ["misner2d", "misner_x_t2"])
def test_vacuum_and_killing_invariants_on_large_sample(name):
    rep = check_invariants(spec(name), spec(name).sample_points(1000, seed=7))
    assert rep["ricci_vacuum"] <= 1e-8
    assert rep["ricci"] <= 1e-8
    assert rep["killing"] <= 1e-10


def test_declared_ricci_matches_curvature_on_controls():
    for name in ("nonvacuum_control", "degenerate_control"):
        assert check_invariants(spec(name), spec(name).sample_points(1000, seed=7))["ricci"] <= 1e-8


def test_unknown_name():
    with pytest.raises(UnknownSpacetimeError):
        load("schwarzschild")


def test_wrong_ricci_is_corrupt():
    d = raw("misner2d")
    d["ricci"] = [["1", "0"], ["0", "0"]]
    with pytest.raises(CorruptSpecError, match="ricci"):
        validate(from_dict(d))


def test_wrong_killing_is_corrupt():
    d = raw("misner2d")
    d["killing"] = ["1", "0"]
    with pytest.raises(CorruptSpecError, match="killing"):
        validate(from_dict(d))


def test_missing_keys_and_schema():
    d = raw("misner2d")
    del d["metric"]
    with pytest.raises(CorruptSpecError, match="metric"):
        from_dict(d)
    d = raw("misner2d")
    d["schema"] = 2
    with pytest.raises(CorruptSpecError):
        from_dict(d)


def test_asymmetric_metric_is_corrupt():
    d = raw("misner2d")
    d["metric"] = [["0", "1"], ["2", "t"]]
    with pytest.raises(CorruptSpecError):
        from_dict(d)


def test_load_from_file(tmp_path):
    path = tmp_path / "copy.json"
    path.write_text(json.dumps(raw("misner2d")))
    assert load(str(path)).name == "misner2d"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(CorruptSpecError):
        load(str(bad))


# -- causal audit ------------------------------------------------------------

def test_misner_causal_audit():
    rep = killing_causal_audit(spec("misner2d"))
    assert rep["verdict"] == "PASS"
    assert rep["on_horizon"] <= 1e-10
    assert rep["dt_norm_at_0"] == pytest.approx(2.0, abs=1e-6)
    assert rep["future_side"]["min"] > 0
    assert rep["extension_side"]["max"] < 0


def test_misner_norm_is_twice_null_time():
    # g(W, W) = 4 t_chart and t_chart = t / 2 along the fibers.
    s = spec("misner2d")
    fol = flow_foliation(HorizonLocus.build(s, 16), 0.5)
    W = s.killing.at(fol.X)
    norm = np.einsum("...a,...ab,...b->...", W, s.metric.at(fol.X), W)
    np.testing.assert_allclose(norm, 2 * fol.times[:, None] * np.ones_like(norm), atol=1e-12)


def test_shifted_killing_field_fails():
    rep = killing_causal_audit(spec("misner_x_t2"), "shifted")
    assert rep["verdict"] == "FAIL"
    assert rep["on_horizon"] == pytest.approx(1.0, abs=1e-12)
    assert not rep["checks"]["null_on_horizon"]


def test_zero_field_is_rejected():
    zero = vector_field(spec("misner2d").coords, ["0", "0"])
    with pytest.raises(GeometryError):
        killing_causal_audit(spec("misner2d"), zero)


def test_one_sided_audit_without_extension():
    d = raw("misner2d")
    d["extends"] = False
    d["domain"] = {"t": [0.0, 1.0]}
    rep = killing_causal_audit(validate_and_return(from_dict(d)))
    assert rep["extension_side"] is None
    assert "timelike_extension_side" not in rep["checks"]
    assert rep["verdict"] == "PASS"


def validate_and_return(s):
    validate(s)
    return s
