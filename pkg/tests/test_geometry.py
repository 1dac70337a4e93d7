"""Chart tensor calculus: Christoffels, curvature, derivatives, wave operator, identities."""
import json
import time

import numpy as np
import pytest

from horizonkit.catalog import available, load
from horizonkit.errors import SingularMetricError, UsageError
from horizonkit.geometry.curvature import (box_frame_form, box_two_tensor, box_vector, check_identity_numeric,
                                           cov_derivative, curvature_pack, divergence, lie_derivative_metric,
                                           metric_compatibility_defect, numeric_sweep, ric_sharp, riem_action, sym)
from horizonkit.geometry.fields import (ChartMetric, random_polynomial_metric, random_vector_field, sample_points,
                                        two_tensor, vector_field)

MISNER = ChartMetric.from_expressions(("t", "psi"), [["0", "1"], ["1", "t"]], name="misner")
FLAT3 = ChartMetric.from_expressions(("t", "x", "y"), [["-1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
                                     name="flat")
C3 = ("t", "x", "y")


def test_misner_christoffels():
    gam = curvature_pack(MISNER, np.array([0.3, 1.0])).christoffel  # (c, a, b)
    t, psi = 0, 1
    assert gam[t, psi, psi] == pytest.approx(0.15, abs=1e-14)
    assert gam[psi, psi, psi] == pytest.approx(-0.5, abs=1e-14)
    assert gam[t, t, psi] == pytest.approx(0.5, abs=1e-14)
    assert gam[t, psi, t] == pytest.approx(0.5, abs=1e-14)
    assert np.abs(curvature_pack(MISNER, np.array([0.3, 1.0])).riemann).max() == 0.0


def test_flat_curvature_vanishes():
    pack = curvature_pack(FLAT3, np.array([0.1, -0.2, 0.4]))
    assert np.abs(pack.christoffel).max() == 0.0
    assert np.abs(pack.riemann).max() == 0.0


def independent_ricci(m, p, h=1e-3):
    """Ricci from nested finite differences of the metric values alone."""
    n = len(p)
    w = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}

    def gamma(q):
        dg = np.zeros((n, n, n))
        for c in range(n):
            for s, ws in w.items():
                r = q.copy()
                r[c] += s * h
                dg[c] += ws * m.at(r) / h
        low = np.einsum("aeb->abe", dg) + np.einsum("bea->abe", dg) - np.einsum("eab->abe", dg)
        return 0.5 * np.einsum("de,abe->dab", np.linalg.inv(m.at(q)), low)

    G = gamma(p)
    dG = np.zeros((n,) * 4)
    for c in range(n):
        for s, ws in w.items():
            r = p.copy()
            r[c] += s * h
            dG[c] += ws * gamma(r) / h
    return (np.einsum("bbac->ac", dG) - np.einsum("abbc->ac", dG)
            + np.einsum("bbe,eac->ac", G, G) - np.einsum("bae,ebc->ac", G, G))


def test_ricci_matches_finite_difference_oracle(rng):
    for dim in (2, 3, 4):
        m = random_polynomial_metric(dim, rng, scale=0.3)
        for p in sample_points(m, rng, 3):
            ric = curvature_pack(m, p).ricci
            ref = independent_ricci(m, p.copy())
            assert np.abs(ric - ref).max() <= 1e-6 * np.abs(ric).max()


def test_curvature_symmetries(rng):
    m = random_polynomial_metric(4, rng, scale=0.3)
    P = sample_points(m, rng, 20)
    pack = curvature_pack(m, P)
    defects = pack.symmetry_defects(m.at(P))
    assert defects["gamma_lower_pair"] <= 1e-12
    for key in ("first_pair", "second_pair", "pair_exchange", "ricci_symmetry"):
        assert defects[key] <= 1e-10, key


def test_metric_compatibility_random(rng):
    m = random_polynomial_metric(4, rng)
    assert metric_compatibility_defect(m, sample_points(m, rng, 50)) <= 1e-8


@pytest.mark.parametrize("name", available())
def test_metric_compatibility_catalog(name):
    spec = load(name)
    assert metric_compatibility_defect(spec.metric, spec.sample_points(1000, seed=1)) <= 1e-8


def test_misner_derivatives_of_coordinate_fields():
    dpsi = vector_field(("t", "psi"), ["0", "1"])
    dt = vector_field(("t", "psi"), ["1", "0"])
    d = cov_derivative(MISNER, dpsi, np.array([0.0, 0.7]))  # (a, c) = nabla_a V^c
    np.testing.assert_allclose(d[1], [0.0, -0.5], atol=1e-14)
    P = np.stack([np.linspace(-0.9, 0.9, 7), np.linspace(0, 6, 7)], axis=-1)
    assert np.abs(cov_derivative(MISNER, dt, P)[:, 0, :]).max() == 0.0


def test_lie_derivative_examples():
    rot = vector_field(C3, ["0", "-y", "x"])
    P = np.array([[0.1, 0.5, -0.3], [1.0, 2.0, 3.0]])
    assert np.abs(lie_derivative_metric(FLAT3, rot, P)).max() == 0.0
    w = vector_field(("t", "psi"), ["0", "-2"])
    Q = np.stack([np.linspace(-0.9, 0.9, 9), np.linspace(0, 6, 9)], axis=-1)
    assert np.abs(lie_derivative_metric(MISNER, w, Q)).max() == 0.0
    stretch = vector_field(C3, ["0", "x", "0"])
    np.testing.assert_allclose(lie_derivative_metric(FLAT3, stretch, P[0]), np.diag([0.0, 2.0, 0.0]), atol=1e-14)


def test_box_examples():
    P = np.array([[0.2, 0.4, -0.1], [0.0, 1.0, 2.0]])
    linear = vector_field(C3, ["1 + t", "2*x - y", "3*y"])
    assert np.abs(box_vector(FLAT3, linear, P)).max() == 0.0
    quad = vector_field(C3, ["0", "x^2", "0"])
    np.testing.assert_allclose(box_vector(FLAT3, quad, P), [[0.0, -2.0, 0.0]] * 2, atol=1e-14)
    w = vector_field(("t", "psi"), ["0", "-2"])
    assert np.abs(box_vector(MISNER, w, np.array([[0.3, 1.0], [-0.4, 2.0]]))).max() <= 1e-14


def test_box_frame_form_matches_chart_form(rng):
    m = random_polynomial_metric(3, rng)
    P = sample_points(m, rng, 5)
    coords = m.coords
    unit = [vector_field(coords, [str(int(i == j)) for j in range(3)]) for i in range(3)]
    frame = [random_vector_field(3, rng, degree=2, scale=0.2) + e for e in unit]
    v = random_vector_field(3, rng)
    a = box_vector(m, v, P)
    assert np.abs(a - box_frame_form(m, v, frame, P)).max() <= 1e-6 * np.abs(a).max()
    u = two_tensor(coords, [["x0*x1", "x2^2", "1"], ["x2^2", "x0", "x1*x2"], ["1", "x1*x2", "x0^3"]])
    b = box_two_tensor(m, u, P)
    assert np.abs(b - box_frame_form(m, u, frame, P)).max() <= 1e-6 * np.abs(b).max()


def test_contractions_on_flat_space(rng):
    P = rng.uniform(-1, 1, (5, 3))
    const = vector_field(C3, ["1", "2", "-3"])
    assert np.abs(divergence(FLAT3, const, P)).max() == 0.0
    u = two_tensor(C3, [["t", "x", "y"], ["x", "t*y", "1"], ["y", "1", "x^2"]])
    assert np.abs(riem_action(FLAT3, u, P)).max() == 0.0


def test_ric_sharp_brute_force(rng):
    m = random_polynomial_metric(3, rng, scale=0.3)
    p = sample_points(m, rng, 1)[0]
    v = random_vector_field(3, rng)
    ric = curvature_pack(m, p).ricci
    ginv = np.linalg.inv(m.at(p))
    vv = v.at(p)
    ref = np.zeros(3)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                ref[a] += ginv[a, c] * ric[c, b] * vv[b]
    np.testing.assert_allclose(ric_sharp(m, v, p), ref, atol=1e-10)


def test_rank_mismatch_is_usage_error():
    u = two_tensor(C3, [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])
    v = vector_field(C3, ["1", "0", "0"])
    with pytest.raises(UsageError):
        box_vector(FLAT3, u, np.zeros(3))
    with pytest.raises(UsageError):
        box_two_tensor(FLAT3, v, np.zeros(3))
    with pytest.raises(UsageError):
        riem_action(FLAT3, v, np.zeros(3))
    with pytest.raises(UsageError):
        sym(np.ones(3))


def test_sym_halves():
    u = np.array([[1.0, 2.0], [4.0, 3.0]])
    np.testing.assert_array_equal(sym(u), [[1.0, 3.0], [3.0, 3.0]])


def test_singular_metric_reports_determinant():
    m = ChartMetric.from_expressions(("t", "x"), [["t", "0"], ["0", "1"]], lorentzian=False)
    with pytest.raises(SingularMetricError) as info:
        curvature_pack(m, np.array([0.0, 0.3]))
    assert info.value.det == 0.0


def test_closed_form_partials_agree_with_differences(rng):
    m = random_polynomial_metric(3, rng)
    P = sample_points(m, rng, 5)
    exact = m.partials(P, 1)  # derivative index last
    fd = m.fd_partials(P)
    assert np.abs(exact - fd).max() <= 1e-6


# -- identities --------------------------------------------------------------

def test_identities_vanish_for_flat_killing():
    rot = vector_field(C3, ["0", "-y", "x"])
    P = np.array([[0.1, 0.5, -0.3], [0.4, -0.2, 0.9]])
    for which in ("A1", "A2"):
        assert check_identity_numeric(FLAT3, rot, P, which).abs_residual == 0.0


@pytest.mark.parametrize("name", available())
def test_identities_on_catalog(name):
    spec = load(name)
    P = spec.sample_points(20, seed=2)
    field = random_vector_field(spec.dim, np.random.default_rng(5))
    for which in ("A1", "A2"):
        assert check_identity_numeric(spec.metric, field, P, which).rel_residual <= 1e-6


@pytest.mark.parametrize("name", ["misner2d", "misner_x_t2"])
def test_identities_trivial_for_exact_killing(name):
    spec = load(name)
    P = spec.sample_points(20, seed=2)
    for which in ("A1", "A2"):
        assert check_identity_numeric(spec.metric, spec.killing, P, which).rel_residual <= 1e-8


def test_numeric_sweep_acceptance():
    t0 = time.perf_counter()
    rep = numeric_sweep(seed=0)
    assert time.perf_counter() - t0 <= 30.0
    assert len(rep["runs"]) == 5 * 3 * 2
    assert max(rep["max_rel_residual"].values()) <= 1e-6


def test_numeric_sweep_is_seeded():
    a = numeric_sweep(seed=4, metrics=2, points=3, fields=1)
    b = numeric_sweep(seed=4, metrics=2, points=3, fields=1)
    assert a == b


def test_residual_report_json():
    rng = np.random.default_rng(0)
    m = random_polynomial_metric(3, rng)
    v = random_vector_field(3, rng)
    r = check_identity_numeric(m, v, sample_points(m, rng, 1)[0], "A1")
    d = json.loads(json.dumps(r.to_dict()))
    assert set(d) == {"metric", "point", "identity", "abs_residual", "rel_residual"}
