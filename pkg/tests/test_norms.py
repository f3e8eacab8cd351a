import math

import numpy as np
import pytest

from nscert import catalog
from nscert.fespace import build_spaces, interpolate, zero_trace
from nscert.mesh import build_box_mesh, refine_uniform
from nscert.norms import energy_ledger, expr_sobolev_norm, field_norm, linf_time_norm, norm_report
from nscert.stepper import run


def test_constant_norms(cube2):
    assert field_norm(interpolate(catalog.constant(), cube2), cube2, "L2") == pytest.approx(3.0, rel=1e-13)
    assert field_norm(interpolate(catalog.constant((1, 0, 0)), cube2), cube2, "L4") == pytest.approx(1.0, rel=1e-13)
    assert field_norm(interpolate(catalog.linear(), cube2), cube2, "H1semi") == pytest.approx(1.0, rel=1e-13)
    with pytest.raises(ValueError):
        field_norm(interpolate(catalog.linear(), cube2), cube2, "H2")


def test_holder_and_sobolev_ratio(cube2):
    rng = np.random.default_rng(0)
    vol = cube2.mesh.volume()
    ratios = []
    for _ in range(100):
        u = rng.standard_normal(cube2.velocity_dofs)
        l2, l4 = field_norm(u, cube2, "L2"), field_norm(u, cube2, "L4")
        assert l2 <= vol**0.25 * l4 * (1 + 1e-12)
        h1 = math.hypot(l2, field_norm(u, cube2, "H1semi"))
        ratios.append(l4 / h1)
    assert all(math.isfinite(r) and r > 0 for r in ratios)


def test_polynomial_norm_closed_form(cube2):
    # ||(x^2, 0, 0)||_L2^2 = 1/5 on the unit cube
    from nscert.expr import parse

    u = interpolate(parse("(x^2, 0, 0)"), cube2)
    assert field_norm(u, cube2) == pytest.approx(math.sqrt(0.2), rel=1e-12)


def test_expr_sobolev(cube2):
    m = cube2.mesh
    assert expr_sobolev_norm(catalog.constant((1, 0, 0)), m, 2) == pytest.approx(1.0, rel=1e-12)
    assert expr_sobolev_norm(catalog.linear(), m, 1) == pytest.approx(math.sqrt(4 / 3), rel=1e-12)
    a = expr_sobolev_norm(catalog.sine(), m, 2)
    b = expr_sobolev_norm(catalog.sine(), refine_uniform(m), 2)
    assert a == pytest.approx(b, rel=1e-6)
    # closed form: ||s||^2 = 1/8, |grad s|^2 = 3 pi^2/8, |D^2 s|^2 = (3 pi^4 + 3 pi^4)/8 (pure plus mixed once)
    exact = math.sqrt(1 / 8 + 3 * math.pi**2 / 8 + 6 * math.pi**4 / 8)
    assert b == pytest.approx(exact, rel=1e-6)


def test_linf_time(cube2):
    tr = run(catalog.zero(), 0.1, 2, 1.0, None, cube2)
    assert linf_time_norm(tr, "L4") == 0.0
    tr = run(catalog.sine(), 0.01, 4, 1.0, None, cube2)
    col = [float(r.split(",")[5]) for r in tr.diagnostics_csv().splitlines()[1:]]
    assert linf_time_norm(tr, "L4") == max(col)
    one = run(catalog.sine(), 0.01, 1, 1.0, None, cube2)
    assert linf_time_norm(one, "L4") == max(field_norm(one.level(n), cube2, "L4") for n in (0, 1))


def test_energy_ledger(cube2):
    assert energy_ledger(run(catalog.zero(), 0.1, 2, 1.0, None, cube2)).min_slack == 0.0
    rng = np.random.default_rng(3)
    u0 = zero_trace(interpolate(catalog.zero(), cube2), cube2)
    u0.velocity[cube2.interior_velocity_dofs] = rng.standard_normal(len(cube2.interior_velocity_dofs))
    led = energy_ledger(run(u0, 0.01, 5, 0.5, None, cube2))
    assert led.passed and len(led.slack) == 5


def test_norm_report(cube2):
    tr = run(catalog.sine(), 0.01, 3, 1.0, None, cube2)
    rep = norm_report(tr, catalog.sine(), cube2)
    assert list(rep.running_max_l4) == sorted(rep.running_max_l4)
    assert rep.u0_h2 >= rep.u0_h1 > 0
    assert rep.to_csv().count("\n") == 5
    assert any("full H2" in line for line in rep.summary_lines())
