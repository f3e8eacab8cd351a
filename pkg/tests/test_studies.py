import pytest

from nscert import catalog, studies
from nscert.projection import cube_meshes


def test_interpolation_study_small():
    table = studies.interpolation_study(catalog.sine(), cube_meshes([1, 2, 4]))
    errs = [r.velocity_l2 for r in table.rows]
    assert errs[0] > errs[1] > errs[2]
    assert table.orders["velocity_l2"] > table.orders["velocity_h1semi"] > 1.0
    lines = table.to_csv().splitlines()
    assert lines[0] == "h,velocity_l2,velocity_h1semi"
    assert len(lines) == 5 and lines[-1].startswith("order,")


def test_interpolation_of_quadratic_is_exact():
    table = studies.interpolation_study(catalog.linear(), cube_meshes([1, 2, 3]))
    assert max(r.velocity_l2 for r in table.rows) < 1e-13


def test_study_needs_three_levels():
    with pytest.raises(ValueError):
        studies.interpolation_study(catalog.sine(), cube_meshes([1, 2]))
    with pytest.raises(ValueError):
        studies.manufactured_time_study(taus=(0.1, 0.05))


def test_manufactured_error_includes_initial_level(cube2):
    w, q = catalog.manufactured_pair()
    err, steps = studies.manufactured_error(w, q, 1.0, 0.05, 0.1, cube2)
    assert steps == 2 and err > 0


def test_time_table_step_column():
    table = studies.manufactured_time_study(n=2, taus=(0.1, 0.05, 0.025), T=0.1)
    assert table.to_csv().splitlines()[0].startswith("tau,")
    assert [r.steps for r in table.rows] == [1, 2, 4]
