from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from superradiance import diagram
from superradiance.diagram import (
    Axis,
    BoundaryNotFound,
    Order,
    ScanSpec,
    classify_order,
    locate_crossings,
    order_from_jump,
    refine_boundary,
    scan_2d,
    scan_3d,
    scan_rabi_line,
)
from superradiance.meanfield import minimize_global
from superradiance.model import InvalidParameterError, ModelParams, TrkCoupling, trk_check

LADDER = ModelParams.from_strengths(0, 0, 0, D=3.0, omega10=0.1, omega21=1.0)
V_TYPE = ModelParams.from_strengths(0, 0, 0, D=1.0, omega10=1.0, omega21=0.1)


def ladder_spec(steps=41, r1=(0.0, 1.5), r2=(0.0, 2.0)):
    return ScanSpec(LADDER, Axis("f01", *r1, steps=steps), Axis("f12", *r2, steps=steps))


@pytest.fixture(scope="module")
def ladder_grid():
    return scan_2d(ladder_spec(41))


@pytest.fixture(scope="module")
def v_grid():
    return scan_2d(ScanSpec(V_TYPE, Axis("f01", 0, 1.5, 41), Axis("f02", 0, 1.5, 41)))


# --- synthetic lines ----------------------------------------------------------

def test_sqrt_onset_is_second_order():
    fc = 0.3137
    pos, jump = locate_crossings(lambda t: np.sqrt(np.clip(t - fc, 0, None)), [0.3], [0.32])
    assert pos[0] == pytest.approx(fc, abs=1e-9)
    assert order_from_jump(jump[0]) is Order.SECOND


def test_step_onset_is_first_order():
    fc = 0.55
    pos, jump = locate_crossings(lambda t: np.where(t > fc, 0.4, 0.0), [0.5], [0.6])
    assert pos[0] == pytest.approx(fc, abs=1e-9)
    assert jump[0] == pytest.approx(0.4)
    assert order_from_jump(jump[0]) is Order.FIRST
    assert order_from_jump(jump[0], coexistence=False) is Order.AMBIGUOUS


def test_reverse_direction_crossing():
    pos, jump = locate_crossings(lambda t: np.where(t < 0.2, 0.3, 0.0), [0.1], [0.3])
    assert pos[0] == pytest.approx(0.2, abs=1e-9)
    assert jump[0] == pytest.approx(0.3)


def test_locate_requires_a_flip():
    with pytest.raises(BoundaryNotFound):
        locate_crossings(lambda t: np.zeros_like(t), [0.0], [1.0])


# --- scans --------------------------------------------------------------------

def test_trivial_zero_grid():
    spec = ScanSpec(LADDER, Axis("f01", 0, 0, 3), Axis("f12", 0, 0, 3))
    grid = scan_2d(spec)
    assert grid.shape == (3, 3)
    assert not grid.superradiant.any()
    assert np.all(grid.x == 0)


def test_axis_validation():
    with pytest.raises(InvalidParameterError):
        Axis("f03", 0, 1)
    with pytest.raises(InvalidParameterError):
        Axis("f01", 0, 2.5)
    with pytest.raises(InvalidParameterError):
        ScanSpec(LADDER, Axis("f01", 0, 1), Axis("f01", 0, 1))
    with pytest.raises(InvalidParameterError):
        ScanSpec(ModelParams.from_rabi(0, 0, 0, D=1, omega10=1, omega21=1),
                 Axis("f01", 0, 1), Axis("f12", 0, 1))


def test_grid_cells_agree_with_pointwise_minimisation(ladder_grid):
    rng = np.random.default_rng(2)
    for _ in range(15):
        i, j = rng.integers(0, 41, 2)
        f = ladder_grid.strengths(i, j)
        p = ModelParams.from_strengths(f["f01"], f["f02"], f["f12"], D=3.0, omega10=0.1,
                                       omega21=1.0)
        s = minimize_global(p)
        state, feasible = ladder_grid.cell(i, j)
        assert state.x == s.x and state.energy_per_atom == s.energy_per_atom
        assert feasible == trk_check(f["f01"], f["f02"], f["f12"]).feasible


def test_mask_correctness(ladder_grid):
    for i, j in zip(*np.nonzero(ladder_grid.sr_trk_mask)):
        assert trk_check(**ladder_grid.strengths(i, j)).feasible


def test_ladder_extended_overlap(ladder_grid):
    assert ladder_grid.sr_trk_count > 0


def test_v_type_no_overlap(v_grid):
    assert v_grid.superradiant.any()
    assert v_grid.sr_trk_count == 0


def test_csv_format(v_grid):
    text = v_grid.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == diagram.CSV_HEADER
    assert len(rows) == 1 + 41 * 41
    for row in rows[1:50]:
        assert row[10] in ("N", "SR")
        assert row[11] in ("0", "1")
        for v in row[:10]:
            float(v)
            assert len(v.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 9
    sr_row = next(r for r in rows[1:] if r[10] == "SR")
    p0, p1, p2 = map(float, sr_row[7:10])
    assert p0 + p1 + p2 == pytest.approx(1.0, abs=1e-8)


def test_scan_deterministic_across_runs_and_threads():
    spec = ladder_spec(23)
    a = scan_2d(spec, threads=1).to_csv()
    b = scan_2d(spec, threads=1).to_csv()
    c = scan_2d(spec, threads=4).to_csv()
    assert a == b == c


def test_area_trapezoid_weights():
    spec = ScanSpec(LADDER, Axis("f01", 0, 1, 11), Axis("f12", 0, 2, 21))
    grid = scan_2d(spec)
    assert grid.area(np.ones(grid.shape, dtype=bool)) == pytest.approx(2.0)


# --- boundaries -------------------------------------------------------------

def test_v_crossings_second_order_on_analytic_line(v_grid):
    crossings = classify_order(v_grid)
    assert crossings
    for c in crossings:
        assert c.order is Order.SECOND
        assert not c.trk_feasible
        # normal state loses stability at f01 + f02 = (1 + 4D)/(4D)
        assert c.axis1 + c.axis2 == pytest.approx(1.25, abs=1e-8)


def test_ladder_first_order_crossing_with_coexistence():
    spec = ladder_spec(41, r1=(0.6, 1.0), r2=(1.2, 2.0))
    grid = scan_2d(spec)
    line = int(np.argmin(np.abs(grid.values1 - 0.72)))
    seg = refine_boundary(grid, line, "axis2", check_coexistence=True)
    c = seg.points[0]
    assert c.order is Order.FIRST and c.coexistence
    assert c.trk_feasible
    assert abs(c.energy_gap) < 1e-6
    assert c.jump > 1e-2


def test_ladder_low_f01_line_crossing_outside_trk():
    # at f01 = 0.1 the discontinuous crossing sits above the TRK line f12 = 1 + f01
    spec = ladder_spec(41, r1=(0.0, 0.2), r2=(1.5, 2.0))
    grid = scan_2d(spec)
    line = int(np.argmin(np.abs(grid.values1 - 0.1)))
    c = refine_boundary(grid, line, "axis2", check_coexistence=True).points[0]
    assert c.order is Order.FIRST
    assert not c.trk_feasible


def test_refine_boundary_not_found():
    grid = scan_2d(ScanSpec(LADDER, Axis("f01", 0, 0.5, 5), Axis("f12", 0, 0.5, 5)))
    with pytest.raises(BoundaryNotFound):
        refine_boundary(grid, 0)


def test_second_order_sqrt_scaling():
    # along a V-type line the onset is continuous: |x| ~ delta**0.5
    base = ModelParams.from_strengths(0.6, 0.0, 0.0, D=1.0, omega10=1.0, omega21=0.1)
    fc = 1.25 - 0.6
    deltas = np.logspace(-4, -2, 9)
    xs = []
    for d in deltas:
        p = ModelParams(base.omega10, base.omega21, base.D, TrkCoupling(0.6, fc + d, 0.0))
        xs.append(minimize_global(p).abs_x)
    slope = np.polyfit(np.log(deltas), np.log(xs), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.1)


def test_dicke_rabi_line():
    base = ModelParams.from_rabi(0, 0, 0, D=0.0, omega10=1.0, omega21=1.0)
    line = scan_rabi_line(base, "Omega01", 0.0, 1.0, 101)
    assert len(line.crossings) == 1
    pos, jump, order = line.crossings[0]
    assert pos == pytest.approx(0.5, abs=1e-8)
    assert order is Order.SECOND


def test_boundary_csv_and_summary(v_grid):
    crossings = classify_order(v_grid)
    buf = io.StringIO()
    diagram.write_boundary_csv(crossings, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["axis1", "axis2", "jump", "order"]
    assert {r[3] for r in rows[1:]} == {"Second"}
    data = diagram.summary(v_grid, crossings)
    assert data["sr_trk_cells"] == 0
    assert data["boundary_orders"]["Second"] == len(crossings)
    out = io.StringIO()
    diagram.dump_summary(data, out)
    assert json.loads(out.getvalue())["config"]["D"] == 1.0


# --- volumes ------------------------------------------------------------------

def test_scan_3d_reference_point_coarse():
    base = ModelParams.from_strengths(0, 0, 0, D=5.0, omega10=0.17, omega21=1.0)
    vox = scan_3d(base, steps=21)
    assert len(vox) > 0
    for row in vox.points:
        assert trk_check(*row).feasible
    assert vox.nearest_voxel(0.3995, 0.4069, 0.735) == (0.4, 0.4, 0.75)
    assert vox.contains(0.3995, 0.4069, 0.735)


def test_scan_3d_single_origin_voxel():
    base = ModelParams.from_strengths(0, 0, 0, D=5.0, omega10=0.17, omega21=1.0)
    vox = scan_3d(base, steps=1, ranges=(0.0, 0.0))
    assert vox.total == 1 and len(vox) == 0


def test_scan_3d_small_diamagnetic_term_smoke():
    base = ModelParams.from_strengths(0, 0, 0, D=0.01, omega10=0.17, omega21=1.0)
    vox = scan_3d(base, steps=6)
    assert vox.evaluated > 0
    assert all(trk_check(*row).feasible for row in vox.points)


def test_scan_3d_reference_point_full_resolution():
    base = ModelParams.from_strengths(0, 0, 0, D=5.0, omega10=0.17, omega21=1.0)
    vox = scan_3d(base, steps=41)
    assert vox.nearest_voxel(0.3995, 0.4069, 0.735) == pytest.approx((0.4, 0.4, 0.725))
    assert vox.contains(0.3995, 0.4069, 0.735)


@pytest.mark.slow
def test_resolution_convergence_of_sr_trk_area():
    # SR∩TRK is empty on [0, 1]^2 for these parameters, so use the extended ladder range
    areas = [scan_2d(ladder_spec(n)).area() for n in (201, 401)]
    assert areas[0] > 0
    assert abs(areas[1] - areas[0]) / areas[1] < 0.02
