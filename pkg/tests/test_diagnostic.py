"""Tests for gain inversion and the measurement CSV pipeline."""
import math
from types import SimpleNamespace

import numpy as np
import pytest

from twinbeam import diagnostic
from twinbeam.analytic import effective_gains, nf_forward_closed, nf_general, nf_post_loss
from twinbeam.diagnostic import (
    CORRECTED_POWER_FLOOR,
    excess_noise_db,
    format_measurements,
    invert_batch,
    invert_gains,
    inversion_rows,
    predict_squeezing,
    read_measurements,
    synthesize_records,
    write_inversions,
)
from twinbeam.errors import DomainError, InputFormatError, NoSolution, NotConverged
from twinbeam.models import DetectionParams, InversionResult, MeasurementRecord, MediumParams


ETA = 0.85


def record_for(S, ta, eta=ETA, tb=1.0):
    ga, gb = effective_gains(MediumParams(S=S, ta=ta, tb=tb), DetectionParams.balanced(eta))
    return MeasurementRecord(0.0, ga, gb)


def test_lossless_gains_invert_to_unit_transmission():
    inv = invert_gains(MeasurementRecord(800.0, 3.0 * ETA, 2.0 * ETA), ETA)
    assert inv.converged
    assert inv.g_intrinsic == pytest.approx(3.0, abs=1e-9)
    assert inv.ta_inferred == pytest.approx(1.0, abs=1e-9)
    assert inv.ta_inferred <= 1.0
    assert inv.residual <= 1e-10


def test_round_trip_single_point():
    inv = invert_gains(record_for(0.9, 0.6), ETA)
    assert inv.g_intrinsic == pytest.approx(math.cosh(0.9) ** 2, abs=1e-8)
    assert inv.ta_inferred == pytest.approx(0.6, abs=1e-8)


def test_round_trip_grid():
    worst_s = worst_ta = 0.0
    for S in np.linspace(0.1, 2.5, 20):
        for ta in np.linspace(0.1, 1.0, 20):
            inv = invert_gains(record_for(S, ta), ETA)
            assert inv.converged and inv.residual <= 1e-10
            worst_s = max(worst_s, abs(inv.S - S))
            worst_ta = max(worst_ta, abs(inv.ta_inferred - ta))
    assert worst_s <= 1e-8
    assert worst_ta <= 1e-8


@pytest.mark.parametrize("tb", [0.5, 0.9])
def test_round_trip_with_assumed_conjugate_loss(tb):
    inv = invert_gains(record_for(1.1, 0.7, tb=tb), ETA, tb_assumed=tb)
    assert inv.S == pytest.approx(1.1, abs=1e-8)
    assert inv.ta_inferred == pytest.approx(0.7, abs=1e-8)
    assert inv.tb_assumed == tb


def test_least_squares_path_reports_its_method():
    inv = invert_gains(record_for(0.9, 0.6), ETA)
    assert inv.method == "levenberg-marquardt"
    assert inv.iterations > 0


@pytest.fixture
def failing_least_squares(monkeypatch):
    def stalled(fun, x0, **kwargs):
        return SimpleNamespace(x=np.array([0.0, 1.0]), status=0, nfev=1)

    monkeypatch.setattr(diagnostic, "least_squares", stalled)


def test_bisection_fallback_round_trips_grid(failing_least_squares):
    for S in np.linspace(0.1, 2.5, 20):
        for ta in np.linspace(0.1, 1.0, 20):
            inv = invert_gains(record_for(S, ta), ETA)
            assert inv.method == "bisection"
            assert inv.residual <= 1e-10
            assert inv.S == pytest.approx(S, abs=1e-8)
            assert inv.ta_inferred == pytest.approx(ta, abs=1e-8)
            assert inv.ta_inferred <= 1.0


@pytest.mark.parametrize("S", [1.363, 1.489, 1.868, 1.995])
def test_bisection_fallback_accepts_unit_transmission(failing_least_squares, S):
    inv = invert_gains(record_for(S, 1.0), ETA)
    assert inv.method == "bisection"
    assert inv.ta_inferred == 1.0
    assert inv.S == pytest.approx(S, abs=1e-9)


def test_bisection_fallback_rejects_infeasible_gains(failing_least_squares):
    with pytest.raises(NoSolution):
        invert_gains(MeasurementRecord(0.0, 3.0, 1.0), ETA)


def test_bisection_fallback_out_of_iterations(failing_least_squares):
    with pytest.raises(NotConverged):
        invert_gains(record_for(1.2, 0.5), ETA, max_iterations=1)


def test_inversion_is_deterministic():
    rec = record_for(1.3, 0.45)
    assert invert_gains(rec, ETA) == invert_gains(rec, ETA)


def test_no_conjugate_is_pure_absorption():
    inv = invert_gains(MeasurementRecord(0.0, 0.1, 0.0), 0.5)
    assert inv.S == 0.0
    assert inv.g_intrinsic == 1.0
    assert inv.ta_inferred == pytest.approx(0.2, rel=1e-15)
    assert inv.method == "unseeded"


def test_no_conjugate_with_gain_has_no_solution():
    with pytest.raises(NoSolution):
        invert_gains(MeasurementRecord(0.0, 1.0, 0.0), ETA)


def test_gains_beyond_any_medium_have_no_solution():
    # with a loss-free conjugate Ga - Gb <= eta; exceeding it needs Ta > 1
    with pytest.raises(NoSolution):
        invert_gains(MeasurementRecord(0.0, 3.0, 1.0), ETA)


@pytest.mark.parametrize("eta", [0.0, 1.5])
def test_inversion_rejects_bad_eta(eta):
    with pytest.raises(DomainError):
        invert_gains(MeasurementRecord(0.0, 1.0, 0.5), eta)


def test_inversion_rejects_zero_probe_gain():
    with pytest.raises(DomainError):
        invert_gains(MeasurementRecord(0.0, 0.0, 0.0), ETA)


def test_predict_squeezing_lossless_matches_post_loss():
    inv = invert_gains(MeasurementRecord(0.0, 3.0 * ETA, 2.0 * ETA), ETA)
    nf = predict_squeezing(inv, ETA)
    expected = nf_post_loss(3.0, DetectionParams.balanced(ETA)).nf_linear
    assert nf.nf_linear == pytest.approx(expected, abs=1e-9)
    assert nf.nf_db == pytest.approx(-4.949, abs=1e-3)


def test_predict_squeezing_is_forward_closed_form():
    inv = InversionResult(S=0.9, g_intrinsic=math.cosh(0.9) ** 2, ta_inferred=0.6, residual=0.0, converged=True)
    assert predict_squeezing(inv, ETA) == nf_forward_closed(0.9, 0.6, ETA)[0]


def test_predict_squeezing_without_mixing_is_shot_noise():
    inv = InversionResult(S=0.0, g_intrinsic=1.0, ta_inferred=1.0, residual=0.0, converged=True)
    assert predict_squeezing(inv, ETA).nf_linear == 1.0


def test_predict_squeezing_with_conjugate_loss_uses_general_model():
    inv = InversionResult(S=0.9, g_intrinsic=math.cosh(0.9) ** 2, ta_inferred=0.6, residual=0.0,
                          converged=True, tb_assumed=0.8)
    expected = nf_general(MediumParams(S=0.9, ta=0.6, tb=0.8), DetectionParams.balanced(ETA))
    assert predict_squeezing(inv, ETA) == expected


def test_predict_squeezing_requires_convergence():
    inv = InversionResult(S=0.9, g_intrinsic=2.0, ta_inferred=0.6, residual=1.0, converged=False)
    with pytest.raises(DomainError):
        predict_squeezing(inv, ETA)


def test_excess_noise_shot_noise_background_subtracts_nothing():
    assert excess_noise_db(-2.5, 0.0) == pytest.approx(-2.5, abs=1e-12)


def test_excess_noise_removes_background_excess():
    three_db = 10.0 * math.log10(2.0)
    assert excess_noise_db(three_db, three_db) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("meas,background", [(0.0, 3.01), (0.0, 10.0 * math.log10(2.0)), (0.0, 5.0)])
def test_excess_noise_background_above_measurement(meas, background):
    with pytest.raises(DomainError):
        excess_noise_db(meas, background)


def test_excess_noise_keeps_deep_squeezing_above_floor():
    assert CORRECTED_POWER_FLOOR < 0.01
    assert excess_noise_db(-20.0, 0.0) == pytest.approx(-20.0, abs=1e-12)


def test_invert_batch_keeps_order_and_failures():
    records = [
        MeasurementRecord(1.0, 3.0 * ETA, 2.0 * ETA),
        MeasurementRecord(2.0, 1.0, 0.0),
        record_for(0.7, 0.5),
    ]
    results = invert_batch(records, ETA)
    assert isinstance(results[0], InversionResult)
    assert isinstance(results[1], NoSolution)
    assert results[2].ta_inferred == pytest.approx(0.5, abs=1e-8)


def test_synthesized_records_invert_to_generators():
    points = [(800.0 + i, S, ta) for i, (S, ta) in enumerate([(0.4, 0.9), (1.2, 0.5), (2.0, 0.3)])]
    records = synthesize_records(points, ETA, technical_excess_db=0.5)
    for (detuning, S, ta), rec, inv in zip(points, records, invert_batch(records, ETA)):
        assert rec.detuning_mhz == detuning
        assert inv.S == pytest.approx(S, abs=1e-8)
        assert inv.ta_inferred == pytest.approx(ta, abs=1e-8)
        assert rec.nf_db_meas == pytest.approx(predict_squeezing(inv, ETA).nf_db + 0.5, abs=1e-7)


def test_read_measurements_fixture(synthetic_csv):
    records = read_measurements(synthetic_csv)
    assert [r.detuning_mhz for r in records] == [800.0, 810.0, 820.0, 830.0, 840.0]
    assert records[1] == MeasurementRecord(810.0, 2.55, 1.7, -4.1)
    assert records[2].nf_db_meas is None


def test_read_measurements_without_nf_column(tmp_path):
    path = tmp_path / "gains.csv"
    path.write_text("detuning_mhz,gain_probe,gain_conjugate\n800,1.7,0.85\n", encoding="utf-8")
    assert read_measurements(str(path)) == [MeasurementRecord(800.0, 1.7, 0.85)]


@pytest.mark.parametrize("body,line", [
    ("detuning,gain_probe,gain_conjugate\n800,1.7,0.85\n", 1),
    ("# comment\ndetuning_mhz,gain_probe,gain_conjugate\n800,1.7\n", 3),
    ("detuning_mhz,gain_probe,gain_conjugate\n800,1.7,0.85\n810,abc,0.85\n", 3),
    ("detuning_mhz,gain_probe,gain_conjugate\n800,-1.7,0.85\n", 2),
    ("", 1),
])
def test_read_measurements_reports_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(InputFormatError) as excinfo:
        read_measurements(str(path))
    assert excinfo.value.line == line
    assert str(excinfo.value).startswith(f"line {line}: ")


def test_read_measurements_rejects_invalid_utf8(tmp_path):
    path = tmp_path / "latin.csv"
    path.write_bytes(b"detuning_mhz,gain_probe,gain_conjugate\n800,1.7,0.85\n810,\xff\xfe,0.85\n")
    with pytest.raises(InputFormatError) as excinfo:
        read_measurements(str(path))
    assert excinfo.value.line == 3
    assert "UTF-8" in str(excinfo.value)


def test_read_measurements_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("detuning_mhz,gain_probe,gain_conjugate,nf_db\n", encoding="utf-8")
    assert read_measurements(str(path)) == []


def test_format_measurements_round_trips(tmp_path):
    records = [MeasurementRecord(800.0, 1.7, 0.85, -3.5), MeasurementRecord(810.0, 2.55, 1.7)]
    path = tmp_path / "m.csv"
    path.write_text(format_measurements(records), encoding="utf-8")
    assert read_measurements(str(path)) == records


def test_inversion_rows_mark_failures(synthetic_csv):
    records = read_measurements(synthetic_csv)
    header, rows, failures = inversion_rows(records, invert_batch(records, ETA), ETA, background_db=1.0)
    assert header == ["detuning_mhz", "G_intrinsic", "Ta", "residual", "nf_pred_db",
                      "nf_meas_db", "excess_db", "nf_corrected_db"]
    assert failures == 1
    lossless = rows[1]
    assert lossless[1] == pytest.approx(3.0, abs=1e-9)
    assert lossless[2] == pytest.approx(1.0, abs=1e-9)
    assert lossless[4] == pytest.approx(10.0 * math.log10(0.32), abs=1e-8)
    assert lossless[6] == pytest.approx(-4.1 - 10.0 * math.log10(0.32), abs=1e-8)
    assert all(math.isnan(v) for v in rows[4][1:5])
    assert math.isnan(rows[2][5])


def test_write_inversions(tmp_path, synthetic_csv):
    records = read_measurements(synthetic_csv)
    out = tmp_path / "inv.csv"
    failures = write_inversions(str(out), records, invert_batch(records, ETA), ETA)
    lines = out.read_text(encoding="utf-8").split("\n")
    assert failures == 1
    assert lines[0] == "detuning_mhz,G_intrinsic,Ta,residual,nf_pred_db,nf_meas_db,excess_db"
    assert lines[2].startswith("810,3,1,")
    assert lines[5].startswith("840,NaN,NaN,NaN,NaN,0.5,NaN")
    assert "\r" not in out.read_text(encoding="utf-8")
