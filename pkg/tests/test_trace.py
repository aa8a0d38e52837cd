# -*- coding: utf-8 -*-
"""
tests/test_trace.py - 트레이스 CSV / 평가 지표 단위 테스트
============================================================

실행 방법:
    python -m pytest tests/test_trace.py -v
"""

import os
import sys
import json
import math
import shutil
import tempfile

import pytest

# 프로젝트 루트를 sys.path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.geometry import Pose2D
from data_io.trace import (
    EvalThresholds, TraceFormatError, absolute_trajectory_error, acceptance_table, dumps_summary,
    estimate_jumps, failure_detection, fraction_reliable, mae_exceedances_while_reliable,
    read_trace, recovery_cycle, reliability_error_correlation, summarize_trace, write_summary, write_trace,
)
from localization.state import CYCLE_REPORT_HEADER, CycleReport


def _report(cycle, error=0.0, reliability=0.95, mae=0.02, est_x=None, with_gt=True):
    """gt = (cycle·0.1, 0, 0), 추정은 x 방향으로 error 만큼 어긋남"""
    gt = Pose2D(0.1 * cycle, 0.0, 0.0)
    x = gt.x + error if est_x is None else est_x
    return CycleReport(
        cycle=cycle, time_s=0.1 * cycle, estimate=Pose2D(x, 0.0, 0.0), reliability=reliability,
        mae=mae, n_global_samples=0, n_unknown_beams=0, gt=gt if with_gt else None,
    )


def _trace(errors, reliabilities=None):
    reliabilities = reliabilities or [0.95] * len(errors)
    return [_report(i, e, r) for i, (e, r) in enumerate(zip(errors, reliabilities))]


# ═══════════════════════════════════════════
# CSV
# ═══════════════════════════════════════════

class TestTraceFile:
    """CSV 저장/로드와 형식 오류"""

    def setup_method(self):
        self.tmpdir = tempfile.mkdtemp()
        self.path = os.path.join(self.tmpdir, "run", "trace.csv")

    def teardown_method(self):
        shutil.rmtree(self.tmpdir, ignore_errors=True)

    def _write_text(self, text):
        os.makedirs(os.path.dirname(self.path), exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as f:
            f.write(text)

    def test_write_and_read(self):
        reports = [
            _report(0, 0.1),
            _report(1, 0.2, mae=None),
            _report(2, 0.0, reliability=float("nan"), with_gt=False),
        ]
        write_trace(reports, self.path)
        loaded = read_trace(self.path)
        assert len(loaded) == 3
        assert loaded[0].estimate == reports[0].estimate
        assert loaded[0].gt == reports[0].gt
        assert loaded[1].mae is None
        assert loaded[2].gt is None
        assert math.isnan(loaded[2].reliability)

    def test_header_and_blank_cells(self):
        write_trace([_report(0, with_gt=False, mae=None)], self.path)
        with open(self.path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == ",".join(CYCLE_REPORT_HEADER)
        cells = lines[1].split(",")
        assert cells[5:8] == ["", "", ""]
        assert cells[9] == ""

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            read_trace(self.path)

    @pytest.mark.parametrize("body, match", [
        ("", "빈"),
        ("cycle,time_s\n", "헤더"),
        (",".join(CYCLE_REPORT_HEADER) + "\n", "사이클"),
        (",".join(CYCLE_REPORT_HEADER) + "\n0,0.0,1.0\n", "2번째 줄"),
        (",".join(CYCLE_REPORT_HEADER) + "\nx,0.0,0,0,0,,,,0.5,,0,0\n", "2번째 줄"),
        (",".join(CYCLE_REPORT_HEADER) + "\n0,0.0,abc,0,0,,,,0.5,,0,0\n", "est_x"),
        (",".join(CYCLE_REPORT_HEADER) + "\n0,0.0,0,0,0,,,,,,0,0\n", "reliability"),
    ])
    def test_format_errors(self, body, match):
        self._write_text(body)
        with pytest.raises(TraceFormatError, match=match):
            read_trace(self.path)


# ═══════════════════════════════════════════
# 지표
# ═══════════════════════════════════════════

class TestMetrics:
    """궤적 오차, 상관, 회복, 실패 감지, 점프"""

    def test_ate(self):
        reports = _trace([0.3, 0.4]) + [_report(2, 5.0, with_gt=False)]
        assert absolute_trajectory_error(reports) == pytest.approx(math.sqrt(0.125))

    def test_ate_without_ground_truth(self):
        assert absolute_trajectory_error([_report(0, with_gt=False)]) is None

    def test_correlation(self):
        reports = _trace([0.1, 0.5, 1.0, 2.0], [0.9, 0.6, 0.3, 0.05])
        assert reliability_error_correlation(reports) < -0.9
        assert reliability_error_correlation(_trace([0.1, 0.5])) is None

    def test_recovery_cycle(self):
        assert recovery_cycle(_trace([1.0, 1.0] + [0.1] * 10), 0.3, 10) == 2
        assert recovery_cycle(_trace([1.0] + [0.1] * 9 + [1.0] + [0.1] * 5), 0.3, 10) is None
        assert recovery_cycle(_trace([0.1] * 3), 0.3, 3) == 0

    def test_fraction_reliable(self):
        reports = _trace([0.0] * 30, [0.1] * 20 + [0.95] * 5 + [0.5] * 5)
        assert fraction_reliable(reports, 0.9, 20) == pytest.approx(0.5)
        nan_reports = _trace([0.0] * 30, [float("nan")] * 30)
        assert fraction_reliable(nan_reports, 0.9, 20) is None

    def test_failure_detection(self):
        reports = _trace([0.1, 0.1, 0.6, 0.7, 0.8], [0.9, 0.9, 0.9, 0.5, 0.05])
        assert failure_detection(reports, 0.5, 0.1) == (2, 2)
        undetected = _trace([0.1, 0.6, 0.7], [0.9, 0.9, 0.9])
        assert failure_detection(undetected, 0.5, 0.1) == (1, None)
        assert failure_detection(_trace([0.1, 0.2]), 0.5, 0.1) == (None, None)

    def test_jumps(self):
        reports = [_report(0, est_x=0.0), _report(1, est_x=0.1), _report(2, est_x=1.1)]
        jumps = estimate_jumps(reports)
        assert jumps.tolist() == pytest.approx([0.1, 1.0])
        assert estimate_jumps(reports[:1]).size == 0

    def test_mae_exceedances(self):
        reports = [
            _report(0, mae=0.3, reliability=0.8),
            _report(1, mae=0.3, reliability=0.2),
            _report(2, mae=None, reliability=0.8),
            _report(3, mae=0.05, reliability=0.8),
        ]
        assert mae_exceedances_while_reliable(reports, d_th=0.1) == 1


# ═══════════════════════════════════════════
# 요약 / 합격 기준
# ═══════════════════════════════════════════

class TestSummary:
    """요약 dict 와 합격 기준 표"""

    def setup_method(self):
        self.tmpdir = tempfile.mkdtemp()

    def teardown_method(self):
        shutil.rmtree(self.tmpdir, ignore_errors=True)

    def test_empty_trace(self):
        with pytest.raises(TraceFormatError):
            summarize_trace([])

    def test_successful_tracking(self):
        summary = summarize_trace(_trace([0.05] * 40), d_th=0.1)
        assert summary["cycles"] == 40
        assert summary["ate"] == pytest.approx(0.05)
        assert summary["fraction_reliable"] == 1.0
        assert summary["recovery_cycle"] == 0
        assert summary["failure_onset_cycle"] is None
        assert summary["mae_exceed_while_reliable"] == 0
        assert summary["acceptance"] == {
            "tracking_reliability": True,
            "failure_detection": None,
            "relocalization": True,
            "jump_suppression": True,
        }

    def test_detected_failure(self):
        errors = [0.05] * 30 + [0.2 * k for k in range(1, 21)]
        reliabilities = [0.95] * 35 + [0.05] * 15
        summary = summarize_trace(_trace(errors, reliabilities))
        assert summary["failure_onset_cycle"] == 32
        assert summary["failure_detection_latency"] == 3
        assert summary["acceptance"]["failure_detection"] is True
        assert summary["acceptance"]["tracking_reliability"] is False

    def test_baseline_has_no_reliability_criteria(self):
        summary = summarize_trace(_trace([0.05] * 40, [float("nan")] * 40))
        assert summary["fraction_reliable"] is None
        assert summary["acceptance"]["tracking_reliability"] is None

    def test_jump_criterion(self):
        reports = [_report(i, est_x=x) for i, x in enumerate([0.0, 0.1, 3.2, 3.3])]
        summary = summarize_trace(reports)
        assert summary["max_estimate_jump"] == pytest.approx(3.1)
        assert acceptance_table(summary, EvalThresholds(max_jump=0.5))["jump_suppression"] is False

    def test_write_summary_json(self):
        summary = summarize_trace(_trace([0.05] * 5))
        summary["extra"] = float("nan")
        path = write_summary(summary, os.path.join(self.tmpdir, "out", "summary.json"))
        with open(path, encoding="utf-8") as f:
            loaded = json.load(f)
        assert loaded["extra"] is None
        assert loaded["cycles"] == 5
        assert json.loads(dumps_summary(summary))["ate"] == pytest.approx(0.05)


# ── 직접 실행 시 pytest 호출 ──
if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
