import pytest

from dflab.metrics import roc_curve
from dflab.reporting import REFERENCE_BASELINES, bar_chart_svg, roc_svg


class TestRocSvg:
    def test_polyline_present_and_deterministic(self):
        curve = roc_curve([1, 1, 0, 0], [0.9, 0.6, 0.4, 0.2])
        svg = roc_svg(curve)
        assert svg.startswith("<svg")
        assert svg.rstrip().endswith("</svg>")
        assert '<polyline class="roc"' in svg
        assert "false positive rate" in svg
        assert svg == roc_svg(curve)


class TestBarChartSvg:
    def test_one_group_per_model(self):
        groups = [
            ("mlp", {"precision": 0.69, "recall": 0.61}),
            ("lstm", {"precision": 0.718, "recall": 0.814}),
        ]
        svg = bar_chart_svg("Precision and recall", groups, ["precision", "recall"])
        assert svg.count('class="group"') == 2
        assert svg.count('class="bar"') == 4
        assert "81.4" in svg

    def test_undefined_value_renders_na(self):
        svg = bar_chart_svg("Accuracy", [("m", {"accuracy": None})], ["accuracy"])
        assert "n/a" in svg
        assert svg.count('class="bar"') == 0

    def test_empty_groups_rejected(self):
        with pytest.raises(ValueError):
            bar_chart_svg("x", [], ["accuracy"])


class TestReferenceBaselines:
    def test_published_reference_rows(self):
        assert REFERENCE_BASELINES["CNN"].accuracy == pytest.approx(0.883)
        assert REFERENCE_BASELINES["CNN"].precision == pytest.approx(0.899)
        assert REFERENCE_BASELINES["SVM"].accuracy == pytest.approx(0.817)
        assert REFERENCE_BASELINES["SVM"].recall == pytest.approx(0.772)
