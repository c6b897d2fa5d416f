"""Tests for report files, comparisons and checkpoint evaluation"""
import csv
import io
import json

import numpy as np
import pytest
from rich.console import Console

from bargebench.audio.corpus import ToyBabblePool, ToyMusicPool, ToySpeechPool
from bargebench.autodiff.checkpoint import checkpoint_digest, save_checkpoint
from bargebench.errors import ConfigError, StorageError
from bargebench.evaluate import evaluate, load_model, report_from_scores, score_examples
from bargebench.metrics import EvalReport, ScoredSet
from bargebench.model.config import TrainConfig
from bargebench.model.params import ModelParams
from bargebench.model.train import Trainer
from bargebench.report import (
    COMPARISON_CSV,
    MAE_CHART_SVG,
    REPORT_CSV,
    REPORT_JSON,
    ROC_SVG,
    comparison_rows,
    load_report,
    mae_chart_svg,
    print_report_table,
    report_names,
    write_comparison,
    write_report,
)
from bargebench.room.dataset import DatasetPlan, SourcePools, build_dataset


def _report(selfref_mae=0.2, music=True):
    sets = [
        ScoredSet([0.9, 0.2, 0.6, 0.4], [1, 0, 1, 0], "NonPlayback"),
        ScoredSet([selfref_mae, selfref_mae], [0, 0], "SelfReferencing"),
    ]
    if music:
        sets.append(ScoredSet([0.8, 0.7, 0.3], [1, 0, 0], "PlaybackMusic"))
    return EvalReport.from_sets(sets, {"mask_subnet": "C"})


class TestReportFiles:
    """Test writing and loading reports"""

    def test_write_report(self, temp_dir):
        """Test JSON, CSV and ROC files are written"""
        written = write_report(_report(), temp_dir)
        assert set(written) == {"report_json", "report_csv", "roc_svg"}
        assert (temp_dir / REPORT_JSON).exists()
        assert (temp_dir / REPORT_CSV).read_text().startswith("kind,auc,eer,mae,n\n")
        svg = (temp_dir / ROC_SVG).read_text()
        assert svg.count("<polyline") == 2
        assert "SelfReferencing" not in svg

    def test_write_without_roc(self, temp_dir):
        """Test the ROC chart is optional"""
        written = write_report(_report(), temp_dir, with_roc=False)
        assert "roc_svg" not in written
        assert not (temp_dir / ROC_SVG).exists()

    def test_roc_svg_stable(self, temp_dir):
        """Test the same report renders the same bytes"""
        write_report(_report(), temp_dir / "a")
        write_report(_report(), temp_dir / "b")
        assert (temp_dir / "a" / ROC_SVG).read_bytes() == (temp_dir / "b" / ROC_SVG).read_bytes()

    def test_load_round_trip(self, temp_dir):
        """Test a written report loads back unchanged"""
        write_report(_report(), temp_dir)
        assert load_report(temp_dir / REPORT_JSON).to_json() == _report().to_json()

    def test_load_missing(self, temp_dir):
        """Test a missing report is a storage error"""
        with pytest.raises(StorageError):
            load_report(temp_dir / "absent.json")

    def test_load_rejects_other_documents(self, temp_dir):
        """Test schema validation rejects non-report JSON"""
        path = temp_dir / "bad.json"
        path.write_text(json.dumps({"format": "bargebench-report", "version": 1, "kinds": {"Kitchen": {}}}))
        with pytest.raises(ConfigError):
            load_report(path)
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_report(path)


class TestComparison:
    """Test merging several reports"""

    def test_names_from_stems(self, temp_dir):
        """Test distinct stems are used as column names"""
        assert report_names([temp_dir / "base.json", temp_dir / "subnet_c.json"]) == ["base", "subnet_c"]

    def test_names_from_parents_on_collision(self, temp_dir):
        """Test colliding stems fall back to the parent directory"""
        paths = [temp_dir / "baseline" / "report.json", temp_dir / "subnet_c" / "report.json"]
        assert report_names(paths) == ["baseline", "subnet_c"]

    def test_names_deduplicated(self, temp_dir):
        """Test identical parents get a numeric suffix"""
        paths = [temp_dir / "run" / "report.json", temp_dir / "run" / "report.json"]
        assert report_names(paths) == ["run", "run#2"]

    def test_rows_long_form(self):
        """Test one row per kind and metric with one column per report"""
        rows = comparison_rows({"base": _report(0.4), "c": _report(0.1)})
        assert rows[0] == ["kind", "metric", "base", "c"]
        assert len(rows) == 1 + 3 * 4
        selfref = {r[1]: r[2:] for r in rows if r[0] == "SelfReferencing"}
        assert selfref["auc"] == ["", ""]
        assert float(selfref["mae"][0]) == pytest.approx(0.4)
        assert float(selfref["mae"][1]) == pytest.approx(0.1)
        assert selfref["n"] == ["2", "2"]

    def test_single_report(self):
        """Test one report passes through with its own column"""
        rows = comparison_rows({"only": _report()})
        assert rows[0] == ["kind", "metric", "only"]
        mae = next(r for r in rows if r[:2] == ["NonPlayback", "mae"])
        assert float(mae[2]) == pytest.approx(_report().kinds["NonPlayback"].mae)

    def test_kind_sets_must_match(self):
        """Test reports over different scenario kinds are refused"""
        with pytest.raises(ConfigError):
            comparison_rows({"a": _report(), "b": _report(music=False)})

    def test_nothing_to_compare(self):
        """Test an empty comparison is refused"""
        with pytest.raises(ConfigError):
            comparison_rows({})

    def test_mae_chart(self):
        """Test one bar per report labelled in percent"""
        svg = mae_chart_svg({"base": _report(0.4), "c": _report(0.1)})
        assert svg.count("<rect") == 2
        assert ">40.00<" in svg and ">10.00<" in svg

    def test_write_comparison(self, temp_dir):
        """Test the comparison table and chart land in the output directory"""
        written = write_comparison({"base": _report(0.4), "c": _report(0.1)}, temp_dir)
        assert written["table_csv"] == temp_dir / COMPARISON_CSV
        assert written["chart_svg"] == temp_dir / MAE_CHART_SVG
        rows = list(csv.reader(io.StringIO((temp_dir / COMPARISON_CSV).read_text())))
        assert rows[0] == ["kind", "metric", "base", "c"]

    def test_print_table(self):
        """Test the console table shows percentages and dashes for undefined metrics"""
        buf = io.StringIO()
        print_report_table(_report(), Console(file=buf, width=120), title="run")
        text = buf.getvalue()
        assert "SelfReferencing" in text
        assert "100.00" in text
        assert "-" in text


@pytest.fixture
def trained_run(temp_dir, tiny_config):
    """Build a small dataset and train a one-epoch checkpoint on it"""
    plan = DatasetPlan(
        seed=21,
        counts={"NonPlayback": 2, "PlaybackMusic": 2, "SelfReferencing": 2},
        keywords=["hey", "robot"],
        max_duration_s=0.3,
        max_order=1,
    )
    pools = SourcePools(ToySpeechPool(["hey", "robot"]), ToyMusicPool(), ToyBabblePool())
    manifest = build_dataset(plan, pools, temp_dir / "data")
    tc = TrainConfig(epochs=1, batch_size=2, learning_rate=1e-2, validation_fraction=0.0, seed=3)
    trainer = Trainer(tiny_config, tc, temp_dir / "run")
    summary = trainer.fit(trainer.load(manifest))
    return manifest, summary


class TestEvaluate:
    """Test scoring checkpoints"""

    def test_load_model(self, trained_run, tiny_config):
        """Test a checkpoint rebuilds frozen parameters of the saved architecture"""
        _, summary = trained_run
        params, meta = load_model(summary.checkpoint)
        assert params.config == tiny_config
        assert meta["epoch"] == 1
        assert all(not t.requires_grad for t in params.tensors.values())

    def test_load_model_needs_config(self, temp_dir):
        """Test a checkpoint without model_config metadata is refused"""
        path = save_checkpoint(temp_dir / "ck.json", {"w": np.zeros(2)}, {"epoch": 1})
        with pytest.raises(ConfigError, match="model_config"):
            load_model(path)

    def test_evaluate_groups_by_kind(self, trained_run):
        """Test the report covers every manifest kind with provenance"""
        manifest, summary = trained_run
        report = evaluate(summary.checkpoint, manifest)
        assert list(report.kinds) == ["NonPlayback", "PlaybackMusic", "SelfReferencing"]
        assert all(m.n == 2 for m in report.kinds.values())
        assert report.kinds["SelfReferencing"].auc is None
        assert report.metadata["checkpoint_digest"] == checkpoint_digest(summary.checkpoint)
        assert report.metadata["aec"] is False
        assert report.metadata["n"] == 6

    def test_evaluate_deterministic_across_threads(self, trained_run):
        """Test thread count does not change any metric"""
        manifest, summary = trained_run
        a = evaluate(summary.checkpoint, manifest, threads=1)
        b = evaluate(summary.checkpoint, manifest, threads=3)
        assert a.to_json() == b.to_json()

    def test_evaluate_with_aec(self, trained_run):
        """Test the NLMS front end is recorded in the report"""
        manifest, summary = trained_run
        report = evaluate(summary.checkpoint, manifest, aec={"enabled": True, "taps": 16, "step": 0.5, "eps": 1e-6})
        assert report.metadata["aec"] is True
        assert sum(m.n for m in report.kinds.values()) == 6


class TestScoring:
    """Test batched scoring"""

    def test_scores_in_input_order(self, tiny_config, example_factory):
        """Test grouped, chunked and threaded scoring keeps input order"""
        ex = example_factory(3, t_f=5) + example_factory(4, t_f=7, seed=1) + example_factory(2, t_f=5, seed=2)
        params = ModelParams.initialize(tiny_config, 0).frozen()
        together = score_examples(params, ex, threads=2)
        alone = np.array([score_examples(params, [e])[0] for e in ex])
        np.testing.assert_allclose(together, alone, atol=1e-12)
        assert np.all((together > 0.0) & (together < 1.0))

    def test_report_from_scores(self, example_factory):
        """Test scores are grouped by each example's kind"""
        ex = example_factory(4)
        report = report_from_scores(ex, np.array([0.1, 0.9, 0.2, 0.8]), {"n": 4})
        assert report.kinds["NonPlayback"].auc == 1.0
        assert report.metadata == {"n": 4}
