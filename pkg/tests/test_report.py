import pytest

from mplan.backends import ProvenanceLog, mock_suite
from mplan.backends.base import RoleClient
from mplan.errors import MissingReference, ValidationError
from mplan.metrics import fleiss_kappa
from mplan.plan_model import (ImageStore, PlanBundle, PlanStep, TaskGoal)
from mplan.report import (JUDGE_KEYS, JUDGE_TEXT_CRITERIA, METRIC_COLUMNS,
                          MetricRow, aggregate_report, judge_plan)
from mplan.synth import make_png, make_reference


def _bundle(tmp_path, n=4, goal_id="g1", method="ours", source="synthetic"):
    store = ImageStore(tmp_path / goal_id / "blobs")
    steps = []
    for k in range(1, n + 1):
        ref = store.put(make_png(seed=hash((goal_id, k)) % 10_000))
        steps.append(PlanStep(index=k, draft_text=f"draft {k}",
                              final_text=f"rinse the jar in step {k}",
                              image=ref))
    goal = TaskGoal(id=goal_id, goal_text="grow onions in a jar", source=source)
    bundle = PlanBundle(goal=goal, method=method, steps=tuple(steps),
                        backend_fingerprint="0" * 64, seed=1)
    return bundle, store


class _ConstantJudgeText(RoleClient):
    role = "text_generator"

    def complete_text(self, prompt, stage="text"):
        self._record(stage, prompt, "5", 0.0)
        return ("Correctness: 5\nExecutability: 5\nCoherence: 5\n"
                "Informativeness: 5")


class _ConstantJudgeVision(RoleClient):
    role = "vision_interpreter"

    def __init__(self, log=None, answer="Score: 5"):
        super().__init__(log)
        self.answer = answer

    def interpret_image(self, image, prompt, extra_images=(), stage="vision"):
        self._record(stage, prompt, self.answer, 0.0)
        return self.answer


def _judging_suite(answer="Score: 5"):
    suite = mock_suite(seed=0)
    suite.text_generator = _ConstantJudgeText(log=suite.log)
    suite.vision_interpreter = _ConstantJudgeVision(log=suite.log, answer=answer)
    return suite


def test_judge_constant_fives(tmp_path):
    bundle, store = _bundle(tmp_path)
    suite = _judging_suite()
    reference = make_reference(bundle.goal, seed=0)
    scores, coverage = judge_plan(bundle, reference, store, suite)
    assert all(scores[k] == 5.0 for k in JUDGE_KEYS)
    assert coverage["t_i"] == (4, 4)
    assert coverage["i_i"] == (3, 3)


def test_judge_call_counts_four_step_plan(tmp_path):
    bundle, store = _bundle(tmp_path, n=4)
    suite = _judging_suite()
    log = ProvenanceLog()
    scoped = suite.with_log(log)
    judge_plan(bundle, make_reference(bundle.goal, seed=0), store, scoped)
    stages = [e.stage for e in log.entries()]
    assert stages.count("judge_text") == 1
    assert stages.count("judge_text_image") == 4
    assert stages.count("judge_image_pair") == 3
    assert len(stages) == 1 + 4 + 3


def test_judge_missing_scores_not_fabricated(tmp_path):
    bundle, store = _bundle(tmp_path, n=3)
    suite = _judging_suite(answer="no rating today")
    scores, coverage = judge_plan(bundle, make_reference(bundle.goal, seed=0),
                                  store, suite)
    assert scores["t_i"] is None
    assert scores["i_i"] is None
    assert coverage["t_i"] == (0, 3)


def test_judge_image_pair_receives_both_images(tmp_path):
    bundle, store = _bundle(tmp_path, n=3)
    suite = mock_suite(seed=0)
    suite.text_generator = _ConstantJudgeText(log=suite.log)
    seen = []

    class Peek(_ConstantJudgeVision):
        def interpret_image(self, image, prompt, extra_images=(), stage="vision"):
            seen.append((stage, len(extra_images)))
            return super().interpret_image(image, prompt, extra_images, stage)

    suite.vision_interpreter = Peek(log=suite.log)
    judge_plan(bundle, make_reference(bundle.goal, seed=0), store, suite)
    pair_calls = [s for s in seen if s[0] == "judge_image_pair"]
    assert pair_calls and all(extra == 1 for _, extra in pair_calls)


def test_metric_columns_exact():
    assert METRIC_COLUMNS == ("BertScore", "R-1", "R-2", "R-L", "CLIP", "PPL",
                              "Corr.", "Exec.", "Coh.", "Info.", "T-I", "I-I")
    assert len(METRIC_COLUMNS) == 12


def test_aggregate_report_shape_and_header(tmp_path):
    suite = mock_suite(seed=3)
    bundles = []
    references = {}
    for method in ("ours", "vanilla"):
        for source in ("instructables", "wikihow"):
            goal_id = f"{method}-{source}"
            bundle, store = _bundle(tmp_path, n=3, goal_id=goal_id,
                                    method=method, source=source)
            bundles.append((bundle, store))
            references[goal_id] = make_reference(bundle.goal, seed=1)
    report = aggregate_report(bundles, references, suite)
    assert len(report.rows) == 4
    for row in report.rows:
        assert len(row.values_in_column_order()) == 12
    text = report.render_text()
    header = " ".join(text.splitlines()[0].split())
    assert " ".join(METRIC_COLUMNS) in header
    data = report.to_dict()
    assert data["columns"] == list(METRIC_COLUMNS)


def test_aggregate_single_task_row_equals_task_values(tmp_path):
    suite = _judging_suite()
    bundle, store = _bundle(tmp_path, n=3)
    references = {bundle.goal.id: make_reference(bundle.goal, seed=1)}
    report = aggregate_report([(bundle, store)], references, suite)
    row = report.rows[0]
    assert row.n_tasks == 1
    assert row.judge["correctness"] == 5.0
    assert row.ppl == pytest.approx(2.0)  # constant mock scorer


def test_aggregate_missing_reference(tmp_path):
    suite = mock_suite(seed=3)
    bundle, store = _bundle(tmp_path, n=2)
    with pytest.raises(MissingReference):
        aggregate_report([(bundle, store)], {}, suite)


def test_metric_row_range_validation():
    judge = {k: 3.0 for k in JUDGE_KEYS}
    MetricRow(method="ours", corpus="wikihow", n_tasks=1, bertscore=0.5,
              rouge1=0.3, rouge2=0.1, rouge_l=0.2, clip=40.0, ppl=2.0,
              judge=judge)
    with pytest.raises(ValidationError):
        MetricRow(method="ours", corpus="wikihow", n_tasks=1, bertscore=0.5,
                  rouge1=1.3, rouge2=0.1, rouge_l=0.2, clip=40.0, ppl=2.0,
                  judge=judge)
    with pytest.raises(ValidationError):
        MetricRow(method="ours", corpus="wikihow", n_tasks=1, bertscore=0.5,
                  rouge1=0.3, rouge2=0.1, rouge_l=0.2, clip=140.0, ppl=2.0,
                  judge=judge)
    with pytest.raises(ValidationError):
        MetricRow(method="ours", corpus="wikihow", n_tasks=1, bertscore=0.5,
                  rouge1=0.3, rouge2=0.1, rouge_l=0.2, clip=40.0, ppl=-1.0,
                  judge=judge)


def test_external_rows_load_into_the_table(tmp_path):
    import json

    from mplan.report import EvalReport, load_external_rows

    path = tmp_path / "external.json"
    path.write_text(json.dumps([{
        "method": "prior-work", "corpus": "wikihow", "n_tasks": 50,
        "bertscore": 0.812, "rouge1": 0.215, "rouge2": 0.054,
        "rouge_l": 0.204, "clip": 14.58, "ppl": 6.01,
        "judge": {"correctness": 3.32, "executability": 3.47,
                  "coherence": 3.51, "informativeness": 3.82,
                  "t_i": 1.58, "i_i": 2.31},
    }]))
    rows = load_external_rows(path)
    assert len(rows) == 1
    assert rows[0].coverage == {"external": 1}
    report = EvalReport(rows=rows, metadata={})
    rendered = report.render_text()
    assert "prior-work" in rendered
    assert "21.5" in rendered  # rouge1 x100 in the text table


def test_judge_criteria_names():
    assert JUDGE_TEXT_CRITERIA == ("correctness", "executability", "coherence",
                                   "informativeness")


def test_fleiss_available_from_metrics():
    assert fleiss_kappa([[3, 0, 0], [0, 3, 0]]) == 1.0
