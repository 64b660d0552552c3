import json
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mplan.dataset import (CorpusRecord, build_triplets, corpus_stats, ingest,
                           load_records, load_split, read_triplets_tsv,
                           sample_by_category, save_split, split_tasks,
                           write_records, write_triplets_tsv)
from mplan.errors import EmptyCorpus, TooFewTasks
from mplan.plan_model import (ImageStore, ReferencePlan, ReferenceStep,
                              TaskGoal, decode_png)
from mplan.synth import make_image_dump, make_png, make_table_corpus


def _write_task(root, task_id, steps, goal="make a thing", images=()):
    task_dir = root / task_id
    (task_dir / "steps").mkdir(parents=True)
    (task_dir / "meta.json").write_text(json.dumps({
        "title": goal, "category": "cooking",
        "url": f"https://example.org/{task_id}",
        "author": "jane doe", "author_notes": "my life story",
    }))
    for k, text in enumerate(steps, start=1):
        (task_dir / "steps" / f"{k}.txt").write_text(text)
    if images:
        (task_dir / "images").mkdir()
        for k in images:
            (task_dir / "images" / f"{k}.png").write_bytes(make_png(k))


def test_ingest_normalizes_and_anonymizes(tmp_path):
    _write_task(tmp_path / "dump", "t1", ["chop the onion", "heat the pan"])
    records = ingest(tmp_path / "dump", "instructables")
    assert len(records) == 1
    rec = records[0]
    assert rec.license_tag == "cc-by-nc-sa-3"
    assert rec.reference.goal.source == "instructables"
    assert len(rec.reference.steps) == 2
    assert rec.reference.source_url_anonymized.startswith("anon://instructables/")
    assert "example.org" not in rec.reference.source_url_anonymized
    payload = json.dumps({
        "goal": rec.reference.goal.goal_text,
        "steps": [s.text for s in rec.reference.steps],
        "url": rec.reference.source_url_anonymized,
    })
    assert "jane doe" not in payload and "life story" not in payload


def test_ingest_skips_task_without_steps(tmp_path, caplog):
    dump = tmp_path / "dump"
    _write_task(dump, "good", ["one step"])
    (dump / "empty").mkdir()
    (dump / "empty" / "meta.json").write_text(json.dumps({"title": "empty task"}))
    with caplog.at_level(logging.WARNING):
        records = ingest(dump, "wikihow")
    assert [r.raw_source_id for r in records] == ["good"]
    assert any("no steps" in m for m in caplog.messages)


def test_ingest_idempotent(tmp_path):
    dump = make_image_dump(tmp_path / "dump", n_tasks=3, seed=5)
    store = ImageStore(tmp_path / "blobs")
    first = ingest(dump, "synthetic", store)
    second = ingest(dump, "synthetic", store)
    assert first == second


def test_ingest_reads_step_images(tmp_path):
    dump = tmp_path / "dump"
    _write_task(dump, "t1", ["a", "b", "c"], images=(1, 3))
    store = ImageStore(tmp_path / "blobs")
    records = ingest(dump, "synthetic", store)
    steps = records[0].reference.steps
    assert steps[0].image is not None
    assert steps[1].image is None
    assert steps[2].image is not None
    assert store.exists(steps[0].image.digest)


def test_corpus_stats_simple_arithmetic():
    goal = TaskGoal(id="t", goal_text="g", source="synthetic")
    rec = CorpusRecord(
        reference=ReferencePlan(goal=goal, steps=(
            ReferenceStep(text="one two three"),
            ReferenceStep(text="one two three four five"))),
        raw_source_id="t", license_tag="other")
    stats = corpus_stats([rec])
    assert stats.mean_words_per_step == 4.0
    assert stats.mean_steps_per_task == 2.0
    assert stats.task_count == 1
    assert stats.category_count == 1


def test_corpus_stats_empty_rejected():
    with pytest.raises(EmptyCorpus):
        corpus_stats([])


def test_table_corpus_instructables_means(tmp_path):
    dump = make_table_corpus(tmp_path / "dump", "instructables", seed=0)
    stats = corpus_stats(ingest(dump, "instructables"))
    assert stats.task_count == 100
    assert stats.category_count == 1
    assert stats.mean_steps_per_task == pytest.approx(7.20, abs=0.01)
    assert stats.mean_words_per_step == pytest.approx(9.76, abs=0.01)


def test_table_corpus_wikihow_means(tmp_path):
    dump = make_table_corpus(tmp_path / "dump", "wikihow", seed=0)
    stats = corpus_stats(ingest(dump, "wikihow"))
    assert stats.task_count == 20
    assert stats.category_count == 10
    assert stats.mean_steps_per_task == pytest.approx(33.30, abs=0.01)
    assert stats.mean_words_per_step == pytest.approx(45.84, abs=0.01)


def _imaged_record(task_id, image_seeds, texts=None, gaps=()):
    goal = TaskGoal(id=task_id, goal_text="g", source="synthetic")
    steps = []
    for i, seed in enumerate(image_seeds, start=1):
        image = None if i in gaps else decode_png(make_png(seed))
        steps.append(ReferenceStep(text=(texts or {}).get(i, f"step {i}"),
                                   image=image))
    return CorpusRecord(reference=ReferencePlan(goal=goal, steps=tuple(steps)),
                        raw_source_id=task_id, license_tag="other")


def test_triplets_consecutive_pairs():
    rec = _imaged_record("t", [1, 2, 3, 4, 5])
    triplets = build_triplets([rec])
    assert len(triplets) == 4
    for i, t in enumerate(triplets, start=1):
        assert t.step_text == f"step {i + 1}"  # text from the later step


def test_triplets_gap_breaks_chain():
    rec = _imaged_record("t", [1, 2, 3, 4, 5], gaps={3})
    triplets = build_triplets([rec])
    assert len(triplets) == 2
    assert triplets[0].step_text == "step 2"
    assert triplets[1].step_text == "step 5"


def test_triplets_fewer_than_two_images():
    assert build_triplets([_imaged_record("t", [1], gaps=())]) == []
    assert build_triplets([_imaged_record("t", [1, 2], gaps={2})]) == []


def test_triplets_brute_force_recount(tmp_path):
    # Oracle: per plan, count maximal runs of imaged steps; each run of
    # length m contributes m-1.
    def oracle(records):
        total = 0
        for rec in records:
            run = 0
            for step in rec.reference.steps:
                if step.image is not None:
                    run += 1
                else:
                    total += max(0, run - 1)
                    run = 0
            total += max(0, run - 1)
        return total

    dump = make_image_dump(
        tmp_path / "dump", n_tasks=30, seed=9, steps_per_task=6,
        imaged_steps=lambda i, n: {k for k in range(1, n + 1)
                                   if (i + k) % 3 != 0})
    records = ingest(dump, "synthetic", ImageStore(tmp_path / "blobs"))
    assert len(build_triplets(records)) == oracle(records)


def test_split_1000_tasks():
    manifest = split_tasks([f"t{i}" for i in range(1000)], seed=3)
    assert (len(manifest.train), len(manifest.val), len(manifest.test)) == (900, 50, 50)


def test_split_21_tasks_floor_remainder():
    manifest = split_tasks([f"t{i}" for i in range(21)], seed=3)
    assert (len(manifest.train), len(manifest.val), len(manifest.test)) == (19, 1, 1)


def test_split_deterministic():
    ids = [f"t{i}" for i in range(50)]
    assert split_tasks(ids, seed=4) == split_tasks(ids, seed=4)
    assert split_tasks(ids, seed=4) != split_tasks(ids, seed=5)


def test_split_too_few():
    with pytest.raises(TooFewTasks):
        split_tasks([f"t{i}" for i in range(19)])


@settings(max_examples=40)
@given(n=st.integers(min_value=20, max_value=400), seed=st.integers(0, 2**32 - 1))
def test_split_partitions_disjoint_and_complete(n, seed):
    ids = [f"task-{i}" for i in range(n)]
    manifest = split_tasks(ids, seed=seed)
    train, val, test = set(manifest.train), set(manifest.val), set(manifest.test)
    assert train | val | test == set(ids)
    assert not (train & val or train & test or val & test)
    assert len(manifest.train) + len(manifest.val) + len(manifest.test) == n


def test_split_round_trip(tmp_path):
    manifest = split_tasks([f"t{i}" for i in range(40)], seed=1)
    path = save_split(manifest, tmp_path / "split.json")
    assert load_split(path) == manifest


def test_triplet_tsv_round_trip(tmp_path):
    rec = _imaged_record("t", [1, 2, 3], texts={2: "text\twith\ttabs\nand newline"})
    triplets = build_triplets([rec])
    path = write_triplets_tsv(triplets, tmp_path / "triplets.tsv")
    rows = read_triplets_tsv(path)
    assert len(rows) == 2
    assert rows[0][0] == triplets[0].prev_image.digest
    assert "\t" not in rows[0][1] and "\n" not in rows[0][1]


def test_records_jsonl_round_trip(tmp_path):
    dump = make_image_dump(tmp_path / "dump", n_tasks=3, seed=5)
    records = ingest(dump, "synthetic", ImageStore(tmp_path / "blobs"))
    path = write_records(records, tmp_path / "records.jsonl")
    assert load_records(path) == records


def test_sample_by_category_deterministic(tmp_path):
    dump = make_table_corpus(tmp_path / "dump", "wikihow", seed=0)
    records = ingest(dump, "wikihow")
    a = sample_by_category(records, 10, seed=2)
    b = sample_by_category(records, 10, seed=2)
    assert a == b
    assert len(a) == 10
    assert len({r.reference.goal.category for r in a}) > 1
