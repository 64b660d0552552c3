import hashlib
import json
import struct

import pytest
from hypothesis import given, settings, HealthCheck
from hypothesis import strategies as st

from mplan.errors import DecodeError, ParseError, ValidationError
from mplan.plan_model import (ImageRef, PlanBundle, PlanStep,
                              ProvenanceEntry, TaskGoal, bundle_to_dict,
                              load_bundle, save_bundle, store_image)
from mplan.ppddl import PPDDLRecord
from mplan.synth import make_png

# A fixed, minimal valid 1x1 PNG (black pixel).
PNG_1X1 = bytes.fromhex(
    "89504e470d0a1a0a0000000d494844520000000100000001080200000090"
    "7753de0000000c49444154789c63600000000200014c28960d0000000049"
    "454e44ae426082")


def png_header_dims(data: bytes) -> tuple[int, int]:
    # Independent oracle: width/height straight from the IHDR chunk.
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    return struct.unpack(">II", data[16:24])


def test_store_image_digest_is_content_hash(store):
    ref = store_image(store, PNG_1X1)
    assert ref.digest == hashlib.sha256(PNG_1X1).hexdigest()
    assert ref.media_type == "image/png"


def test_store_image_idempotent(store):
    ref1 = store_image(store, PNG_1X1)
    count1 = len(store.digests())
    ref2 = store_image(store, PNG_1X1)
    assert ref1 == ref2
    assert len(store.digests()) == count1


def test_store_image_dims_match_header_oracle(store, png_16x16):
    ref = store_image(store, png_16x16)
    width, height = png_header_dims(png_16x16)
    assert (ref.width, ref.height) == (width, height) == (16, 16)


def test_store_image_rejects_non_png(store):
    with pytest.raises(DecodeError):
        store_image(store, b"definitely not an image")
    jpeg_ish = b"\xff\xd8\xff\xe0" + b"\x00" * 32
    with pytest.raises(DecodeError):
        store_image(store, jpeg_ish)


def _goal(i=0):
    return TaskGoal(id=f"task-{i}", goal_text="grow bulb onions in water",
                    category="home-and-garden", source="synthetic")


def _step(store, k, text="Fill the jar with water."):
    ref = store.put(make_png(seed=1000 + k))
    return PlanStep(index=k, draft_text=f"draft {k}", final_text=text,
                    visual_info=PPDDLRecord(objects=("jar",), goal="grow onions"),
                    image=ref,
                    provenance=(ProvenanceEntry(
                        role="text_generator", stage="draft", request="p",
                        response="r", request_sha256="0" * 64,
                        response_sha256="1" * 64, latency_ms=1.5),))


def _bundle(store, n=3):
    return PlanBundle(goal=_goal(), method="ours",
                      steps=tuple(_step(store, k) for k in range(1, n + 1)),
                      backend_fingerprint="f" * 64, seed=11)


def test_save_bundle_lists_steps_in_index_order(tmp_path, store):
    bundle = _bundle(store, n=3)
    manifest = save_bundle(bundle, tmp_path / "b", store)
    data = json.loads(manifest.read_text())
    assert [s["index"] for s in data["steps"]] == [1, 2, 3]


def test_save_bundle_dangling_image_fails(tmp_path, store):
    bundle = _bundle(store, n=2)
    dangling = ImageRef(digest="ab" * 32, width=4, height=4)
    broken = PlanBundle(goal=bundle.goal, method="ours",
                        steps=bundle.steps[:1] + (
                            PlanStep(index=2, draft_text="d", final_text="t",
                                     image=dangling),),
                        backend_fingerprint=bundle.backend_fingerprint, seed=1)
    with pytest.raises(ValidationError, match="not resolvable"):
        save_bundle(broken, tmp_path / "b", store)


def test_load_bundle_round_trip(tmp_path, store):
    bundle = _bundle(store, n=3)
    manifest = save_bundle(bundle, tmp_path / "b", store)
    assert load_bundle(manifest) == bundle


def test_load_bundle_gap_error(tmp_path, store):
    bundle = _bundle(store, n=3)
    manifest = save_bundle(bundle, tmp_path / "b", store)
    data = json.loads(manifest.read_text())
    data["steps"] = [s for s in data["steps"] if s["index"] != 2]
    manifest.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="gap at 2"):
        load_bundle(manifest)


def test_load_bundle_ignores_unknown_extras(tmp_path, store):
    bundle = _bundle(store, n=2)
    manifest = save_bundle(bundle, tmp_path / "b", store)
    data = json.loads(manifest.read_text())
    data["future_field"] = {"anything": 1}
    data["steps"][0]["another_extra"] = [1, 2, 3]
    manifest.write_text(json.dumps(data))
    assert load_bundle(manifest) == bundle


def test_load_bundle_bad_json_is_parse_error(tmp_path):
    path = tmp_path / "plan.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_bundle(path)


def test_goal_validation():
    with pytest.raises(ValidationError):
        TaskGoal(id="", goal_text="x")
    with pytest.raises(ValidationError):
        TaskGoal(id="a", goal_text="  ")
    with pytest.raises(ValidationError):
        TaskGoal(id="a", goal_text="x", source="unknown-site")


def test_image_ref_validation():
    with pytest.raises(ValidationError):
        ImageRef(digest="zz", width=1, height=1)
    with pytest.raises(ValidationError):
        ImageRef(digest="0" * 64, width=0, height=1)


# --- property: save/load is the identity on valid bundles ---

_text = st.text(min_size=1, max_size=30).filter(lambda s: s.strip())
_flag = st.sampled_from(["extraction_degraded", "refinement_noop"])


@st.composite
def bundles(draw, store):
    n = draw(st.integers(min_value=1, max_value=4))
    steps = []
    for k in range(1, n + 1):
        image = store.put(make_png(seed=draw(st.integers(0, 10_000))))
        visual = None
        if draw(st.booleans()):
            visual = PPDDLRecord(objects=tuple(draw(st.lists(
                st.sampled_from(["jar", "pot", "board"]), max_size=2))),
                goal=draw(_text).replace(",", " ").replace(";", " "))
        steps.append(PlanStep(
            index=k,
            draft_text=draw(st.text(max_size=20)),
            final_text=draw(_text),
            visual_info=visual,
            image=image,
            goal_achieved_flag=draw(st.booleans()),
            flags=tuple(draw(st.lists(_flag, max_size=2, unique=True))),
        ))
    return PlanBundle(
        goal=TaskGoal(id=draw(st.uuids()).hex, goal_text=draw(_text)),
        method=draw(st.sampled_from(["ours", "vanilla", "sd_first"])),
        steps=tuple(steps),
        backend_fingerprint=draw(st.text("0123456789abcdef", min_size=8, max_size=8)),
        seed=draw(st.integers(0, 2**31)),
    )


@settings(max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(data=st.data())
def test_save_load_identity_property(tmp_path, store, data):
    bundle = data.draw(bundles(store))
    out = tmp_path / bundle.goal.id
    manifest = save_bundle(bundle, out, store)
    loaded = load_bundle(manifest)
    assert loaded == bundle
    assert bundle_to_dict(loaded) == bundle_to_dict(bundle)
