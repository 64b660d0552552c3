"""HTTP service feeding the annotation UI and collecting its verdicts.

Endpoints (all JSON):
  GET  /api/pairs/next?annotator=<id>  next blinded session for that annotator
  POST /api/annotations                validated verdict, appended to the store
  GET  /api/progress                   per-annotator and per-aspect counts
  GET  /api/report                     un-blinded tallies plus kappa per aspect
  GET  /api/blobs/<digest>             PNG bytes for inline step images

Method identities never appear in any payload the client receives; the
stored blind seed is what lets the report un-blind verdicts afterwards.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from .annotations import (ASPECTS, AnnotationRecord, AnnotationStore,
                          DuplicateAnnotation, PairingSession, kappa_by_aspect,
                          pairwise_cohen_by_aspect, tallies_by_aspect)
from .errors import ValidationError
from .plan_model import (ImageStore, PlanBundle, ReferencePlan, open_bundle,
                         reference_from_dict)


class PairingData:
    """A pairing plus its loaded bundles, stores, and reference plan."""

    def __init__(self, session: PairingSession, bundle_a: PlanBundle,
                 store_a: ImageStore, bundle_b: PlanBundle, store_b: ImageStore,
                 reference: ReferencePlan):
        self.session = session
        self.bundle_a = bundle_a
        self.store_a = store_a
        self.bundle_b = bundle_b
        self.store_b = store_b
        self.reference = reference


def load_pairings(path: Path | str) -> list[PairingData]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    pairings = []
    for row in raw["pairings"]:
        session = PairingSession(
            session_id=row["session_id"],
            task_id=row["task_id"],
            bundle_a=row["bundle_a"],
            bundle_b=row["bundle_b"],
            blind_seed=int(row["blind_seed"]),
        )
        bundle_a, store_a = open_bundle(row["bundle_a"])
        bundle_b, store_b = open_bundle(row["bundle_b"])
        reference = reference_from_dict(row["reference"])
        pairings.append(PairingData(session, bundle_a, store_a, bundle_b,
                                    store_b, reference))
    return pairings


def _blinded_steps(bundle: PlanBundle) -> list[dict]:
    return [
        {
            "index": s.index,
            "text": s.final_text,
            "image_url": f"/api/blobs/{s.image.digest}" if s.image else None,
        }
        for s in bundle.steps
    ]


def _blinded_session(p: PairingData, done_aspects: list[str]) -> dict:
    # Candidate order follows the blind seed; no method identity anywhere.
    first, second = ((p.bundle_b, p.bundle_a) if p.session.swapped
                     else (p.bundle_a, p.bundle_b))
    return {
        "session_id": p.session.session_id,
        "task_id": p.session.task_id,
        "goal_text": p.reference.goal.goal_text,
        "candidate_1": {"steps": _blinded_steps(first)},
        "candidate_2": {"steps": _blinded_steps(second)},
        "reference": {
            "goal_text": p.reference.goal.goal_text,
            "steps": [
                {"text": s.text,
                 "image_url": f"/api/blobs/{s.image.digest}" if s.image else None}
                for s in p.reference.steps
            ],
        },
        "aspects": list(ASPECTS),
        "done_aspects": done_aspects,
    }


class AnnotationIn(BaseModel):
    session_id: str
    task_id: str
    aspect: str
    verdict: str
    annotator_id: str
    reasons: list[str] = []
    free_text: str = ""


def create_app(pairings: list[PairingData], annotations_path: Path | str,
               raters: int = 3, ui_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="plan annotation service")
    store = AnnotationStore(annotations_path)
    by_session = {p.session.session_id: p for p in pairings}
    session_order = [p.session.session_id for p in pairings]

    blobs: dict[str, ImageStore] = {}
    for p in pairings:
        for bundle, bstore in ((p.bundle_a, p.store_a), (p.bundle_b, p.store_b)):
            for step in bundle.steps:
                if step.image is not None:
                    blobs[step.image.digest] = bstore

    @app.get("/api/pairs/next")
    def next_pair(annotator: str = Query(..., min_length=1)) -> dict:
        for sid in session_order:
            done = [a for a in ASPECTS if store.has(annotator, sid, a)]
            if len(done) < len(ASPECTS):
                return {"session": _blinded_session(by_session[sid], done)}
        return {"session": None, "message": "all sessions annotated"}

    @app.post("/api/annotations")
    def post_annotation(body: AnnotationIn) -> dict:
        pairing = by_session.get(body.session_id)
        if pairing is None:
            raise HTTPException(404, detail=f"unknown session {body.session_id}")
        try:
            record = AnnotationRecord(
                session_id=body.session_id,
                task_id=body.task_id,
                aspect=body.aspect,
                verdict=body.verdict,
                annotator_id=body.annotator_id,
                blind_seed=pairing.session.blind_seed,
                reasons=tuple(body.reasons),
                free_text=body.free_text,
            )
        except ValidationError as exc:
            raise HTTPException(400, detail=str(exc)) from exc
        try:
            store.append(record)
        except DuplicateAnnotation as exc:
            raise HTTPException(409, detail=str(exc)) from exc
        return {"status": "ok"}

    @app.get("/api/progress")
    def progress() -> dict:
        records = store.records()
        per_annotator: dict[str, int] = {}
        per_aspect = {a: 0 for a in ASPECTS}
        for rec in records:
            per_annotator[rec.annotator_id] = per_annotator.get(rec.annotator_id, 0) + 1
            per_aspect[rec.aspect] += 1
        return {
            "sessions": len(session_order),
            "records": len(records),
            "per_annotator": per_annotator,
            "per_aspect": per_aspect,
            "expected_per_annotator": len(session_order) * len(ASPECTS),
        }

    @app.get("/api/report")
    def report() -> dict:
        records = store.records()
        kappas = kappa_by_aspect(records, session_order, raters=raters)
        return {
            "tallies": tallies_by_aspect(records),
            "kappa": kappas,
            "cohen_pairwise": pairwise_cohen_by_aspect(records, session_order),
            "raters": raters,
            "complete": all(v is not None for v in kappas.values()),
        }

    @app.get("/api/blobs/{digest}")
    def blob(digest: str) -> Response:
        bstore = blobs.get(digest)
        if bstore is None:
            raise HTTPException(404, detail="unknown blob")
        return Response(content=bstore.get(digest), media_type="image/png")

    if ui_dir is not None:
        # same-origin hosting of the built browser tool
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(pairings_path: Path | str, annotations_path: Path | str,
          port: int = 8808, raters: int = 3, host: str = "127.0.0.1",
          ui_dir: Path | str | None = None) -> None:
    import uvicorn

    app = create_app(load_pairings(pairings_path), annotations_path, raters,
                     ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
