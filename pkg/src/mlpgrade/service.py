"""HTTP facade over an analysis session.

A session is an immutable snapshot of (dataset, features, clustering,
representatives) plus a mutable grade book with an append-only audit log of
grade submissions. Re-clustering means a new session.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import io_cli, mlp_b, mlp_s
from .io_cli import Dataset, SchemaError, dataset_from_dict, export_graph


class CreateAnalysisRequest(BaseModel):
    dataset: dict
    method: str = "ap"
    k: int | None = None
    seed: int = 0
    iterations: int = 600
    burn_in: int = 150


class GradeSubmission(BaseModel):
    grades: dict[str, float]


@dataclass
class Session:
    id: str
    dataset: Dataset
    cluster_doc: dict  # the io_cli cluster document; the immutable snapshot
    status: str = "ready"
    grade_doc: dict | None = None
    audit_log: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app() -> FastAPI:
    app = FastAPI(title="mlpgrade")
    sessions: dict[str, Session] = {}

    def get_session(sid: str) -> Session:
        if sid not in sessions:
            raise HTTPException(status_code=404, detail=f"no session {sid}")
        return sessions[sid]

    @app.post("/analyses", status_code=201)
    def create_analysis(req: CreateAnalysisRequest):
        try:
            ds = dataset_from_dict(req.dataset)
        except SchemaError as e:
            raise HTTPException(status_code=400, detail=str(e))
        ds_solutions = [s for s in ds.solutions if not s.is_blank()]
        if not ds_solutions:
            raise HTTPException(status_code=400, detail="dataset has no non-blank solutions")
        from dataclasses import replace

        removed = len(ds.solutions) - len(ds_solutions)
        if removed:
            grades = None
            if ds.grades is not None:
                keep = [i for i, s in enumerate(ds.solutions) if not s.is_blank()]
                grades = tuple(ds.grades[i] for i in keep)
            ds = replace(ds, solutions=tuple(ds_solutions), grades=grades, removed_blank=removed)
        try:
            doc = io_cli._cluster_document(ds, req.method, req.k, req.seed, req.iterations, req.burn_in)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        except Exception as e:
            raise HTTPException(status_code=422, detail=f"clustering failed: {e}")
        sid = uuid.uuid4().hex
        sessions[sid] = Session(id=sid, dataset=ds, cluster_doc=doc)
        return {"id": sid, "method": req.method, "K": doc["K"]}

    @app.get("/analyses/{sid}/status")
    def status(sid: str):
        s = get_session(sid)
        return {"id": s.id, "status": s.status, "graded": s.grade_doc is not None}

    @app.get("/analyses/{sid}/clusters")
    def clusters(sid: str):
        s = get_session(sid)
        doc = s.cluster_doc
        return {
            "method": doc["method"],
            "K": doc["K"],
            "labels": doc["labels"],
            "learner_ids": doc["learner_ids"],
            "solution_keys": doc["solution_keys"],
        }

    @app.get("/analyses/{sid}/representatives")
    def representatives(sid: str):
        s = get_session(sid)
        doc = s.cluster_doc
        return {
            "representatives": [
                {
                    "cluster": k,
                    "index": j,
                    "learner_id": doc["learner_ids"][j],
                    "keys": doc["solution_keys"][j],
                }
                for k, j in enumerate(doc["representatives"])
            ],
            "g_max": doc["g_max"],
        }

    @app.post("/analyses/{sid}/grades")
    def submit_grades(sid: str, sub: GradeSubmission):
        s = get_session(sid)
        doc = s.cluster_doc
        K = doc["K"]
        g_max = doc["g_max"]
        try:
            parsed = {int(k): float(v) for k, v in sub.grades.items()}
        except ValueError:
            raise HTTPException(status_code=422, detail="cluster ids must be integers")
        missing = [k for k in range(K) if k not in parsed]
        if missing:
            raise HTTPException(status_code=409, detail=f"missing grades for clusters {missing}")
        bad = {k: v for k, v in parsed.items() if not 0 <= v <= g_max}
        if bad:
            raise HTTPException(status_code=422, detail=f"grades out of [0, {g_max}]: {bad}")
        with s.lock:
            s.audit_log.append({str(k): v for k, v in parsed.items()})
            s.grade_doc = io_cli._grade_document(s.dataset, doc, {str(k): v for k, v in parsed.items()})
        return s.grade_doc

    @app.get("/analyses/{sid}/grades")
    def get_grades(sid: str):
        s = get_session(sid)
        if s.grade_doc is None:
            raise HTTPException(status_code=404, detail="no grades submitted yet")
        return s.grade_doc

    @app.get("/analyses/{sid}/solutions/{learner_id}/feedback")
    def feedback(sid: str, learner_id: str):
        s = get_session(sid)
        if s.grade_doc is None:
            raise HTTPException(status_code=409, detail="submit grades first")
        if s.cluster_doc["method"] != "bayes":
            raise HTTPException(status_code=422, detail="feedback requires a bayes session")
        try:
            return io_cli._feedback_document(s.cluster_doc, s.grade_doc["cluster_grades"], learner_id)
        except ValueError as e:
            raise HTTPException(status_code=404, detail=str(e))

    @app.get("/analyses/{sid}/graph")
    def graph(sid: str, threshold: float = 0.1):
        s = get_session(sid)
        doc = s.cluster_doc
        fm, _ = io_cli._featurize(s.dataset)
        S = mlp_s.similarity(fm)
        grades = None
        if s.grade_doc is not None:
            grades = [g["grade"] for g in s.grade_doc["grades"]]
        try:
            return export_graph(
                S,
                doc["labels"],
                grades=grades,
                representatives=doc["representatives"],
                threshold=threshold,
                learner_ids=doc["learner_ids"],
            )
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))

    return app
