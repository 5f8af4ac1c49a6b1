"""HTTP service over a loaded engine.

Read endpoints serve the current snapshot; mutations are serialized through a
single writer lock, and every mutation response carries the refreshed
conflict/finding summary plus the new snapshot id.  Responses are identical
to the CLI documents because both sides render from the same Engine.
"""

from __future__ import annotations

import threading

from fastapi import Body, FastAPI, HTTPException

from .engine import Engine
from .errors import PolicyWeaveError


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="policyweave", version="0.1.0")
    write_lock = threading.Lock()

    def guarded(fn):
        with write_lock:
            try:
                return fn()
            except PolicyWeaveError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/trees")
    def get_trees():
        return engine.trees_document()

    @app.get("/policies")
    def get_policies():
        return engine.policies_document()

    @app.get("/graph")
    def get_graph():
        return engine.graph_document()

    @app.get("/findings")
    def get_findings():
        return engine.findings_document()

    @app.get("/proposals")
    def get_proposals():
        return engine.proposals_document()

    @app.get("/summary")
    def get_summary():
        return engine.summary()

    @app.post("/policies")
    def post_policy(payload: dict = Body(...)):
        text = payload.get("text", "")
        if not text:
            raise HTTPException(status_code=400, detail="body needs a 'text' field")
        expected = payload.get("snapshot")
        if expected is not None and int(expected) != engine.snapshot_id:
            raise HTTPException(status_code=409, detail="stale snapshot; refetch")
        return guarded(lambda: engine.add_policy(text))

    @app.post("/policies/{policy_id}/remove")
    def remove_policy(policy_id: str, payload: dict = Body(default={})):
        expected = payload.get("snapshot")
        if expected is not None and int(expected) != engine.snapshot_id:
            raise HTTPException(status_code=409, detail="stale snapshot; refetch")
        return guarded(lambda: engine.remove_policy(policy_id))

    @app.post("/conflicts/{record_id}/resolve")
    def resolve_conflict(record_id: int, payload: dict = Body(...)):
        winner = payload.get("winner", "")
        if not winner:
            raise HTTPException(status_code=400, detail="body needs a 'winner' field")
        return guarded(lambda: engine.resolve_tie(record_id, winner))

    @app.post("/proposals/{proposal_id}/accept")
    def accept_proposal(proposal_id: str):
        return guarded(lambda: engine.accept_proposal(proposal_id))

    @app.post("/proposals/{proposal_id}/reject")
    def reject_proposal(proposal_id: str):
        return guarded(lambda: engine.reject_proposal(proposal_id))

    return app
