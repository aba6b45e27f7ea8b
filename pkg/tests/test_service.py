import json
import random
import struct
import zlib

import pytest
from fastapi.testclient import TestClient

from texmeshqa.service import create_app
from texmeshqa.sorting import SortSession, StudyDesign
from texmeshqa.study_store import StudyStore


def media_files(names, media_dir):
    media_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        (media_dir / name).write_bytes(b"MEDIA:" + name.encode() + b":" + bytes(64))


def manifest_5x4(sorter="interleave", rendering="shaded"):
    chains = [[f"t{t}l{level}" for level in range(1, 5)] for t in range(5)]
    stimuli = [{"id": s, "media": f"{s}.mp4"} for chain in chains for s in chain]
    return {
        "study_id": "study1",
        "stimuli": stimuli,
        "reference_media": "ref.mp4",
        "chains": chains,
        "sorter": sorter,
        "rendering": rendering,
    }


@pytest.fixture
def data_dir(tmp_path):
    manifest = manifest_5x4()
    names = [s["media"] for s in manifest["stimuli"]] + ["ref.mp4"]
    media_files(names, tmp_path / "media")
    return tmp_path


@pytest.fixture
def client(data_dir):
    app = create_app(data_dir)
    with TestClient(app) as c:
        yield c
    app.state.store.close()


def drive_to_completion(client, session, quality):
    choices = 0
    while session["pair"] is not None:
        pair = session["pair"]
        a, b = pair["a"]["id"], pair["b"]["id"]
        winner = a if quality[a] > quality[b] else b
        response = client.post(
            f"/sessions/{session['session_id']}/choice",
            json={"token": pair["token"], "winner": winner},
        )
        assert response.status_code == 200
        session = response.json()
        choices += 1
    return session, choices


def consistent_quality(manifest, seed=0):
    rng = random.Random(seed)
    quality = {}
    for chain in manifest["chains"]:
        values = sorted((rng.random() for _ in chain), reverse=True)
        for stim, v in zip(chain, values):
            quality[stim] = v
    return quality


class TestStudyLifecycle:
    def test_create_study_and_session(self, client):
        response = client.post("/studies", json=manifest_5x4())
        assert response.status_code == 201
        study_id = response.json()["study_id"]

        response = client.post(f"/studies/{study_id}/sessions", json={"subject": "s1"})
        assert response.status_code == 201
        body = response.json()
        assert body["pair"]["token"] == 0
        a, b = body["pair"]["a"], body["pair"]["b"]
        assert a["id"] != b["id"]
        assert a["media_url"].startswith("/media/")
        assert body["reference"]["media_url"] == "/media/ref.mp4"

    def test_missing_manifest_media_rejected(self, client):
        manifest = manifest_5x4()
        manifest["study_id"] = "study2"
        manifest["stimuli"][0]["media"] = "missing.mp4"
        response = client.post("/studies", json=manifest)
        assert response.status_code == 422
        assert "missing.mp4" in response.json()["detail"]

    def test_unknown_study_404_names_id(self, client):
        response = client.post("/studies/ghost/sessions", json={})
        assert response.status_code == 404
        assert "ghost" in response.json()["detail"]

    def test_repeat_subject_gets_distinct_session(self, client):
        client.post("/studies", json=manifest_5x4())
        first = client.post("/studies/study1/sessions", json={"subject": "s1"}).json()
        second = client.post("/studies/study1/sessions", json={"subject": "s1"}).json()
        assert first["session_id"] != second["session_id"]


class TestChoices:
    def test_full_consistent_run(self, client):
        manifest = manifest_5x4()
        client.post("/studies", json=manifest)
        session = client.post("/studies/study1/sessions", json={}).json()
        final, choices = drive_to_completion(client, session, consistent_quality(manifest))
        assert 20 <= choices <= 44
        assert final["status"] == "complete"
        assert len(final["ranking"]) == 20

    def test_duplicate_submission_idempotent(self, client):
        client.post("/studies", json=manifest_5x4())
        session = client.post("/studies/study1/sessions", json={}).json()
        pair = session["pair"]
        body = {"token": pair["token"], "winner": pair["a"]["id"]}
        first = client.post(f"/sessions/{session['session_id']}/choice", json=body)
        again = client.post(f"/sessions/{session['session_id']}/choice", json=body)
        assert first.status_code == again.status_code == 200
        assert first.json() == again.json()
        transcript = client.get(f"/sessions/{session['session_id']}").json()["transcript"]
        assert len(transcript) == 1

    def test_stale_token_conflict(self, client):
        client.post("/studies", json=manifest_5x4())
        session = client.post("/studies/study1/sessions", json={}).json()
        response = client.post(
            f"/sessions/{session['session_id']}/choice",
            json={"token": 99, "winner": session["pair"]["a"]["id"]},
        )
        assert response.status_code == 409
        # session unaffected
        pair = client.get(f"/sessions/{session['session_id']}/pair").json()["pair"]
        assert pair["token"] == 0

    def test_winner_not_in_pair_rejected(self, client):
        client.post("/studies", json=manifest_5x4())
        session = client.post("/studies/study1/sessions", json={}).json()
        response = client.post(
            f"/sessions/{session['session_id']}/choice",
            json={"token": 0, "winner": "nonsense"},
        )
        assert response.status_code == 422
        assert client.get(f"/sessions/{session['session_id']}").json()["status"] == "active"

    def test_replay_endpoint_matches_core_sorter(self, client):
        manifest = manifest_5x4()
        client.post("/studies", json=manifest)
        session = client.post("/studies/study1/sessions", json={}).json()
        session_id = session["session_id"]
        final, _ = drive_to_completion(client, session, consistent_quality(manifest))

        summary = client.get(f"/sessions/{session_id}").json()
        winners = [t["winner"] for t in summary["transcript"]]
        replayed = client.post(
            f"/sessions/{session_id}/replay", json={"winners": winners}
        ).json()["ranking"]
        assert replayed == final["ranking"]

        seed = client.app.state.store.sessions[session_id].seed
        design = StudyDesign(
            stimuli=tuple(s["id"] for s in manifest["stimuli"]),
            chains=tuple(tuple(c) for c in manifest["chains"]),
        )
        core = SortSession(design, "interleave", seed=seed)
        for w in winners:
            core.report(w)
        assert core.ranking == final["ranking"]


class TestResults:
    def test_unanimous_sessions(self, client):
        manifest = manifest_5x4()
        client.post("/studies", json=manifest)
        quality = consistent_quality(manifest, seed=3)
        for _ in range(11):
            session = client.post("/studies/study1/sessions", json={}).json()
            drive_to_completion(client, session, quality)
        results = client.get("/studies/study1/results").json()
        shaded = results["conditions"]["shaded"]
        assert shaded["sessions"] == 11
        assert shaded["kendalls_w"]["w"] == pytest.approx(1.0)
        scores = sorted(shaded["vote_scores"].values())
        assert scores == pytest.approx(list(range(20)))

    def test_rendering_tags_aggregate_independently(self, client):
        manifest = manifest_5x4()
        client.post("/studies", json=manifest)
        quality = consistent_quality(manifest, seed=4)
        for rendering in ("shaded", "unshaded", "shaded"):
            session = client.post(
                "/studies/study1/sessions", json={"rendering": rendering}
            ).json()
            drive_to_completion(client, session, quality)
        conditions = client.get("/studies/study1/results").json()["conditions"]
        assert conditions["shaded"]["sessions"] == 2
        assert conditions["unshaded"]["sessions"] == 1

    def test_incomplete_sessions_excluded(self, client):
        manifest = manifest_5x4()
        client.post("/studies", json=manifest)
        quality = consistent_quality(manifest, seed=5)
        session = client.post("/studies/study1/sessions", json={}).json()
        drive_to_completion(client, session, quality)
        client.post("/studies/study1/sessions", json={})  # abandoned at first pair
        results = client.get("/studies/study1/results").json()
        assert results["conditions"]["shaded"]["sessions"] == 1


class TestMedia:
    def test_full_fetch(self, client):
        client.post("/studies", json=manifest_5x4())
        response = client.get("/media/ref.mp4")
        assert response.status_code == 200
        assert response.headers["accept-ranges"] == "bytes"
        assert response.content.startswith(b"MEDIA:ref.mp4")

    def test_range_request(self, client):
        client.post("/studies", json=manifest_5x4())
        full = client.get("/media/ref.mp4").content
        response = client.get("/media/ref.mp4", headers={"Range": "bytes=2-5"})
        assert response.status_code == 206
        assert response.content == full[2:6]
        assert response.headers["content-range"] == f"bytes 2-5/{len(full)}"

    def test_open_ended_range(self, client):
        client.post("/studies", json=manifest_5x4())
        full = client.get("/media/ref.mp4").content
        response = client.get("/media/ref.mp4", headers={"Range": "bytes=10-"})
        assert response.status_code == 206
        assert response.content == full[10:]

    def test_unknown_media_404(self, client):
        response = client.get("/media/nope.mp4")
        assert response.status_code == 404

    def test_traversal_rejected(self, client):
        response = client.get("/media/..%2Fevents.log")
        assert response.status_code in (404, 422)


class TestRecovery:
    def test_restart_reproduces_pending_pair(self, data_dir):
        manifest = manifest_5x4()
        store = StudyStore(data_dir)
        store.create_study(manifest)
        record = store.create_session("study1")
        quality = consistent_quality(manifest, seed=6)
        for _ in range(7):
            payload = store.pending_pair(record.session_id)
            pair = payload["pair"]
            a, b = pair["a"]["id"], pair["b"]["id"]
            winner = a if quality[a] > quality[b] else b
            store.submit_choice(record.session_id, pair["token"], winner)
        before = store.pending_pair(record.session_id)
        store.close()

        reopened = StudyStore(data_dir)
        after = reopened.pending_pair(record.session_id)
        assert after == before
        reopened.close()

    def test_empty_log_empty_state(self, tmp_path):
        store = StudyStore(tmp_path)
        assert store.studies == {} and store.sessions == {}
        store.close()

    def test_results_survive_restart(self, data_dir):
        manifest = manifest_5x4()
        store = StudyStore(data_dir)
        store.create_study(manifest)
        record = store.create_session("study1")
        quality = consistent_quality(manifest, seed=7)
        while store.sessions[record.session_id].status == "active":
            pair = store.pending_pair(record.session_id)["pair"]
            a, b = pair["a"]["id"], pair["b"]["id"]
            store.submit_choice(
                record.session_id, pair["token"], a if quality[a] > quality[b] else b
            )
        results_before = store.study_results("study1")
        store.close()

        reopened = StudyStore(data_dir)
        assert reopened.study_results("study1") == results_before
        reopened.close()

    def test_torn_choice_marks_session_abandoned(self, data_dir):
        manifest = manifest_5x4()
        store = StudyStore(data_dir)
        store.create_study(manifest)
        record = store.create_session("study1")
        session_id = record.session_id
        store.close()

        payload = json.dumps(
            {"type": "choice", "session_id": session_id, "token": 0, "winner": "x"}
        ).encode()
        with open(data_dir / "events.log", "ab") as fh:
            fh.write(struct.pack("<II", len(payload) + 9, zlib.crc32(payload)))
            fh.write(payload)

        reopened = StudyStore(data_dir)
        assert reopened.recovery_warning is not None
        assert reopened.sessions[session_id].status == "abandoned"
        reopened.close()

        # the abandonment itself is durable
        third = StudyStore(data_dir)
        assert third.sessions[session_id].status == "abandoned"
        third.close()
