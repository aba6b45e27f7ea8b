"""Hosted study walkthrough: service API driven in process.

Creates a study with placeholder media, runs two scripted subjects
through their sessions over the HTTP interface, kills the service state
mid-way to show log recovery, and prints the aggregated results.
"""

import random
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from texmeshqa.service import create_app
from texmeshqa.study_store import StudyStore


def build_study(data_dir: Path):
    chains = [[f"t{t}l{level}" for level in range(1, 5)] for t in range(5)]
    media = data_dir / "media"
    media.mkdir(parents=True, exist_ok=True)
    for chain in chains:
        for stim in chain:
            (media / f"{stim}.mp4").write_bytes(b"placeholder video payload")
    (media / "ref.mp4").write_bytes(b"placeholder reference payload")
    return {
        "study_id": "walkthrough",
        "stimuli": [{"id": s, "media": f"{s}.mp4"} for c in chains for s in c],
        "reference_media": "ref.mp4",
        "chains": chains,
        "sorter": "interleave",
        "rendering": "shaded",
    }


def run_subject(client, quality, subject):
    session = client.post(
        "/studies/walkthrough/sessions", json={"subject": subject}
    ).json()
    choices = 0
    while session["pair"] is not None:
        pair = session["pair"]
        a, b = pair["a"]["id"], pair["b"]["id"]
        winner = a if quality[a] > quality[b] else b
        session = client.post(
            f"/sessions/{session['session_id']}/choice",
            json={"token": pair["token"], "winner": winner},
        ).json()
        choices += 1
    return session, choices


def main():
    rng = random.Random(11)
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = Path(tmp)
        manifest = build_study(data_dir)

        quality = {}
        for chain in manifest["chains"]:
            values = sorted((rng.random() for _ in chain), reverse=True)
            for stim, v in zip(chain, values):
                quality[stim] = v

        app = create_app(data_dir)
        with TestClient(app) as client:
            client.post("/studies", json=manifest)
            for subject in ("anna", "ben"):
                final, choices = run_subject(client, quality, subject)
                print(f"subject {subject}: {choices} choices, "
                      f"best = {final['ranking'][0]}, worst = {final['ranking'][-1]}")
        app.state.store.close()

        # a fresh process sees the same state: everything lives in the log
        store = StudyStore(data_dir)
        results = store.study_results("walkthrough")["conditions"]["shaded"]
        print(f"\nrecovered from log: {results['sessions']} complete sessions")
        print(f"concordance W = {results['kendalls_w']['w']:.3f}")
        top = max(results["vote_scores"].items(), key=lambda kv: kv[1])
        print(f"highest vote score: {top[0]} at {top[1]:.1f}")
        store.close()


if __name__ == "__main__":
    main()
