"""Study and session state for live paired-comparison experiments.

The store is the service's brain, independent of HTTP: it validates
manifests, owns per-session sorter state machines, logs every event
durably before acknowledging it, and rebuilds itself from the log on
restart. Choice submissions are idempotent per pair token, so a client
may safely retry.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ProtocolError
from .eventlog import EventLog, recover
from .scoring import (
    ConcordanceResult,
    kendalls_w,
    preference_matrix,
    thurstone_case_v,
    vote_scores,
)
from .sorting import SortSession, StudyDesign

RENDERING_TAGS = ("shaded", "unshaded")


class UnknownIdError(KeyError):
    """A study, session or media reference does not exist."""


class StaleTokenError(ProtocolError):
    """The submitted pair token does not match the pending pair."""


@dataclass
class StudyManifest:
    study_id: str
    stimuli: dict[str, str]          # stimulus id -> media file name
    reference_media: str
    chains: tuple[tuple[str, ...], ...]
    sorter: str = "interleave"
    rendering: str = "shaded"

    @classmethod
    def from_dict(cls, raw: dict, media_dir: Path | None = None) -> "StudyManifest":
        try:
            stimuli = {s["id"]: s["media"] for s in raw["stimuli"]}
            manifest = cls(
                study_id=raw.get("study_id") or uuid.uuid4().hex[:12],
                stimuli=stimuli,
                reference_media=raw["reference_media"],
                chains=tuple(tuple(c) for c in raw["chains"]),
                sorter=raw.get("sorter", "interleave"),
                rendering=raw.get("rendering", "shaded"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad manifest: missing field {exc}") from exc
        if manifest.sorter not in SortSession.MODES:
            raise ValueError(f"bad manifest: unknown sorter {manifest.sorter!r}")
        if manifest.rendering not in RENDERING_TAGS:
            raise ValueError(f"bad manifest: rendering must be one of {RENDERING_TAGS}")
        design = manifest.design()  # validates chain partition
        if media_dir is not None:
            for name in [*manifest.stimuli.values(), manifest.reference_media]:
                if not (media_dir / name).is_file():
                    raise ValueError(f"bad manifest: media file not found: {name}")
        del design
        return manifest

    def design(self) -> StudyDesign:
        return StudyDesign(stimuli=tuple(self.stimuli), chains=self.chains)

    def to_dict(self) -> dict:
        return {
            "study_id": self.study_id,
            "stimuli": [{"id": s, "media": m} for s, m in self.stimuli.items()],
            "reference_media": self.reference_media,
            "chains": [list(c) for c in self.chains],
            "sorter": self.sorter,
            "rendering": self.rendering,
        }


@dataclass
class SessionRecord:
    session_id: str
    study_id: str
    subject: str
    seed: int
    rendering: str
    status: str = "active"          # active | complete | abandoned
    sorter: SortSession | None = None
    token: int = 0                  # token of the pending pair
    last_response: dict | None = None
    last_token: int = -1
    last_winner: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _session_seed(session_id: str) -> int:
    return int.from_bytes(hashlib.sha256(session_id.encode()).digest()[:4], "little")


class StudyStore:
    """Durable collection of studies and their sessions."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.media_dir = self.data_dir / "media"
        self.media_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / "events.log"
        self.studies: dict[str, StudyManifest] = {}
        self.sessions: dict[str, SessionRecord] = {}
        self.recovery_warning: str | None = None
        self._replay_log()
        self._log = EventLog(self.log_path)
        self._write_lock = threading.Lock()

    def close(self) -> None:
        self._log.close()

    # -- recovery ---------------------------------------------------------

    def _replay_log(self) -> None:
        events, torn = recover(self.log_path)
        for event in events:
            self._apply(event)
        if torn is not None:
            self.recovery_warning = f"truncated {len(torn)} torn byte(s) from the event log"
            session_id = _session_id_from_torn(torn)
            if session_id is not None and session_id in self.sessions:
                record = self.sessions[session_id]
                if record.status == "active":
                    record.status = "abandoned"
                    # durably record the abandonment so the next replay agrees
                    with EventLog(self.log_path) as log:
                        log.append({"type": "abandon", "session_id": session_id})

    def _apply(self, event: dict) -> None:
        kind = event.get("type")
        if kind == "study":
            manifest = StudyManifest.from_dict(event["manifest"])
            self.studies[manifest.study_id] = manifest
        elif kind == "session":
            manifest = self.studies[event["study_id"]]
            record = SessionRecord(
                session_id=event["session_id"],
                study_id=event["study_id"],
                subject=event.get("subject", ""),
                seed=event["seed"],
                rendering=event.get("rendering", manifest.rendering),
            )
            record.sorter = SortSession(
                manifest.design(), mode=manifest.sorter, seed=record.seed
            )
            if record.sorter.done:        # degenerate single-chain design
                record.status = "complete"
            self.sessions[record.session_id] = record
        elif kind == "choice":
            record = self.sessions[event["session_id"]]
            pending = record.sorter.next_pair()
            logged_pair = event.get("pair")
            if logged_pair is not None and sorted(logged_pair) != sorted(pending):
                raise ProtocolError(
                    f"log replay mismatch for session {record.session_id}: "
                    f"logged pair {logged_pair}, sorter expects {list(pending)}"
                )
            record.sorter.report(event["winner"])
            record.token += 1
            record.last_token = event["token"]
            record.last_winner = event["winner"]
            if record.sorter.done:
                record.status = "complete"
        elif kind == "abandon":
            record = self.sessions[event["session_id"]]
            if record.status == "active":
                record.status = "abandoned"

    # -- study lifecycle ----------------------------------------------------

    def create_study(self, manifest_raw: dict) -> StudyManifest:
        manifest = StudyManifest.from_dict(manifest_raw, media_dir=self.media_dir)
        if manifest.study_id in self.studies:
            raise ValueError(f"study {manifest.study_id!r} already exists")
        with self._write_lock:
            self._log.append({"type": "study", "manifest": manifest.to_dict()})
        self.studies[manifest.study_id] = manifest
        return manifest

    def get_study(self, study_id: str) -> StudyManifest:
        if study_id not in self.studies:
            raise UnknownIdError(f"unknown study: {study_id}")
        return self.studies[study_id]

    def create_session(
        self, study_id: str, subject: str = "", rendering: str | None = None
    ) -> SessionRecord:
        manifest = self.get_study(study_id)
        if rendering is not None and rendering not in RENDERING_TAGS:
            raise ValueError(f"rendering must be one of {RENDERING_TAGS}")
        session_id = uuid.uuid4().hex[:16]
        seed = _session_seed(session_id)
        event = {
            "type": "session",
            "session_id": session_id,
            "study_id": study_id,
            "subject": subject,
            "seed": seed,
            "rendering": rendering or manifest.rendering,
            "ts": time.time(),
        }
        with self._write_lock:
            self._log.append(event)
        self._apply(event)
        return self.sessions[session_id]

    def get_session(self, session_id: str) -> SessionRecord:
        if session_id not in self.sessions:
            raise UnknownIdError(f"unknown session: {session_id}")
        return self.sessions[session_id]

    # -- choices -------------------------------------------------------------

    def pending_pair(self, session_id: str) -> dict:
        record = self.get_session(session_id)
        return self._pair_payload(record)

    def _pair_payload(self, record: SessionRecord) -> dict:
        manifest = self.studies[record.study_id]
        base = {
            "session_id": record.session_id,
            "status": record.status,
            "completed_choices": record.sorter.comparisons,
        }
        if record.status != "active":
            base["ranking"] = record.sorter.ranking if record.sorter.done else None
            base["pair"] = None
            return base
        a, b = record.sorter.next_pair()
        lo, hi = record.sorter.remaining_bounds()
        base.update(
            {
                "pair": {
                    "token": record.token,
                    "a": {"id": a, "media_url": f"/media/{manifest.stimuli[a]}"},
                    "b": {"id": b, "media_url": f"/media/{manifest.stimuli[b]}"},
                },
                "reference": {"media_url": f"/media/{manifest.reference_media}"},
                "progress": {"min_remaining": lo, "max_remaining": hi},
            }
        )
        return base

    def submit_choice(self, session_id: str, token: int, winner: str) -> dict:
        record = self.get_session(session_id)
        with record.lock:
            if record.last_token == token and record.status in ("active", "complete"):
                # retry of the last acknowledged choice
                if winner != record.last_winner:
                    raise StaleTokenError(
                        f"token {token} was resolved with a different winner"
                    )
                if record.last_response is None:   # restarted since the ack
                    record.last_response = self._pair_payload(record)
                return record.last_response
            if record.status != "active":
                raise ProtocolError(f"session is {record.status}")
            if token != record.token:
                raise StaleTokenError(
                    f"token {token} does not match the pending pair (expected {record.token})"
                )
            pair = record.sorter.next_pair()
            if winner not in pair:
                raise ValueError(f"winner {winner!r} is not in the pending pair {pair}")

            event = {
                "type": "choice",
                "session_id": session_id,
                "pair": list(pair),
                "token": token,
                "winner": winner,
                "ts": time.time(),
            }
            with self._write_lock:
                self._log.append(event)    # durable before any state change
            record.sorter.report(winner)
            record.token += 1
            record.last_token = token
            record.last_winner = winner
            if record.sorter.done:
                record.status = "complete"
            record.last_response = self._pair_payload(record)
            return record.last_response

    # -- results ---------------------------------------------------------------

    def study_results(self, study_id: str) -> dict:
        self.get_study(study_id)
        groups: dict[str, list[list[str]]] = {}
        for record in self.sessions.values():
            if record.study_id == study_id and record.status == "complete":
                groups.setdefault(record.rendering, []).append(record.sorter.ranking)
        out = {"study_id": study_id, "conditions": {}}
        for tag, rankings in groups.items():
            matrix = preference_matrix(rankings)
            scores = vote_scores(matrix)
            concordance: ConcordanceResult | None = None
            if len(rankings) >= 2 and len(rankings[0]) >= 3:
                concordance = kendalls_w(rankings)
            thurstone = thurstone_case_v(matrix)
            out["conditions"][tag] = {
                "sessions": len(rankings),
                "stimuli": list(matrix.stimuli),
                "preference_counts": matrix.counts.tolist(),
                "vote_scores": scores.as_dict(),
                "thurstone": thurstone.as_dict(),
                "kendalls_w": None
                if concordance is None
                else {"w": concordance.w, "p_value": concordance.p_value},
            }
        return out

    def session_summary(self, session_id: str) -> dict:
        record = self.get_session(session_id)
        return {
            "session_id": record.session_id,
            "study_id": record.study_id,
            "subject": record.subject,
            "status": record.status,
            "rendering": record.rendering,
            "completed_choices": record.sorter.comparisons,
            "transcript": [
                {"pair": list(pair), "winner": winner}
                for pair, winner in record.sorter.transcript
            ],
            "ranking": record.sorter.ranking if record.sorter.done else None,
        }

    def replay_ranking(self, session_id: str, winners: list[str]) -> list[str]:
        """Ranking a fresh sorter produces for this session given these winners."""
        record = self.get_session(session_id)
        manifest = self.studies[record.study_id]
        from .sorting import replay

        session = replay(manifest.design(), manifest.sorter, record.seed, winners)
        if not session.done:
            raise ProtocolError("winner sequence does not complete the session")
        return session.ranking


def _session_id_from_torn(torn: bytes) -> str | None:
    """Best-effort session id out of a torn record's partial JSON payload."""
    import re

    text = torn.decode("utf-8", errors="ignore")
    match = re.search(r'"session_id"\s*:\s*"([^"]+)"', text)
    return match.group(1) if match else None
