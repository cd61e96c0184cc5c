"""Protocol engine for interactive sessions, independent of any transport.

Frames are dicts: {"v": 1, "type": <str>, "session_id": <str?>, "seq": <int>,
"body": {...}}. The engine answers every client frame with one response frame
echoing the client's seq; a deviating action's response already carries the
fresh assistance payload, so replanning is atomic from the client's view.
Malformed frames produce an error frame and never touch session state.

Client frame types: start, action, assist, finish.
Server frame types: state, assist, metrics, error.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .. import agents, env, metrics, session, task
from ..env import GridMap
from ..errors import BadScenario, KondoError, UnknownObject, UnknownSession
from ..session import SessionComplete, SessionState

PROTOCOL_VERSION = 1
IDLE_TIMEOUT = 1800.0  # seconds before an untouched session is dropped

CLIENT_TYPES = ("start", "action", "assist", "finish")


@dataclass
class SessionHandle:
    session_id: str
    state: SessionState
    protocol_version: int = PROTOCOL_VERSION
    policy_label: str = "human"
    last_active: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    """Live sessions, keyed by id. Ids are sequential so a replayed transcript
    reproduces them; sessions idle past the timeout are dropped on access."""

    def __init__(
        self,
        trace_dir: str | Path | None = None,
        idle_timeout: float = IDLE_TIMEOUT,
        clock=time.monotonic,
    ):
        self._sessions: dict[str, SessionHandle] = {}
        self._lock = threading.Lock()
        self._counter = 0
        self.trace_dir = Path(trace_dir) if trace_dir is not None else None
        self.idle_timeout = idle_timeout
        self.clock = clock

    def create(self, state: SessionState) -> SessionHandle:
        with self._lock:
            self._counter += 1
            handle = SessionHandle(
                session_id=f"s{self._counter:04d}", state=state, last_active=self.clock()
            )
            self._sessions[handle.session_id] = handle
            return handle

    def get(self, session_id: str) -> SessionHandle:
        self.sweep()
        with self._lock:
            handle = self._sessions.get(session_id)
        if handle is None:
            raise UnknownSession(f"no live session {session_id!r}")
        handle.last_active = self.clock()
        return handle

    def peek(self, session_id: str) -> SessionHandle | None:
        """Handle without touching liveness bookkeeping (diagnostics, tests)."""
        with self._lock:
            return self._sessions.get(session_id)

    def release(self, session_id: str) -> None:
        with self._lock:
            self._sessions.pop(session_id, None)

    def sweep(self) -> None:
        now = self.clock()
        with self._lock:
            stale = [
                sid
                for sid, h in self._sessions.items()
                if now - h.last_active > self.idle_timeout
            ]
            for sid in stale:
                del self._sessions[sid]

    def live_count(self) -> int:
        with self._lock:
            return len(self._sessions)


def _default_scenario_source(body: dict) -> tuple[GridMap, task.Scenario]:
    """Resolve the start frame's scenario: inline document or packaged fixture."""
    if "scenario" in body and isinstance(body["scenario"], dict):
        import json

        scenario = task.scenario_from_json(json.dumps(body["scenario"]))
    elif "scenario" in body and isinstance(body["scenario"], str):
        raise BadScenario(f"unknown scenario reference {body['scenario']!r}")
    else:
        raise BadScenario("start frame must carry an inline scenario document")
    try:
        map_text = task.fixture_text(scenario.map_name)
    except (FileNotFoundError, OSError) as exc:
        raise BadScenario(f"unknown map {scenario.map_name!r}") from exc
    return env.load_map(map_text), scenario


class ProtocolEngine:
    """Applies protocol frames to the registry and produces response frames.

    Thread-safe: distinct sessions may be driven concurrently; frames for one
    session serialize on its lock.
    """

    def __init__(self, registry: SessionRegistry | None = None, scenario_source=None):
        self.registry = registry if registry is not None else SessionRegistry()
        self.scenario_source = scenario_source or _default_scenario_source

    # -- frame plumbing ---------------------------------------------------

    def handle_frame(self, frame) -> dict:
        seq = frame.get("seq", 0) if isinstance(frame, dict) else 0
        if not isinstance(seq, int):
            seq = 0
        try:
            self._check_shape(frame)
            ftype = frame["type"]
            if ftype == "start":
                return self._handle_start(frame)
            if ftype == "action":
                return self._handle_action(frame)
            if ftype == "assist":
                return self._handle_assist(frame)
            return self._handle_finish(frame)
        except UnknownSession as exc:
            return self._error(seq, "unknown_session", str(exc), frame_session(frame))
        except BadScenario as exc:
            return self._error(seq, "bad_scenario", str(exc), frame_session(frame))
        except SessionComplete as exc:
            return self._error(seq, "session_complete", str(exc), frame_session(frame))
        except UnknownObject as exc:
            return self._error(seq, "unknown_object", str(exc), frame_session(frame))
        except _BadFrame as exc:
            return self._error(seq, "bad_frame", str(exc), frame_session(frame))
        except (ValueError, KeyError, TypeError) as exc:
            return self._error(seq, "bad_action", f"{exc}", frame_session(frame))

    def _check_shape(self, frame) -> None:
        if not isinstance(frame, dict):
            raise _BadFrame("frame must be a JSON object")
        if frame.get("v") != PROTOCOL_VERSION:
            raise _BadFrame(f"frame must carry v={PROTOCOL_VERSION}")
        if frame.get("type") not in CLIENT_TYPES:
            raise _BadFrame(f"unknown frame type {frame.get('type')!r}")
        if not isinstance(frame.get("seq"), int):
            raise _BadFrame("frame must carry an integer seq")
        if "body" in frame and not isinstance(frame["body"], dict):
            raise _BadFrame("body must be an object")

    def _error(self, seq: int, code: str, message: str, session_id: str | None) -> dict:
        out = {
            "v": PROTOCOL_VERSION,
            "type": "error",
            "seq": seq,
            "body": {"code": code, "message": message},
        }
        if session_id:
            out["session_id"] = session_id
        return out

    def _frame(self, ftype: str, seq: int, session_id: str, body: dict) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "type": ftype,
            "session_id": session_id,
            "seq": seq,
            "body": body,
        }

    # -- message handlers ---------------------------------------------------

    def _handle_start(self, frame: dict) -> dict:
        body = frame.get("body", {})
        fidelity = body.get("fidelity", "optimal")
        solver_policy = body.get("solver_policy", "auto")
        if fidelity not in session.FIDELITIES:
            raise BadScenario(f"unknown fidelity {fidelity!r}")
        grid, scenario = self.scenario_source(body)
        try:
            state = session.start_session(
                grid,
                scenario,
                fidelity=fidelity,
                solver_policy=solver_policy,
                budget=int(body.get("budget", session.SESSION_BUDGET)),
            )
        except KondoError as exc:
            raise BadScenario(f"scenario rejected: {exc}") from exc
        handle = self.registry.create(state)
        return self._frame(
            "state",
            frame["seq"],
            handle.session_id,
            {
                "session_id": handle.session_id,
                "protocol": handle.protocol_version,
                "map": map_payload(grid),
                "scenario": scenario_payload(scenario),
                "snapshot": session.snapshot(state),
                "assistance": assistance_payload_dict(session.assistance_view(state)),
            },
        )

    def _handle_action(self, frame: dict) -> dict:
        handle = self.registry.get(_require_session_id(frame))
        body = frame.get("body", {})
        kind = body.get("kind")
        with handle.lock:
            state = handle.state
            replans_before = state.replans
            if kind == "move":
                session.apply_move(state, _require_str(body, "direction"))
            elif kind == "pick":
                session.apply_pick(state, _require_str(body, "object_id"))
            elif kind == "place":
                session.apply_place(state, _require_str(body, "object_id"))
            else:
                raise _BadFrame(f"unknown action kind {kind!r}")
            return self._frame(
                "state",
                frame["seq"],
                handle.session_id,
                {
                    "snapshot": session.snapshot(state),
                    "assistance": assistance_payload_dict(session.assistance_view(state)),
                    "message": state.message,
                    "replanned": state.replans > replans_before,
                    "done": state.done,
                },
            )

    def _handle_assist(self, frame: dict) -> dict:
        handle = self.registry.get(_require_session_id(frame))
        with handle.lock:
            return self._frame(
                "assist",
                frame["seq"],
                handle.session_id,
                {"assistance": assistance_payload_dict(session.assistance_view(handle.state))},
            )

    def _handle_finish(self, frame: dict) -> dict:
        session_id = _require_session_id(frame)
        handle = self.registry.get(session_id)
        with handle.lock:
            state = handle.state
            trace = agents.trace_from_session(state, handle.policy_label)
            if state.done:
                m = metrics.episode_metrics(trace, state.distmat).as_dict()
                m["partial"] = False
            else:
                m = metrics.partial_metrics(trace, state.distmat)
            trace_name = None
            if self.registry.trace_dir is not None:
                self.registry.trace_dir.mkdir(parents=True, exist_ok=True)
                trace_name = f"session_{session_id}.json"
                (self.registry.trace_dir / trace_name).write_text(
                    agents.trace_to_json(trace, m), encoding="utf-8"
                )
            self.registry.release(session_id)
            return self._frame(
                "metrics",
                frame["seq"],
                session_id,
                {"metrics": m, "trace": trace_name},
            )


class _BadFrame(KondoError):
    pass


def frame_session(frame) -> str | None:
    if isinstance(frame, dict) and isinstance(frame.get("session_id"), str):
        return frame["session_id"]
    return None


def _require_session_id(frame: dict) -> str:
    sid = frame.get("session_id")
    if not isinstance(sid, str):
        raise _BadFrame("frame must carry a session_id")
    return sid


def _require_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str):
        raise _BadFrame(f"action body must carry string {key!r}")
    return value


# --- payload shaping -------------------------------------------------------


def map_payload(grid: GridMap) -> dict:
    out = {"width": grid.width, "height": grid.height, "rows": list(grid.rows)}
    if grid.room_rows is not None:
        out["room_rows"] = list(grid.room_rows)
        out["room_names"] = dict(grid.room_names)
    return out


def scenario_payload(scenario: task.Scenario) -> dict:
    import json

    return json.loads(task.scenario_to_json(scenario))


def assistance_payload_dict(payload: session.AssistancePayload) -> dict:
    crumbs = None
    if payload.breadcrumbs is not None:
        crumbs = {
            "points": [[p.x, p.y] for p in payload.breadcrumbs.points],
            "length": payload.breadcrumbs.length,
        }
    return {
        "breadcrumbs": crumbs,
        "highlights": list(payload.highlights),
        "checklist": [
            {"text": item.text, "done": item.done, "ref": item.ref} for item in payload.checklist
        ],
        "numbered": payload.numbered,
        "message": payload.message,
    }
