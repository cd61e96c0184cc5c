"""Session protocol: engine semantics, golden transcript replay, transports."""

from __future__ import annotations

import asyncio
import json
import threading
from pathlib import Path

import pytest

from kondo import session, task
from kondo.service.engine import ProtocolEngine, SessionRegistry
from kondo.service.server import KondoServer

TRANSCRIPT = Path(__file__).parent / "transcripts" / "golden_n6.json"


@pytest.fixture()
def scenario_doc(scenario6):
    return json.loads(task.scenario_to_json(scenario6))


def start_frame(scenario_doc, seq=1, fidelity="optimal"):
    return {
        "v": 1,
        "type": "start",
        "seq": seq,
        "body": {"scenario": scenario_doc, "fidelity": fidelity},
    }


class TestEngineBasics:
    def test_start_returns_full_snapshot(self, scenario_doc):
        engine = ProtocolEngine()
        r = engine.handle_frame(start_frame(scenario_doc))
        assert r["type"] == "state" and r["seq"] == 1
        body = r["body"]
        assert body["map"]["width"] > 0
        assert len(body["scenario"]["objects"]) == 6
        assert len(body["scenario"]["bins"]) == 6
        assert body["assistance"]["breadcrumbs"] is not None
        assert body["assistance"]["numbered"] is True

    def test_fidelity_rules_in_payload(self, scenario_doc):
        engine = ProtocolEngine()
        none = engine.handle_frame(start_frame(scenario_doc, fidelity="none"))
        assert none["body"]["assistance"]["breadcrumbs"] is None
        assert none["body"]["assistance"]["highlights"] == []
        hi = engine.handle_frame(start_frame(scenario_doc, seq=2, fidelity="highlight"))
        assert hi["body"]["assistance"]["breadcrumbs"] is None
        assert len(hi["body"]["assistance"]["highlights"]) == 6

    def test_two_starts_get_distinct_ids(self, scenario_doc):
        engine = ProtocolEngine()
        a = engine.handle_frame(start_frame(scenario_doc, seq=1))
        b = engine.handle_frame(start_frame(scenario_doc, seq=2))
        assert a["session_id"] != b["session_id"]

    def test_unknown_map_is_bad_scenario(self, scenario_doc):
        engine = ProtocolEngine()
        doc = dict(scenario_doc, map_name="missing.map")
        r = engine.handle_frame(start_frame(doc))
        assert r["type"] == "error" and r["body"]["code"] == "bad_scenario"

    def test_named_scenario_refs_rejected(self):
        engine = ProtocolEngine()
        r = engine.handle_frame(
            {"v": 1, "type": "start", "seq": 1, "body": {"scenario": "nope"}}
        )
        assert r["type"] == "error" and r["body"]["code"] == "bad_scenario"

    def test_blocked_move_echoes_reject_text(self, scenario_doc):
        engine = ProtocolEngine()
        sid = engine.handle_frame(start_frame(scenario_doc))["session_id"]
        handle = engine.registry.peek(sid)
        from kondo import env

        blocked = None
        pos = handle.state.position
        for d in env.DIRECTIONS:
            if env.step_target(handle.state.grid, pos, d) is None:
                blocked = d
                break
        if blocked is None:
            pytest.skip("start cell has no adjacent wall")
        r = engine.handle_frame(
            {
                "v": 1,
                "type": "action",
                "session_id": sid,
                "seq": 2,
                "body": {"kind": "move", "direction": blocked},
            }
        )
        assert r["body"]["message"] == session.MSG_BLOCKED

    def test_finish_mid_task_is_partial(self, scenario_doc, tmp_path):
        engine = ProtocolEngine(SessionRegistry(trace_dir=tmp_path))
        sid = engine.handle_frame(start_frame(scenario_doc))["session_id"]
        r = engine.handle_frame({"v": 1, "type": "finish", "session_id": sid, "seq": 2})
        assert r["type"] == "metrics"
        assert r["body"]["metrics"]["partial"] is True
        assert (tmp_path / r["body"]["trace"]).exists()
        again = engine.handle_frame({"v": 1, "type": "finish", "session_id": sid, "seq": 3})
        assert again["type"] == "error" and again["body"]["code"] == "unknown_session"

    def test_idle_sessions_expire(self, scenario_doc):
        now = [0.0]
        engine = ProtocolEngine(SessionRegistry(idle_timeout=100, clock=lambda: now[0]))
        sid = engine.handle_frame(start_frame(scenario_doc))["session_id"]
        now[0] = 50.0
        ok = engine.handle_frame({"v": 1, "type": "assist", "session_id": sid, "seq": 2})
        assert ok["type"] == "assist"
        now[0] = 151.0  # 101 idle seconds since the assist refreshed liveness
        gone = engine.handle_frame({"v": 1, "type": "assist", "session_id": sid, "seq": 3})
        assert gone["type"] == "error" and gone["body"]["code"] == "unknown_session"


class TestGoldenTranscript:
    def test_replay_reproduces_hashes_and_snapshots(self):
        from .replay import replay_transcript

        stats = replay_transcript(TRANSCRIPT)
        assert stats["final_done"] is True
        assert stats["rejected_frames_hash_stable"] >= 5


class TestConcurrency:
    def test_sessions_never_interact(self, scenario_doc):
        engine = ProtocolEngine()
        sids = [
            engine.handle_frame(start_frame(scenario_doc, seq=i + 1))["session_id"]
            for i in range(2)
        ]
        moves = ["E", "W"] * 25
        responses: dict[str, list] = {sid: [] for sid in sids}

        def pump(sid, base):
            for i, d in enumerate(moves):
                r = engine.handle_frame(
                    {
                        "v": 1,
                        "type": "action",
                        "session_id": sid,
                        "seq": base + i,
                        "body": {"kind": "move", "direction": d},
                    }
                )
                responses[sid].append(r)

        threads = [
            threading.Thread(target=pump, args=(sid, 1000 * (k + 1)))
            for k, sid in enumerate(sids)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        # seq echoes arrive in order per session
        for k, sid in enumerate(sids):
            assert [r["seq"] for r in responses[sid]] == [1000 * (k + 1) + i for i in range(50)]
            assert all(r["session_id"] == sid for r in responses[sid])

        # each session's final state matches a serial run of the same frames
        serial = ProtocolEngine()
        ssid = serial.handle_frame(start_frame(scenario_doc))["session_id"]
        for i, d in enumerate(moves):
            serial.handle_frame(
                {
                    "v": 1,
                    "type": "action",
                    "session_id": ssid,
                    "seq": i,
                    "body": {"kind": "move", "direction": d},
                }
            )
        want = session.state_hash(serial.registry.peek(ssid).state)
        for sid in sids:
            assert session.state_hash(engine.registry.peek(sid).state) == want


class TestTransports:
    def _run(self, coro):
        return asyncio.run(asyncio.wait_for(coro, timeout=30))

    def test_ndjson_tcp_roundtrip(self, scenario_doc, tmp_path):
        async def scenario():
            server = KondoServer(
                ProtocolEngine(SessionRegistry(trace_dir=tmp_path)),
                host="127.0.0.1",
                port=0,
            )
            tcp = await asyncio.start_server(server._handle_tcp, "127.0.0.1", 0)
            port = tcp.sockets[0].getsockname()[1]
            async with tcp:
                reader, writer = await asyncio.open_connection("127.0.0.1", port)
                writer.write((json.dumps(start_frame(scenario_doc)) + "\n").encode())
                await writer.drain()
                reply = json.loads(await reader.readline())
                assert reply["type"] == "state"
                sid = reply["session_id"]
                writer.write(b"garbage that is not json\n")
                await writer.drain()
                bad = json.loads(await reader.readline())
                assert bad["type"] == "error" and bad["body"]["code"] == "bad_frame"
                writer.write(
                    (json.dumps({"v": 1, "type": "finish", "session_id": sid, "seq": 2}) + "\n").encode()
                )
                await writer.drain()
                fin = json.loads(await reader.readline())
                assert fin["type"] == "metrics"
                writer.close()

        self._run(scenario())

    def test_websocket_and_static_files(self, scenario_doc, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>kondo</body></html>")

        async def scenario():
            from websockets.asyncio.client import connect
            from websockets.asyncio.server import serve as ws_serve

            server = KondoServer(ProtocolEngine(), host="127.0.0.1", port=0, ui_dir=ui)
            async with ws_serve(
                server._handle_ws,
                "127.0.0.1",
                0,
                process_request=server._process_request,
            ) as ws_server:
                port = ws_server.sockets[0].getsockname()[1]
                async with connect(f"ws://127.0.0.1:{port}/ws") as client:
                    await client.send(json.dumps(start_frame(scenario_doc)))
                    reply = json.loads(await client.recv())
                    assert reply["type"] == "state"
                    assert reply["body"]["assistance"]["numbered"] is True

                async def http_get(path):
                    reader, writer = await asyncio.open_connection("127.0.0.1", port)
                    writer.write(
                        f"GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".encode()
                    )
                    await writer.drain()
                    raw = await reader.read()
                    writer.close()
                    return raw

                raw = await http_get("/")
                assert b"200" in raw.split(b"\r\n")[0]
                assert b"kondo" in raw

                raw = await http_get("/scenario.json?n=12&seed=3")
                body = raw.split(b"\r\n\r\n", 1)[1]
                doc = task.scenario_from_json(body.decode())
                assert doc.n == 12 and doc.seed == 3

                raw = await http_get("/scenario.json?n=13")
                assert b"404" in raw.split(b"\r\n")[0]

        self._run(scenario())
