"""Asyncio transports for the session protocol.

Two channels speak the same frame schema: newline-delimited JSON over plain
TCP, and a websocket endpoint (one JSON frame per text message). The websocket
listener also answers plain HTTP requests by serving the browser client's
static bundle, so `kondo serve --ui` is a complete playable setup.
"""

from __future__ import annotations

import asyncio
import json
import logging
import mimetypes
from pathlib import Path
from urllib.parse import parse_qs

from websockets.asyncio.server import serve as ws_serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from ..errors import KondoError
from .engine import PROTOCOL_VERSION, ProtocolEngine

log = logging.getLogger("kondo.service")

WS_PATH = "/ws"
SCENARIO_PATH = "/scenario.json"


def _parse_error(seq: int, message: str) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": "error",
        "seq": seq,
        "body": {"code": "bad_frame", "message": message},
    }


class KondoServer:
    """Runs the NDJSON TCP listener and the websocket/static-file listener."""

    def __init__(
        self,
        engine: ProtocolEngine,
        host: str = "127.0.0.1",
        port: int = 8765,
        http_port: int | None = None,
        ui_dir: str | Path | None = None,
    ):
        self.engine = engine
        self.host = host
        self.port = port
        self.http_port = http_port if http_port is not None else port + 1
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self._scenario_cache: dict[tuple[int, int], str] = {}

    async def _respond(self, raw: str) -> str:
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError as exc:
            return json.dumps(_parse_error(0, f"frame is not valid JSON: {exc}"))
        # solver calls can take a moment; keep the event loop responsive
        response = await asyncio.to_thread(self.engine.handle_frame, frame)
        return json.dumps(response)

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        peer = writer.get_extra_info("peername")
        log.debug("tcp client connected: %s", peer)
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.decode("utf-8").strip()
                if not text:
                    continue
                writer.write((await self._respond(text)).encode("utf-8") + b"\n")
                await writer.drain()
        finally:
            writer.close()

    async def _handle_ws(self, connection):
        async for message in connection:
            if isinstance(message, bytes):
                message = message.decode("utf-8")
            await connection.send(await self._respond(message))

    def _scenario_response(self, query: str) -> Response:
        """Serve a generated scenario from the packaged fixture world, so the
        browser client always has a task to play."""
        params = parse_qs(query)
        try:
            n = int(params.get("n", ["6"])[0])
            seed = int(params.get("seed", ["7"])[0])
        except ValueError:
            return _http_response(404, "n and seed must be integers")
        key = (n, seed)
        if key not in self._scenario_cache:
            from .. import harness, task

            try:
                grid, bins = harness.load_world("apartment.map", "apartment_bins.json")
                scenario = harness.build_scenario(grid, bins, seed, n, "apartment.map")
            except KondoError as exc:
                return _http_response(404, f"cannot build scenario: {exc}")
            self._scenario_cache[key] = task.scenario_to_json(scenario)
        return _http_response(200, self._scenario_cache[key], "application/json")

    def _static_response(self, path: str) -> Response:
        if self.ui_dir is None:
            return _http_response(404, "no UI bundle configured; connect to /ws")
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir)) or not target.is_file():
            return _http_response(404, f"not found: {path}")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        return _http_response(200, target.read_bytes(), ctype)

    def _process_request(self, connection, request):
        if request.path == WS_PATH or "websocket" in request.headers.get("Upgrade", "").lower():
            return None  # proceed with the websocket handshake
        path, _, query = request.path.partition("?")
        if path == SCENARIO_PATH:
            return self._scenario_response(query)
        return self._static_response(path)

    async def run_forever(self):
        tcp_server = await asyncio.start_server(self._handle_tcp, self.host, self.port)
        async with ws_serve(
            self._handle_ws,
            self.host,
            self.http_port,
            process_request=self._process_request,
        ):
            log.info("ndjson on %s:%d, ws/http on %s:%d", self.host, self.port, self.host, self.http_port)
            async with tcp_server:
                await asyncio.Event().wait()  # run until cancelled


def _http_response(status: int, body: str | bytes, ctype: str = "text/plain") -> Response:
    if isinstance(body, str):
        body = body.encode("utf-8")
    phrase = {200: "OK", 404: "Not Found"}.get(status, "OK")
    headers = Headers(
        [("Content-Type", ctype), ("Content-Length", str(len(body))), ("Cache-Control", "no-store")]
    )
    return Response(status, phrase, headers, body)
