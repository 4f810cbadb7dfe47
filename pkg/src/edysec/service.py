"""HTTP verdict service: POST /v1/analyze scores one package record against a
loaded model artifact; GET /v1/health reports the artifact fingerprint."""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .artifact import ModelArtifact, load_artifact, predict_package
from .errors import MissingFeature


class VerdictHandler(BaseHTTPRequestHandler):
    artifact: ModelArtifact  # set by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(format, *args)

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/health":
            self._reply(200, {"status": "ok", "fingerprint": self.artifact.fingerprint})
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/v1/analyze":
            self._reply(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": "request body must be JSON"})
            return
        if not isinstance(request, dict) or not isinstance(request.get("features"), dict):
            self._reply(400, {"error": "request must carry a 'features' object"})
            return
        try:
            report = predict_package(
                self.artifact,
                request["features"],
                package=str(request.get("package", "package")),
                explain_verdict=bool(request.get("explain", False)),
            )
        except MissingFeature as exc:
            self._reply(422, {"error": str(exc), "column": exc.column})
            return
        self._reply(200, report.to_dict())


def make_server(artifact: ModelArtifact, host: str = "127.0.0.1", port: int = 8730) -> ThreadingHTTPServer:
    handler = type("BoundVerdictHandler", (VerdictHandler,), {"artifact": artifact})
    return ThreadingHTTPServer((host, port), handler)


def serve(artifact_path, host: str = "127.0.0.1", port: int = 8730) -> None:
    server = make_server(load_artifact(artifact_path), host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
