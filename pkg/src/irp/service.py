"""HTTP prediction service (stdlib ``http.server``)."""

from __future__ import annotations

import json
import logging
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from .domain import parse_products, parse_query
from .pipeline import Predictor

logger = logging.getLogger(__name__)

MAX_BODY_BYTES = 1 << 20


class RequestError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


class PredictionService:
    """Stateless request handling over an immutable predictor."""

    def __init__(self, predictor: Predictor, model_version: str):
        self.predictor = predictor
        self.model_version = model_version

    def parse(self, record: Any):
        if not isinstance(record, dict):
            raise RequestError(["body: must be a JSON object"])
        errors: list[str] = []
        utterance = parse_query(record, errors)
        products = ()
        if self.predictor.features.uses_products or "products" in record:
            products = parse_products(record, errors)
        if errors:
            raise RequestError(errors)
        return utterance, products or ()

    def predict(self, record: Any) -> dict:
        utterance, products = self.parse(record)
        p = self.predictor.predict_proba(utterance, products)
        threshold = self.predictor.threshold
        return {
            "probability": p,
            "decision": int(p >= threshold),
            "threshold": threshold,
            "model_version": self.model_version,
        }


class _Handler(BaseHTTPRequestHandler):
    server_version = "irp"
    protocol_version = "HTTP/1.1"

    @property
    def service(self) -> PredictionService:
        return self.server.service

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/healthz":
            self._send(HTTPStatus.OK, {"status": "ok", "model_version": self.service.model_version})
        else:
            self._send(HTTPStatus.NOT_FOUND, {"error": f"no route for GET {self.path}"})

    def do_POST(self):
        if self.path != "/predict":
            self._send(HTTPStatus.NOT_FOUND, {"error": f"no route for POST {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self.close_connection = True
            self._send(HTTPStatus.BAD_REQUEST, {"error": "Content-Length: not an integer"})
            return
        if length > MAX_BODY_BYTES:
            self.close_connection = True
            self._send(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": f"body: exceeds {MAX_BODY_BYTES} bytes"})
            return
        raw = self.rfile.read(length)
        try:
            record = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send(HTTPStatus.BAD_REQUEST, {"error": f"body: invalid JSON ({exc})"})
            return
        try:
            response = self.service.predict(record)
        except RequestError as exc:
            self._send(HTTPStatus.BAD_REQUEST, {"error": str(exc), "fields": exc.errors})
            return
        except Exception as exc:  # keep serving; report as a bad request
            logger.exception("prediction failed")
            self._send(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
            return
        self._send(HTTPStatus.OK, response)


class PredictionServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, service: PredictionService):
        self.service = service
        super().__init__(address, _Handler)


def make_server(predictor: Predictor, model_version: str, host: str = "127.0.0.1", port: int = 8080) -> PredictionServer:
    """Bind the service; ``port=0`` picks a free port (see ``server_address``)."""
    return PredictionServer((host, port), PredictionService(predictor, model_version))
