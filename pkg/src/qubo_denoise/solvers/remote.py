"""HTTP/JSON client for an external QUBO sampler, plus a reference server.

Wire format, version 1 (all JSON, UTF-8)::

    request  = {"format": "qubo", "version": 1, "n": <int>,
                "terms": [[i, j, c], ...],     # i <= j, energy = sum c * x_i * x_j
                "num_reads": <int>, "seed": <int or null>}
    response = {"version": 1,
                "samples": [[0, 1, ...], ...],  # each of length n
                "energies": [<float>, ...]}     # informational only

Off-diagonal terms carry the polynomial coefficient, i.e. twice the
symmetric matrix entry. The client ignores reported energies and recomputes
them locally.
"""
from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import List, Tuple

import numpy as np

from ..core import QuboMatrix, qubo_energy
from .base import QuboSolver, SolverError, seed_sequence

WIRE_VERSION = 1


class ProtocolError(SolverError):
    """The remote endpoint answered with something that is not a valid response."""


class DimensionError(ProtocolError):
    """A returned sample does not have the problem's dimension."""


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    timeout: float = 30.0
    token: str | None = None


def encode_request(q: QuboMatrix, num_reads: int = 1, seed: int | None = None) -> dict:
    return {"format": "qubo", "version": WIRE_VERSION, "n": q.n,
            "terms": [[i, j, c] for i, j, c in q.to_terms()],
            "num_reads": int(num_reads), "seed": seed}


def decode_request(payload: dict) -> Tuple[QuboMatrix, int, int | None]:
    if payload.get("format") != "qubo" or payload.get("version") != WIRE_VERSION:
        raise ProtocolError("unsupported request format/version")
    try:
        n = int(payload["n"])
        q = QuboMatrix.from_terms(n, payload["terms"])
        return q, int(payload.get("num_reads", 1)), payload.get("seed")
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProtocolError(f"malformed request: {exc}") from exc


def decode_response(payload, n: int) -> List[np.ndarray]:
    if not isinstance(payload, dict) or payload.get("version") != WIRE_VERSION:
        raise ProtocolError("response is not a version-1 object")
    samples = payload.get("samples")
    if not isinstance(samples, list) or not samples:
        raise ProtocolError("response has no samples")
    out = []
    for k, s in enumerate(samples):
        if not isinstance(s, list):
            raise ProtocolError(f"sample {k} is not a list")
        if len(s) != n:
            raise DimensionError(f"sample {k} has length {len(s)}, expected {n}")
        arr = np.asarray(s)
        if arr.dtype.kind not in "iub" or not np.all((arr == 0) | (arr == 1)):
            raise ProtocolError(f"sample {k} is not a 0/1 vector")
        out.append(arr.astype(np.uint8))
    return out


def _post(cfg: EndpointConfig, body: dict):
    data = json.dumps(body).encode()
    headers = {"Content-Type": "application/json"}
    if cfg.token:
        headers["Authorization"] = f"Bearer {cfg.token}"
    req = urllib.request.Request(cfg.url, data=data, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=cfg.timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        raise SolverError(f"remote sampler returned HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise SolverError(f"cannot reach remote sampler at {cfg.url}: {exc}") from exc
    try:
        return json.loads(raw)
    except ValueError as exc:
        raise ProtocolError(f"response is not valid JSON: {exc}") from exc


def _seed_int(seed) -> int:
    return int(seed_sequence(seed).generate_state(1)[0])


class RemoteSolver(QuboSolver):
    """Submits problems to an HTTP endpoint speaking the version-1 wire format."""

    stochastic = True

    def __init__(self, endpoint: EndpointConfig | str):
        if isinstance(endpoint, str):
            endpoint = EndpointConfig(endpoint)
        self.endpoint = endpoint

    def _request(self, q, num_reads, seed):
        payload = _post(self.endpoint, encode_request(q, num_reads, _seed_int(seed)))
        samples = decode_response(payload, q.n)
        if len(samples) != num_reads:
            raise ProtocolError(f"asked for {num_reads} samples, got {len(samples)}")
        return samples

    def _solve(self, q, seed):
        return self._request(q, 1, seed)[0]

    def sample(self, q, num_reads, seed=None):
        """All reads in one request; energies recomputed locally."""
        if num_reads < 1:
            raise ValueError("num_reads must be >= 1")
        self._check_size(q)
        return [(x, qubo_energy(q, x)) for x in self._request(q, num_reads, seed)]


def solve_remote(q: QuboMatrix, endpoint: EndpointConfig | str, seed=None):
    return RemoteSolver(endpoint).solve(q, seed)


class _Handler(BaseHTTPRequestHandler):
    solver: QuboSolver

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        try:
            q, num_reads, seed = decode_request(json.loads(self.rfile.read(length)))
        except (ValueError, ProtocolError) as exc:
            self._reply(400, {"error": str(exc)})
            return
        try:
            reads = self.solver.sample(q, num_reads, seed)
        except (ValueError, SolverError) as exc:
            self._reply(500, {"error": str(exc)})
            return
        self._reply(200, {"version": WIRE_VERSION,
                          "samples": [x.tolist() for x, _ in reads],
                          "energies": [e for _, e in reads]})

    def _reply(self, code, body):
        data = json.dumps(body).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, format, *args):
        pass


def make_server(solver: QuboSolver, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Reference sampler server answering with ``solver``; ``port=0`` picks a free port."""
    handler = type("Handler", (_Handler,), {"solver": solver})
    return ThreadingHTTPServer((host, port), handler)


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    return t
