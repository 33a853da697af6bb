import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qubo_denoise.core import QuboMatrix, all_states, qubo_energies, qubo_energy
from qubo_denoise.solvers import (DimensionError, EndpointConfig, ExhaustiveSolver,
                                  ProtocolError, RemoteSolver, SaConfig,
                                  SimulatedAnnealingSolver, SolverError, anneal_restarts,
                                  exhaustive_minimize, make_server, make_solver,
                                  serve_in_thread, single_flip_delta, solve_exhaustive,
                                  solve_sa)
from qubo_denoise.solvers.remote import decode_request, decode_response, encode_request

from conftest import random_qubo


# ----------------------------------------------------------------- exhaustive

def test_exhaustive_matches_enumeration(rng):
    for n in (1, 3, 7, 10):
        q = random_qubo(n, rng)
        x, e = solve_exhaustive(q)
        E = qubo_energies(q, all_states(n))
        assert e == pytest.approx(E.min(), abs=1e-12)
        np.testing.assert_array_equal(x, all_states(n)[np.argmin(E)])


def test_exhaustive_chunked_path(rng):
    # n > 16 exercises the head/tail split
    n = 18
    q = random_qubo(n, rng)
    x, e, idx = exhaustive_minimize(q)
    # no single flip can improve a global minimum
    assert all(single_flip_delta(q, x, i) >= -1e-9 for i in range(n))
    assert idx == int("".join(map(str, x)), 2)


def test_exhaustive_tie_break_is_lexicographic():
    x, e = solve_exhaustive(QuboMatrix(np.zeros((3, 3))))
    np.testing.assert_array_equal(x, [0, 0, 0])
    # both [1, 0] and [0, 1] reach -1; the smaller vector wins
    x, e = solve_exhaustive(QuboMatrix([[-1.0, 1.0], [1.0, -1.0]]))
    np.testing.assert_array_equal(x, [0, 1])
    assert e == -1.0


def test_exhaustive_size_limit():
    with pytest.raises(ValueError):
        ExhaustiveSolver().solve(QuboMatrix(np.zeros((25, 25))))


def test_exhaustive_sample_repeats():
    q = QuboMatrix(np.diag([-1.0, 1.0]))
    reads = ExhaustiveSolver().sample(q, 3)
    assert len(reads) == 3 and all(np.array_equal(x, [1, 0]) for x, _ in reads)


# ----------------------------------------------------------------- single flips

@settings(max_examples=80, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**31 - 1), st.data())
def test_single_flip_delta_matches_recompute(n, seed, data):
    r = np.random.default_rng(seed)
    q = random_qubo(n, r, scale=3.0)
    x = r.integers(0, 2, n).astype(np.uint8)
    i = data.draw(st.integers(0, n - 1))
    y = x.copy()
    y[i] ^= 1
    assert single_flip_delta(q, x, i) == pytest.approx(qubo_energy(q, y) - qubo_energy(q, x),
                                                      abs=1e-10)


def test_single_flip_delta_bounds():
    q = QuboMatrix(np.eye(2))
    with pytest.raises(IndexError):
        single_flip_delta(q, [0, 1], 2)


# ----------------------------------------------------------------- annealing

def test_sa_finds_optimum_on_small_instances(rng):
    cfg = SaConfig(sweeps=400, restarts=2)
    hits = 0
    for k in range(20):
        q = random_qubo(10, rng)
        _, e = SimulatedAnnealingSolver(cfg).solve(q, seed=k)
        hits += e <= solve_exhaustive(q)[1] + 1e-9
    assert hits >= 19


def test_sa_energy_is_recomputed_and_restarts_pick_best(rng):
    q = random_qubo(12, rng)
    cfg = SaConfig(sweeps=50, restarts=5, seed=4)
    x, e, energies = anneal_restarts(q, cfg)
    assert len(energies) == 6
    assert e == min(energies) == pytest.approx(qubo_energy(q, x))


def test_sa_determinism(rng):
    q = random_qubo(15, rng)
    cfg = SaConfig(sweeps=100, seed=11)
    a = solve_sa(q, cfg)
    b = solve_sa(q, cfg)
    np.testing.assert_array_equal(a[0], b[0])
    reads1 = SimulatedAnnealingSolver(cfg).sample(q, 4, seed=2)
    reads2 = SimulatedAnnealingSolver(cfg).sample(q, 4, seed=2)
    for (x1, _), (x2, _) in zip(reads1, reads2):
        np.testing.assert_array_equal(x1, x2)
    # unseeded calls fall back to the config seed
    np.testing.assert_array_equal(SimulatedAnnealingSolver(cfg).solve(q)[0],
                                  SimulatedAnnealingSolver(cfg).solve(q)[0])


def test_sa_zero_sweeps_returns_random_start(rng):
    q = random_qubo(5, rng)
    x, e = SimulatedAnnealingSolver(SaConfig(sweeps=0)).solve(q)
    assert x.shape == (5,) and e == pytest.approx(qubo_energy(q, x))


def test_sa_config_validation():
    with pytest.raises(ValueError):
        SaConfig(sweeps=-1)
    with pytest.raises(ValueError):
        SaConfig(beta_start=2.0, beta_end=1.0)
    with pytest.raises(ValueError):
        SaConfig(restarts=-1)
    b = SaConfig(sweeps=5, beta_start=0.1, beta_end=10.0).betas()
    np.testing.assert_allclose(b, [0.1, 10 ** -0.5, 1.0, 10 ** 0.5, 10.0])


def test_make_solver():
    assert isinstance(make_solver("exhaustive"), ExhaustiveSolver)
    assert isinstance(make_solver("sa"), SimulatedAnnealingSolver)
    with pytest.raises(ValueError):
        make_solver("remote")
    with pytest.raises(ValueError):
        make_solver("quantum")


# ----------------------------------------------------------------- remote

def test_wire_round_trip(rng):
    q = random_qubo(6, rng)
    payload = json.loads(json.dumps(encode_request(q, 3, 42)))
    back, reads, seed = decode_request(payload)
    np.testing.assert_allclose(back.entries, q.entries, atol=1e-15)
    assert (reads, seed) == (3, 42)
    for i, j, c in payload["terms"]:
        assert i <= j


def test_wire_coefficients_are_polynomial():
    q = QuboMatrix([[0.0, 1.5], [1.5, 0.0]])
    assert encode_request(q)["terms"] == [[0, 1, 3.0]]


@pytest.mark.parametrize("payload", [
    None, [], {"version": 2, "samples": [[0]]}, {"version": 1},
    {"version": 1, "samples": []}, {"version": 1, "samples": [[0, 2]]},
    {"version": 1, "samples": ["01"]},
])
def test_decode_response_rejects_malformed(payload):
    with pytest.raises(ProtocolError):
        decode_response(payload, 2)


def test_decode_response_wrong_length():
    with pytest.raises(DimensionError):
        decode_response({"version": 1, "samples": [[0, 1, 1]]}, 2)


@pytest.fixture
def loopback():
    server = make_server(ExhaustiveSolver())
    serve_in_thread(server)
    yield f"http://127.0.0.1:{server.server_address[1]}/"
    server.shutdown()
    server.server_close()


def test_remote_against_reference_server(loopback, rng):
    q = random_qubo(8, rng)
    solver = RemoteSolver(EndpointConfig(loopback, timeout=10))
    x, e = solver.solve(q, seed=1)
    ref, ref_e = solve_exhaustive(q)
    np.testing.assert_array_equal(x, ref)
    assert e == pytest.approx(ref_e)
    reads = solver.sample(q, 5, seed=2)
    assert len(reads) == 5


def test_reference_server_rejects_bad_requests(loopback):
    import urllib.error
    import urllib.request

    req = urllib.request.Request(loopback, data=b'{"format": "nope"}', method="POST")
    with pytest.raises(urllib.error.HTTPError) as info:
        urllib.request.urlopen(req, timeout=10)
    assert info.value.code == 400


class _Canned(BaseHTTPRequestHandler):
    body = b""

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        self.send_response(200)
        self.send_header("Content-Length", str(len(self.body)))
        self.end_headers()
        self.wfile.write(self.body)

    def log_message(self, *a):
        pass


def _canned_server(body: bytes):
    handler = type("H", (_Canned,), {"body": body})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server, f"http://127.0.0.1:{server.server_address[1]}/"


@pytest.mark.parametrize("body,error", [
    (b"not json", ProtocolError),
    (json.dumps({"version": 1, "samples": [[0, 1, 0]]}).encode(), DimensionError),
    (json.dumps({"version": 1, "samples": [[0, 1], [1, 1]]}).encode(), ProtocolError),
])
def test_remote_malformed_responses(body, error):
    server, url = _canned_server(body)
    try:
        with pytest.raises(error):
            RemoteSolver(url).solve(QuboMatrix(np.eye(2)))
    finally:
        server.shutdown()
        server.server_close()


def test_remote_energy_recomputed_locally():
    body = json.dumps({"version": 1, "samples": [[1, 1]], "energies": [-999.0]}).encode()
    server, url = _canned_server(body)
    try:
        x, e = RemoteSolver(url).solve(QuboMatrix(np.eye(2)))
        assert e == 2.0
    finally:
        server.shutdown()
        server.server_close()


def test_remote_unreachable():
    with pytest.raises(SolverError):
        RemoteSolver(EndpointConfig("http://127.0.0.1:9/", timeout=2)).solve(QuboMatrix(np.eye(2)))
