"""QUBO minimization backends behind one :class:`QuboSolver` interface."""
from .annealing import SaConfig, SimulatedAnnealingSolver, anneal_restarts, solve_sa
from .base import QuboSolver, SolverError, single_flip_delta
from .exhaustive import ExhaustiveSolver, exhaustive_minimize, solve_exhaustive
from .remote import (DimensionError, EndpointConfig, ProtocolError, RemoteSolver,
                     make_server, serve_in_thread, solve_remote)

__all__ = [
    "QuboSolver", "SolverError", "single_flip_delta",
    "ExhaustiveSolver", "exhaustive_minimize", "solve_exhaustive",
    "SaConfig", "SimulatedAnnealingSolver", "anneal_restarts", "solve_sa",
    "RemoteSolver", "EndpointConfig", "ProtocolError", "DimensionError",
    "make_server", "serve_in_thread", "solve_remote",
    "make_solver",
]


def make_solver(name: str, sa_config: SaConfig | None = None, endpoint=None) -> QuboSolver:
    """Solver factory keyed by the CLI names ``exhaustive``, ``sa`` and ``remote``."""
    if name == "exhaustive":
        return ExhaustiveSolver()
    if name == "sa":
        return SimulatedAnnealingSolver(sa_config or SaConfig())
    if name == "remote":
        if endpoint is None:
            raise ValueError("remote solver needs an endpoint URL")
        return RemoteSolver(endpoint)
    raise ValueError(f"unknown solver {name!r}")
