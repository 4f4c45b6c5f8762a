"""Server-side model: FCFS servers with truncated-normal processing times,
per-request-type routing across the tiers, and wide-area round-trip delays.

The default farm is the five-server reference configuration (front-end,
web, database, application, authentication). Each request pays one outbound
and one inbound WAN delay and visits its route's servers in order; a server
appearing twice is queued for twice. LAN, router, and firewall delays are
taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from .kernel import FifoResource, RandomStream, Simulator, StreamFamily

__all__ = [
    "FarmError",
    "ServerSpec",
    "WanSpec",
    "RouteTable",
    "Request",
    "ServerFarm",
    "DemandReport",
    "service_demand",
    "default_server_specs",
    "DEFAULT_ROUTES",
    "REQUEST_TYPES",
]

REQUEST_TYPES = ("Browse", "Search", "Checkout", "Add")

# sigma defaults to mean/30 so that +/-3 sigma spans +/-10% of the mean.
SIGMA_RATIO = 1.0 / 30.0


class FarmError(ValueError):
    """Invalid farm specification."""


@dataclass(frozen=True)
class ServerSpec:
    """One server: mean processing seconds and the normal-spread sigma."""

    name: str
    mean_service: float
    sigma: float | None = None

    def __post_init__(self):
        if self.mean_service <= 0.0:
            raise FarmError(f"server {self.name!r}: mean service must be positive")
        if self.sigma is not None and self.sigma <= 0.0:
            raise FarmError(f"server {self.name!r}: sigma must be positive")

    @property
    def effective_sigma(self) -> float:
        return self.sigma if self.sigma is not None else self.mean_service * SIGMA_RATIO


def default_server_specs() -> dict[str, ServerSpec]:
    """The reference five-tier farm (times in seconds)."""
    means = {"FES": 0.001, "WS": 0.010, "DbS": 0.005, "ApS": 0.010, "AuS": 0.010}
    return {name: ServerSpec(name, mean) for name, mean in means.items()}


# Back-end sequence per request type; the front end is prepended separately.
DEFAULT_ROUTES: dict[str, tuple[str, ...]] = {
    "Search": ("WS", "ApS", "DbS", "ApS", "WS"),
    "Browse": ("WS", "DbS", "WS"),
    "Checkout": ("WS", "AuS", "DbS", "AuS", "WS"),
    "Add": ("WS", "DbS", "WS"),  # cart write, mirrors Browse
}


@dataclass(frozen=True)
class WanSpec:
    """Wide-area delay, applied once outbound and once inbound per request."""

    mean: float = 0.5
    sigma: float = 0.133333

    def __post_init__(self):
        if self.mean <= 0.0 or self.sigma <= 0.0:
            raise FarmError("WAN mean and sigma must be positive")


class RouteTable:
    """Maps request types to the full server path.

    When the front end participates it admits every request exactly once, at
    the head of the path.
    """

    def __init__(
        self,
        routes: Mapping[str, tuple[str, ...]],
        server_names,
        fes_enabled: bool = True,
        fes_name: str = "FES",
    ) -> None:
        names = set(server_names)
        for rtype, seq in routes.items():
            if not seq:
                raise FarmError(f"route for {rtype!r} is empty")
            for server in seq:
                if server not in names:
                    raise FarmError(f"route for {rtype!r} names unknown server {server!r}")
        if fes_enabled and fes_name not in names:
            raise FarmError(f"front end {fes_name!r} enabled but not defined")
        self._routes = {rtype: tuple(seq) for rtype, seq in routes.items()}
        self._fes = (fes_name,) if fes_enabled else ()

    @property
    def request_types(self) -> tuple[str, ...]:
        return tuple(self._routes)

    def route_for(self, rtype: str) -> tuple[str, ...]:
        if rtype not in self._routes:
            raise FarmError(f"unknown request type {rtype!r}")
        return self._fes + self._routes[rtype]


class Request:
    """One HTTP request and its per-hop timeline."""

    __slots__ = (
        "id",
        "rtype",
        "session_id",
        "issued_at",
        "completed_at",
        "response_time",
        "hops",
        "_route",
        "_hop",
        "_hop_enqueued",
        "_on_response",
    )

    def __init__(self, rid: int, rtype: str, session_id: int, issued_at: float):
        self.id = rid
        self.rtype = rtype
        self.session_id = session_id
        self.issued_at = issued_at
        self.completed_at = float("nan")
        self.response_time = float("nan")
        self.hops = None  # list of (server, queued_at, completed_at) when recording
        self._route = None
        self._hop = 0
        self._hop_enqueued = 0.0
        self._on_response = None


class ServerFarm:
    """Wires resources, routing, and delay sampling onto one simulator."""

    def __init__(
        self,
        sim: Simulator,
        specs: Mapping[str, ServerSpec],
        route_table: RouteTable,
        wan: WanSpec | None,
        streams: StreamFamily,
        observer: Callable[[Request], None] | None = None,
        record_hops: bool = False,
    ) -> None:
        self._sim = sim
        self.route_table = route_table
        self.resources = {name: FifoResource(sim, name) for name in specs}
        self._wan = wan
        self._wan_sampler = (
            _TruncatedNormalSampler(streams.stream("wan"), wan.mean, wan.sigma)
            if wan is not None
            else None
        )
        self._samplers: dict[str, Callable[[], float]] = {}
        for name, spec in specs.items():
            stream = streams.stream("service", name)
            self._samplers[name] = _TruncatedNormalSampler(
                stream, spec.mean_service, spec.effective_sigma
            )
        # (resource, sampler) pairs per type, resolved once.
        self._paths = {
            rtype: tuple(
                (self.resources[s], self._samplers[s]) for s in route_table.route_for(rtype)
            )
            for rtype in route_table.request_types
        }
        self.observer = observer
        self._record_hops = record_hops
        self._next_id = 0

    def _wan_delay(self) -> float:
        if self._wan_sampler is None:
            return 0.0
        return self._wan_sampler()

    def submit(self, rtype: str, session_id: int, on_response: Callable[[float], None]) -> int:
        """Issue a request now; ``on_response(response_time)`` fires when the
        reply reaches the client."""
        if rtype not in self._paths:
            raise FarmError(f"unknown request type {rtype!r}")
        rid = self._next_id
        self._next_id += 1
        req = Request(rid, rtype, session_id, self._sim.now)
        req._route = self._paths[rtype]
        req._on_response = on_response
        if self._record_hops:
            req.hops = []
        outbound = self._wan_delay()
        if outbound > 0.0:
            self._sim.schedule_after(outbound, lambda: self._next_hop(req))
        else:
            self._next_hop(req)
        return rid

    def _next_hop(self, req: Request) -> None:
        resource, sampler = req._route[req._hop]
        req._hop_enqueued = self._sim.now
        resource.enqueue(req, sampler(), self._hop_done)

    def _hop_done(self, req: Request) -> None:
        if req.hops is not None:
            server = req._route[req._hop][0].name
            req.hops.append((server, req._hop_enqueued, self._sim.now))
        req._hop += 1
        if req._hop < len(req._route):
            self._next_hop(req)
            return
        inbound = self._wan_delay()
        if inbound > 0.0:
            self._sim.schedule_after(inbound, lambda: self._complete(req))
        else:
            self._complete(req)

    def _complete(self, req: Request) -> None:
        req.completed_at = self._sim.now
        req.response_time = req.completed_at - req.issued_at
        if self.observer is not None:
            self.observer(req)
        req._on_response(req.response_time)


class _TruncatedNormalSampler:
    """Positive normal variates with fixed parameters, validated once."""

    __slots__ = ("_stream", "_mean", "_sigma")

    def __init__(self, stream: RandomStream, mean: float, sigma: float):
        if mean <= 0.0 or sigma <= 0.0:
            raise FarmError("delay parameters must be positive")
        self._stream = stream
        self._mean = mean
        self._sigma = sigma

    def __call__(self) -> float:
        mean = self._mean
        sigma = self._sigma
        normal = self._stream.standard_normal
        while True:
            value = mean + sigma * normal()
            if value > 0.0:
                return value


# ---------------------------------------------------------------------------
# Demand-law analysis


@dataclass
class DemandReport:
    """Per-server service demand (seconds per session) and the implied
    saturation rate 1/max demand."""

    demands: dict[str, float]
    bottleneck: str
    saturation_rate: float


def service_demand(
    route_table: RouteTable,
    specs: Mapping[str, ServerSpec],
    requests_per_session: Mapping[str, float],
) -> DemandReport:
    """Utilization-law demands: D(server) = sum over types of
    (requests of that type per session) x (appearances in route) x mean service."""
    demands = {name: 0.0 for name in specs}
    for rtype, count in requests_per_session.items():
        if count < 0.0:
            raise FarmError(f"negative request count for {rtype!r}")
        if count == 0.0:
            continue
        for server in route_table.route_for(rtype):
            demands[server] += count * specs[server].mean_service
    bottleneck = max(demands, key=lambda n: demands[n])
    peak = demands[bottleneck]
    return DemandReport(
        demands=demands,
        bottleneck=bottleneck,
        saturation_rate=(1.0 / peak) if peak > 0.0 else float("inf"),
    )
