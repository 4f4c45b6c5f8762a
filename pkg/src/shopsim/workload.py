"""Session arrivals: a Poisson stream whose customers draw a class from the
scenario's probability mass function."""

from __future__ import annotations

from dataclasses import dataclass

from .kernel import RandomStream, sample_exponential

__all__ = [
    "WorkloadError",
    "ScenarioMix",
    "ArrivalProcess",
    "next_interarrival",
    "draw_class",
    "per_class_rates",
]

PMF_EPS = 1e-9


class WorkloadError(ValueError):
    """Invalid workload specification."""


@dataclass(frozen=True)
class ScenarioMix:
    """Ordered class names with their participation probabilities."""

    classes: tuple[str, ...]
    pmf: tuple[float, ...]

    def __post_init__(self):
        if len(self.classes) != len(self.pmf):
            raise WorkloadError("mix classes and pmf lengths differ")
        if not self.classes:
            raise WorkloadError("mix must name at least one class")
        if any(p < 0.0 for p in self.pmf):
            raise WorkloadError("mix probabilities must be non-negative")
        total = sum(self.pmf)
        if abs(total - 1.0) > PMF_EPS:
            raise WorkloadError(f"mix probabilities sum to {total:g}, expected 1")

    def items(self):
        return zip(self.classes, self.pmf)

    @classmethod
    def from_mapping(cls, mapping) -> "ScenarioMix":
        names = tuple(mapping)
        return cls(names, tuple(float(mapping[n]) for n in names))


@dataclass(frozen=True)
class ArrivalProcess:
    """Poisson arrivals at ``rate`` customers/second with a class mix."""

    rate: float
    mix: ScenarioMix

    def __post_init__(self):
        if self.rate < 0.0:
            raise WorkloadError(f"arrival rate must be >= 0, got {self.rate!r}")


def next_interarrival(process: ArrivalProcess, stream: RandomStream) -> float:
    """Exponential gap with mean 1/rate; rate 0 generates no arrivals at all."""
    if process.rate <= 0.0:
        raise WorkloadError("rate 0 produces no arrivals; do not sample gaps")
    return sample_exponential(stream, 1.0 / process.rate)


def draw_class(mix: ScenarioMix, stream: RandomStream) -> str:
    u = stream.uniform()
    acc = 0.0
    chosen = mix.classes[0]
    for name, p in mix.items():
        if p <= 0.0:
            continue
        chosen = name
        acc += p
        if u < acc:
            break
    return chosen


def per_class_rates(process: ArrivalProcess) -> dict[str, float]:
    """Per-class arrival rates: the thinned streams are Poisson(rate * p)."""
    return {name: process.rate * p for name, p in process.mix.items()}
