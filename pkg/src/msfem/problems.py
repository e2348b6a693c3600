"""Initial data and sources of the three benchmark problems."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mms import ExactSolution, build_example52

PI = math.pi


@dataclass
class Problem:
    """Data of one run.  Spatial callables take an (n, 3) array of points.

    ``g``/``f`` are the Maxwell / Schroedinger sources ``(points, t)``;
    ``charge_source`` switches on the charge-integral Maxwell source.
    """

    name: str
    psi0: Callable
    A0: Callable
    A1: Callable
    g: Optional[Callable] = None
    f: Optional[Callable] = None
    charge_source: bool = False
    exact: Optional[ExactSolution] = None


def _sine_bump(x):
    return 2.0 * math.sqrt(2.0) * np.prod(np.sin(PI * x), axis=1)


def _zero_vector(x):
    return np.zeros((len(x), 3))


def _cubic_field(x):
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    s = 10.0 * x1 * x2 * x3
    return np.column_stack([s * (1 - x2) * (1 - x3), s * (1 - x1) * (1 - x3), s * (1 - x1) * (1 - x2)])


def _oscillating_current(x, t):
    w = 1.5 * PI**2
    row = np.array([10.0 * math.sin(w * t), 10.0 * math.sin(w * t), 10.0 * math.cos(w * t)])
    return np.broadcast_to(row, (len(x), 3))


def example51(charge_source: bool = True) -> Problem:
    return Problem("example51", _sine_bump, _cubic_field, _zero_vector, charge_source=charge_source)


def example53() -> Problem:
    return Problem("example53", _sine_bump, _zero_vector, _zero_vector, g=_oscillating_current)


def manufactured_problem(exact: ExactSolution | None = None) -> Problem:
    exact = exact or build_example52()
    return Problem(
        exact.name,
        psi0=lambda x: exact.psi(x, 0.0),
        A0=lambda x: exact.A(x, 0.0),
        A1=lambda x: exact.A_t(x, 0.0),
        g=exact.g,
        f=exact.f,
        exact=exact,
    )


def problem_for(config) -> Problem:
    if config.problem == "example51":
        return example51(config.charge_source)
    if config.problem == "example52":
        return manufactured_problem(build_example52(config.gamma, config.V0, config.T))
    if config.problem == "example53":
        return example53()
    raise ValueError(f"problem {config.problem!r} has no built-in data; pass a Problem explicitly")
