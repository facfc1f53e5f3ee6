"""Run configuration and the cooperative deadline used by long loops."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional


class SolveTimeout(Exception):
    pass


class Deadline:
    __slots__ = ("expires",)

    def __init__(self, timeout_ms: Optional[int]):
        self.expires = None if timeout_ms is None else time.monotonic() + timeout_ms / 1000.0

    def check(self):
        if self.expires is not None and time.monotonic() > self.expires:
            raise SolveTimeout("time budget exhausted")


@dataclass
class SolveConfig:
    seed: int = 0
    max_rounds: Optional[int] = None  # default: number of independent variables
    degree: int = 4  # polynomial first-integral ansatz bound
    timeout_ms: int = 30000
    trials: int = 20
    verify: bool = True
    deadline: Deadline = field(default_factory=lambda: Deadline(None))

    def start(self) -> "SolveConfig":
        self.deadline = Deadline(self.timeout_ms)
        return self
