"""Adapter for solvers that live outside this package.

The external program is spawned once per run and must print a single line
``<time_ms> <cost> <success>`` on stdout (success is ``1``/``0`` or
``true``/``false``).  No external solvers are bundled.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class ExternalResult:
    time_s: float
    cost: int | None
    success: bool


def parse_result_line(line: str) -> ExternalResult:
    parts = line.split()
    if len(parts) != 3:
        raise ValueError(f"expected 'time_ms cost success', got {line!r}")
    time_ms, cost, success = parts
    ok = success.lower() in ("1", "true", "yes")
    if not ok and success.lower() not in ("0", "false", "no"):
        raise ValueError(f"bad success flag {success!r}")
    return ExternalResult(float(time_ms) / 1000.0, int(float(cost)) if ok else None, ok)


@dataclass(frozen=True)
class ExternalSolver:
    """``command`` is a template; ``{map}``, ``{scen}``, ``{agents}`` and ``{time_limit}`` are filled in."""

    id: str
    command: str

    def run(self, map_path: str | Path, scen_path: str | Path, agents: int,
            time_limit: float) -> ExternalResult:
        argv = [part.format(map=map_path, scen=scen_path, agents=agents, time_limit=time_limit)
                for part in shlex.split(self.command)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=time_limit * 1.5 + 1)
        except subprocess.TimeoutExpired:
            return ExternalResult(time_limit, None, False)
        if proc.returncode != 0:
            return ExternalResult(time_limit, None, False)
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if not lines:
            return ExternalResult(time_limit, None, False)
        result = parse_result_line(lines[-1])
        if result.success and result.time_s > time_limit:
            return ExternalResult(result.time_s, None, False)
        return result
