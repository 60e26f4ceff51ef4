"""Check records and run reports shared by the verification suites and the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    name: str
    max_abs_deviation: float
    threshold: float
    checked: int = 0
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.threshold == 0:
            return bool(self.max_abs_deviation == 0)
        return bool(self.max_abs_deviation < self.threshold)

    def to_dict(self) -> dict:
        dev = float(self.max_abs_deviation)
        out = {
            "name": self.name,
            "max_abs_deviation": dev if math.isfinite(dev) else str(dev),
            "threshold": self.threshold,
            "checked": self.checked,
            "pass": self.passed,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class Report:
    command: str
    source: str
    records: list[CheckRecord] = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    def extend(self, records):
        for r in records:
            self.add(r)

    def to_dict(self, with_timings: bool = False) -> dict:
        out = {
            "command": self.command,
            "source": self.source,
            "pass": self.passed,
            "checks": [r.to_dict() for r in self.records],
            "sections": self.sections,
        }
        if with_timings:
            out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out

    def to_json(self, with_timings: bool = False) -> str:
        return json.dumps(self.to_dict(with_timings), indent=2) + "\n"

    def to_table(self) -> str:
        width = max([len(r.name) for r in self.records] + [5])
        lines = [f"dilatron {self.command}  input={self.source}", ""]
        for title, body in self.sections.items():
            lines.append(f"[{title}]")
            lines.extend(f"  {row}" for row in _section_lines(body))
            lines.append("")
        lines.append(f"{'check':<{width}}  {'deviation':>12}  {'threshold':>10}  {'n':>7}  result")
        for r in self.records:
            lines.append(
                f"{r.name:<{width}}  {r.max_abs_deviation:12.3e}  {r.threshold:10.1e}  "
                f"{r.checked:7d}  {'PASS' if r.passed else 'FAIL'}"
            )
        lines.append("")
        for k, v in self.timings.items():
            lines.append(f"time {k}: {v:.3f}s")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _section_lines(body):
    if isinstance(body, dict):
        for k, v in body.items():
            if isinstance(v, (list, dict)):
                yield f"{k}:"
                for row in _section_lines(v):
                    yield f"  {row}"
            else:
                yield f"{k}: {v}"
    elif isinstance(body, list):
        for v in body:
            if isinstance(v, (list, dict)):
                yield from (f"- {row}" for row in _section_lines(v))
            else:
                yield f"- {v}"
    else:
        yield str(body)
