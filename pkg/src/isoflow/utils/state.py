from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from ..flow.stepper import StepRecord


@dataclass
class SampleInfo:
    t: float
    step: int
    files: List[str] = field(default_factory=list)


@dataclass
class RunState:
    """
    The single source of truth for one experiment run.
    """
    config: Dict[str, Any] = field(default_factory=dict)
    mesh_summary: Dict[str, Any] = field(default_factory=dict)

    samples: List[SampleInfo] = field(default_factory=list)
    records: List[StepRecord] = field(default_factory=list)
    files: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    error_message: str = ""
    started: float = 0.0
    finished: float = 0.0

    @property
    def has_failed(self) -> bool:
        return bool(self.error_message)

    @property
    def last_sample(self) -> Optional[SampleInfo]:
        return self.samples[-1] if self.samples else None

    def add_sample(self, t: float, step: int, files: List[str]):
        self.samples.append(SampleInfo(t, step, list(files)))
        self.files.extend(files)

    def update_records(self, records: List[StepRecord]):
        self.records = list(records)

    def fail(self, message: str):
        self.error_message = message

    def reset(self):
        self.samples.clear()
        self.records.clear()
        self.files.clear()
        self.summary.clear()
        self.error_message = ""
