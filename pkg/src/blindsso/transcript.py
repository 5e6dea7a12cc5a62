"""Per-login transcript: everything each party saw, plus phase timings.

The privacy harness value-scans these views, so the recording discipline
matters: ``idp_view`` holds exactly the request/response values exchanged
with the identity provider, ``rp_view`` those exchanged with the relying
party, and ``agent_view`` the in-browser messages.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class PhaseTimings:
    """The three measured segments of one login."""

    prepare_request_ms: float = 0.0
    token_generation_ms: float = 0.0
    token_acceptance_ms: float = 0.0

    @property
    def total_ms(self) -> float:
        return self.prepare_request_ms + self.token_generation_ms + self.token_acceptance_ms


def flatten(prefix: str, value, out: dict[str, str]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            flatten(f"{prefix}[{i}]", v, out)
    elif value is not None:
        out[prefix] = str(value)


@dataclass
class ViewEntry:
    kind: str  # request | response | postMessage | postMessageDropped
    path: str
    values: dict[str, str] = field(default_factory=dict)

    @classmethod
    def of(cls, kind: str, path: str, payload=None) -> "ViewEntry":
        values: dict[str, str] = {}
        flatten("", payload or {}, values)
        return cls(kind, path, values)


@dataclass
class LoginTranscript:
    instance_id: str
    username: str
    rp_url: str
    idp_url: str
    trapdoor: int
    pid_rp: str
    pid_u: str
    pseudo_endpoint: str
    account: str
    idp_view: list[ViewEntry] = field(default_factory=list)
    rp_view: list[ViewEntry] = field(default_factory=list)
    agent_view: list[ViewEntry] = field(default_factory=list)
    timings: PhaseTimings = field(default_factory=PhaseTimings)

    def view_values(self, view: list[ViewEntry]) -> list[str]:
        out = []
        for entry in view:
            out.extend(entry.values.values())
        return out

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "LoginTranscript":
        data = json.loads(line)
        data["timings"] = PhaseTimings(**data["timings"])
        for key in ("idp_view", "rp_view", "agent_view"):
            data[key] = [ViewEntry(**e) for e in data[key]]
        return cls(**data)
