"""Node configuration: a strict JSON file mapped onto NodeConfig."""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class NodeConfig:
    data_dir: str
    http_port: int = 8080
    dimse_port: int = 11112
    ae_title: str = "MINIPACS"
    worker_count: int = 0  # 0 = one worker per CPU
    http_host: str = "127.0.0.1"
    instance_id: str = ""  # default: generated once and persisted
    public_endpoint: str = ""  # default: http://{http_host}:{http_port}
    extension_index_url: str = ""  # optional remote extension registry


_FIELD_TYPES = {f.name: f.type for f in fields(NodeConfig)}
_REQUIRED = ("data_dir",)


def config_from_json(doc: dict) -> NodeConfig:
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(doc) - set(_FIELD_TYPES)
    if unknown:
        raise ValueError(f"unknown config field {sorted(unknown)[0]!r}")
    for name in _REQUIRED:
        if name not in doc:
            raise ValueError(f"config field {name!r} is required")
    for name, value in doc.items():
        expected = int if _FIELD_TYPES[name] == "int" else str
        if not isinstance(value, expected) or isinstance(value, bool):
            raise ValueError(
                f"config field {name!r} must be {expected.__name__}")
    return NodeConfig(**doc)


def load_config(path: str | Path) -> NodeConfig:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    return config_from_json(doc)


def config_to_json(config: NodeConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(NodeConfig)}
