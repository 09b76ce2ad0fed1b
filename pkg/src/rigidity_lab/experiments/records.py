"""Run records: certificates, canonical JSON and tamper-evident verification."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import SCHEMA_VERSION
from ..errors import ConfigError

REQUIRED_KEYS = ("schema_version", "config", "versions", "result", "certificates", "payload_sha256")


class SchemaError(ConfigError):
    """A stored record cannot be read by this build (CLI exit code 2)."""


@dataclass
class Certificate:
    name: str
    lhs: float
    rhs: float
    strict: bool = False

    @property
    def passed(self) -> bool:
        if not (math.isfinite(self.lhs) or self.lhs == -math.inf):
            return False
        return self.lhs < self.rhs if self.strict else self.lhs <= self.rhs

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def as_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "strict": self.strict}


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def number(x) -> float:
    """Inverse of ``jsonable`` for a scalar."""
    if x is None:
        return math.nan
    return float(x)


def canonical(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False)


def payload_digest(config: dict, result: dict, certificates: list[dict]) -> str:
    blob = canonical({"config": config, "result": result, "certificates": certificates})
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    versions: dict
    result: dict
    certificates: list[Certificate]
    timing_ms: float | None = None
    started: str | None = None
    finished: str | None = None
    error: str | None = None
    trace: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.certificates)

    def first_failure(self) -> str | None:
        if self.error is not None:
            return self.error
        for c in self.certificates:
            if not c.passed:
                return c.name
        return None

    def to_dict(self) -> dict:
        certs = [c.as_dict() for c in self.certificates]
        result = jsonable(self.result)
        config = jsonable(self.config)
        return {
            "schema_version": SCHEMA_VERSION,
            "config": config,
            "config_hash": self.config_hash,
            "versions": self.versions,
            "result": result,
            "error": self.error,
            "certificates": jsonable(certs),
            "passed": self.passed,
            "payload_sha256": payload_digest(config, result, certs),
            "timing_ms": self.timing_ms,
            "started": self.started,
            "finished": self.finished,
        }

    def to_json(self) -> str:
        return canonical(self.to_dict()) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        check_schema(data)
        certs = [Certificate(c["name"], number(c["lhs"]), number(c["rhs"]), bool(c.get("strict", False)))
                 for c in data["certificates"]]
        return cls(data["config"], data.get("config_hash", ""), data["versions"], data["result"], certs,
                   data.get("timing_ms"), data.get("started"), data.get("finished"), data.get("error"))


def check_schema(data) -> None:
    if not isinstance(data, dict):
        raise SchemaError("record is not a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"record schema version {version!r} cannot be read by this build "
                          f"(expects {SCHEMA_VERSION}); no migration is available, re-run the experiment")
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise SchemaError(f"record is missing field(s): {', '.join(missing)}")


def load_record(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"record not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"record {path} is not valid JSON: {exc}") from None
    check_schema(data)
    return data


@dataclass
class VerifyOutcome:
    passed: bool
    failures: list[str]

    @property
    def first(self) -> str | None:
        return self.failures[0] if self.failures else None


def verify_record(data: dict) -> VerifyOutcome:
    """Recompute the certificates from the stored result and compare with what was stored."""
    from .runner import certify
    from .config import make_config

    check_schema(data)
    failures: list[str] = []
    try:
        cfg = make_config(dict(data["config"]))
    except ConfigError as exc:
        raise SchemaError(f"stored config no longer validates: {exc}") from None
    stored = {c["name"]: c for c in data["certificates"]}
    if data.get("error"):
        failures.append(f"error: {data['error']}")
    else:
        fresh = certify(cfg, data["result"])
        for c in fresh:
            if not c.passed:
                failures.append(c.name)
                continue
            old = stored.get(c.name)
            if old is None:
                failures.append(f"{c.name} (missing from record)")
            elif (not old.get("pass")) or jsonable(c.lhs) != old.get("lhs") or jsonable(c.rhs) != old.get("rhs"):
                failures.append(f"{c.name} (stored value differs)")
        extra = set(stored) - {c.name for c in fresh}
        failures.extend(sorted(f"{n} (unexpected certificate)" for n in extra))
    digest = payload_digest(data["config"], data["result"], data["certificates"])
    if digest != data["payload_sha256"]:
        failures.append("payload_sha256")
    return VerifyOutcome(not failures, failures)
