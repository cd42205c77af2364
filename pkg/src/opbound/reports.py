"""Report assembly, JSON schema and CSV writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

_NUM_OR_NULL = {"type": ["number", "string", "null"]}

CERTIFICATE_SCHEMA = {
    "type": "object",
    "required": [
        "inequality_id",
        "operator",
        "function",
        "r",
        "p",
        "t_or_delta",
        "lhs",
        "rhs",
        "margin",
        "holds",
        "intermediates",
    ],
    "properties": {
        "inequality_id": {"type": "string"},
        "operator": {"type": "string"},
        "function": {"type": "string"},
        "r": {"type": "integer", "minimum": 0},
        "p": {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
        "t_or_delta": {"type": ["number", "null"]},
        "lhs": {"type": "number"},
        "rhs": {"type": "number"},
        "margin": {"type": "number"},
        "holds": {"type": "boolean"},
        "status": {"enum": ["holds", "holds-with-slack", "violated"]},
        "intermediates": {
            "type": "object",
            "required": ["omega", "seminorm_Tf", "err_norm", "gamma", "N", "N_provenance"],
            "properties": {
                "omega": _NUM_OR_NULL,
                "seminorm_Tf": _NUM_OR_NULL,
                "err_norm": _NUM_OR_NULL,
                "gamma": _NUM_OR_NULL,
                "N": _NUM_OR_NULL,
                "N_provenance": {"type": ["string", "null"]},
            },
        },
    },
}

TP_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "nonsingular",
        "superdiagonal_positive",
        "subdiagonal_positive",
        "totally_positive",
        "oscillatory",
    ],
    "properties": {
        "nonsingular": {"type": "boolean"},
        "superdiagonal_positive": {"type": "boolean"},
        "subdiagonal_positive": {"type": "boolean"},
        "totally_positive": {"type": "boolean"},
        "oscillatory": {"type": "boolean"},
        "minor_method": {"enum": ["exhaustive", "elimination"]},
        "min_minor": {"type": ["number", "null"]},
    },
}

_PAYLOAD = {"type": "object", "required": ["holds"], "properties": {"holds": {"type": "boolean"}}}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "opbound report",
    "type": "object",
    "required": ["tool", "version", "command", "config", "certificates", "payloads", "summary"],
    "properties": {
        "tool": {"const": "opbound"},
        "version": {"type": "string"},
        "command": {"enum": ["spectrum", "verify", "tpcheck", "iterates"]},
        "config": {"type": "object"},
        "certificates": {"type": "array", "items": CERTIFICATE_SCHEMA},
        "payloads": {
            "type": "object",
            "properties": {
                "spectra": {"type": "array", "items": _PAYLOAD},
                "tp_reports": {
                    "type": "array",
                    "items": {"allOf": [_PAYLOAD, {"properties": {"tp": TP_REPORT_SCHEMA}}]},
                },
                "decay_traces": {"type": "array", "items": _PAYLOAD},
                "patterns": {"type": "array", "items": _PAYLOAD},
            },
            "additionalProperties": False,
        },
        "summary": {
            "type": "object",
            "required": ["total", "holds", "holds_with_slack", "violations"],
            "properties": {
                "total": {"type": "integer", "minimum": 0},
                "holds": {"type": "integer", "minimum": 0},
                "holds_with_slack": {"type": "integer", "minimum": 0},
                "violations": {"type": "integer", "minimum": 0},
            },
        },
    },
}


def clean(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    return obj


@dataclass
class Report:
    command: str
    config: dict
    certificates: list = field(default_factory=list)
    payloads: dict = field(default_factory=dict)

    def add_payload(self, kind: str, payload: dict) -> None:
        self.payloads.setdefault(kind, []).append(payload)

    @property
    def summary(self) -> dict:
        holds = slack = bad = 0
        for c in self.certificates:
            status = c["status"]
            if status == "holds":
                holds += 1
            elif status == "holds-with-slack":
                slack += 1
            else:
                bad += 1
        for items in self.payloads.values():
            for p in items:
                if p["holds"]:
                    holds += 1
                else:
                    bad += 1
        return {"total": holds + slack + bad, "holds": holds, "holds_with_slack": slack, "violations": bad}

    def to_dict(self) -> dict:
        return clean(
            {
                "tool": "opbound",
                "version": __version__,
                "command": self.command,
                "config": self.config,
                "certificates": self.certificates,
                "payloads": self.payloads,
                "summary": self.summary,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def exit_code(self) -> int:
        return 1 if self.summary["violations"] else 0


def validate_report(data: dict) -> None:
    import jsonschema

    jsonschema.validate(data, REPORT_SCHEMA)


def write_spectrum_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "real", "imag", "modulus"])
        for row in rows:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def write_decay_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "rho_m", "gamma_pow_m", "gamma_pow_m_minus_1"])
        for row in rows:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
