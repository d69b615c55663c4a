"""Experiment configuration: a single JSON file, strictly validated.

Unknown keys are rejected by name, defaults are filled on load, and
``dump_config`` emits a canonical form, so load -> dump -> load is the
identity.  A small schema checker is also provided; emitted JSON reports
are validated against the committed report schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .datasets import DatasetSpec
from .errors import ConfigurationError
from .serialize import dump_json
from .training import ArchitectureSpec, TrainConfig

EXPERIMENT_KINDS = ("sanity-dynamics", "proxy-sweep", "modular-vs-e2e",
                    "label-efficiency", "transferability", "lemma-suite",
                    "theorem-oracle")

_REQUIRED = object()

_DATASET_FIELDS = {
    "kind": (str, _REQUIRED),
    "n": (int, 0),
    "d": (int, 0),
    "num_classes": (int, 2),
    "seed": (int, 0),
    "split_fraction": (float, 0.8),
    "separation": (float, 8.0),
    "noise": (float, 1.0),
    "path": ((str, type(None)), None),
    "labels_path": ((str, type(None)), None),
}

_ARCHITECTURE_FIELDS = {
    "input_dim": ((int, type(None)), None),
    "hidden_widths": (list, [64]),
    "latent_dim": (int, 2),
    "num_classes": ((int, type(None)), None),
    "hidden_nonlinearity": (str, "relu"),
    "link_nonlinearity": (str, "tanh"),
    "link_epsilon": (float, 1e-12),
}

_TRAIN_FIELDS = {
    "batch_size": (int, 128),
    "lr_schedule": (list, [[0.1, 20], [0.01, 20], [0.001, 20]]),
    "momentum": (float, 0.9),
    "seed": (int, 0),
    "proxy": (str, "nmse-neo"),
    "loss": (str, "xe"),
    "trace_every": (int, 1),
    "plateau_tol": (float, 1e-6),
    "plateau_patience": (int, 5),
    "resample_limit": (int, 100),
}

_SWEEP_FIELDS = {
    "checkpoint_epochs": (list, _REQUIRED),
    "output_train": ((dict, type(None)), None),
}

_LABEL_EFFICIENCY_FIELDS = {
    "budgets": (list, _REQUIRED),
    "balanced": (bool, True),
    "seed": (int, 0),
}

_TRANSFER_FIELDS = {
    "source_tasks": (list, _REQUIRED),
    "target_task": (list, _REQUIRED),
    "proxy": (str, "al"),
    "subsample_fraction": (float, 0.1),
    "seed": (int, 0),
    "include_random_candidate": (bool, True),
    "candidate_train": ((dict, type(None)), None),
    "oracle_train": ((dict, type(None)), None),
}

_LEMMA_FIELDS = {
    "instances": (int, 10_000),
    "dims": (list, [2, 3, 4, 5, 6, 7, 8]),
    "seed": (int, 0),
    "tolerance": (float, 1e-9),
}

_THEOREM_FIELDS = {
    "instances": ((list, type(None)), None),
}

_KNOWN_THRESHOLDS = (
    "min_train_accuracy", "max_accuracy_gap", "min_spearman",
    "min_label_efficiency_ratio", "max_cost_ratio", "max_failures",
    "min_test_accuracy", "max_counterexamples",
)

_TOP_SECTIONS = {
    "dataset": _DATASET_FIELDS,
    "architecture": _ARCHITECTURE_FIELDS,
    "train": _TRAIN_FIELDS,
    "sweep": _SWEEP_FIELDS,
    "label_efficiency": _LABEL_EFFICIENCY_FIELDS,
    "transfer": _TRANSFER_FIELDS,
    "lemma": _LEMMA_FIELDS,
    "theorem": _THEOREM_FIELDS,
}


def _coerce(value, types):
    if not isinstance(types, tuple):
        types = (types,)
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if bool not in types and isinstance(value, bool):
        return None
    if isinstance(value, types):
        return value
    return None


def _resolve_section(section: str, doc: dict, fields: dict) -> dict:
    if not isinstance(doc, dict):
        raise ConfigurationError(f"section '{section}' must be an object")
    for key in doc:
        if key not in fields:
            raise ConfigurationError(
                f"unknown key '{key}' in section '{section}'")
    out = {}
    for key, (types, default) in fields.items():
        if key in doc:
            coerced = _coerce(doc[key], types)
            if coerced is None and doc[key] is not None:
                raise ConfigurationError(
                    f"key '{key}' in section '{section}' has the wrong type")
            out[key] = coerced
        elif default is _REQUIRED:
            raise ConfigurationError(
                f"section '{section}' is missing required key '{key}'")
        else:
            out[key] = json.loads(json.dumps(default))
    return out


@dataclass
class ExperimentConfig:
    """A fully resolved experiment description."""

    resolved: dict

    @property
    def experiment(self) -> str:
        return self.resolved["experiment"]

    @property
    def output_dir(self) -> str:
        return self.resolved["output_dir"]

    @property
    def thresholds(self) -> dict:
        return self.resolved.get("thresholds", {})

    def section(self, name: str) -> dict | None:
        return self.resolved.get(name)

    def dataset_spec(self) -> DatasetSpec:
        sec = self.section("dataset")
        if sec is None:
            raise ConfigurationError(
                f"experiment '{self.experiment}' needs a 'dataset' section")
        return DatasetSpec(**sec)

    def architecture_spec(self) -> ArchitectureSpec:
        sec = dict(self.section("architecture") or
                   _resolve_section("architecture", {}, _ARCHITECTURE_FIELDS))
        data = self.section("dataset") or {}
        if sec.get("input_dim") is None:
            if not data.get("d"):
                raise ConfigurationError(
                    "architecture.input_dim is unset and the dataset "
                    "declares no dimension")
            sec["input_dim"] = data["d"]
        if sec.get("num_classes") is None:
            sec["num_classes"] = data.get("num_classes", 2)
        sec["hidden_widths"] = tuple(int(w) for w in sec["hidden_widths"])
        return ArchitectureSpec(**sec)

    def train_config(self, override_key: str | None = None) -> TrainConfig:
        sec = dict(self.section("train") or
                   _resolve_section("train", {}, _TRAIN_FIELDS))
        if override_key:
            parent, _, key = override_key.partition(".")
            override = (self.section(parent) or {}).get(key)
            if override:
                sec.update(override)
        return TrainConfig.from_dict(sec)


def resolve_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("the configuration root must be an object")
    known_top = {"experiment", "output_dir", "thresholds", *_TOP_SECTIONS}
    for key in doc:
        if key not in known_top:
            raise ConfigurationError(f"unknown key '{key}' at the top level")
    if "experiment" not in doc:
        raise ConfigurationError("missing required key 'experiment'")
    kind = doc["experiment"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(
            f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")

    resolved = {"experiment": kind,
                "output_dir": str(doc.get("output_dir", "out"))}
    for section, fields in _TOP_SECTIONS.items():
        if section in doc:
            resolved[section] = _resolve_section(section, doc[section], fields)
    thresholds = doc.get("thresholds", {})
    if not isinstance(thresholds, dict):
        raise ConfigurationError("'thresholds' must be an object")
    for key, value in thresholds.items():
        if key not in _KNOWN_THRESHOLDS:
            raise ConfigurationError(f"unknown key '{key}' in 'thresholds'")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigurationError(f"threshold '{key}' must be numeric")
    resolved["thresholds"] = {k: float(v) for k, v in sorted(thresholds.items())}

    cfg = ExperimentConfig(resolved=resolved)
    # Eagerly construct the typed specs so value-level validation runs now.
    if "dataset" in resolved:
        cfg.dataset_spec()
    if "train" in resolved:
        cfg.train_config()
    arch = resolved.get("architecture")
    if arch is not None and (arch.get("input_dim") is not None
                             or resolved.get("dataset", {}).get("d")):
        cfg.architecture_spec()
    return cfg


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from None
    return resolve_config(doc)


def dump_config(cfg: ExperimentConfig) -> str:
    return dump_json(cfg.resolved)


# ---------------------------------------------------------------------------
# minimal schema checking for emitted reports
# ---------------------------------------------------------------------------

_TYPE_MAP = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


def validate_schema(obj, schema: dict, path: str = "$") -> None:
    """Check ``obj`` against a small JSON-schema subset; raises
    ConfigurationError naming the offending path."""
    expected = schema.get("type")
    if expected is not None:
        kinds = expected if isinstance(expected, list) else [expected]
        ok = False
        for kind in kinds:
            if kind == "number":
                ok = ok or (isinstance(obj, (int, float))
                            and not isinstance(obj, bool))
            elif kind == "integer":
                ok = ok or (isinstance(obj, int) and not isinstance(obj, bool))
            else:
                ok = ok or isinstance(obj, _TYPE_MAP[kind])
        if not ok:
            raise ConfigurationError(
                f"{path}: expected {expected}, got {type(obj).__name__}")
    if "enum" in schema and obj not in schema["enum"]:
        raise ConfigurationError(f"{path}: {obj!r} not in {schema['enum']}")
    if isinstance(obj, dict):
        for key in schema.get("required", []):
            if key not in obj:
                raise ConfigurationError(f"{path}: missing required key '{key}'")
        props = schema.get("properties", {})
        extra = schema.get("additionalProperties", True)
        for key, value in obj.items():
            if key in props:
                validate_schema(value, props[key], f"{path}.{key}")
            elif extra is False:
                raise ConfigurationError(f"{path}: unknown key '{key}'")
            elif isinstance(extra, dict):
                validate_schema(value, extra, f"{path}.{key}")
    if isinstance(obj, list) and "items" in schema:
        for i, item in enumerate(obj):
            validate_schema(item, schema["items"], f"{path}[{i}]")
