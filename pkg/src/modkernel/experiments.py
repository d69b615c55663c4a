"""Experiment orchestration: run a validated config, emit artifacts.

Every experiment writes, into its output directory: a canonical
``report.json`` (schema-checked), the resolved config, trace/result CSVs,
and parameter checkpoints.  Rerunning with the same config and seed
reproduces those files byte for byte; wall-clock timings and timestamps
live in ``metadata.json``, which is the one file allowed to differ.

Exit status: 0 when every in-config threshold passes, 1 otherwise.
"""

from __future__ import annotations

import datetime
import os
import time
from pathlib import Path

import numpy as np

from . import geometry
from .config import EXPERIMENT_KINDS, ExperimentConfig, dump_config, validate_schema
from .datasets import Dataset, make_dataset
from .errors import ConfigurationError
from .serialize import write_csv, write_json
from .training import (TwoModuleModel, freeze_and_train_output,
                       label_efficiency_run, proxy_accuracy_sweep,
                       train_end_to_end, train_input_module)
from .transfer import (CandidateModule, attach_oracle, rank_candidates,
                       rank_correlation, retrain_oracle, score_candidate)

OUTPUT_ROOT_ENV = "MODKERNEL_OUTPUT_ROOT"

REPORT_SCHEMA = {
    "type": "object",
    "required": ["experiment", "passed", "metrics", "artifacts", "thresholds"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string", "enum": list(EXPERIMENT_KINDS)},
        "passed": {"type": "boolean"},
        "metrics": {
            "type": "object",
            "additionalProperties": {"type": ["number", "boolean", "null"]},
        },
        "artifacts": {"type": "array", "items": {"type": "string"}},
        "thresholds": {
            "type": "object",
            "additionalProperties": {"type": "number"},
        },
    },
}


def resolve_output_dir(cfg: ExperimentConfig,
                       output_root: str | None = None) -> Path:
    root = output_root or os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(cfg.output_dir)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_experiment(cfg: ExperimentConfig,
                   output_root: str | None = None) -> int:
    outdir = resolve_output_dir(cfg, output_root)
    runner = _RUNNERS.get(cfg.experiment)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    metrics, artifacts, passed, timing = runner(cfg, outdir)
    elapsed = time.perf_counter() - t0

    (outdir / "resolved-config.json").write_text(dump_config(cfg))
    report = {
        "experiment": cfg.experiment,
        "passed": bool(passed),
        "metrics": metrics,
        "artifacts": sorted(artifacts + ["resolved-config.json"]),
        "thresholds": cfg.thresholds,
    }
    validate_schema(report, REPORT_SCHEMA)
    write_json(outdir / "report.json", report)
    timing_ok = timing.pop("timing_ok", True)
    write_json(outdir / "metadata.json", {
        "started_at": started,
        "duration_seconds": elapsed,
        "timing_ok": bool(timing_ok),
        **timing,
    })
    return 0 if (passed and timing_ok) else 1


def _check(thresholds: dict, metrics: dict) -> bool:
    ok = True
    for name, bound in thresholds.items():
        if name.startswith("max_"):
            key = name[4:]
            if key in metrics and metrics[key] is not None:
                ok = ok and metrics[key] <= bound
        elif name.startswith("min_"):
            key = name[4:]
            if key in metrics and metrics[key] is not None:
                ok = ok and metrics[key] >= bound
    return ok


def _write_trace_artifacts(outdir: Path, name: str, trace) -> list:
    artifacts = [f"{name}.csv"]
    trace.to_csv(outdir / f"{name}.csv")
    return artifacts


def _write_activations(outdir: Path, traces, data: Dataset) -> list:
    rows = []
    for trace in traces:
        for epoch, feats in trace.activations:
            for i, (f0, f1) in enumerate(feats):
                rows.append([epoch, i, f0, f1, int(data.y_train[i])])
    if not rows:
        return []
    write_csv(outdir / "activations.csv",
              ("epoch", "index", "feat0", "feat1", "label"), rows)
    return ["activations.csv"]


def _save_checkpoint(outdir: Path, name: str, model: TwoModuleModel,
                     meta: dict | None = None) -> list:
    write_json(outdir / f"{name}.json", model.to_checkpoint(meta))
    return [f"{name}.json"]


def _write_dataset_summary(outdir: Path, data: Dataset) -> list:
    write_json(outdir / "dataset.json", {
        "train_examples": int(data.X_train.shape[0]),
        "test_examples": int(data.X_test.shape[0]),
        "dimension": int(data.dim),
        "train_class_counts": {str(k): v for k, v in data.class_counts().items()},
    })
    return ["dataset.json"]


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def _run_sanity_dynamics(cfg: ExperimentConfig, outdir: Path):
    data = make_dataset(cfg.dataset_spec())
    train_cfg = cfg.train_config()
    model = TwoModuleModel(cfg.architecture_spec(), seed=train_cfg.seed)
    artifacts = _write_dataset_summary(outdir, data)
    trace_in, _ = train_input_module(model, data, train_cfg)
    artifacts += _write_trace_artifacts(outdir, "trace_input", trace_in)
    artifacts += _save_checkpoint(outdir, "stage1_checkpoint", model,
                                  {"stage": "input"})
    trace_out = freeze_and_train_output(model, data, train_cfg)
    artifacts += _write_trace_artifacts(outdir, "trace_output", trace_out)
    artifacts += _save_checkpoint(outdir, "stage2_checkpoint", model,
                                  {"stage": "output"})
    artifacts += _write_activations(outdir, [trace_in], data)
    model.unfreeze_input()
    metrics = {
        "final_proxy": trace_in.final("objective"),
        "train_accuracy": trace_out.final("train_accuracy"),
        "test_accuracy": trace_out.final("test_accuracy"),
    }
    return metrics, artifacts, _check(cfg.thresholds, metrics), {}


def _run_modular_vs_e2e(cfg: ExperimentConfig, outdir: Path):
    data = make_dataset(cfg.dataset_spec())
    train_cfg = cfg.train_config()
    arch = cfg.architecture_spec()

    modular = TwoModuleModel(arch, seed=train_cfg.seed)
    trace_in, _ = train_input_module(modular, data, train_cfg)
    trace_out = freeze_and_train_output(modular, data, train_cfg)
    modular.unfreeze_input()

    baseline = TwoModuleModel(arch, seed=train_cfg.seed)
    trace_e2e = train_end_to_end(baseline, data, train_cfg)

    artifacts = _write_dataset_summary(outdir, data)
    artifacts += _write_trace_artifacts(outdir, "trace_modular_input", trace_in)
    artifacts += _write_trace_artifacts(outdir, "trace_modular_output", trace_out)
    artifacts += _write_trace_artifacts(outdir, "trace_e2e", trace_e2e)
    artifacts += _save_checkpoint(outdir, "modular_checkpoint", modular)
    artifacts += _save_checkpoint(outdir, "e2e_checkpoint", baseline)
    artifacts += _write_activations(outdir, [trace_in, trace_e2e], data)

    mdlr = trace_out.final("train_accuracy")
    e2e = trace_e2e.final("train_accuracy")
    metrics = {
        "modular_train_accuracy": mdlr,
        "e2e_train_accuracy": e2e,
        "train_accuracy": min(mdlr, e2e),
        "accuracy_gap": abs(mdlr - e2e),
    }
    return metrics, artifacts, _check(cfg.thresholds, metrics), {}


def _run_proxy_sweep(cfg: ExperimentConfig, outdir: Path):
    section = cfg.section("sweep")
    if section is None:
        raise ConfigurationError("proxy-sweep needs a 'sweep' section")
    data = make_dataset(cfg.dataset_spec())
    train_cfg = cfg.train_config()
    output_cfg = cfg.train_config("sweep.output_train")
    model = TwoModuleModel(cfg.architecture_spec(), seed=train_cfg.seed)
    artifacts = _write_dataset_summary(outdir, data)
    rows = proxy_accuracy_sweep(model, data,
                                [int(e) for e in section["checkpoint_epochs"]],
                                train_cfg, output_cfg)
    write_csv(outdir / "sweep.csv", ("epoch", "proxy", "accuracy"),
              [[r["epoch"], r["proxy"], r["accuracy"]] for r in rows])
    artifacts.append("sweep.csv")
    spearman = (rank_correlation([r["proxy"] for r in rows],
                                 [r["accuracy"] for r in rows])
                if len(rows) >= 3 else float("nan"))
    metrics = {"spearman": spearman, "checkpoints": float(len(rows))}
    return metrics, artifacts, _check(cfg.thresholds, metrics), {}


def _run_label_efficiency(cfg: ExperimentConfig, outdir: Path):
    section = cfg.section("label_efficiency")
    if section is None:
        raise ConfigurationError(
            "label-efficiency needs a 'label_efficiency' section")
    data = make_dataset(cfg.dataset_spec())
    train_cfg = cfg.train_config()
    model = TwoModuleModel(cfg.architecture_spec(), seed=train_cfg.seed)
    artifacts = _write_dataset_summary(outdir, data)
    train_input_module(model, data, train_cfg)

    n = data.X_train.shape[0]
    budgets = sorted({int(b) for b in section["budgets"]} | {n})
    rows = label_efficiency_run(model, data, budgets, section["balanced"],
                                section["seed"], train_cfg)
    num_classes = data.num_classes
    header = ["budget", "test_accuracy"] + [f"recall_{c}"
                                            for c in range(num_classes)]
    write_csv(outdir / "label_efficiency.csv", header,
              [[r["budget"], r["test_accuracy"], *r["per_class_recall"]]
               for r in rows])
    smallest = rows[0]["test_accuracy"]
    full = rows[-1]["test_accuracy"]
    metrics = {
        "smallest_budget_accuracy": smallest,
        "full_budget_accuracy": full,
        "label_efficiency_ratio": (smallest / full if full > 0
                                   else float("nan")),
    }
    artifacts.append("label_efficiency.csv")
    return metrics, artifacts, _check(cfg.thresholds, metrics), {}


def _run_transferability(cfg: ExperimentConfig, outdir: Path):
    section = cfg.section("transfer")
    if section is None:
        raise ConfigurationError("transferability needs a 'transfer' section")
    base = make_dataset(cfg.dataset_spec())
    arch = cfg.architecture_spec()
    candidate_cfg = cfg.train_config("transfer.candidate_train")
    oracle_cfg = cfg.train_config("transfer.oracle_train")

    candidates = []
    artifacts = _write_dataset_summary(outdir, base)
    cand_dir = outdir / "candidates"
    cand_dir.mkdir(exist_ok=True)
    for i, pair in enumerate(section["source_tasks"]):
        a, b = (int(pair[0]), int(pair[1]))
        task = binary_subtask(base, (a, b))
        model = TwoModuleModel(_binary_arch(arch), seed=candidate_cfg.seed + i)
        train_input_module(model, task, candidate_cfg)
        cand = CandidateModule(id=f"src-{a}-{b}", model=model,
                               source_task=f"{a}-vs-{b}")
        candidates.append(cand)
    if section["include_random_candidate"]:
        model = TwoModuleModel(_binary_arch(arch),
                               seed=candidate_cfg.seed + 10_000)
        candidates.append(CandidateModule(id="random-init", model=model,
                                          source_task="none"))
    for cand in candidates:
        cand.save(cand_dir / f"{cand.id}.json")
        artifacts.append(f"candidates/{cand.id}.json")

    target_pair = (int(section["target_task"][0]),
                   int(section["target_task"][1]))
    target = binary_subtask(base, target_pair)

    t0 = time.perf_counter()
    scores = {c.id: score_candidate(c, target, section["proxy"],
                                    section["subsample_fraction"],
                                    section["seed"])
              for c in candidates}
    scoring_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    oracle = {c.id: retrain_oracle(c, target, oracle_cfg)
              for c in candidates}
    oracle_seconds = time.perf_counter() - t0

    report = attach_oracle(rank_candidates(scores), oracle)
    write_json(outdir / "transfer_report.json", report.as_dict())
    report.to_csv(outdir / "transfer_report.csv")
    report.to_polar_csv(outdir / "transfer_polar.csv")
    artifacts += ["transfer_report.json", "transfer_report.csv",
                  "transfer_polar.csv"]

    cost_ratio = (scoring_seconds / oracle_seconds if oracle_seconds > 0
                  else float("inf"))
    metrics = {
        "spearman": report.rank_correlation_value,
        "candidates": float(len(candidates)),
    }
    max_cost = cfg.thresholds.get("max_cost_ratio")
    timing = {
        "scoring_seconds": scoring_seconds,
        "oracle_seconds": oracle_seconds,
        "cost_ratio": cost_ratio,
        "timing_ok": (cost_ratio <= max_cost) if max_cost is not None else True,
    }
    return metrics, artifacts, _check(cfg.thresholds, metrics), timing


def _binary_arch(arch):
    from dataclasses import replace
    return replace(arch, num_classes=2)


def binary_subtask(base: Dataset, pair: tuple) -> Dataset:
    """Restrict a labeled dataset to two classes, relabeled {0, 1}."""
    a, b = pair
    if a == b:
        raise ConfigurationError(f"task pair ({a}, {b}) needs distinct classes")

    def pick(X, y):
        mask = (y == a) | (y == b)
        return X[mask], (y[mask] == b).astype(np.int64)

    X_train, y_train = pick(base.X_train, base.y_train)
    X_test, y_test = pick(base.X_test, base.y_test)
    if X_train.shape[0] == 0:
        raise ConfigurationError(f"no training data for classes {a}, {b}")
    return Dataset(X_train, y_train, X_test, y_test)


def _run_lemma_suite(cfg: ExperimentConfig, outdir: Path):
    section = cfg.section("lemma") or {"instances": 10_000,
                                       "dims": [2, 3, 4, 5, 6, 7, 8],
                                       "seed": 0, "tolerance": 1e-9}
    rep = geometry.run_lemma_suite(
        num_instances=int(section["instances"]),
        dims=tuple(int(d) for d in section["dims"]),
        seed=int(section["seed"]), tol=float(section["tolerance"]))
    write_json(outdir / "lemma_report.json", rep.as_dict())
    metrics = {"instances": float(rep.instances),
               "failures": float(rep.failures)}
    max_failures = cfg.thresholds.get("max_failures", 0.0)
    passed = rep.failures <= max_failures and _check(cfg.thresholds, metrics)
    return metrics, ["lemma_report.json"], passed, {}


def _run_theorem_oracle(cfg: ExperimentConfig, outdir: Path):
    section = cfg.section("theorem") or {"instances": None}
    registry = geometry.committed_bruteforce_instances()
    wanted = section.get("instances")
    if wanted:
        unknown = set(wanted) - set(registry)
        if unknown:
            raise ConfigurationError(
                f"unknown theorem-oracle instances: {sorted(unknown)}")
        names = list(wanted)
    else:
        names = sorted(registry)
    reports = []
    for name in names:
        reports.append(registry[name]().as_dict())
    write_json(outdir / "theorem_report.json", {"instances": reports})
    counterexamples = sum(len(r["counterexamples"]) for r in reports)
    metrics = {"instances": float(len(reports)),
               "counterexamples": float(counterexamples)}
    passed = all(r["passed"] for r in reports) and _check(cfg.thresholds,
                                                          metrics)
    return metrics, ["theorem_report.json"], passed, {}


_RUNNERS = {
    "sanity-dynamics": _run_sanity_dynamics,
    "modular-vs-e2e": _run_modular_vs_e2e,
    "proxy-sweep": _run_proxy_sweep,
    "label-efficiency": _run_label_efficiency,
    "transferability": _run_transferability,
    "lemma-suite": _run_lemma_suite,
    "theorem-oracle": _run_theorem_oracle,
}
