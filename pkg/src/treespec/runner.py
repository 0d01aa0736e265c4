"""Experiment orchestration and persistence.

The measurement loop per prompt: build one draft tree over the current
context, score it against the target, record one row per node, then commit
the target's greedy bonus token and repeat. Acceptance is recorded
analytically; committed text always follows the target, so the harness
measures speculation quality without changing what gets generated.

Record files are CSV with a frozen column order (NodeRecord fields) and all
floats at 17 significant digits, so a run is reproducible byte-for-byte and
re-ingestion is lossless.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import DomainCorpus, sample_prompts, train_models
from .errors import InputError
from .metrics import (
    RECORD_FIELDS,
    DomainSummary,
    NodeRecord,
    depth_profile,
    position_effects,
    summarize,
)
from .model import LanguageModel
from .tree import TreeParams, build_draft_tree
from .verify import score_tree

REPORT_FORMATS = ("csv", "json", "tables")

# Rendering thresholds for the speedup-regime column: at least one accepted
# token per call is a net win; just under is labelled marginal.
_REGIME_POSITIVE = 1.0
_REGIME_MARGINAL = 0.95


@dataclass(frozen=True)
class GenerationConfig:
    """Run-level settings; the defaults are the reference configuration."""

    tree: TreeParams = field(default_factory=TreeParams)
    max_new_tokens: int = 64
    prompt_truncation: int = 512
    temperature_mode: str = "greedy"
    seed: int = 42
    prompts_per_domain: int = 50
    draft_order: int = 2
    target_order: int = 3
    smoothing: float = 0.1
    eos_token: str | None = None

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1 or self.prompt_truncation < 1 or self.prompts_per_domain < 1:
            raise InputError("token caps and prompt counts must be >= 1")
        if self.temperature_mode != "greedy":
            raise InputError("only greedy temperature_mode is supported")
        if self.draft_order < 1 or self.draft_order >= self.target_order:
            raise InputError("need 1 <= draft_order < target_order")
        if self.smoothing < 0:
            raise InputError("smoothing must be >= 0")

    def flat_dict(self) -> dict[str, str]:
        """Flat key/value view; tree limits are inlined."""
        return {
            "max_depth": str(self.tree.max_depth),
            "max_branch": str(self.tree.max_branch),
            "root_top_k": str(self.tree.root_top_k),
            "max_nodes": str(self.tree.max_nodes),
            "max_new_tokens": str(self.max_new_tokens),
            "prompt_truncation": str(self.prompt_truncation),
            "temperature_mode": self.temperature_mode,
            "seed": str(self.seed),
            "prompts_per_domain": str(self.prompts_per_domain),
            "draft_order": str(self.draft_order),
            "target_order": str(self.target_order),
            "smoothing": repr(self.smoothing),
            "eos_token": "" if self.eos_token is None else self.eos_token,
        }

    def config_hash(self) -> str:
        flat = "\n".join(f"{k}={v}" for k, v in sorted(self.flat_dict().items()))
        return hashlib.sha256(flat.encode("utf-8")).hexdigest()


_INT_KEYS = {
    "max_depth", "max_branch", "root_top_k", "max_nodes",
    "max_new_tokens", "prompt_truncation", "seed", "prompts_per_domain",
    "draft_order", "target_order",
}


def config_from_mapping(values: Mapping[str, str]) -> GenerationConfig:
    """Build a config from flat string key/values (config file or CLI merge)."""
    known = set(GenerationConfig().flat_dict())
    unknown = set(values) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, object] = {}
    tree_kwargs: dict[str, int] = {}
    for key, raw in values.items():
        if key in _INT_KEYS:
            try:
                parsed: object = int(raw)
            except ValueError as exc:
                raise InputError(f"config key {key} expects an integer, got {raw!r}") from exc
        elif key == "smoothing":
            try:
                parsed = float(raw)
            except ValueError as exc:
                raise InputError(f"config key smoothing expects a number, got {raw!r}") from exc
        elif key == "eos_token":
            parsed = raw if raw not in ("", "none") else None
        else:
            parsed = raw
        if key in ("max_depth", "max_branch", "root_top_k", "max_nodes"):
            tree_kwargs[key] = parsed  # type: ignore[assignment]
        else:
            kwargs[key] = parsed
    return GenerationConfig(tree=TreeParams(**tree_kwargs), **kwargs)  # type: ignore[arg-type]


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; blank lines and # comments are ignored."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


@dataclass
class ExperimentReport:
    """Records plus their aggregation and run metadata."""

    records: list[NodeRecord]
    summaries: dict[str, DomainSummary]
    metadata: dict[str, object]


def generate_step(
    draft: LanguageModel,
    target: LanguageModel,
    context: Sequence[int],
    params: TreeParams,
    *,
    domain: str = "",
    prompt_id: int = 0,
    step_index: int = 0,
    position_bin: int = 0,
) -> tuple[list[NodeRecord], int]:
    """One generation step: build a tree, score it, return rows + committed token.

    The committed token is the target's greedy bonus token; the caller
    appends it to the context.
    """
    tree = build_draft_tree(draft, context, params)
    scores, bonus = score_tree(target, context, tree)
    records = []
    for score in scores:
        node = tree.nodes[score.node_index]
        records.append(
            NodeRecord(
                domain=domain,
                prompt_id=prompt_id,
                step_index=step_index,
                depth=node.depth,
                position_bin=position_bin,
                token=node.token,
                p_draft=node.p_draft,
                p_target=score.p_target,
                alpha=score.alpha,
                target_entropy=score.target_entropy,
            )
        )
    return records, bonus


def run_experiment(
    config: GenerationConfig, corpora: Mapping[str, DomainCorpus]
) -> ExperimentReport:
    """Run the full measurement loop over every domain and sampled prompt.

    Per domain: train the (draft, target) pair, sample prompts, then generate
    up to ``max_new_tokens`` steps per prompt. When an end-of-sequence token
    is configured and committed, the prompt halts and the halting step
    contributes no records. Fully deterministic for a fixed config.
    """
    if not corpora:
        raise InputError("need at least one domain corpus")
    started = datetime.now(timezone.utc).isoformat()
    records: list[NodeRecord] = []
    domain_meta: dict[str, dict[str, object]] = {}

    for domain in sorted(corpora):
        corpus = corpora[domain]
        draft, target = train_models(
            corpus, config.draft_order, config.target_order, config.smoothing
        )
        prompt_set = sample_prompts(
            corpus, config.prompts_per_domain, config.seed, config.prompt_truncation
        )
        eos_index = corpus.vocabulary.get(config.eos_token) if config.eos_token else None
        domain_records = 0
        trees = 0
        stopped_prompts = 0
        for prompt_id, prompt in enumerate(prompt_set.prompts):
            context = list(prompt)
            for step_index in range(config.max_new_tokens):
                position_bin = 0 if 2 * step_index < config.max_new_tokens else 1
                step_records, committed = generate_step(
                    draft,
                    target,
                    context,
                    config.tree,
                    domain=domain,
                    prompt_id=prompt_id,
                    step_index=step_index,
                    position_bin=position_bin,
                )
                if eos_index is not None and committed == eos_index:
                    stopped_prompts += 1
                    break
                records.extend(step_records)
                domain_records += len(step_records)
                trees += 1
                context.append(committed)
        domain_meta[domain] = {
            "records": domain_records,
            "trees": trees,
            "prompts": len(prompt_set.prompts),
            "stopped_prompts": stopped_prompts,
            "vocab_size": corpus.vocabulary.size,
        }

    metadata: dict[str, object] = {
        "config": config.flat_dict(),
        "config_hash": config.config_hash(),
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "total_records": len(records),
        "domains": domain_meta,
    }
    return ExperimentReport(records=records, summaries=summarize(records), metadata=metadata)


# --- persistence -------------------------------------------------------------


def _fmt17(value: float) -> str:
    return format(value, ".17g")


def write_records_csv(records: Sequence[NodeRecord], path: str | Path) -> None:
    """Frozen column order, floats at 17 significant digits, \\n line ends."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for rec in records:
            writer.writerow(
                [
                    rec.domain,
                    rec.prompt_id,
                    rec.step_index,
                    rec.depth,
                    rec.position_bin,
                    rec.token,
                    _fmt17(rec.p_draft),
                    _fmt17(rec.p_target),
                    _fmt17(rec.alpha),
                    _fmt17(rec.target_entropy),
                ]
            )


def read_records_csv(path: str | Path, validate: bool = True) -> list[NodeRecord]:
    """Re-ingest a record file; optionally re-check per-row self-consistency."""
    records: list[NodeRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != RECORD_FIELDS:
            raise InputError(f"{path} is not a record file (unexpected header)")
        for row in reader:
            if len(row) != len(RECORD_FIELDS):
                raise InputError(f"{path}: malformed row {row!r}")
            rec = NodeRecord(
                domain=row[0],
                prompt_id=int(row[1]),
                step_index=int(row[2]),
                depth=int(row[3]),
                position_bin=int(row[4]),
                token=int(row[5]),
                p_draft=float(row[6]),
                p_target=float(row[7]),
                alpha=float(row[8]),
                target_entropy=float(row[9]),
            )
            if validate:
                rec.validate()
            records.append(rec)
    return records


def _summary_to_jsonable(summary: DomainSummary) -> dict[str, object]:
    rho = summary.spearman_rho
    return {
        "node_count": summary.node_count,
        "mean_alpha": summary.mean_alpha,
        "std_alpha": summary.std_alpha,
        "mean_entropy": summary.mean_entropy,
        "per_depth_alpha": {str(d): v for d, v in summary.per_depth_alpha.items()},
        "chain_prob": {str(d): v for d, v in summary.chain_prob.items()},
        "expected_len": summary.expected_len,
        "spearman_rho": None if math.isnan(rho) else rho,
    }


def write_summary_json(summaries: Mapping[str, DomainSummary], path: str | Path) -> None:
    """JSON object keyed by domain; an undefined correlation serializes as null."""
    payload = {domain: _summary_to_jsonable(s) for domain, s in sorted(summaries.items())}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_summary_json(path: str | Path) -> dict[str, DomainSummary]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    summaries: dict[str, DomainSummary] = {}
    for domain, raw in payload.items():
        rho = raw["spearman_rho"]
        summaries[domain] = DomainSummary(
            node_count=int(raw["node_count"]),
            mean_alpha=float(raw["mean_alpha"]),
            std_alpha=float(raw["std_alpha"]),
            mean_entropy=float(raw["mean_entropy"]),
            per_depth_alpha={int(d): float(v) for d, v in raw["per_depth_alpha"].items()},
            chain_prob={int(d): float(v) for d, v in raw["chain_prob"].items()},
            expected_len=float(raw["expected_len"]),
            spearman_rho=math.nan if rho is None else float(rho),
        )
    return summaries


# --- plain-text tables -------------------------------------------------------


def _regime(expected_len: float) -> str:
    if expected_len >= _REGIME_POSITIVE:
        return "positive"
    if expected_len >= _REGIME_MARGINAL:
        return "marginal"
    return "negative"


def _rho_str(rho: float) -> str:
    return "n/a" if math.isnan(rho) else f"{rho:+.3f}"


def render_tables(records: Sequence[NodeRecord]) -> str:
    """Six plain-text report tables over a record set (headers only when empty)."""
    summaries = summarize(records)
    domains = sorted(summaries)
    all_depths = sorted({d for s in summaries.values() for d in s.per_depth_alpha})
    out: list[str] = []

    out.append("== Per-domain node statistics ==")
    out.append(f"{'domain':<12}{'nodes':>8}  {'mean_alpha':>10}  {'std_alpha':>9}  {'mean_entropy':>12}")
    for domain in domains:
        s = summaries[domain]
        out.append(
            f"{domain:<12}{s.node_count:>8}  {s.mean_alpha:>10.4f}  {s.std_alpha:>9.4f}  {s.mean_entropy:>12.4f}"
        )
    if records:
        alphas = np.asarray([r.alpha for r in records])
        entropies = np.asarray([r.target_entropy for r in records])
        out.append(
            f"{'all':<12}{len(records):>8}  {alphas.mean():>10.4f}  {alphas.std():>9.4f}  {entropies.mean():>12.4f}"
        )
    out.append("")

    out.append("== Expected accepted length ==")
    out.append(f"{'domain':<12}{'E[L]':>7}  regime")
    for domain in domains:
        s = summaries[domain]
        out.append(f"{domain:<12}{s.expected_len:>7.3f}  {_regime(s.expected_len)}")
    out.append("")

    out.append("== Fully accepted chain probability by depth ==")
    out.append(f"{'domain':<12}" + "".join(f"{'d=' + str(d):>8}" for d in all_depths))
    for domain in domains:
        s = summaries[domain]
        cells = "".join(
            f"{s.chain_prob[d]:>8.3f}" if d in s.chain_prob else f"{'-':>8}" for d in all_depths
        )
        out.append(f"{domain:<12}{cells}")
    out.append("")

    out.append("== Mean acceptance by tree depth ==")
    profile = depth_profile(records) if records else None
    out.append(f"{'domain':<12}" + "".join(f"{'d=' + str(d):>8}" for d in all_depths) + f"{'delta':>8}")
    if profile is not None:
        for domain in domains:
            cells = "".join(
                f"{profile.cells[(domain, d)]:>8.3f}" if (domain, d) in profile.cells else f"{'-':>8}"
                for d in all_depths
            )
            out.append(f"{domain:<12}{cells}{profile.delta[domain]:>+8.3f}")
    out.append("")

    out.append("== Mean acceptance by depth and position bin ==")
    out.append(f"{'depth':<8}{'early':>8}{'late':>8}{'delta':>8}")
    if records:
        effects = position_effects(records)
        for depth in sorted({d for d, _ in effects.cells}):
            early = effects.cells.get((depth, 0))
            late = effects.cells.get((depth, 1))
            early_s = f"{early:>8.3f}" if early is not None else f"{'-':>8}"
            late_s = f"{late:>8.3f}" if late is not None else f"{'-':>8}"
            delta_s = f"{effects.delta[depth]:>+8.3f}" if depth in effects.delta else f"{'-':>8}"
            out.append(f"{depth:<8}{early_s}{late_s}{delta_s}")
    out.append("")

    out.append("== Entropy-acceptance rank correlation ==")
    out.append(f"{'domain':<12}{'rho':>8}")
    for domain in domains:
        out.append(f"{domain:<12}{_rho_str(summaries[domain].spearman_rho):>8}")
    out.append("")

    return "\n".join(out)


def emit_report(
    report: ExperimentReport,
    out_dir: str | Path,
    formats: Sequence[str] = REPORT_FORMATS,
) -> dict[str, Path]:
    """Write the requested artifacts into ``out_dir``; returns written paths."""
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise InputError(f"unknown report formats: {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if "csv" in formats:
        path = out / "records.csv"
        write_records_csv(report.records, path)
        written["csv"] = path
    if "json" in formats:
        path = out / "summary.json"
        write_summary_json(report.summaries, path)
        written["json"] = path
        meta_path = out / "meta.json"
        meta_path.write_text(
            json.dumps(report.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        written["meta"] = meta_path
    if "tables" in formats:
        path = out / "tables.txt"
        path.write_text(render_tables(report.records), encoding="utf-8")
        written["tables"] = path
    return written
