"""Run statistics: drop bookkeeping, polarity counts, masking diagnostics.

Reports merge componentwise (a commutative monoid with `zero_report` as
identity), so per-worker reports can be reduced in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InputError

DROP_REASONS = ("length", "no_keyword", "category_filter", "no_candidate", "over_length")


@dataclass
class RunReport:
    config_sha256: str = ""
    sentences_seen: int = 0
    sentences_kept: int = 0
    dropped_by_reason: dict[str, int] = field(
        default_factory=lambda: {r: 0 for r in DROP_REASONS}
    )
    kept_entailment: int = 0
    kept_contradiction: int = 0
    keyword_counts: dict[str, int] = field(default_factory=dict)
    candidate_tag_counts: dict[str, int] = field(default_factory=dict)
    keyword_masked_records: int = 0

    @property
    def keyword_masked_fraction(self) -> float:
        return self.keyword_masked_records / self.sentences_kept if self.sentences_kept else 0.0

    @property
    def positive_fraction(self) -> float:
        return self.kept_entailment / self.sentences_kept if self.sentences_kept else 0.0

    def drop(self, reason: str) -> None:
        if reason not in self.dropped_by_reason:
            raise ValueError(f"unknown drop reason {reason!r}")
        self.dropped_by_reason[reason] += 1

    def check(self) -> None:
        dropped = sum(self.dropped_by_reason.values())
        if self.sentences_kept + dropped != self.sentences_seen:
            raise ValueError(
                f"kept {self.sentences_kept} + dropped {dropped} != seen {self.sentences_seen}"
            )
        if self.kept_entailment + self.kept_contradiction != self.sentences_kept:
            raise ValueError("per-polarity counts do not sum to sentences_kept")


def zero_report(config_sha256: str = "") -> RunReport:
    return RunReport(config_sha256=config_sha256)


def merge(a: RunReport, b: RunReport) -> RunReport:
    if a.config_sha256 != b.config_sha256:
        raise ConfigError(
            f"cannot merge reports from different configs "
            f"({a.config_sha256[:12]} vs {b.config_sha256[:12]})"
        )
    out = RunReport(config_sha256=a.config_sha256)
    out.sentences_seen = a.sentences_seen + b.sentences_seen
    out.sentences_kept = a.sentences_kept + b.sentences_kept
    out.dropped_by_reason = {
        k: a.dropped_by_reason.get(k, 0) + b.dropped_by_reason.get(k, 0)
        for k in DROP_REASONS
    }
    out.kept_entailment = a.kept_entailment + b.kept_entailment
    out.kept_contradiction = a.kept_contradiction + b.kept_contradiction
    out.keyword_counts = _sum_dicts(a.keyword_counts, b.keyword_counts)
    out.candidate_tag_counts = _sum_dicts(a.candidate_tag_counts, b.candidate_tag_counts)
    out.keyword_masked_records = a.keyword_masked_records + b.keyword_masked_records
    return out


def _sum_dicts(x: dict[str, int], y: dict[str, int]) -> dict[str, int]:
    return {k: x.get(k, 0) + y.get(k, 0) for k in sorted(set(x) | set(y))}


def to_json_obj(report: RunReport) -> dict:
    return {
        "config_sha256": report.config_sha256,
        "sentences_seen": report.sentences_seen,
        "sentences_kept": report.sentences_kept,
        "dropped_by_reason": {k: report.dropped_by_reason.get(k, 0) for k in DROP_REASONS},
        "kept_entailment": report.kept_entailment,
        "kept_contradiction": report.kept_contradiction,
        "keyword_counts": dict(sorted(report.keyword_counts.items())),
        "candidate_tag_counts": dict(sorted(report.candidate_tag_counts.items())),
        "keyword_masked_records": report.keyword_masked_records,
        "keyword_masked_fraction": round(report.keyword_masked_fraction, 4),
        "positive_fraction": round(report.positive_fraction, 4),
    }


def from_json_obj(obj: dict) -> RunReport:
    try:
        return RunReport(
            config_sha256=obj["config_sha256"],
            sentences_seen=obj["sentences_seen"],
            sentences_kept=obj["sentences_kept"],
            dropped_by_reason={k: obj["dropped_by_reason"].get(k, 0) for k in DROP_REASONS},
            kept_entailment=obj["kept_entailment"],
            kept_contradiction=obj["kept_contradiction"],
            keyword_counts=dict(obj.get("keyword_counts", {})),
            candidate_tag_counts=dict(obj.get("candidate_tag_counts", {})),
            keyword_masked_records=obj.get("keyword_masked_records", 0),
        )
    except KeyError as exc:
        raise InputError(f"report missing field {exc}") from exc


def load_report(path: str | Path) -> RunReport:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from exc
    return from_json_obj(obj)


def render(report: RunReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(to_json_obj(report), sort_keys=True, indent=2) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        "run report",
        f"  config            {report.config_sha256[:16] or '-'}",
        f"  sentences seen    {report.sentences_seen}",
        f"  sentences kept    {report.sentences_kept}",
    ]
    for reason in DROP_REASONS:
        lines.append(f"  dropped/{reason:<16} {report.dropped_by_reason.get(reason, 0)}")
    lines += [
        f"  kept entailment   {report.kept_entailment}",
        f"  kept contradiction {report.kept_contradiction}",
        f"  positive fraction {report.positive_fraction:.4f}",
        f"  keyword-masked    {report.keyword_masked_records} ({report.keyword_masked_fraction:.4f})",
    ]
    if report.keyword_counts:
        lines.append("  keyword frequencies:")
        for phrase, n in sorted(report.keyword_counts.items(), key=lambda kv: (-kv[1], kv[0])):
            lines.append(f"    {phrase:<20} {n}")
    if report.candidate_tag_counts:
        lines.append("  candidate tags:")
        for tag, n in sorted(report.candidate_tag_counts.items()):
            lines.append(f"    {tag:<8} {n}")
    return "\n".join(lines) + "\n"
