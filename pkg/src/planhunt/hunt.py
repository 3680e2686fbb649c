"""End-to-end threat hunting over telemetry samples.

One sample flows through four stages: facts are extracted from telemetry,
the rule pack derives exploit and capability facts, each catalog hypothesis
becomes a planning problem whose top-k plans are enumerated, and every plan
is translated into indicator-of-compromise records. A hypothesis counts as
a possible threat exactly when at least one plan was found; optional
confirmation then audits the checkable indicators against the derived
facts.
"""

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import defaults
from .errors import DuplicateSampleId, InputError
from .inference.engine import StratifiedProgram, evaluate, match_body, stratify
from .inference.rules import Atom, Literal, RulePack, Var, parse_body, render_body
from .planner import Limits, Plan, PlanSet, find_top_k
from .planning_model.ground import GroundedTask, ground_task
from .planning_model.model import DomainModel, ThreatHypothesis, default_catalog
from .planning_model.state import CapabilityTable, MappingTable, build_problem
from .telemetry import Fact, FactBase, SampleRecord, events_to_facts, load_sample, unknown_tokens

logger = logging.getLogger(__name__)

__all__ = [
    "IndicatorSpec",
    "IoCRecord",
    "ThreatFinding",
    "HuntReport",
    "HuntAssets",
    "HuntConfig",
    "BatchSummary",
    "parse_indicator_map",
    "construct_indicators",
    "patterns_for_cve",
    "confirm_threat",
    "identify_threats",
    "report_to_json",
    "aggregate",
    "summary_to_csv",
    "batch_hunt",
]

STATUS_POSSIBLE = "threat_possible"
STATUS_NO_PLAN = "no_plan"
STATUS_TIMED_OUT = "timed_out"

CONFIRM_NOT_ATTEMPTED = "not_attempted"
CONFIRM_CONFIRMED = "confirmed"
CONFIRM_UNCONFIRMED = "unconfirmed"

REPORT_SCHEMA_VERSION = "1"


# --- indicator templates ------------------------------------------------------


@dataclass(frozen=True)
class IndicatorSpec:
    """One template line: which action step emits which record."""

    schema: str
    disjunct: int | None
    kind: str
    fields: tuple[tuple[str, str], ...]  # (key, "$N" slot or literal)


def parse_indicator_map(text: str) -> tuple[IndicatorSpec, ...]:
    """Parse ``action[@disjunct] kind key=value ...`` lines."""
    specs: list[IndicatorSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise InputError(f"indicator map line {lineno}: need action and kind")
        head = parts[0]
        disjunct: int | None = None
        if "@" in head:
            head, _, tail = head.partition("@")
            if not tail.isdigit() or int(tail) < 1:
                raise InputError(
                    f"indicator map line {lineno}: bad disjunct suffix {tail!r}"
                )
            disjunct = int(tail)
        fields: list[tuple[str, str]] = []
        for item in parts[2:]:
            if "=" not in item:
                raise InputError(
                    f"indicator map line {lineno}: field {item!r} has no '='"
                )
            key, _, value = item.partition("=")
            fields.append((key, value))
        specs.append(IndicatorSpec(head, disjunct, parts[1], tuple(fields)))
    return tuple(specs)


@dataclass(frozen=True)
class IoCRecord:
    """One indicator: what to look for, and which plan step produced it."""

    kind: str
    detail: tuple[tuple[str, str], ...]
    source_step: int
    source_cve: str | None = None

    def detail_dict(self) -> dict[str, str]:
        return dict(self.detail)


def patterns_for_cve(pack: RulePack, cve: str) -> list[str]:
    """Rule-body texts whose satisfaction lifts ``exploited(cve)``.

    A lifting rule whose body is a single evidence predicate expands to
    that predicate's own rule bodies, so the returned patterns reference
    telemetry directly.
    """
    patterns: list[str] = []
    for rule in pack.rules:
        if rule.head.predicate != "exploited" or rule.head.args != (cve,):
            continue
        body = rule.body
        if (
            len(body) == 1
            and isinstance(body[0], Literal)
            and not body[0].negated
            and not body[0].atom.args
        ):
            evidence = body[0].atom.predicate
            for inner in pack.rules:
                if inner.head.predicate == evidence:
                    patterns.append(render_body(inner.body))
            continue
        patterns.append(render_body(body))
    return patterns


def construct_indicators(
    task: GroundedTask,
    plan: Plan,
    specs: tuple[IndicatorSpec, ...],
    pack: RulePack,
) -> tuple[IoCRecord, ...]:
    """Expand each plan step through the indicator templates.

    Records equal up to their source step are deduplicated, keeping the
    earliest step.
    """
    records: list[IoCRecord] = []
    seen: set[tuple] = set()
    for step, index in enumerate(plan.steps):
        action = task.actions[index]
        for spec in specs:
            if spec.schema != action.schema:
                continue
            if spec.disjunct is not None and spec.disjunct != action.disjunct:
                continue
            detail: list[tuple[str, str]] = []
            for key, value in spec.fields:
                if value.startswith("$"):
                    slot = value[1:]
                    if not slot.isdigit() or not 1 <= int(slot) <= len(action.args):
                        raise InputError(
                            f"indicator template {spec.schema}: slot {value} "
                            f"out of range for ({action.schema} {' '.join(action.args)})"
                        )
                    detail.append((key, action.args[int(slot) - 1]))
                else:
                    detail.append((key, value))
            source_cve = dict(detail).get("cve")
            if spec.kind == "syscall-pattern" and source_cve:
                alternatives = patterns_for_cve(pack, source_cve)
                if alternatives:
                    detail.append(("patterns", " | ".join(alternatives)))
            record = IoCRecord(spec.kind, tuple(detail), step, source_cve)
            key = (record.kind, record.detail, record.source_cve)
            if key in seen:
                continue
            seen.add(key)
            records.append(record)
    return tuple(records)


# Indicator kinds checkable against already-captured telemetry; api-call
# records describe future behavior and stay out of confirmation.
_AUDIT_PREDICATES = {
    "notification-access": "notification-accessible",
    "clipboard-access": "clipboard-readable",
    "ui-overlay": "login-ui-observed",
}


def confirm_threat(records: tuple[IoCRecord, ...], base: FactBase) -> bool:
    """Audit the checkable records against extensional plus derived facts."""
    for record in records:
        detail = record.detail_dict()
        if record.kind == "syscall-pattern":
            alternatives = detail.get("patterns", "").split(" | ")
            if not any(
                alt and match_body(parse_body(alt), base) for alt in alternatives
            ):
                return False
        elif record.kind == "permission-audit":
            probe = (Literal(Atom("perm-granted", (Var("A"), detail["sensor"]))),)
            if not match_body(probe, base):
                return False
        elif record.kind in _AUDIT_PREDICATES:
            probe = (
                Literal(Atom(_AUDIT_PREDICATES[record.kind], (detail["app"],))),
            )
            if not match_body(probe, base):
                return False
    return True


# --- per-sample pipeline ------------------------------------------------------


@dataclass(frozen=True)
class ThreatFinding:
    threat: str
    mechanism: str
    status: str
    planner_status: str
    plans: tuple[tuple[int, tuple[str, ...]], ...]  # (cost, rendered steps)
    indicators: tuple[tuple[IoCRecord, ...], ...]  # one tuple per plan
    confirmation: str = CONFIRM_NOT_ATTEMPTED

    @property
    def label(self) -> str:
        return f"{self.threat}/{self.mechanism}"


@dataclass(frozen=True)
class HuntReport:
    sample_id: str
    unknown_tokens: tuple[str, ...]
    findings: tuple[ThreatFinding, ...]
    strict_domain: bool
    confirm: bool
    k: int
    wall_time_s: float

    @property
    def possible_threats(self) -> tuple[str, ...]:
        return tuple(
            f.label for f in self.findings if f.status == STATUS_POSSIBLE
        )


@dataclass(frozen=True)
class HuntAssets:
    """Everything the pipeline needs besides the sample itself."""

    domain: DomainModel
    pack: RulePack
    program: StratifiedProgram
    capabilities: CapabilityTable
    mapping: MappingTable
    indicator_specs: tuple[IndicatorSpec, ...]

    @classmethod
    def load(
        cls,
        root: Path | None = None,
        overrides: dict[str, Path] | None = None,
        strict_domain: bool = False,
    ) -> "HuntAssets":
        """Load the asset bundle, honoring per-file overrides.

        ``overrides`` keys are the bundled file names (threat-domain.pddl,
        threat.rules, cve-capabilities, state-mapping, indicator-map).
        """

        def text(name: str) -> str:
            if overrides and name in overrides:
                return Path(overrides[name]).read_text(encoding="utf-8")
            return defaults.asset_text(name, root)

        from .planning_model.pddl import parse_domain
        from .planning_model.state import load_capability_table, load_mapping_table
        from .inference.rules import parse_rule_pack

        domain = parse_domain(text(defaults.DOMAIN_FILE))
        if strict_domain:
            domain = domain.without_actions(defaults.EXTENDED_ACTIONS)
        pack = parse_rule_pack(text(defaults.RULES_FILE))
        return cls(
            domain=domain,
            pack=pack,
            program=stratify(pack),
            capabilities=load_capability_table(text(defaults.CAPABILITIES_FILE)),
            mapping=load_mapping_table(text(defaults.STATE_MAP_FILE)),
            indicator_specs=parse_indicator_map(text(defaults.INDICATOR_MAP_FILE)),
        )


@dataclass(frozen=True)
class HuntConfig:
    limits: Limits = field(default_factory=Limits)
    catalog: tuple[ThreatHypothesis, ...] = field(default_factory=default_catalog)
    strict_domain: bool = False
    confirm: bool = False
    # Wall-clock budget across a sample's whole catalog; None means four
    # planner budgets.
    sample_wall_time: float | None = None

    def sample_budget(self) -> float:
        if self.sample_wall_time is not None:
            return self.sample_wall_time
        return 4.0 * self.limits.wall_time


def identify_threats(
    sample: SampleRecord, assets: HuntAssets, config: HuntConfig | None = None
) -> HuntReport:
    """Run the full pipeline for one sample and return its report."""
    config = config or HuntConfig()
    start = time.monotonic()
    deadline = start + config.sample_budget()

    base = events_to_facts(sample)
    flagged = unknown_tokens(sample, assets.pack.token_table)
    derived = evaluate(assets.program, base).facts

    combined = FactBase()
    for fact in base:
        combined.add(fact)
    for fact in derived:
        combined.add(fact)

    findings: list[ThreatFinding] = []
    for hypothesis in config.catalog:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            findings.append(
                ThreatFinding(
                    threat=hypothesis.threat,
                    mechanism=hypothesis.mechanism,
                    status=STATUS_TIMED_OUT,
                    planner_status=STATUS_TIMED_OUT,
                    plans=(),
                    indicators=(),
                )
            )
            continue
        problem = build_problem(
            derived, sample, assets.domain, assets.capabilities,
            assets.mapping, hypothesis,
        )
        task = ground_task(assets.domain, problem)
        limits = replace(
            config.limits, wall_time=min(config.limits.wall_time, remaining)
        )
        planset = find_top_k(task, limits)
        findings.append(
            _finding_from_planset(
                hypothesis, task, planset, assets, combined, config
            )
        )
    return HuntReport(
        sample_id=sample.sample_id,
        unknown_tokens=tuple(flagged),
        findings=tuple(findings),
        strict_domain=config.strict_domain,
        confirm=config.confirm,
        k=config.limits.k,
        wall_time_s=time.monotonic() - start,
    )


def _finding_from_planset(
    hypothesis: ThreatHypothesis,
    task: GroundedTask,
    planset: PlanSet,
    assets: HuntAssets,
    combined: FactBase,
    config: HuntConfig,
) -> ThreatFinding:
    if planset.plans:
        status = STATUS_POSSIBLE
    elif planset.status == "timed_out":
        status = STATUS_TIMED_OUT
    else:
        status = STATUS_NO_PLAN

    plans: list[tuple[int, tuple[str, ...]]] = []
    indicators: list[tuple[IoCRecord, ...]] = []
    for plan in planset.plans:
        plans.append(
            (plan.cost, tuple(task.actions[i].render() for i in plan.steps))
        )
        indicators.append(
            construct_indicators(task, plan, assets.indicator_specs, assets.pack)
        )

    confirmation = CONFIRM_NOT_ATTEMPTED
    if config.confirm and status == STATUS_POSSIBLE:
        confirmed = any(
            confirm_threat(records, combined) for records in indicators
        )
        confirmation = CONFIRM_CONFIRMED if confirmed else CONFIRM_UNCONFIRMED

    return ThreatFinding(
        threat=hypothesis.threat,
        mechanism=hypothesis.mechanism,
        status=status,
        planner_status=planset.status,
        plans=tuple(plans),
        indicators=tuple(indicators),
        confirmation=confirmation,
    )


# --- report serialization -----------------------------------------------------


def report_to_json(report: HuntReport, include_wall_time: bool = True) -> str:
    """Serialize a report deterministically; batch files drop the wall time
    so repeated runs stay byte-identical."""
    meta: dict[str, object] = {
        "k": report.k,
        "strict_domain": report.strict_domain,
        "confirm": report.confirm,
    }
    if include_wall_time:
        meta["wall_time_s"] = round(report.wall_time_s, 3)
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "sample_id": report.sample_id,
        "unknown_tokens": list(report.unknown_tokens),
        "possible_threats": list(report.possible_threats),
        "findings": [
            {
                "threat": f.threat,
                "mechanism": f.mechanism,
                "status": f.status,
                "planner_status": f.planner_status,
                "confirmation": f.confirmation,
                "plans": [
                    {"cost": cost, "steps": list(steps)} for cost, steps in f.plans
                ],
                "indicators": [
                    [
                        {
                            "kind": r.kind,
                            "detail": r.detail_dict(),
                            "source_step": r.source_step,
                        }
                        for r in records
                    ]
                    for records in f.indicators
                ],
            }
            for f in report.findings
        ],
        "meta": meta,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# --- batch mode -----------------------------------------------------------------


@dataclass(frozen=True)
class BatchSummary:
    """Aggregate counts per catalog hypothesis plus sample totals."""

    cells: tuple[tuple[str, str, int, int], ...]  # threat, mechanism, samples, plans
    samples: int
    detected: int
    timed_out: int
    clean: int


def aggregate(reports: list[HuntReport]) -> BatchSummary:
    order: list[tuple[str, str]] = []
    samples_with: dict[tuple[str, str], int] = {}
    plan_totals: dict[tuple[str, str], int] = {}
    for report in reports:
        for finding in report.findings:
            key = (finding.threat, finding.mechanism)
            if key not in samples_with:
                order.append(key)
                samples_with[key] = 0
                plan_totals[key] = 0
            if finding.status == STATUS_POSSIBLE:
                samples_with[key] += 1
            plan_totals[key] += len(finding.plans)
    detected = sum(1 for r in reports if r.possible_threats)
    timed_out = sum(
        1
        for r in reports
        if any(f.status == STATUS_TIMED_OUT for f in r.findings)
    )
    return BatchSummary(
        cells=tuple(
            (threat, mechanism, samples_with[(threat, mechanism)], plan_totals[(threat, mechanism)])
            for threat, mechanism in order
        ),
        samples=len(reports),
        detected=detected,
        timed_out=timed_out,
        clean=len(reports) - detected,
    )


def summary_to_csv(summary: BatchSummary) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["threat", "mechanism", "sample_count", "plan_count"])
    for threat, mechanism, sample_count, plan_count in summary.cells:
        writer.writerow([threat, mechanism, sample_count, plan_count])
    return out.getvalue()


# Worker-process state: assets are rebuilt once per worker, not per sample.
_WORKER: dict = {}


def _init_worker(root: str | None, overrides: dict[str, str], config: HuntConfig) -> None:
    _WORKER["assets"] = HuntAssets.load(
        Path(root) if root else None,
        {k: Path(v) for k, v in overrides.items()},
        strict_domain=config.strict_domain,
    )
    _WORKER["config"] = config


def _worker_run(path: str) -> HuntReport:
    sample = load_sample(path)
    return identify_threats(sample, _WORKER["assets"], _WORKER["config"])


def batch_hunt(
    paths: list[Path],
    config: HuntConfig | None = None,
    root: Path | None = None,
    overrides: dict[str, Path] | None = None,
    workers: int = 1,
    report_dir: Path | None = None,
) -> tuple[list[HuntReport], BatchSummary]:
    """Hunt over many samples, optionally in parallel worker processes.

    Reports come back sorted by sample id regardless of worker scheduling;
    two samples with the same id abort the batch. When ``report_dir`` is
    given, per-sample reports (without wall times) and summary.csv are
    written there.
    """
    config = config or HuntConfig()
    overrides = overrides or {}
    if workers < 1:
        raise ValueError("workers must be at least 1")

    if workers == 1:
        assets = HuntAssets.load(root, overrides, strict_domain=config.strict_domain)
        reports = [
            identify_threats(load_sample(path), assets, config) for path in paths
        ]
    else:
        str_overrides = {k: str(v) for k, v in overrides.items()}
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(str(root) if root else None, str_overrides, config),
        ) as pool:
            reports = list(pool.map(_worker_run, [str(p) for p in paths]))

    seen: dict[str, int] = {}
    for report in reports:
        seen[report.sample_id] = seen.get(report.sample_id, 0) + 1
    for sample_id, count in seen.items():
        if count > 1:
            raise DuplicateSampleId(sample_id)
    reports.sort(key=lambda r: r.sample_id)
    summary = aggregate(reports)

    if report_dir is not None:
        report_dir.mkdir(parents=True, exist_ok=True)
        for report in reports:
            out = report_dir / f"{report.sample_id}.json"
            out.write_text(report_to_json(report, include_wall_time=False), encoding="utf-8")
        (report_dir / "summary.csv").write_text(summary_to_csv(summary), encoding="utf-8")
    logger.info(
        "batch: %d samples, %d detected, %d timed out",
        summary.samples,
        summary.detected,
        summary.timed_out,
    )
    return reports, summary
