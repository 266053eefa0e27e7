"""Questionnaire scoring and report rendering.

Covers the short-form game-experience questionnaire (14 items, 7 components,
2 items each), acceptance ratings, the qualitative evaluation rubric, and
condition preference rankings, rendered as a mean ± sd report. Statistics are
descriptive only; the standard deviation uses divisor N (population form), and
the report header says so.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import IO, Iterable, Mapping, Sequence


class MissingItem(ValueError):
    """Response lacks an item required by the component map."""


class NoData(ValueError):
    """Aggregation requested over an empty selection."""


class GeqComponent(str, Enum):
    COMPETENCE = "competence"
    IMMERSION = "immersion"
    FLOW = "flow"
    TENSION = "tension"
    CHALLENGE = "challenge"
    NEGATIVE_AFFECT = "negative_affect"
    POSITIVE_AFFECT = "positive_affect"


COMPONENT_LABELS = {
    GeqComponent.COMPETENCE: "Competence",
    GeqComponent.IMMERSION: "Immersion",
    GeqComponent.FLOW: "Flow",
    GeqComponent.TENSION: "Tension",
    GeqComponent.CHALLENGE: "Challenge",
    GeqComponent.NEGATIVE_AFFECT: "Negative affect",
    GeqComponent.POSITIVE_AFFECT: "Positive affect",
}


class Condition(str, Enum):
    PC = "pc"
    MIXED_REALITY = "mixed_reality"
    CLASSICAL_THERAPY = "classical_therapy"


CONDITION_LABELS = {
    Condition.PC: "PC",
    Condition.MIXED_REALITY: "Mixed reality",
    Condition.CLASSICAL_THERAPY: "Classical therapy",
}


def load_item_bank() -> dict:
    """Shipped questionnaire items; editable data, not code."""
    ref = resources.files("fishtank").joinpath("data/geq_items.json")
    return json.loads(ref.read_text())


def item_map_from_bank(bank: dict) -> dict[GeqComponent, tuple[int, ...]]:
    out: dict[GeqComponent, list[int]] = {c: [] for c in GeqComponent}
    for item in bank["items"]:
        out[GeqComponent(item["component"])].append(int(item["index"]))
    return {c: tuple(sorted(idx)) for c, idx in out.items()}


DEFAULT_ITEM_MAP = item_map_from_bank(load_item_bank())


@dataclass(frozen=True)
class GeqResponse:
    respondent: str
    condition: Condition
    items: Mapping[int, float]
    scale: tuple[float, float] = (0.0, 4.0)

    def __post_init__(self) -> None:
        lo, hi = self.scale
        if lo >= hi:
            raise ValueError("scale must be an increasing (min, max) pair")
        for idx, score in self.items.items():
            if not lo <= score <= hi:
                raise ValueError(f"item {idx} score {score} outside scale [{lo}, {hi}]")


@dataclass(frozen=True)
class ComponentStats:
    component: GeqComponent
    condition: Condition
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if self.sd < 0.0:
            raise ValueError("sd must be nonnegative")


@dataclass(frozen=True)
class AcceptanceRating:
    """Ordinal trade-off ratings: utility, usability, likeability vs. cost."""

    utility: int
    usability: int
    likeability: int
    cost_note: str = ""

    def __post_init__(self) -> None:
        for name in ("utility", "usability", "likeability"):
            value = getattr(self, name)
            if not 1 <= value <= 5:
                raise ValueError(f"{name} must be in 1..5")


RUBRIC_CHOICES: dict[str, tuple[str, ...]] = {
    "intervention": ("yes", "no"),
    "habit_change": ("negligible", "moderate", "important"),
    "setup": ("therapist", "assistant"),
    "location": ("dedicated", "anywhere"),
    "eye_hand_focus": ("same_place", "different_places"),
    "invasiveness": ("convenient", "invasive"),
    "unitary_cost": ("<1KE", "1-5KE", "5-10KE", ">10KE"),
    "extra_resources": ("yes", "no"),
}

RUBRIC_LABELS = {
    "intervention": "Therapist intervention",
    "habit_change": "Habit change",
    "setup": "System setup",
    "location": "Location",
    "eye_hand_focus": "Eye-hand focus",
    "invasiveness": "Invasiveness",
    "unitary_cost": "Unitary cost",
    "extra_resources": "Extra resources",
}


@dataclass(frozen=True)
class EvaluationRubric:
    intervention: str
    habit_change: str
    setup: str
    location: str
    eye_hand_focus: str
    invasiveness: str
    unitary_cost: str
    extra_resources: str

    def __post_init__(self) -> None:
        for name, allowed in RUBRIC_CHOICES.items():
            value = getattr(self, name)
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")


@dataclass(frozen=True)
class PreferenceRanking:
    respondent: str
    role: str
    order: tuple[Condition, ...]

    def __post_init__(self) -> None:
        if sorted(c.value for c in self.order) != sorted(c.value for c in Condition):
            raise ValueError("order must rank each condition exactly once")
        if self.role not in ("patient-role", "therapist-role"):
            raise ValueError("role must be patient-role or therapist-role")


def score_component(
    r: GeqResponse,
    c: GeqComponent,
    item_map: Mapping[GeqComponent, tuple[int, ...]] = DEFAULT_ITEM_MAP,
) -> float:
    """Mean of the component's items."""
    indexes = item_map[c]
    try:
        return sum(r.items[i] for i in indexes) / len(indexes)
    except KeyError as exc:
        raise MissingItem(f"response {r.respondent} lacks item {exc.args[0]}") from exc


def aggregate(
    responses: Iterable[GeqResponse],
    component: GeqComponent,
    condition: Condition,
    item_map: Mapping[GeqComponent, tuple[int, ...]] = DEFAULT_ITEM_MAP,
) -> ComponentStats:
    """Mean and population standard deviation over matching respondents."""
    scores = [
        score_component(r, component, item_map)
        for r in responses
        if r.condition is condition
    ]
    if not scores:
        raise NoData(f"no responses for {component.value} under {condition.value}")
    n = len(scores)
    mean = sum(scores) / n
    var = sum((s - mean) ** 2 for s in scores) / n
    return ComponentStats(component=component, condition=condition, mean=mean, sd=math.sqrt(var))


def format_stats(mean: float, sd: float) -> str:
    return f"{mean:.2f} ± {sd:.2f}"


def render_ranking(r: PreferenceRanking) -> str:
    return " > ".join(c.value for c in r.order)


def parse_ranking(respondent: str, role: str, text: str) -> PreferenceRanking:
    order = tuple(Condition(part.strip()) for part in text.split(">"))
    return PreferenceRanking(respondent=respondent, role=role, order=order)


def load_responses_csv(fp: IO[str]) -> list[GeqResponse]:
    """Rows: respondent,condition,item_1..item_14,scale_min,scale_max."""
    out = []
    for row in csv.DictReader(fp):
        items = {
            i: float(row[f"item_{i}"])
            for i in range(1, 15)
            if row.get(f"item_{i}") not in (None, "")
        }
        out.append(
            GeqResponse(
                respondent=row["respondent"],
                condition=Condition(row["condition"]),
                items=items,
                scale=(float(row["scale_min"]), float(row["scale_max"])),
            )
        )
    return out


@dataclass(frozen=True)
class Report:
    stats: Sequence[ComponentStats]
    rankings: Sequence[PreferenceRanking] = ()
    rubric: EvaluationRubric | None = None
    acceptance: AcceptanceRating | None = None
    title: str = "Game experience report"


def render_report(report: Report) -> str:
    """Plain-text report: one mean ± sd row per component and condition."""
    lines = [
        report.title,
        "=" * len(report.title),
        "Statistics: mean ± standard deviation (population, divisor N)",
        "",
    ]
    conditions = []
    for s in report.stats:
        if s.condition not in conditions:
            conditions.append(s.condition)
    for condition in conditions:
        lines.append(f"Condition: {CONDITION_LABELS[condition]}")
        for s in report.stats:
            if s.condition is condition:
                label = COMPONENT_LABELS[s.component]
                lines.append(f"  {label:<16} {format_stats(s.mean, s.sd)}")
        lines.append("")
    if report.rankings:
        lines.append("Preference rankings")
        for r in report.rankings:
            lines.append(f"  {r.respondent} ({r.role}): {render_ranking(r)}")
        lines.append("")
    if report.rubric is not None:
        lines.append("Evaluation rubric")
        for name in RUBRIC_CHOICES:
            lines.append(f"  {RUBRIC_LABELS[name]:<22} {getattr(report.rubric, name)}")
        lines.append("")
    if report.acceptance is not None:
        a = report.acceptance
        lines.append("Acceptance (1-5)")
        lines.append(f"  Utility     {a.utility}")
        lines.append(f"  Usability   {a.usability}")
        lines.append(f"  Likeability {a.likeability}")
        if a.cost_note:
            lines.append(f"  Cost note:  {a.cost_note}")
        lines.append("")
    return "\n".join(lines)


def report_dict(report: Report) -> dict:
    return {
        "title": report.title,
        "statistic": "mean ± population sd (divisor N)",
        "stats": [
            {
                "component": s.component.value,
                "condition": s.condition.value,
                "mean": s.mean,
                "sd": s.sd,
                "rendered": format_stats(s.mean, s.sd),
            }
            for s in report.stats
        ],
        "rankings": [
            {"respondent": r.respondent, "role": r.role, "order": [c.value for c in r.order]}
            for r in report.rankings
        ],
        "rubric": (
            {name: getattr(report.rubric, name) for name in RUBRIC_CHOICES}
            if report.rubric is not None
            else None
        ),
        "acceptance": (
            {
                "utility": report.acceptance.utility,
                "usability": report.acceptance.usability,
                "likeability": report.acceptance.likeability,
                "cost_note": report.acceptance.cost_note,
            }
            if report.acceptance is not None
            else None
        ),
    }


def load_report_fixture() -> Report:
    """The shipped demonstration fixture used by the golden-report test."""
    ref = resources.files("fishtank").joinpath("data/report_fixture.json")
    d = json.loads(ref.read_text())
    stats = [
        ComponentStats(
            component=GeqComponent(s["component"]),
            condition=Condition(s["condition"]),
            mean=s["mean"],
            sd=s["sd"],
        )
        for s in d["stats"]
    ]
    rankings = [
        PreferenceRanking(
            respondent=r["respondent"],
            role=r["role"],
            order=tuple(Condition(c) for c in r["order"]),
        )
        for r in d["rankings"]
    ]
    rubric = EvaluationRubric(**d["rubric"]) if d.get("rubric") else None
    return Report(stats=stats, rankings=rankings, rubric=rubric, title=d["title"])
