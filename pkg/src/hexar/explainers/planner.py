"""Planner explainer: open-ended reasoning over the plan and its grounding."""

from __future__ import annotations

from ..framework import ExplainerError
from ..reasoner import TextReasoner, load_prompt_template
from ..trace import ContextVector, Event, Explanation, Query, TaskPlan


def _format_steps(plan: TaskPlan) -> str:
    if not plan.steps:
        return "(no steps)"
    lines = []
    for step in plan.steps:
        params = ", ".join(f"{k}={v}" for k, v in sorted(step.params.items()))
        lines.append(f"- {step.skill}({params})")
    return "\n".join(lines)


def build_planner_prompt(query: Query, context: ContextVector, plan: TaskPlan) -> str:
    grounding = ""
    if plan.grounding_errors:
        listed = "\n".join(f"- {err}" for err in plan.grounding_errors)
        grounding = f"## Grounding errors\n{listed}\n\n"
    statuses = "\n".join(f"- {skill}: {status}" for skill, status in context.skills) or "(none)"
    return load_prompt_template("planner").format(
        instruction=plan.instruction,
        plan_steps=_format_steps(plan),
        grounding_section=grounding,
        skill_statuses=statuses,
        query=query.text,
    )


def explain_planner(
    query: Query,
    context: ContextVector,
    events: tuple[Event, ...],
    reasoner: TextReasoner,
) -> Explanation:
    """Prompt the reasoner with instruction, plan, grounding errors and statuses."""
    plan_event = next((e for e in events if e.kind == "plan"), None)
    if plan_event is None:
        raise ExplainerError("planner explainer needs the plan event in its view")
    plan = TaskPlan.from_payload(plan_event.payload)
    response = reasoner.complete_text(
        system_prompt="You explain robot task plans.",
        user_prompt=build_planner_prompt(query, context, plan),
    )
    return Explanation(
        text=response.text,
        produced_by="planner",
        reasoner_calls=1,
        wall_time=response.latency,
    )
