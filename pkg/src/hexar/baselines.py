"""The two monolithic comparison systems.

``end_to_end`` hands one reasoner everything the component explainers can
see; ``all_components`` triggers every component explainer and merges their
answers. Both exist to quantify what the selector and the specialised
explainers each contribute.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

from .explainers.navigation import LogFilterRules, filter_logs, situation_catalogue
from .framework import ExplainerRegistry, aggregate, build_context, observe
from .reasoner import ReasonerRequest, ReasonerResponse, TextReasoner, load_prompt_template
from .trace import Event, Explanation, Query, TaskPlan, Trace


class _CountingReasoner(TextReasoner):
    """Counts completion attempts so failed explainer calls are still billed."""

    def __init__(self, inner: TextReasoner) -> None:
        self.inner = inner
        self.calls = 0

    def complete(self, request: ReasonerRequest) -> ReasonerResponse:
        self.calls += 1
        return self.inner.complete(request)


def end_to_end_view(trace: Trace, registry: ExplainerRegistry) -> tuple[Event, ...]:
    """Events the end-to-end prompt may draw on: the union of all explainer views."""
    union = frozenset().union(*(e.subscribed_sources for e in registry.explainers.values()))
    return trace.by_source(union)


def _format_items(payload: dict) -> str:
    return ", ".join(f"{k}={v}" for k, v in sorted(payload.items()))


def build_end_to_end_prompt(
    query: Query,
    trace: Trace,
    registry: ExplainerRegistry,
    rules: LogFilterRules = LogFilterRules(),
) -> str:
    events = end_to_end_view(trace, registry)
    plan = TaskPlan.from_payload(trace.plan_event.payload)

    steps = []
    for step in plan.steps:
        params = ", ".join(f"{k}={v}" for k, v in sorted(step.params.items()))
        steps.append(f"- {step.skill}({params})")
    grounding = ""
    if plan.grounding_errors:
        listed = "\n".join(f"- {err}" for err in plan.grounding_errors)
        grounding = f"## Grounding errors\n{listed}\n\n"

    statuses = []
    for event in events:
        if event.kind == "skill_status":
            extra = {
                k: v for k, v in event.payload.items() if k not in ("skill", "status")
            }
            suffix = f" ({_format_items(extra)})" if extra else ""
            statuses.append(f"- {event.payload['skill']}: {event.payload['status']}{suffix}")

    logs = filter_logs(
        [
            f"[{event.source}] " + str(event.payload.get("text", ""))
            for event in events
            if event.kind == "log"
        ],
        rules,
    )
    params = [
        f"- {_format_items(event.payload)}" for event in events if event.kind == "param"
    ]
    other = [
        f"- {event.ts:.2f} {event.source} {event.kind}: {_format_items(event.payload)}"
        for event in events
        if event.kind in ("detection", "dialogue")
    ]
    return load_prompt_template("end_to_end").format(
        instruction=plan.instruction,
        plan_steps="\n".join(steps) or "(no steps)",
        grounding_section=grounding,
        skill_statuses="\n".join(statuses) or "(none)",
        logs="\n".join(logs) or "(none)",
        params="\n".join(params) or "(none)",
        other_events="\n".join(other) or "(none)",
        situation_catalogue=situation_catalogue(),
        query=query.text,
    )


def explain_end_to_end(
    query: Query,
    trace: Trace,
    reasoner: TextReasoner,
    registry: ExplainerRegistry,
) -> Explanation:
    """Single reasoner call over one prompt holding all recorded information."""
    start = time.perf_counter()
    prompt = build_end_to_end_prompt(query, trace, registry)
    response = reasoner.complete_text(
        system_prompt="You explain a robot's behaviour from its full recording.",
        user_prompt=prompt,
    )
    elapsed = time.perf_counter() - start
    return Explanation(
        text=response.text,
        produced_by="end_to_end",
        reasoner_calls=1,
        wall_time=elapsed + response.latency,
    )


def explain_all_components(
    query: Query,
    trace: Trace,
    registry: ExplainerRegistry,
    reasoner: TextReasoner,
) -> Explanation:
    """Run every component explainer, then merge with one aggregation call.

    Explainers run concurrently but are merged in registry order, so the
    output is deterministic. An explainer failure degrades to a note in the
    aggregation input rather than aborting the baseline.
    """
    start = time.perf_counter()
    store = observe(trace)
    context = build_context(query, store)
    ids = registry.ids()

    def run_one(explainer_id: str) -> Explanation:
        explainer = registry.explainers[explainer_id]
        events = store.view(explainer.subscribed_sources, window=context.window)
        counter = _CountingReasoner(reasoner)
        try:
            return explainer.explain_fn(query, context, events, counter)
        except Exception as exc:  # degraded, never fatal for the sweep
            return Explanation(
                text=f"[{explainer_id} explainer produced no answer: {exc}]",
                produced_by=explainer_id,
                reasoner_calls=counter.calls,
            )

    with ThreadPoolExecutor(max_workers=len(ids)) as pool:
        explanations = list(pool.map(run_one, ids))

    merged = aggregate(explanations, query, reasoner)
    elapsed = time.perf_counter() - start
    # merged.wall_time already sums the per-explainer virtual latencies
    return Explanation(
        text=merged.text,
        produced_by=merged.produced_by,
        reasoner_calls=merged.reasoner_calls,
        wall_time=elapsed + merged.wall_time,
    )
