"""
DOT renderings of static models, event overlays and behavior graphs, and
tabular trace export.

DOT text is written line by line in element insertion order, so the same
model always produces the same bytes.
"""
import io
import json
import logging

import pandas as pd

from src.config import TRACE_FORMATS
from src.dynamics import ForeignRegion
from src.expressions import to_source
from src.things import render

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['seq', 'stage', 'kind', 'direction', 'start', 'end', 'thing', 'cause']


class UnknownFormat(ValueError):
    pass


def _q(text):
    return '"' + str(text).replace('\\', '\\\\').replace('"', '\\"') + '"'


def _trigger_label(model, trigger):
    parts = []
    if trigger.label is not None:
        parts.append(trigger.label)
    if trigger.condition is not None:
        parts.append(f"[{to_source(trigger.condition)}]")
    return ' '.join(parts)


def _machine_lines(model, machine_id, indent):
    machine = model.machines[machine_id]
    pad = '  ' * indent
    lines = [f"{pad}subgraph {_q('cluster_' + machine_id)} {{", f"{pad}  label={_q(machine.name)};"]
    for storage_id in machine.storages:
        lines.append(f"{pad}  {_q(storage_id)} [label={_q(model.storages[storage_id].name)}, shape=cylinder];")
    for stage_id in machine.stages:
        lines.append(f"{pad}  {_q(stage_id)} [label={_q(model.stages[stage_id].kind.value)}, shape=box];")
    for child in machine.children:
        lines.extend(_machine_lines(model, child, indent + 1))
    lines.append(f"{pad}}}")
    return lines


def _static_body(model):
    lines = []
    if not model.machines:
        return lines
    lines.append('  compound=true;')
    lines.append('  node [fontname="Helvetica"];')
    for root in model.roots():
        lines.extend(_machine_lines(model, root, 1))
    for flow in model.flows.values():
        attrs = f" [label={_q(flow.label)}]" if flow.label is not None else ''
        lines.append(f"  {_q(flow.source)} -> {_q(flow.target)}{attrs};")
    for trigger in model.triggers.values():
        label = _trigger_label(model, trigger)
        attrs = f", label={_q(label)}" if label else ''
        lines.append(f"  {_q(trigger.source)} -> {_q(trigger.target)} [style=dashed{attrs}];")
    return lines


def _wrap(name, lines):
    return '\n'.join([f"digraph {_q(name)} {{"] + lines + ['}']) + '\n'


def export_dot_static(model):
    """Machines as nested clusters, flows solid, triggers dashed, storages as cylinders."""
    return _wrap(model.name, _static_body(model))


def export_dot_events(model, events):
    """The static view plus one dashed boundary per event, drawn around copies of its members."""
    lines = _static_body(model)
    for event in events:
        if event.region.model is not model:
            raise ForeignRegion(f"Event '{event.name}' belongs to a different model")
        title = event.name if not event.duration else f"{event.name} ({event.duration})"
        if event.label:
            title = f"{title}: {event.label}"
        lines.append(f"  subgraph {_q('cluster_event_' + event.name)} {{")
        lines.append(f"    label={_q(title)};")
        lines.append('    style=dashed;')
        for element in sorted(event.region.nodes):
            label = model.describe(element) if element in model.storages else model.path(element)
            shape = 'cylinder' if element in model.storages else 'box'
            lines.append(f"    {_q(event.name + '::' + element)} [label={_q(label)}, shape={shape}];")
        lines.append('  }')
    return _wrap(model.name, lines)


def export_dot_behavior(behavior, name='behavior'):
    """One node per event, precedence edges, dotted self-loops for repeats."""
    lines = []
    for event in behavior.events:
        label = event.name if not event.duration else f"{event.name} ({event.duration})"
        lines.append(f"  {_q(event.name)} [label={_q(label)}];")
    for a, b in behavior.edges:
        lines.append(f"  {_q(a)} -> {_q(b)};")
    for event in behavior.events:
        if event.name in behavior.repeats:
            lines.append(f"  {_q(event.name)} -> {_q(event.name)} [style=dotted];")
    return _wrap(name, lines)


# ---------------------------------------------------------
# Traces
# ---------------------------------------------------------
def trace_frame(trace):
    """One row per generic event instance."""
    records = [{
        'seq': i.seq, 'stage': i.path, 'kind': i.kind.value, 'direction': i.direction,
        'start': i.start, 'end': i.end, 'thing': render(i.thing), 'cause': i.cause,
    } for i in trace.instances]
    return pd.DataFrame(records, columns=TRACE_COLUMNS, dtype=object)


def trace_summary(trace):
    return {
        'outputs': {path: [render(t) for t in things] for path, things in trace.outputs.items()},
        'final_storages': {path: render(v) for path, v in trace.final_storages.items()},
        'verdict': trace.verdict,
        'horizon_reached': trace.horizon_reached,
    }


def export_trace(trace, fmt='jsonl'):
    """Serializes a trace as JSON lines or TSV, closed by a summary record."""
    if fmt not in TRACE_FORMATS:
        raise UnknownFormat(f"Unknown trace format '{fmt}'; expected one of {', '.join(TRACE_FORMATS)}")
    frame = trace_frame(trace)
    summary = trace_summary(trace)
    if fmt == 'jsonl':
        body = frame.to_json(orient='records', lines=True) if len(frame) else ''
        lines = [line for line in body.split('\n') if line]
        lines.append(json.dumps({'summary': summary}))
        return '\n'.join(lines) + '\n'
    row = {column: '' for column in TRACE_COLUMNS}
    row['seq'] = 'summary'
    row['thing'] = json.dumps(summary)
    frame = pd.concat([frame, pd.DataFrame([row], columns=TRACE_COLUMNS, dtype=object)], ignore_index=True)
    return frame.to_csv(sep='\t', index=False, na_rep='', lineterminator='\n')


def read_trace(text, fmt='jsonl'):
    """Reads exported instance rows back into a DataFrame (summary excluded)."""
    if fmt not in TRACE_FORMATS:
        raise UnknownFormat(f"Unknown trace format '{fmt}'")
    if fmt == 'jsonl':
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        return pd.DataFrame([r for r in rows if 'summary' not in r], columns=TRACE_COLUMNS)
    frame = pd.read_csv(io.StringIO(text), sep='\t', dtype=str, keep_default_na=False)
    return frame[frame['seq'] != 'summary'].reset_index(drop=True)
