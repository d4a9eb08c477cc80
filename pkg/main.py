import argparse
import logging
import os
import sys

import pandas as pd

from src.config import (
    COLOR_ENV, DEFAULT_MAX_CLOCK, DEFAULT_MAX_INSTANCES, EXIT_FAILURE, EXIT_LIMIT, EXIT_OK,
    EXIT_PARSE, EXIT_USAGE, EXPORT_VIEWS, OUTPUT_DIR, TRACE_FORMATS,
)
from src.corpus import corpus_dir, corpus_manifest, run_entry
from src.dsl import ParseError, print_model
from src.expressions import EvaluationError
from src.export import export_dot_behavior, export_dot_events, export_dot_static, export_trace
from src.io_handler import ModelLoader
from src.model import ModelError
from src.reporting.excel_gen import generate_excel_report, summarize_result
from src.reporting.word_gen import WordReportBuilder
from src.simulator import SimulationLimitExceeded, SimulationLimits, attribute, conformance, execute
from src.translators import InvalidSpec, fsm_to_tm
from src.validator import check_finiteness, repeat_marks, validate_structure
from src.visualization import Visualizer

logger = logging.getLogger('thingc')

COLORS = {'error': '\033[31m', 'warning': '\033[33m'}


class UsageError(Exception):
    pass


def _diagnostic(severity, message):
    prefix = f"{severity}:"
    if os.environ.get(COLOR_ENV) == '1':
        prefix = f"{COLORS.get(severity, '')}{prefix}\033[0m"
    print(f"{prefix} {message}", file=sys.stderr)


def _load(path):
    try:
        document = ModelLoader.load_document(path)
    except (IOError, ValueError) as e:
        if isinstance(e, (ParseError, InvalidSpec)):
            raise
        raise UsageError(str(e))
    for warning in document.warnings:
        _diagnostic('warning', str(warning))
    return document


def _write(path, data):
    try:
        ModelLoader.write_bytes(path, data)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror or e}")


def _inputs(flags):
    inputs = {}
    for text in flags or []:
        try:
            name, values = ModelLoader.parse_input_flag(text)
        except ValueError as e:
            raise UsageError(f"--input {text}: {e}")
        inputs[name] = values
    return inputs


def _limits(args):
    try:
        return SimulationLimits(args.limit_instances, args.limit_clock, args.horizon)
    except ValueError as e:
        raise UsageError(str(e))


def _simulate(document, args):
    """Validates, runs and attributes a document. Returns (code, trace, attributed, report)."""
    validation = validate_structure(document.model)
    if not validation.ok:
        for line in validation.lines():
            _diagnostic('error', line)
        return EXIT_FAILURE, None, None, None
    try:
        trace = execute(document.model, _inputs(args.input), _limits(args))
    except ModelError as e:
        raise UsageError(str(e))
    attributed = attribute(trace, document.events)
    report = conformance(attributed, document.behavior) if document.behavior is not None else None
    return EXIT_OK, trace, attributed, report


# ---------------------------------------------------------
# Commands
# ---------------------------------------------------------
def cmd_parse(args):
    document = _load(args.model)
    print(print_model(document), end='')
    return EXIT_OK


def cmd_validate(args):
    document = _load(args.model)
    model = document.model
    try:
        marked = repeat_marks(model, args.repeat or [])
    except ValueError as e:
        raise UsageError(str(e))
    validation = validate_structure(model)
    finiteness = check_finiteness(model, marked)
    print(f"valid: {'true' if validation.ok else 'false'}")
    for line in validation.lines():
        print(line)
    for line in finiteness.describe(model):
        print(line)
    if not validation.ok:
        return EXIT_FAILURE
    if args.require_acyclic and not finiteness.acyclic:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_simulate(args):
    document = _load(args.model)
    code, trace, attributed, report = _simulate(document, args)
    if code != EXIT_OK:
        return code
    print(export_trace(trace, args.trace_format), end='')
    if attributed.unattributed:
        logger.debug("%d instance(s) outside every event", len(attributed.unattributed))
    if report is not None and not report.ok:
        _diagnostic('error', f"behavior: {report.message}")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_export(args):
    document = _load(args.model)
    if args.view == 'timeline':
        code, trace, attributed, _ = _simulate(document, args)
        if code != EXIT_OK:
            return code
        output = args.output or os.path.join(OUTPUT_DIR, f"{document.model.name}_timeline.png")
        viz = Visualizer()
        fig, ax = viz.new_figure()
        viz.plot_event_timeline(attributed, ax, title=f"{document.model.name} - Events")
        image = viz.get_image_stream(fig).getvalue()
        viz.close(fig)
        _write(output, image)
        print(output)
        return EXIT_OK

    if args.view == 'static':
        text = export_dot_static(document.model)
    elif args.view == 'events':
        text = export_dot_events(document.model, document.events)
    else:
        if document.behavior is None:
            raise UsageError(f"{args.model} declares no behavior")
        text = export_dot_behavior(document.behavior, document.model.name)
    if args.output:
        _write(args.output, text.encode('utf-8'))
    else:
        print(text, end='')
    return EXIT_OK


def cmd_translate(args):
    try:
        spec = ModelLoader.load_fsm(args.fsm)
    except IOError as e:
        raise UsageError(str(e))
    print(print_model(fsm_to_tm(spec)), end='')
    return EXIT_OK


def generate_corpus_report(directory, output_dir):
    """Runs the whole corpus and writes summary.xlsx and Corpus_Report.docx."""
    os.makedirs(output_dir, exist_ok=True)
    entries = corpus_manifest(directory)
    logger.info("Found %d corpus entries in '%s'.", len(entries), directory)

    word_builder = WordReportBuilder(os.path.join('templates', 'report_template.docx'))
    word_builder.add_header('Corpus Entries')
    viz = Visualizer()
    results_list = []
    for entry in entries:
        logger.info("Processing %s...", entry.name)
        result = run_entry(entry)
        results_list.append(result)
        timeline = counts = None
        if result.attributed is not None:
            fig, ax = viz.new_figure()
            viz.plot_event_timeline(result.attributed, ax, title=f"{entry.name} - Events")
            timeline = viz.get_image_stream(fig)
            viz.close(fig)
            fig, ax = viz.new_figure()
            viz.plot_activation_counts(result.attributed, ax, title=f"{entry.name} - Occurrences")
            counts = viz.get_image_stream(fig)
            viz.close(fig)
        word_builder.add_entry_analysis(result, timeline, counts)

    excel_path = os.path.join(output_dir, 'summary.xlsx')
    word_path = os.path.join(output_dir, 'Corpus_Report.docx')
    generate_excel_report(results_list, excel_path)
    word_builder.add_summary_table(pd.DataFrame([summarize_result(r) for r in results_list]))
    word_builder.save(word_path)
    logger.info("Reports generated in '%s'.", os.path.abspath(output_dir))
    return results_list, [excel_path, word_path]


def cmd_report(args):
    results, paths = generate_corpus_report(args.corpus or corpus_dir(), args.output or OUTPUT_DIR)
    for path in paths:
        print(path)
    failed = [r.entry.name for r in results
              if not r.validation.ok or (r.conformance is not None and not r.conformance.ok)]
    if failed:
        _diagnostic('error', f"entries failing validation or conformance: {', '.join(failed)}")
        return EXIT_FAILURE
    return EXIT_OK


# ---------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------
def _add_simulation_flags(parser):
    parser.add_argument('--input', action='append', metavar='NAME=[...]',
                        help="Bind an input by name or stage path; overrides the file's declaration")
    parser.add_argument('--limit-instances', type=int, default=DEFAULT_MAX_INSTANCES)
    parser.add_argument('--limit-clock', type=int, default=DEFAULT_MAX_CLOCK)
    parser.add_argument('--horizon', type=int, default=None,
                        help="Stop, without error, before work scheduled at or after this time")


def build_parser():
    parser = argparse.ArgumentParser(prog='thingc', description="Thinging machine modeling toolkit")
    parser.add_argument('-v', '--verbose', action='store_true', help="Debug logging on stderr")
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('parse', help="Print the canonical form of a model")
    p.add_argument('model')
    p.set_defaults(func=cmd_parse)

    p = commands.add_parser('validate', help="Structural legality and finiteness")
    p.add_argument('model')
    p.add_argument('--repeat', action='append', metavar='SOURCE->TARGET',
                   help="Repeat-mark a flow or trigger, excluding it from cycle detection")
    p.add_argument('--require-acyclic', action='store_true', help="Fail when a cycle remains")
    p.set_defaults(func=cmd_validate)

    p = commands.add_parser('simulate', help="Run a model and print its trace")
    p.add_argument('model')
    _add_simulation_flags(p)
    p.add_argument('--trace-format', choices=TRACE_FORMATS, default='jsonl')
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser('export', help="Render a model as DOT or an event timeline")
    p.add_argument('model')
    p.add_argument('--view', choices=EXPORT_VIEWS, default='static')
    p.add_argument('--output', help="Output file (stdout for DOT views when omitted)")
    _add_simulation_flags(p)
    p.set_defaults(func=cmd_export)

    p = commands.add_parser('translate', help="Translate an FSM specification to a model")
    p.add_argument('--fsm', required=True)
    p.set_defaults(func=cmd_translate)

    p = commands.add_parser('report', help="Run the corpus and write Excel/Word reports")
    p.add_argument('--corpus', help="Corpus directory (default: bundled corpus)")
    p.add_argument('--output', help=f"Output directory (default: {OUTPUT_DIR})")
    p.set_defaults(func=cmd_report)
    return parser


def run(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)
    try:
        return args.func(args)
    except ParseError as e:
        for diagnostic in e.diagnostics:
            _diagnostic(diagnostic.severity, str(diagnostic))
        return EXIT_PARSE
    except InvalidSpec as e:
        _diagnostic('error', str(e))
        return EXIT_PARSE
    except SimulationLimitExceeded as e:
        _diagnostic('error', f"limit {e.limit} exceeded: {e}")
        print(export_trace(e.trace, getattr(args, 'trace_format', 'jsonl')), end='')
        return EXIT_LIMIT
    except EvaluationError as e:
        _diagnostic('error', str(e))
        return EXIT_FAILURE
    except UsageError as e:
        _diagnostic('error', str(e))
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
