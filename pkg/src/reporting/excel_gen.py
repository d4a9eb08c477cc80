import pandas as pd

SUMMARY_COLUMNS = ['entry', 'valid', 'acyclic', 'conforms', 'instances', 'events', 'occurrences',
                   'verdict', 'horizon_reached']


def summarize_result(result):
    """Flattens one corpus EntryResult into a summary row."""
    row = {
        'entry': result.entry.name,
        'valid': result.validation.ok,
        'acyclic': result.finiteness.acyclic,
        'conforms': None,
        'instances': None,
        'events': len(result.document.events),
        'occurrences': None,
        'verdict': None,
        'horizon_reached': None,
    }
    if result.trace is not None:
        row['instances'] = len(result.trace)
        row['verdict'] = result.trace.verdict
        row['horizon_reached'] = result.trace.horizon_reached
    if result.attributed is not None:
        row['occurrences'] = len(result.attributed.occurrences)
    if result.conformance is not None:
        row['conforms'] = result.conformance.ok
    return row


def generate_excel_report(results_list, output_path):
    """Generates an Excel summary report from a list of corpus results."""
    df = pd.DataFrame([summarize_result(r) for r in results_list], columns=SUMMARY_COLUMNS)
    df.to_excel(output_path, index=False)
    return df
