import logging
import os

import numpy as np
from docx import Document
from docx.shared import Inches

from src.things import render

logger = logging.getLogger(__name__)


def _cell(value):
    if value is None:
        return '-'
    if isinstance(value, (bool, np.bool_)):
        return 'yes' if value else 'no'
    return str(value)


class WordReportBuilder:
    def __init__(self, template_path=None):
        if template_path and os.path.exists(template_path):
            self.doc = Document(template_path)
        else:
            if template_path:
                logger.info("Template not found: %s. Creating new document.", template_path)
            self.doc = Document()
            self.doc.add_heading('Thinging Machine Corpus Report', 0)

    def add_header(self, text, level=1):
        self.doc.add_heading(text, level)

    def add_summary_table(self, df):
        """Adds the corpus summary table to the document."""
        self.doc.add_heading('Summary Table', level=2)
        cols_to_show = [c for c in ['entry', 'valid', 'acyclic', 'conforms', 'instances', 'occurrences']
                        if c in df.columns]

        t = self.doc.add_table(rows=1, cols=len(cols_to_show))
        t.style = 'Table Grid'
        hdr_cells = t.rows[0].cells
        for i, col in enumerate(cols_to_show):
            hdr_cells[i].text = str(col)

        for _, row in df.iterrows():
            row_cells = t.add_row().cells
            for i, col in enumerate(cols_to_show):
                value = row[col]
                row_cells[i].text = _cell(None if value != value else value)

    def add_entry_analysis(self, result, timeline_stream=None, counts_stream=None):
        """
        Adds the section for one corpus entry: validation findings, cycles,
        outputs, the event timeline and occurrence counts.
        """
        entry = result.entry
        model = result.document.model
        self.doc.add_heading(f"Entry: {entry.name}", level=2)
        if entry.figures:
            self.doc.add_paragraph(f"Figures: {', '.join(entry.figures)}")

        lines = [f"Machines: {len(model.machines)}",
                 f"Stages: {len(model.stages)}",
                 f"Events: {len(result.document.events)}"]
        lines.extend(result.validation.lines() or ['Structure: legal'])
        lines.extend(result.finiteness.describe(model))
        if result.trace is not None:
            for path, things in result.trace.outputs.items():
                lines.append(f"{path}: {', '.join(render(t) for t in things)}")
            if result.trace.verdict is not None:
                lines.append(f"verdict: {result.trace.verdict}")
        if result.conformance is not None:
            lines.append(result.conformance.message)
        self.doc.add_paragraph('\n'.join(lines))

        if timeline_stream:
            self.doc.add_heading('Event Timeline', level=3)
            self.doc.add_picture(timeline_stream, width=Inches(6.0))
            self.doc.add_paragraph()
        if counts_stream:
            self.doc.add_picture(counts_stream, width=Inches(4.0))

    def save(self, filepath):
        self.doc.save(filepath)
