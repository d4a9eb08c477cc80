import pandas as pd
import pytest
from docx import Document

from src.corpus import run_entry
from src.reporting.excel_gen import SUMMARY_COLUMNS, generate_excel_report, summarize_result
from src.reporting.word_gen import WordReportBuilder
from src.simulator import SimulationLimits, attribute, execute
from src.visualization import Visualizer


@pytest.fixture
def viz():
    return Visualizer()


@pytest.fixture
def traffic_attributed(traffic_light):
    trace = execute(traffic_light.model, limits=SimulationLimits(horizon=330))
    return attribute(trace, traffic_light.events)


class TestVisualizer:
    def test_timeline_bars_and_markers(self, viz, traffic_attributed):
        fig, ax = viz.new_figure()
        viz.plot_event_timeline(traffic_attributed, ax, title='traffic')
        # Six timed occurrences as bars, six calc instants as markers
        assert len(ax.collections) == 6
        assert len(ax.lines) == 6
        assert [label.get_text() for label in ax.get_yticklabels()] == [e.name for e in traffic_attributed.events]
        viz.close(fig)

    def test_empty_timeline(self, viz, build):
        doc = build("model m { machine A { create; } }")
        fig, ax = viz.new_figure()
        viz.plot_event_timeline(attribute(execute(doc.model), doc.events), ax)
        assert ax.texts[0].get_text() == 'No event occurrences'
        viz.close(fig)

    def test_counts_and_png_stream(self, viz, traffic_attributed):
        fig, ax = viz.new_figure()
        viz.plot_activation_counts(traffic_attributed, ax)
        assert [p.get_height() for p in ax.patches] == [2, 2, 2, 2, 2, 2]
        stream = viz.get_image_stream(fig)
        viz.close(fig)
        assert stream.read(4) == b'\x89PNG'


class TestReports:
    @pytest.fixture
    def results(self, manifest):
        return [run_entry(manifest[name]) for name in ('ten_integers', 'acceptor')]

    def test_summary_row(self, results):
        row = summarize_result(results[1])
        assert list(row) == SUMMARY_COLUMNS
        assert row['entry'] == 'acceptor'
        assert row['verdict'] == 'accepted'
        assert row['conforms'] is True

    def test_excel(self, results, tmp_path):
        path = tmp_path / 'summary.xlsx'
        df = generate_excel_report(results, str(path))
        assert list(df['entry']) == ['ten_integers', 'acceptor']
        again = pd.read_excel(path)
        assert list(again.columns) == SUMMARY_COLUMNS
        assert list(again['events']) == [2, 5]

    def test_word(self, results, tmp_path):
        builder = WordReportBuilder(str(tmp_path / 'missing_template.docx'))
        for result in results:
            builder.add_entry_analysis(result)
        builder.add_summary_table(pd.DataFrame([summarize_result(r) for r in results]))
        path = tmp_path / 'report.docx'
        builder.save(str(path))

        doc = Document(str(path))
        headings = [p.text for p in doc.paragraphs if p.style.name.startswith('Heading')]
        assert 'Entry: acceptor' in headings
        table = doc.tables[0]
        assert [c.text for c in table.rows[0].cells] == ['entry', 'valid', 'acyclic', 'conforms', 'instances',
                                                         'occurrences']
        assert [c.text for c in table.rows[2].cells][:4] == ['acceptor', 'yes', 'yes', 'yes']
