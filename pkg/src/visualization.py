import io

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from src.config import TIMELINE_DPI, TIMELINE_FIGSIZE


class Visualizer:
    def __init__(self, figsize=TIMELINE_FIGSIZE, dpi=TIMELINE_DPI):
        self.figsize = figsize
        self.dpi = dpi

    def new_figure(self):
        fig, ax = plt.subplots(figsize=self.figsize)
        return fig, ax

    def plot_event_timeline(self, attributed, ax, title="Event Timeline"):
        """
        Gantt-style view of event occurrences over the clock: one row per
        declared event, a bar per occurrence. Timed events span their
        duration; instantaneous ones are drawn as markers.
        """
        names = [e.name for e in attributed.events]
        if not names or not attributed.occurrences:
            ax.text(0.5, 0.5, "No event occurrences", ha='center', va='center')
            ax.set_title(title)
            return

        rows = {name: i for i, name in enumerate(names)}
        colors = plt.cm.tab10(np.linspace(0, 1, max(len(names), 2)))
        for occurrence in attributed.occurrences:
            row = rows[occurrence.event]
            if occurrence.duration > 0:
                ax.broken_barh([(occurrence.start, occurrence.duration)], (row - 0.4, 0.8),
                               facecolors=colors[row % len(colors)], alpha=0.8)
            else:
                # instantaneous: marked where the occurrence completes
                ax.plot(occurrence.end, row, 'o', color=colors[row % len(colors)], markersize=4)

        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        ax.set_xlabel('Time')
        ax.set_title(title)
        ax.grid(True, axis='x', alpha=0.3)

    def plot_activation_counts(self, attributed, ax, title="Occurrences per Event"):
        counts = attributed.counts()
        if not counts:
            ax.text(0.5, 0.5, "No events declared", ha='center', va='center')
            return
        ax.bar(list(counts), list(counts.values()), color='steelblue')
        ax.set_ylabel('Occurrences')
        ax.set_title(title)
        ax.tick_params(axis='x', rotation=45)

    def get_image_stream(self, fig, format='png', dpi=None):
        """Returns the figure as a BytesIO stream."""
        img_stream = io.BytesIO()
        fig.savefig(img_stream, format=format, dpi=dpi or self.dpi, bbox_inches='tight')
        img_stream.seek(0)
        return img_stream

    def close(self, fig):
        plt.close(fig)
