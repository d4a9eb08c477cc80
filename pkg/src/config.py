"""
Constants and configuration settings for the thinging-machine toolkit.
"""

# Stage kinds (the five generic actions)
STAGE_KINDS = ('create', 'process', 'release', 'transfer', 'receive')
STORAGE = 'storage'  # Endpoint marker for storage cells in the legality tables

# Flow legality
# Intra-machine pairs (both endpoints owned by the same machine)
LEGAL_INTRA_FLOWS = frozenset([
    ('transfer', 'receive'),
    ('receive', 'process'),
    ('receive', 'release'),
    ('process', 'release'),
    ('create', 'process'),
    ('create', 'release'),
    ('release', 'transfer'),
    # Storage edges (storage visible from the stage)
    ('create', STORAGE),
    ('process', STORAGE),
    (STORAGE, 'process'),
    (STORAGE, 'release'),
])
# Inter-machine pairs
LEGAL_INTER_FLOWS = frozenset([
    ('transfer', 'transfer'),
])
TRIGGER_TARGETS = frozenset(['create', 'process'])

# Simulation defaults
DEFAULT_MAX_INSTANCES = 10000      # Generic event instances per run
DEFAULT_MAX_CLOCK = 1_000_000      # Abstract time units
MAX_CYCLES = 1000                  # Cap on enumerated elementary cycles

# Paths
CORPUS_DIR = 'corpus'
MANIFEST_FILE = 'manifest.json'
OUTPUT_DIR = 'output'
MODEL_EXTENSIONS = ['.tm']
FSM_EXTENSIONS = ['.fsm']

# CLI
COLOR_ENV = 'THINGC_COLOR'
EXIT_OK = 0
EXIT_FAILURE = 1        # Validation or conformance failure
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_LIMIT = 4
TRACE_FORMATS = ('jsonl', 'tsv')
EXPORT_VIEWS = ('static', 'events', 'behavior', 'timeline')

# Report figures
TIMELINE_FIGSIZE = (8, 3)
TIMELINE_DPI = 150
