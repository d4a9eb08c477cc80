import json
import os

from src.config import FSM_EXTENSIONS, MODEL_EXTENSIONS
from src.dsl import parse, parse_literal
from src.translators import fsm_to_tm, parse_fsm


class ModelLoader:
    @staticmethod
    def read_text(filepath):
        """Reads a source file as UTF-8 text."""
        try:
            with open(filepath, encoding='utf-8') as handle:
                return handle.read()
        except (OSError, UnicodeDecodeError) as e:
            raise IOError(f"Error loading file {filepath}: {str(e)}")

    @staticmethod
    def load_document(filepath):
        """
        Loads a model document from a `.tm` file, or translates an `.fsm`
        specification into one.

        Raises ParseError for malformed text and IOError for unreadable files.
        """
        ext = os.path.splitext(filepath)[1].lower()
        source = ModelLoader.read_text(filepath)
        if ext in MODEL_EXTENSIONS:
            return parse(source, filepath)
        if ext in FSM_EXTENSIONS:
            return fsm_to_tm(parse_fsm(source, filepath))
        raise ValueError(f"Unsupported file extension: {ext}")

    @staticmethod
    def load_fsm(filepath):
        return parse_fsm(ModelLoader.read_text(filepath), filepath)

    @staticmethod
    def load_json(filepath):
        try:
            return json.loads(ModelLoader.read_text(filepath))
        except json.JSONDecodeError as e:
            raise IOError(f"Error loading file {filepath}: {str(e)}")

    @staticmethod
    def parse_input_flag(text):
        """
        Splits a `name=[v1, v2, ...]` command-line binding.

        Returns:
            (name, tuple of things)
        """
        name, sep, literal = text.partition('=')
        name = name.strip()
        if not sep or not name:
            raise ValueError(f"Input binding must look like name=[...], got '{text}'")
        value = parse_literal(literal.strip())
        if not isinstance(value, tuple):
            raise ValueError(f"Input '{name}' must be a list literal, got {literal.strip()}")
        return name, value

    @staticmethod
    def write_bytes(filepath, data):
        folder = os.path.dirname(filepath)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(filepath, 'wb') as handle:
            handle.write(data)

