"""Exception hierarchy shared by the whole engine.

The CLI maps these onto exit codes: ParseError and friends are data
errors (exit 3), NumericError is a runtime/numeric failure (exit 4).
"""


class ImeError(Exception):
    pass


class ParseError(ImeError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        super().__init__(f"{loc}{message}")


class AnnotationError(ImeError):
    """A character that cannot be annotated with pinyin."""

    def __init__(self, char, offset):
        self.char = char
        self.offset = offset
        super().__init__(f"no pinyin for character {char!r} at offset {offset}")


class SegmentationError(ImeError):
    """Raw pinyin letters that cannot be split into legal syllables."""

    def __init__(self, text, offset):
        self.text = text
        self.offset = offset
        super().__init__(f"cannot segment {text!r}: no legal syllable at offset {offset}")


class ContractError(ImeError):
    """A caller violated a documented precondition."""


class CheckpointError(ImeError):
    """Unreadable, truncated or incompatible checkpoint file."""


class NumericError(ImeError):
    """Non-finite loss or gradient; training cannot continue."""
