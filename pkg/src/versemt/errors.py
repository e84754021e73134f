"""Exception types shared across the package.

Everything raised on purpose derives from VersemtError so callers (and the
CLI) can separate domain failures from I/O and programming errors.
"""


class VersemtError(Exception):
    """Base class for all domain errors raised by this package."""


class ShapeMismatch(VersemtError):
    """Operands of an array operation have incompatible shapes."""


class MalformedLine(VersemtError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class InvalidEncoding(VersemtError):
    """Input bytes are not valid UTF-8."""


class AlignmentMismatch(VersemtError):
    def __init__(self, chapter, verse=None, detail: str = ""):
        loc = f"chapter {chapter}"
        if verse is not None:
            loc += f", verse {verse}"
        msg = f"alignment mismatch at {loc}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.chapter = chapter
        self.verse = verse


class EmptyCorpus(VersemtError):
    pass


class EmptySequence(VersemtError):
    pass


class EmptySource(VersemtError):
    pass


class EmptyTarget(VersemtError):
    pass


class EmptyInput(VersemtError):
    pass


class EmptyValidationSet(VersemtError):
    pass


class IdOutOfRange(VersemtError):
    pass


class IndexOutOfRange(VersemtError):
    pass


class LengthMismatch(VersemtError):
    pass


class PositiveLogProb(VersemtError):
    pass


class NonDeterministicLoss(VersemtError):
    pass


class CheckpointFormatError(VersemtError):
    pass


class CheckpointVersionError(VersemtError):
    pass
