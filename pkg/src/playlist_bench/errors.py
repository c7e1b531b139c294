"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures without inspecting types: 2 for data/domain problems, 3 for
numerical failures.
"""


class PlaylistBenchError(Exception):
    exit_code = 2


class RejectedSongError(PlaylistBenchError):
    """A song whose artist or title is empty after canonicalization."""


class ParseError(PlaylistBenchError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyResultError(PlaylistBenchError):
    """Filtering removed every playlist."""


class SplitError(PlaylistBenchError):
    pass


class DomainError(PlaylistBenchError):
    """Unknown song ids, vocabulary mismatches, invalid arguments."""


class FitError(PlaylistBenchError):
    pass


class GenerationError(PlaylistBenchError):
    pass


class NumericError(PlaylistBenchError):
    exit_code = 3
