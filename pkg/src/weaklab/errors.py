"""Exception types shared across the engine modules."""


class WeaklabError(Exception):
    """Base class for all engine failures."""


# Standoff parsing / data-model errors.

class MalformedLine(WeaklabError):
    pass


class OffsetOutOfBounds(WeaklabError):
    pass


class SurfaceMismatch(WeaklabError):
    pass


class DuplicateId(WeaklabError):
    pass


class EmptyCoverage(WeaklabError):
    """A span lies entirely in whitespace and covers no token."""


class OverlapError(WeaklabError):
    pass


# Weak-source errors.

class UnknownLabel(WeaklabError):
    pass


class UnknownSource(WeaklabError):
    pass


class PatternSyntax(WeaklabError):
    """Pattern rejected: syntax error or outside the supported regex subset."""


# Denoiser errors.

class DegenerateLikelihood(WeaklabError):
    """All hidden tags have zero emission probability at some step."""


class NoSources(WeaklabError):
    pass


# Evaluation errors.

class InsufficientDocs(WeaklabError):
    pass


# Model-server bridge errors (subclasses with payloads live in
# weaklab.server.bridge; the base sits here so the CLI can map exit codes
# without importing the server stack).

class BridgeError(WeaklabError):
    pass
