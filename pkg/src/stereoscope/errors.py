"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures without a
lookup table: 2 for bad input, 3 for domain violations, 4 for I/O trouble.
"""

from __future__ import annotations


class StereoError(Exception):
    exit_code = 3


class InputError(StereoError, ValueError):
    exit_code = 2


class DomainError(StereoError, ValueError):
    exit_code = 3


class FrameIOError(StereoError, OSError):
    exit_code = 4


# geometry
class NonPositiveDepth(DomainError):
    pass


class NonPositiveDisparity(DomainError):
    pass


class BehindCamera(DomainError):
    pass


class NotConverged(DomainError):
    pass


class FormatMismatch(DomainError):
    pass


# shapes and sizes
class SizeMismatch(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DimMismatch(InputError):
    pass


class OddWidth(InputError):
    pass


class TooSmall(InputError):
    pass


class RangeTooLarge(InputError):
    pass


class EmptyClip(InputError):
    pass


# metrics / analysis
class EmptyMask(DomainError):
    pass


class EmptyOverlap(DomainError):
    pass


class NegativeTerm(DomainError):
    pass


class NoMirror(DomainError):
    pass


class InsufficientValidPixels(DomainError):
    pass


class AllBlack(DomainError):
    pass


class StepOverflow(DomainError):
    pass


# clip storage
class ManifestMismatch(InputError):
    pass


class UnreadableFrame(FrameIOError):
    pass


class MissingFrame(FrameIOError):
    pass
