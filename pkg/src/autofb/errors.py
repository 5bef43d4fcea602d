"""Exception hierarchy.

Every error carries a stable ``code`` string so batch drivers can record
failures per image without string matching on messages.
"""


class AutoFBError(Exception):
    code = "AutoFBError"


# geometry
class InsufficientPoints(AutoFBError):
    code = "InsufficientPoints"


class DegenerateConfiguration(AutoFBError):
    code = "DegenerateConfiguration"


# scale recovery
class RulerNotFound(AutoFBError):
    code = "RulerNotFound"


class InconsistentSpacing(AutoFBError):
    code = "InconsistentSpacing"


# biometry
class NoAnatomy(AutoFBError):
    code = "NoAnatomy"


# evaluation
class DegenerateClass(AutoFBError):
    code = "DegenerateClass"


class ShapeMismatch(AutoFBError):
    code = "ShapeMismatch"


class EmptyInput(AutoFBError):
    code = "EmptyInput"


class TooFewSubjects(AutoFBError):
    code = "TooFewSubjects"


# phantom
class SpecOutOfBounds(AutoFBError):
    code = "SpecOutOfBounds"


class UnresolvableTicks(AutoFBError):
    code = "UnresolvableTicks"


# io
class UnreadableFile(AutoFBError):
    code = "UnreadableFile"


class IllegalLabelValue(AutoFBError):
    code = "IllegalLabelValue"

    def __init__(self, value, x, y):
        super().__init__(f"illegal label value {value} at (x={x}, y={y})")
        self.value = value
        self.x = x
        self.y = y


class NoInputs(AutoFBError):
    code = "NoInputs"
