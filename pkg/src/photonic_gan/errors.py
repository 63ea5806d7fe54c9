"""Exception hierarchy shared by every module.

The CLI maps each class onto its own exit code, so new failure modes should
subclass one of these rather than ``Exception`` directly.
"""


class PhotonicGanError(Exception):
    exit_code = 1


class ModelParseError(PhotonicGanError):
    """Model or config file is missing, unreadable, or structurally malformed."""

    exit_code = 3


class ModelValidationError(PhotonicGanError):
    """A layer carries an illegal hyperparameter or an incompatible shape."""

    exit_code = 4

    def __init__(self, message, layer_index=None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


class ShapeError(ModelValidationError):
    pass


class ConstraintError(PhotonicGanError):
    """A physical limit is exceeded (wavelengths per waveguide, power budget)."""

    exit_code = 5


class MappingError(PhotonicGanError):
    exit_code = 6
