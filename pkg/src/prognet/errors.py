"""Exception hierarchy shared across the toolkit."""


class PrognetError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PrognetError):
    """Model/weight structure is inconsistent (shape, missing/extra tensor)."""


class QuantizationError(PrognetError):
    """Invalid quantization request (bad bit width, empty tensor)."""


class ScheduleError(PrognetError):
    """Bit schedule is malformed for the requested code width."""


class BundleError(PrognetError):
    """Bundle serialization or deserialization failed."""


class ChecksumError(BundleError):
    """Stage blob bytes do not match the manifest checksum."""


class TransportError(PrognetError):
    """Network-level failure talking to a bundle server."""


class SessionStateError(PrognetError):
    """Illegal session operation (out-of-order stage, bad transition)."""


class InferenceError(PrognetError):
    """Forward pass failed (shape mismatch, non-finite output)."""


class TrainingError(PrognetError):
    """Demo trainer could not reach its accuracy target."""
