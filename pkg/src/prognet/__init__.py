"""prognet: progressive transmission and streaming inference of
quantized neural-network weights.

A weight set is quantized to k-bit codes, split into MSB-first bit
planes per a stage schedule, packed into a bundle of stage blobs, and
served over a throttled HTTP link. The client reconstructs and runs
approximate intermediate models while later stages are still downloading.
"""

from .bitcodec import BitSchedule, FragmentPlane
from .core import (Conv2D, Dense, Flatten, MaxPool2D, ModelSpec, Tensor,
                   WeightSet, read_portable, validate_model, write_portable)
from .errors import (BundleError, ChecksumError, InferenceError, PrognetError,
                     QuantizationError, ScheduleError, SessionStateError,
                     TrainingError, TransportError, ValidationError)
from .quantize import QuantizedTensor, dequantize, quantize

__version__ = "0.1.0"
