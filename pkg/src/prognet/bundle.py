"""On-disk / on-wire progressive bundle.

A bundle is a JSON manifest plus one bit-packed binary blob per stage.
Stage m holds, for every tensor in canonical model order, that tensor's
stage-m fragment plane packed MSB-first with per-tensor byte alignment.
Applying the stage blobs in order rebuilds the k-bit codes exactly; the
manifest alone carries everything needed to reconstruct (model, ranges,
schedule, offsets, checksums).
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bitcodec import BitSchedule, FragmentPlane, accumulate_codes, divide_codes
from .core import ModelSpec, Tensor, WeightSet, validate_model
from .errors import BundleError, ChecksumError, SessionStateError
from .kernels import pack_bits, unpack_bits
from .quantize import QuantizedTensor, dequantize, quantize

FORMAT_VERSION = 1

MANIFEST_NAME = "manifest.json"


def stage_file_name(stage: int) -> str:
    return f"stage-{stage:02d}.bin"


def plane_byte_length(numel: int, width: int) -> int:
    return (numel * width + 7) // 8


@dataclass(frozen=True)
class TensorRecord:
    name: str
    shape: tuple[int, ...]
    min_val: np.float32
    max_val: np.float32

    @property
    def numel(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class StageRecord:
    stage: int
    byte_length: int
    crc32: int
    offsets: dict[str, int]


@dataclass(frozen=True)
class BundleManifest:
    model: ModelSpec
    bits: int
    schedule: BitSchedule
    tensors: tuple[TensorRecord, ...]
    stages: tuple[StageRecord, ...]
    format_version: int = FORMAT_VERSION

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def tensor_order(self) -> list[str]:
        return [t.name for t in self.tensors]

    def total_payload_bytes(self) -> int:
        return sum(s.byte_length for s in self.stages)

    def to_json(self) -> str:
        # float ranges as decimal strings: full round-trip precision,
        # immune to JSON float formatting drift
        doc = {
            "format_version": self.format_version,
            "model": self.model.to_dict(),
            "k": self.bits,
            "schedule": list(self.schedule.positions),
            "tensors": [
                {
                    "name": t.name,
                    "shape": list(t.shape),
                    "min_val": repr(float(t.min_val)),
                    "max_val": repr(float(t.max_val)),
                }
                for t in self.tensors
            ],
            "stages": [
                {
                    "stage": s.stage,
                    "byte_length": s.byte_length,
                    "crc32": s.crc32,
                    "offsets": dict(s.offsets),
                }
                for s in self.stages
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BundleManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BundleError(f"manifest is not valid JSON: {exc}") from exc
        if doc.get("format_version") != FORMAT_VERSION:
            raise BundleError(
                f"unsupported format_version {doc.get('format_version')!r}")
        bits = int(doc["k"])
        schedule = BitSchedule(bits, tuple(doc["schedule"]))
        tensors = tuple(
            TensorRecord(
                name=entry["name"],
                shape=tuple(int(d) for d in entry["shape"]),
                min_val=np.float32(float(entry["min_val"])),
                max_val=np.float32(float(entry["max_val"])),
            )
            for entry in doc["tensors"]
        )
        stages = tuple(
            StageRecord(
                stage=int(entry["stage"]),
                byte_length=int(entry["byte_length"]),
                crc32=int(entry["crc32"]),
                offsets={k: int(v) for k, v in entry["offsets"].items()},
            )
            for entry in doc["stages"]
        )
        return cls(model=ModelSpec.from_dict(doc["model"]), bits=bits,
                   schedule=schedule, tensors=tensors, stages=stages)


@dataclass(frozen=True)
class Bundle:
    manifest: BundleManifest
    blobs: tuple[bytes, ...]

    def singleton_payload(self) -> bytes:
        """All stage blobs concatenated in order (the baseline download)."""
        return b"".join(self.blobs)


def encode_bundle(spec: ModelSpec, weights: WeightSet, bits: int,
                  schedule: BitSchedule | None = None) -> Bundle:
    """Quantize every tensor and pack one blob per schedule stage."""
    validate_model(spec, weights)
    if schedule is None:
        schedule = BitSchedule.default(bits)
    if schedule.bits != bits:
        raise BundleError(f"schedule is for {schedule.bits}-bit codes, "
                          f"requested {bits}")
    order = list(spec.parameter_shapes())
    quantized = {name: quantize(weights[name], bits) for name in order}

    tensors = tuple(
        TensorRecord(name=name, shape=quantized[name].shape,
                     min_val=quantized[name].min_val,
                     max_val=quantized[name].max_val)
        for name in order
    )

    blobs = []
    stages = []
    for m in range(1, schedule.n_stages + 1):
        width = schedule.width(m)
        parts = []
        offsets = {}
        offset = 0
        for name in order:
            q = quantized[name]
            plane = divide_codes(q.codes, schedule, m)
            packed = pack_bits(plane, width)
            offsets[name] = offset
            offset += len(packed)
            parts.append(packed.tobytes())
        blob = b"".join(parts)
        blobs.append(blob)
        stages.append(StageRecord(stage=m, byte_length=len(blob),
                                  crc32=zlib.crc32(blob) & 0xFFFFFFFF,
                                  offsets=offsets))

    manifest = BundleManifest(model=spec, bits=bits, schedule=schedule,
                              tensors=tensors, stages=tuple(stages))
    return Bundle(manifest=manifest, blobs=tuple(blobs))


def decode_stage(manifest: BundleManifest, stage: int,
                 blob: bytes) -> dict[str, FragmentPlane]:
    """Verify and unpack one stage blob into per-tensor fragment planes."""
    if not 1 <= stage <= manifest.n_stages:
        raise BundleError(f"unknown stage {stage} "
                          f"(bundle has {manifest.n_stages})")
    record = manifest.stages[stage - 1]
    if len(blob) != record.byte_length:
        raise BundleError(f"stage {stage} blob is {len(blob)} bytes, "
                          f"manifest says {record.byte_length}")
    crc = zlib.crc32(blob) & 0xFFFFFFFF
    if crc != record.crc32:
        raise ChecksumError(f"stage {stage} checksum mismatch "
                            f"(got {crc:#010x}, want {record.crc32:#010x})")
    width = manifest.schedule.width(stage)
    planes = {}
    buf = np.frombuffer(blob, dtype=np.uint8)
    for t in manifest.tensors:
        off = record.offsets[t.name]
        seg = buf[off:off + plane_byte_length(t.numel, width)]
        values = unpack_bits(seg, t.numel, width)
        planes[t.name] = FragmentPlane(stage=stage, width=width, values=values)
    return planes


class ReconstructionState:
    """Accumulates stage planes into k-bit codes; strictly in stage order.

    Single-writer: apply_stage is called by one thread. materialize works
    on an immutable snapshot of the code arrays (apply_stage rebinds fresh
    arrays rather than mutating), so a concurrent reader can dequantize
    while the next stage is being applied.
    """

    def __init__(self, manifest: BundleManifest):
        self.manifest = manifest
        self._codes = {t.name: np.zeros(t.numel, dtype=np.uint32)
                       for t in manifest.tensors}
        self._stages_applied = 0

    @property
    def stages_applied(self) -> int:
        return self._stages_applied

    @property
    def received_bits(self) -> int:
        if self._stages_applied == 0:
            return 0
        return self.manifest.schedule.prefix_bits(self._stages_applied)

    def apply_stage(self, stage: int, planes: dict[str, FragmentPlane]) -> None:
        if stage != self._stages_applied + 1:
            raise SessionStateError(
                f"stage {stage} applied out of order "
                f"(expected {self._stages_applied + 1})")
        sched = self.manifest.schedule
        new_codes = {}
        for t in self.manifest.tensors:
            if t.name not in planes:
                raise BundleError(f"stage {stage} is missing plane for "
                                  f"{t.name!r}")
            new_codes[t.name] = accumulate_codes(self._codes[t.name],
                                                 planes[t.name], sched, stage)
        self._codes = new_codes
        self._stages_applied = stage

    def codes_snapshot(self) -> dict[str, np.ndarray]:
        return dict(self._codes)

    def materialize(self) -> WeightSet:
        """Dequantize the accumulated codes at the current bit depth."""
        if self._stages_applied == 0:
            raise SessionStateError("no stages applied yet")
        received = self.received_bits
        codes = self.codes_snapshot()
        tensors = {}
        for t in self.manifest.tensors:
            q = QuantizedTensor(t.shape, self.manifest.bits, t.min_val,
                                t.max_val, codes[t.name])
            tensors[t.name] = dequantize(q, received)
        return WeightSet(tensors)


# ---------------------------------------------------------------------------
# Directory I/O
# ---------------------------------------------------------------------------

def write_bundle(bundle: Bundle, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / MANIFEST_NAME).write_text(bundle.manifest.to_json())
    for record, blob in zip(bundle.manifest.stages, bundle.blobs):
        (out_dir / stage_file_name(record.stage)).write_bytes(blob)
    return out_dir


def read_manifest(bundle_dir) -> BundleManifest:
    path = Path(bundle_dir) / MANIFEST_NAME
    if not path.is_file():
        raise BundleError(f"no {MANIFEST_NAME} in {bundle_dir}")
    return BundleManifest.from_json(path.read_text())


def read_stage_blob(bundle_dir, stage: int) -> bytes:
    path = Path(bundle_dir) / stage_file_name(stage)
    if not path.is_file():
        raise BundleError(f"missing stage file {path}")
    return path.read_bytes()


def read_bundle(bundle_dir) -> Bundle:
    manifest = read_manifest(bundle_dir)
    blobs = tuple(read_stage_blob(bundle_dir, s.stage)
                  for s in manifest.stages)
    return Bundle(manifest=manifest, blobs=blobs)


def reconstruct_full(bundle: Bundle) -> WeightSet:
    """Apply every stage and materialize at full precision."""
    state = ReconstructionState(bundle.manifest)
    for record, blob in zip(bundle.manifest.stages, bundle.blobs):
        state.apply_stage(record.stage,
                          decode_stage(bundle.manifest, record.stage, blob))
    return state.materialize()
