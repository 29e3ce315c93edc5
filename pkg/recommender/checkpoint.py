"""
Binary checkpoint codec.

    magic        b'P2M1'
    header       variant tag (u8), m, d, n, b (u32 each), flags (u8)
    tensors      in ModelParams.as_dict() order, each as rows, cols (u32)
                 followed by rows*cols little-endian float32 values

Flags record the training-time model family so a checkpoint can never be
evaluated as a different one.
"""
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.exceptions import FormatError, StorageError
from .hyperparams import VARIANTS, HyperParams
from .params import ModelParams, param_shapes

logger = logging.getLogger(__name__)

MAGIC = b'P2M1'
HEADER = struct.Struct('<BIIIIB')
SHAPE = struct.Struct('<II')

VARIANT_TAGS = {variant: tag for tag, variant in enumerate(VARIANTS, start=1)}

FLAG_POSITION_EMBEDDINGS = 1
FLAG_PAD_MASK = 2
FLAG_PER_HEAD_SCALE = 4


@dataclass(frozen=True)
class CheckpointHeader:
    variant: str
    m: int
    d: int
    n: int
    b: int
    use_position_embeddings: bool
    use_pad_mask: bool
    attention_scale_mode: str

    @classmethod
    def from_hyperparams(cls, hp, m):
        return cls(
            variant=hp.variant,
            m=m,
            d=hp.d,
            n=hp.n,
            b=hp.b,
            use_position_embeddings=hp.use_position_embeddings,
            use_pad_mask=hp.use_pad_mask,
            attention_scale_mode=hp.attention_scale_mode,
        )

    @property
    def flags(self):
        value = 0
        if self.use_position_embeddings:
            value |= FLAG_POSITION_EMBEDDINGS
        if self.use_pad_mask:
            value |= FLAG_PAD_MASK
        if self.attention_scale_mode == 'per_head':
            value |= FLAG_PER_HEAD_SCALE
        return value

    def model_fields(self):
        """The HyperParams fields a checkpoint pins down."""
        return {
            'variant': self.variant,
            'd': self.d,
            'n': self.n,
            'b': self.b,
            'use_position_embeddings': self.use_position_embeddings,
            'use_pad_mask': self.use_pad_mask,
            'attention_scale_mode': self.attention_scale_mode,
        }


def encode(params, header):
    chunks = [MAGIC, HEADER.pack(VARIANT_TAGS[header.variant], header.m, header.d, header.n, header.b, header.flags)]
    for name, array in params.as_dict().items():
        rows, cols = array.shape
        chunks.append(SHAPE.pack(rows, cols))
        chunks.append(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return b''.join(chunks)


def decode(blob):
    if blob[:4] != MAGIC:
        raise FormatError("not a checkpoint (bad magic bytes)")
    try:
        tag, m, d, n, b, flags = HEADER.unpack_from(blob, 4)
    except struct.error as exc:
        raise FormatError("truncated checkpoint header") from exc
    if not 1 <= tag <= len(VARIANTS):
        raise FormatError(f"unknown variant tag {tag}")

    header = CheckpointHeader(
        variant=VARIANTS[tag - 1],
        m=m,
        d=d,
        n=n,
        b=b,
        use_position_embeddings=bool(flags & FLAG_POSITION_EMBEDDINGS),
        use_pad_mask=bool(flags & FLAG_PAD_MASK),
        attention_scale_mode='per_head' if flags & FLAG_PER_HEAD_SCALE else 'full_d',
    )
    if b < 1 or d % b:
        raise FormatError(f"header has d={d} not divisible by b={b}")

    expected = param_shapes(m, HyperParams(d=d, n=n, b=b))
    offset = 4 + HEADER.size
    named = {}
    for name, shape in expected.items():
        try:
            rows, cols = SHAPE.unpack_from(blob, offset)
        except struct.error as exc:
            raise FormatError(f"checkpoint truncated before tensor {name}") from exc
        if (rows, cols) != shape:
            raise FormatError(f"tensor {name} has shape {(rows, cols)}, header implies {shape}")
        offset += SHAPE.size
        size = rows * cols * 4
        if offset + size > len(blob):
            raise FormatError(f"checkpoint truncated inside tensor {name}")
        values = np.frombuffer(blob, dtype='<f4', count=rows * cols, offset=offset)
        named[name] = values.reshape(rows, cols).astype(np.float64)
        offset += size
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} unexpected trailing bytes in checkpoint")
    return ModelParams.from_dict(named, b), header


def save_checkpoint(path, params, hp):
    """Write atomically: a failed write never replaces a good checkpoint."""
    path = Path(path)
    header = CheckpointHeader.from_hyperparams(hp, params.m)
    blob = encode(params, header)
    tmp = path.with_name(path.name + '.tmp')
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.info(f"Saved {hp.variant} checkpoint ({len(blob)} bytes) to {path}")
    return header


def load_checkpoint(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode(blob)
