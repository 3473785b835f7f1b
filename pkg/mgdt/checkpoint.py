"""
# Mgdt > Checkpoint

Saving and loading of model parameters, optimizer state and random number
generator state.

The container is self-describing: a JSON header lists every tensor's name,
dtype, shape and location in the little-endian data blob that follows. See
Format.md for the full layout.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional
import numpy as np
import torch
from . import _consts as consts
from .__container import ByteReader, ByteWriter
from .errors import MgdtFormatError, MgdtPrerequisiteError
from .lamb import LambHyper, OptimState
from .model import ModelConfig, ModelParams


log = logging.getLogger(__name__)


_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
    torch.uint8: "|u1",
}


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    optim: Optional[OptimState] = None
    step: int = 0
    numpy_rng: Optional[dict[str, Any]] = None
    """
    State of the `numpy.random.Generator` used for batch sampling
    """
    extra: dict[str, Any] = field(default_factory=dict)
    """
    Free-form metadata, such as the layout and the games trained on
    """


def _tensor_bytes(t: torch.Tensor) -> tuple[str, bytes]:
    try:
        dtype = _DTYPES[t.dtype]
    except KeyError:
        raise MgdtFormatError(
            "<memory>", f"can't store tensors of dtype {t.dtype}") from None
    array = t.detach().cpu().contiguous().numpy().astype(dtype, copy=False)
    return dtype, array.tobytes()


def save_checkpoint(path: 'Path | str', ckpt: Checkpoint) -> None:
    """
    Write a checkpoint to disk
    """
    path = Path(path)
    tensors: dict[str, torch.Tensor] = {
        f"params/{name}": t for name, t in ckpt.params.items()
    }
    if ckpt.optim is not None:
        tensors |= {f"optim.m/{n}": t for n, t in ckpt.optim.m.items()}
        tensors |= {f"optim.v/{n}": t for n, t in ckpt.optim.v.items()}

    index = []
    blob = []
    offset = 0
    for name, t in tensors.items():
        dtype, data = _tensor_bytes(t)
        index.append({
            "name": name,
            "dtype": dtype,
            "shape": list(t.shape),
            "offset": offset,
            "nbytes": len(data),
        })
        blob.append(data)
        offset += len(data)

    header = {
        "config": asdict(ckpt.config),
        "step": ckpt.step,
        "optim": (
            None if ckpt.optim is None
            else {"hyper": asdict(ckpt.optim.hyper),
                  "step": ckpt.optim.step}
        ),
        "numpy_rng": ckpt.numpy_rng,
        "extra": ckpt.extra,
        "tensors": index,
    }
    data = (
        ByteWriter(consts.CHECKPOINT_MAGIC)
        .text(json.dumps(header, sort_keys=True))
        .u64(offset)
        .raw(b"".join(blob))
        .finish()
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    log.info(f"Saved checkpoint at step {ckpt.step} to '{path}'")


def load_checkpoint(path: 'Path | str') -> Checkpoint:
    """
    Read a checkpoint written by `save_checkpoint`
    """
    path = Path(path)
    if not path.exists():
        raise MgdtPrerequisiteError([path])
    reader = ByteReader(path, path.read_bytes(), consts.CHECKPOINT_MAGIC)
    try:
        header = json.loads(reader.text())
    except json.JSONDecodeError as e:
        reader.fail(f"header is not valid JSON ({e})")
    blob_len = reader.u64()
    blob = reader.take(blob_len)
    reader.verify_checksum()

    tensors: dict[str, torch.Tensor] = {}
    for i, entry in enumerate(header["tensors"]):
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > blob_len:
            raise MgdtFormatError(
                path, f"tensor '{entry['name']}' lies outside the data", i)
        array = np.frombuffer(
            blob[start:start + nbytes], dtype=np.dtype(entry["dtype"]))
        native = array.astype(array.dtype.newbyteorder("="))
        tensors[entry["name"]] = torch.from_numpy(
            native.reshape(entry["shape"]).copy())

    def group(prefix: str) -> dict[str, torch.Tensor]:
        return {
            name.removeprefix(prefix): t
            for name, t in tensors.items() if name.startswith(prefix)
        }

    optim = None
    if header["optim"] is not None:
        optim = OptimState(
            hyper=LambHyper(**header["optim"]["hyper"]),
            m=group("optim.m/"),
            v=group("optim.v/"),
            step=header["optim"]["step"],
        )

    log.info(f"Loaded checkpoint at step {header['step']} from '{path}'")
    return Checkpoint(
        config=ModelConfig(**header["config"]),
        params=group("params/"),
        optim=optim,
        step=header["step"],
        numpy_rng=header["numpy_rng"],
        extra=header["extra"],
    )
