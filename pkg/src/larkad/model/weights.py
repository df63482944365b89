"""Weight archive: a text manifest plus a raw little-endian float32 blob.

Layout of an archive directory:

    manifest.txt   one line per tensor: ``name<TAB>dim0,dim1,...<TAB>dtype<TAB>offset``
                   (offset in bytes into the blob; dims comma-separated, empty for scalars)
    weights.bin    all tensors concatenated as little-endian float32

Round-trips are bit-exact for float32 parameters.
"""

import os

import numpy as np
import torch

from ..errors import ContractError

MANIFEST_NAME = "manifest.txt"
BLOB_NAME = "weights.bin"


def save_weights(state, directory):
    """Write a state dict (or module) to an archive directory."""
    if isinstance(state, torch.nn.Module):
        state = state.state_dict()
    os.makedirs(directory, exist_ok=True)
    offset = 0
    lines = []
    with open(os.path.join(directory, BLOB_NAME), "wb") as blob:
        for name, tensor in state.items():
            if tensor.dtype != torch.float32:
                raise ContractError(f"archive stores float32 only, {name} is {tensor.dtype}")
            array = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype="<f4")
            blob.write(array.tobytes())
            dims = ",".join(str(d) for d in array.shape)
            lines.append(f"{name}\t{dims}\tfloat32\t{offset}")
            offset += array.nbytes
    with open(os.path.join(directory, MANIFEST_NAME), "w") as manifest:
        manifest.write("\n".join(lines) + "\n")


def load_weights(directory):
    """Read an archive directory back into an ordered name -> tensor mapping."""
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    blob_path = os.path.join(directory, BLOB_NAME)
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    state = {}
    with open(manifest_path) as manifest:
        for line in manifest:
            line = line.rstrip("\n")
            if not line:
                continue
            name, dims, dtype, offset = line.split("\t")
            if dtype != "float32":
                raise ContractError(f"unsupported dtype {dtype!r} in manifest")
            shape = tuple(int(d) for d in dims.split(",")) if dims else ()
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            array = np.frombuffer(blob, dtype="<f4", count=count, offset=int(offset))
            state[name] = torch.from_numpy(array.copy()).reshape(shape)
    return state
