"""Versioned checkpoint container (config echo + named parameter blobs + training state)."""

import os
import tempfile

import torch

FORMAT = "videospeech-checkpoint"
VERSION = 1
REQUIRED = ("format", "version", "config", "generator", "critic", "opt_generator", "opt_critic", "state", "rng")


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, payload):
    """Atomically write ``payload`` (a dict with the REQUIRED keys minus format/version)."""
    data = {"format": FORMAT, "version": VERSION, **payload}
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise CheckpointError(f"checkpoint payload lacks {missing}")
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    os.close(fd)
    try:
        torch.save(data, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def load_checkpoint(path):
    """Read and validate a checkpoint; nothing outside the returned dict is touched."""
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint {path!r} does not exist")
    try:
        data = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"checkpoint {path!r} is corrupt or truncated: {exc.__class__.__name__}") from exc
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise CheckpointError(f"{path!r} is not a {FORMAT} file")
    if data.get("version") != VERSION:
        raise CheckpointError(f"{path!r} has version {data.get('version')}, this build reads version {VERSION}")
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise CheckpointError(f"{path!r} lacks {missing}")
    return data


def state_checksum(tensors):
    """SHA-1 over named tensors (a state dict or ``named_parameters()`` iterable)."""
    import hashlib

    items = tensors.items() if hasattr(tensors, "items") else tensors
    h = hashlib.sha1()
    for name, t in sorted(items, key=lambda kv: kv[0]):
        h.update(name.encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
