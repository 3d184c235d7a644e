"""General utility functions."""

import contextlib
import hashlib
import json
import logging
import warnings
from functools import partialmethod
from typing import Any

import numpy as np
import tqdm
from scipy.integrate import IntegrationWarning


def block_terminal_output() -> None:
    """Blocks undesired terminal output.

    This blocks the following output:
        - User warnings
        - Runtime warnings, which numpy emits when amplitudes overflow near blow-up
        - Integration warnings from `scipy.integrate.quad`
        - Logs from `numexpr`, which `pandas` uses for evaluation
    """
    warnings.filterwarnings("ignore", category=UserWarning)
    warnings.filterwarnings("ignore", category=RuntimeWarning)
    warnings.filterwarnings("ignore", category=IntegrationWarning)
    logging.getLogger("numexpr").setLevel(logging.ERROR)


@contextlib.contextmanager
def monkeypatched(obj, name, patch):
    """Temporarily monkeypatch."""
    old_attr = getattr(obj, name)
    setattr(obj, name, patch(old_attr))
    try:
        yield
    finally:
        setattr(obj, name, old_attr)


@contextlib.contextmanager
def disable_tqdm():
    """Context manager to disable tqdm."""

    def _patch(old_init):
        return partialmethod(old_init, disable=True)

    with monkeypatched(tqdm.std.tqdm, "__init__", _patch):
        yield


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based random generator used for every random draw in the package.

    Args:
        seed:
            The seed, recorded in run manifests.

    Returns:
        A numpy generator backed by the Philox bit generator.
    """
    return np.random.Generator(np.random.Philox(int(seed)))


def canonical_json_bytes(obj: Any) -> bytes:
    """Serialise an object to JSON bytes with sorted keys and no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    """Hex digest of the SHA-256 hash of some bytes."""
    return hashlib.sha256(data).hexdigest()
