"""Protocols used throughout the project."""

from typing import Protocol

import numpy as np
from numpy.typing import NDArray


class Nonlinearity(Protocol):
    """A perturbation f of the power nonlinearity, vectorised over arrays."""

    def __call__(self, u: NDArray[np.float64]) -> NDArray[np.float64]: ...


class Perturbation(Protocol):
    """A perturbation g(|x|, t, ∂ᵣu, ∂ₜu), vectorised over arrays."""

    def __call__(
        self,
        x: NDArray[np.float64],
        t: NDArray[np.float64] | float,
        v: NDArray[np.float64],
        z: NDArray[np.float64],
    ) -> NDArray[np.float64]: ...


class Forcing(Protocol):
    """A forcing term of the soliton-center system, as a function of (i, s)."""

    def __call__(self, index: NDArray[np.int64], s: float) -> NDArray[np.float64]: ...
