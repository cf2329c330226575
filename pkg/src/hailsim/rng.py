"""Single seeded random stream shared by every stochastic step of a run."""

from __future__ import annotations

import numpy as np

_BUFFER = 2048


class RandomStream:
    """Deterministic uniform stream backed by numpy's PCG64.

    Scalar draws are served from a refilled buffer so the hot loop does not pay
    numpy's per-call overhead; vector draws go straight to the generator. Both
    advance the same underlying state, so the sequence of outcomes is a pure
    function of the seed and the order of calls.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BUFFER).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n). Always consumes exactly one draw."""
        return int(self.random() * n)

    def uniforms(self, k: int) -> np.ndarray:
        return self._gen.random(k)

    def shuffled(self, items: list) -> list:
        """Return a Fisher-Yates shuffled copy of ``items``."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out
