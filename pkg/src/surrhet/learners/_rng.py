"""Counter-style 64-bit RNG used inside the forest kernels.

Both the compiled kernel and the pure-Python twin implement this exact
stream, so forests are bit-identical across backends. Bounded draws use
the multiply-shift trick (x * n) >> 64, matching the kernel's 128-bit
multiply.
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Tiny deterministic stream: next_u64() and bounded(n) draws."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def bounded(self, n: int) -> int:
        """Uniform draw from range(n); n must be positive."""
        return (self.next_u64() * n) >> 64


def tree_seeds(root_seed: int, num_trees: int) -> list[int]:
    """Independent per-tree seeds derived by walking the stream once."""
    stream = SplitMix64(root_seed)
    return [stream.next_u64() for _ in range(num_trees)]
