"""Deterministic LFSR weight generation.

Hidden-layer input weights are never stored: each hidden neuron owns a
16-bit Galois LFSR that is reseeded to the same per-neuron seed at the
start of every sample, so the weight vector it emits is bitwise identical
across training and later inference. The register uses the maximal-length
feedback mask 0xB400 (taps 16,14,13,11), giving period 65535 from any
nonzero state; the all-zero lock state is unreachable.

Emitted weights are Q8.8 raws in [-1.0, +0.99609375]: after each step the
low 9 bits of the state, as an unsigned value u in [0, 511], map to
raw = u - 256.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LFSR_MASK = 0xB400
SEED_STRIDE = 0x9E37
DEFAULT_BASE_SEED = 0xACE1
PERIOD = (1 << 16) - 1


def lfsr_step(state: int) -> int:
    """Advance one Galois step: shift right, XOR the mask if a 1 fell out."""
    if state == 0:
        raise ValueError("LFSR state 0 is the lock state and must never occur")
    out = state & 1
    state >>= 1
    if out:
        state ^= LFSR_MASK
    return state


def neuron_seed(base_seed: int, index: int) -> int:
    """Per-neuron seed: base XOR low16(index * 0x9E37), 0 remapped to 1.

    0x9E37 is odd, so index -> low16(index * 0x9E37) is a bijection on
    16-bit values and derived seeds stay distinct. Stable across versions;
    changing it would silently change every model.
    """
    seed = base_seed ^ ((index * SEED_STRIDE) & 0xFFFF)
    return seed if seed != 0 else 0x1


@dataclass(frozen=True)
class SeedPlan:
    """Base seed plus neuron count; the sole source of model randomness."""

    base_seed: int
    neuron_count: int

    def __post_init__(self):
        if not (1 <= self.base_seed <= 0xFFFF):
            raise ValueError(
                f"base_seed must be a nonzero 16-bit value, got {self.base_seed}"
            )
        if not (1 <= self.neuron_count <= PERIOD):
            raise ValueError(
                f"neuron_count must be in [1, {PERIOD}], got {self.neuron_count}"
            )
        seeds = {neuron_seed(self.base_seed, i) for i in range(self.neuron_count)}
        if len(seeds) != self.neuron_count:
            # The 0 -> 1 remap can alias two neurons for unlucky
            # base/count combinations; reject such plans outright.
            raise ValueError(
                f"seed plan (base 0x{self.base_seed:04X}, {self.neuron_count} "
                "neurons) derives colliding per-neuron seeds; pick another base"
            )

    def seed_for(self, index: int) -> int:
        if not (0 <= index < self.neuron_count):
            raise IndexError(
                f"neuron index {index} out of range [0, {self.neuron_count})"
            )
        return neuron_seed(self.base_seed, index)


def gen_weight(state: int) -> tuple[int, int]:
    """Step the LFSR and map the new state to a Q8.8 weight raw.

    Returns (weight_raw, next_state). Weight raws lie in [-256, 255],
    i.e. real values in [-1.0, +0.99609375].
    """
    state = lfsr_step(state)
    return (state & 0x1FF) - 256, state


def gen_weight_row(plan: SeedPlan, index: int, d: int) -> np.ndarray:
    """Regenerate neuron `index`'s d-long weight vector (int16 raws).

    Reseeds from the plan, so repeated calls with the same arguments are
    bitwise identical; this is what makes training-time and inference-time
    hidden activations agree exactly.
    """
    if d < 1:
        raise ValueError(f"row length must be >= 1, got {d}")
    state = plan.seed_for(index)
    raws = []
    mask = LFSR_MASK
    for _ in range(d):
        if state & 1:
            state = (state >> 1) ^ mask
        else:
            state >>= 1
        raws.append((state & 0x1FF) - 256)
    return np.array(raws, dtype=np.int16)
