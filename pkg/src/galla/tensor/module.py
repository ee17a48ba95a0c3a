"""A small parameter container with name-based traversal."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .checkpoint import checksum
from .core import Tensor


class Module:
    """Parameters are attributes holding tensors flagged ``is_param``; submodules nest."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.is_param:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Tensor) and item.is_param:
                        yield f"{name}.{i}", item

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.named_parameters()}

    def load_state_dict(self, arrays: dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(arrays))
            extra = sorted(set(arrays) - set(own))
            if missing or extra:
                raise KeyError(f"state mismatch: missing={missing[:5]} unexpected={extra[:5]}")
        for name, p in own.items():
            if name in arrays:
                src = np.asarray(arrays[name])
                if src.shape != p.data.shape:
                    raise ValueError(f"{name}: shape {src.shape} != {p.data.shape}")
                p.data = src.astype(p.data.dtype, copy=True)

    def set_trainable(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def checksum(self) -> str:
        return checksum({n: p.data for n, p in self.named_parameters()})
