"""Pure numpy versions of the compiled kernels."""
import numpy as np


def scatter_add_rows(out: np.ndarray, index: np.ndarray, src: np.ndarray) -> None:
    """out[index[i], :] += src[i, :] for every i, in order."""
    if src.shape[0] != index.shape[0] or out.shape[1] != src.shape[1]:
        raise ValueError("scatter_add_rows: shape mismatch")
    if index.size and (index.min() < 0 or index.max() >= out.shape[0]):
        raise IndexError("scatter_add_rows: index out of range")
    np.add.at(out, index, src)
