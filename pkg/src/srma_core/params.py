"""Named parameter storage with per-parameter trainable flags."""

import logging
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np
import numpy.typing as npt

from .exceptions import ParameterError
from .tensor import Tensor, default_dtype

logger = logging.getLogger(__name__)


class ParamStore:
    """Ordered map of named parameter tensors.

    Frozen parameters are stored with ``requires_grad=False`` so no gradient
    reaches them and the optimizer skips them.
    """

    def __init__(self) -> None:
        self._params: Dict[str, Tensor] = {}
        self._trainable: Dict[str, bool] = {}

    def add(self, name: str, values: Any, trainable: bool = True) -> Tensor:
        """Register a parameter.

        Raises:
            ParameterError: If the name is already taken
        """
        if name in self._params:
            raise ParameterError(f"Duplicate parameter name: {name}")
        tensor = Tensor(values, requires_grad=trainable, name=name, dtype=default_dtype())
        self._params[name] = tensor
        self._trainable[name] = trainable
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._params[name]
        except KeyError as e:
            raise ParameterError(f"Unknown parameter: {name}") from e

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._params.items())

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable_items(self) -> List[Tuple[str, Tensor]]:
        return [(name, p) for name, p in self._params.items() if self._trainable[name]]

    def freeze(self) -> None:
        """Mark every parameter non-trainable and drop its gradient."""
        for name, tensor in self._params.items():
            self._trainable[name] = False
            tensor.requires_grad = False
            tensor.grad = None

    @property
    def frozen(self) -> bool:
        return bool(self._params) and not any(self._trainable.values())

    def zero_grad(self) -> None:
        for name, tensor in self._params.items():
            tensor.grad = np.zeros_like(tensor.values) if self._trainable[name] else None

    def num_values(self) -> int:
        return int(sum(t.values.size for t in self._params.values()))

    def state_arrays(self) -> Dict[str, npt.NDArray[Any]]:
        """Copies of every parameter's values, in registration order."""
        return {name: np.array(t.values, copy=True) for name, t in self._params.items()}

    def load_arrays(self, arrays: Mapping[str, npt.NDArray[Any]], strict: bool = True) -> None:
        """Overwrite parameter values by name.

        Raises:
            ParameterError: On shape mismatch, or on missing/unexpected names when strict
        """
        if strict:
            missing = [n for n in self._params if n not in arrays]
            unexpected = [n for n in arrays if n not in self._params]
            if missing or unexpected:
                raise ParameterError(f"Parameter mismatch: missing={missing} unexpected={unexpected}")
        for name, values in arrays.items():
            if name not in self._params:
                continue
            tensor = self._params[name]
            if tuple(values.shape) != tensor.shape:
                raise ParameterError(f"Shape mismatch for {name}: {values.shape} != {tensor.shape}")
            tensor.values = np.array(values, dtype=tensor.dtype, copy=True)
            tensor.grad = None

    def get(self, name: str) -> Optional[Tensor]:
        return self._params.get(name)

    def __repr__(self) -> str:
        return f"ParamStore(params={len(self)}, values={self.num_values()}, frozen={self.frozen})"
