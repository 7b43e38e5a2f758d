"""SRMA Recommendation Component

Contrastive self-supervised sequential recommendation with model augmentation.

Components:
- rec_api: Exceptions, domain types and the encoder interface
- rec_numpy_impl: NumPy encoders, augmentation, trainers, evaluation and CLI
"""

__all__: list[str] = []
