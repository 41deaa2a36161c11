"""Screen-understanding data toolkit: schema grammar, patch-grid geometry,
LLM task generation, training mixtures and evaluation metrics."""

__version__ = "0.1.0"
