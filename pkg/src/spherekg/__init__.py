"""Sphere entity embeddings with rotational relations for knowledge graph set retrieval."""
from .kernels import BACKEND
from .kg import KnowledgeGraph, Triple, Vocabulary, load_dataset
from .model import ModelConfig, SphereModel

__all__ = ["BACKEND", "KnowledgeGraph", "ModelConfig", "SphereModel", "Triple", "Vocabulary", "load_dataset"]
__version__ = "0.1.0"
