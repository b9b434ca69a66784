"""All-atom glycan graphs, hierarchical relational encoders and multi-scale mask pre-training."""
__version__ = "0.1.0"
