"""Goal-directed molecular graph generation with a graph convolutional policy."""
from .estimators import FingerprintTransformer, GCPNGenerator, HillClimbGenerator
from .molgraph import MolGraph
from .smiles import parse, write

__version__ = "0.1.0"
__all__ = ["FingerprintTransformer", "GCPNGenerator", "HillClimbGenerator", "MolGraph", "parse", "write"]
