"""adl: anisotropic dilations, Triebel-Lizorkin sequence norms and retract operators."""

__version__ = "0.1.0"
