"""weaklab: weak labeling sources, multi-source HMM denoising, and an
annotation service for Brat-style corpora."""

__version__ = "0.1.0"
