"""visemelab: derive and evaluate phoneme-to-viseme maps with HMM
isolated-word recognition over synthetic speaker corpora."""

__version__ = "0.1.0"
