"""Pairwise-preference reward toolkit for translation quality evaluation.

Subpackages cover corpus/pair construction, verdict parsing, reward shaping,
desk-scale PPO training, meta-evaluation statistics, OOD challenge generation,
a chat-completion gateway, and an evaluate-revise agent loop.
"""

__version__ = "0.1.0"
