"""Debate-driven event extraction engine.

Extraction answers are refined over a capped number of debate rounds:
agents render opinions, a diversity-aware retriever injects reference
material, a conformal gate rejects implausible answers under a
geometrically tightening threshold, and a judge decides when consensus
is reached.
"""

__version__ = "0.1.0"
