"""Hierarchical transversal-skill classification for job-ad sentences.

The package covers the full pipeline: scrubbing raw ad text into sentences,
embedding sentences into fixed-width vectors, training small feed-forward
networks from scratch, stacking them into a two-level class/subclass
hierarchy, and evaluating configurations with repeated cross-validation.
"""

__version__ = "0.1.0"
