"""Quality control toolkit for crowd-sourced single-object segmentation.

Estimates the Dice score of an annotation from the annotator's clickstream,
filters and fuses multiple annotations of one image, and models campaign
costs. See README.md for the pipeline overview and CLI usage.
"""

__version__ = "0.1.0"
