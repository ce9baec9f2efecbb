"""HTTP sidecars wrapping segmentation and grasp-proposal models.

Each server speaks a fixed JSON protocol so the grasp-filtering pipeline can
swap between fixture backends and live models without code changes.  Model
choice is configuration: built-in adapters serve synthetic scenes, real
networks plug in via dotted-path factories.
"""

__version__ = "0.1.0"
