"""eventlens: extract event / time / place context from news images and score it.

The package has two halves:

* a pipeline that orchestrates a vision-language backend through a layered
  set of agents (scene graph -> abstract idea -> tailored prompts -> direct
  and cross extraction) to produce structured predictions, and
* a scoring harness that grades those predictions against ground truth with
  distance-based geospatial scores, tolerance-weighted temporal scores, and
  embedding-similarity event scores, plus run aggregation and comparison.
"""

__version__ = "0.1.0"
