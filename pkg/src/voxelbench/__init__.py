"""voxelbench: reproducible benchmarking of voxel-based classifiers on
neuroimaging cohorts.

Library layout mirrors the pipeline: volume I/O, cohort curation, feature
extraction, kernel construction, the dual SVM, nested cross-validation,
synthetic phantoms, and the CLI that ties them together.
"""

__version__ = "0.1.0"
