"""Early-warning pipeline for at-risk students.

Batch pipeline over LMS clickstream and library check-in logs: regularity
and co-occurrence features, graph embeddings, minority oversampling, a
gradient-boosted tree classifier, and repeated cross-validated evaluation.
The ``starpredict`` command line (see :mod:`starpredict.cli`) drives the
same stages end to end.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
