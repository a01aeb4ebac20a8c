"""bankbench: a benchmark toolkit for next-year bankruptcy prediction from
the narrative sections of annual reports.

The package is organised as a pipeline of small, independently testable
modules:

- ``corpus``     raw reports + bankruptcy filings, synthetic corpus generator
- ``sampling``   leakage-safe firm-year instance construction and splits
- ``textprep``   deterministic tokenisation, lemmatisation, vocabulary
- ``features``   n-gram spaces, binary / tf-idf vectors, chi-square selection
- ``linear``     L2-regularised logistic regression on sparse vectors
- ``embeddings`` skip-gram word vectors and document embedding utilities
- ``neural``     one-hidden-layer MLP with dropout, Adam, early stopping
- ``metrics``    rank metrics with pinned tie handling
- ``harness``    hyperparameter search and the two-phase experiment protocol
- ``cli``        command-line front end over the same library calls
"""

__version__ = "0.1.0"
