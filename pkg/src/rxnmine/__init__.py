"""Weakly supervised extraction of structured chemical reactions from text.

The package turns free-text reaction descriptions into role-argument records
via two synthetic-supervision machines (an iterative seed-pattern bootstrap
and a distant-supervision builder over patent-style records), a pluggable
QA-style extractor, and a product-then-roles extraction pipeline with a
micro-averaged P/R/F evaluation harness.
"""

__version__ = "0.1.0"
