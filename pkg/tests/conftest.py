"""Test-suite bootstrap.

Shared constants and constructors live in the plain modules
``tests/oracles.py`` (independent closed-form expectations) and
``tests/helpers.py`` (dataset and expression builders); test modules import
them directly.  This file exists so pytest anchors the import path here.
"""
