# -*- coding: utf-8 -*-
"""
cadstream is a Python package for correlated anomaly detection on large windowed
data streams. A sliding window turns a stream (server access logs, daily price
series) into feature matrices whose columns are data vectors; a group of columns
with anomalously strong mutual correlation raises an alert. It offers

- the principal score of a window's absolute correlation matrix, computed with
  power iteration or Lanczos,
- rPS, a randomized principal score evaluated on columns sampled with
  replacement in proportion to their p-norm,
- gPS, a beta-mixture model over correlation matrix entries that clusters
  columns into correlated anomaly sets,
- a detection pipeline that gates, merges and reports alerts, plus a synthetic
  experiment harness for the degeneration and concentration behaviour of the
  principal score.


The package is broken down into the following subfolders:

- main    - cadstream code base and main script entry point
- share   - additional package data
- tests   - cadstream unit tests
"""
__version__ = '1.0.0'
