# -*- coding: utf-8 -*-
"""
The 'main' module holds the cadstream code base and is broken down into these
parts:

- main.py        - command line tool (used as console script entry point)
- main_funcs.py  - wrapper functions for the command line subcommands
- args.py        - command line argument parsing and validation
- config.py      - configuration file parsing, validation and typed run config
- errors.py      - runtime exception classes
- provenance.py  - hash digests, output metadata headers and writers
- source.py      - input file description and validation
- ingest.py      - stream parsing and sliding window feature matrices
- corrmat.py     - correlation matrices and their incremental maintenance
- spectral.py    - top eigenpair, principal score and membership scores
- rps.py         - randomized principal score detector
- gps.py         - generative (beta mixture) principal score detector
- pipeline.py    - per-window detection, alert gating and merging
- thread.py      - multithreading pool for window processing
- synth.py       - synthetic generators, anomaly injection and metrics
- experiments.py - numerical experiment drivers writing CSV tables
- report.py      - alert timeline rendering
"""
