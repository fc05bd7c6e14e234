# -*- coding: utf-8 -*-
"""
This subfolder contains the unit tests of cadstream. Sample data used for
testing resides in the 'data' folder.

Long randomized checks (more trials of the eigensolver and rPS tests) run when
the environment variable CADSTREAM_FULL_TESTS is set to 1.
"""
