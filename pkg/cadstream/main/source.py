# -*- coding: utf-8 -*-
"""
Input source API.

This module defines the InputSource class for cadstream, an object that stores
metadata about one input file of a stream (its path, stream kind and parsing
options) and turns it into events. The metadata is validated with the parse()
method before any event is read.
"""
import logging
import os

from cadstream.main.errors import ConfigError
from cadstream.main.ingest import STREAM_KINDS, AccessLogParser, PriceCsvReader


class InputSource(object):
    """
    InputSource class. Stores the metadata of one input file.

    Attributes:
        path (str): input file path.
        kind (str): stream kind, 'access_log' or 'price_csv'.
        strip_query (bool): drop query strings from access log request paths.
        localfile (str): input file name (not path).
        digest (str): SHA256 digest of the file, set by the caller if needed.
        parser (object): record parser of the stream kind, created by parse().
        logger (Logger): logger with self.localfile as its name.
    """
    def __init__(self, path, kind='access_log', strip_query=True):
        """
        Initializes a new input source object.

        Args:
            path (str): path string to input file.
            kind (str): stream kind.
            strip_query (bool): drop query strings from request paths.

        Raises:
            OSError: path (of input file) does not exist.
        """
        if not os.path.exists(path):
            raise OSError('Path "%s" does not exist.' % path)
        self.path = path
        self.kind = kind
        self.strip_query = strip_query
        self.localfile = os.path.basename(path)
        self.digest = None
        self.parser = None
        self.logger = logging.getLogger(self.localfile)

    def parse(self):
        """
        Validate the input description: the stream kind must be supported and
        the path must be a readable regular file.

        Raises:
            ConfigError: unsupported stream kind.
            OSError: path is a directory or cannot be read.
        """
        if self.kind not in STREAM_KINDS:
            raise ConfigError("Unsupported stream kind '%s' for %s." % (self.kind, self.localfile))
        if not os.path.isfile(self.path):
            raise OSError('Path "%s" is not a regular file.' % self.path)
        if not os.access(self.path, os.R_OK):
            raise OSError('Path "%s" is not readable.' % self.path)

        if self.kind == 'access_log':
            self.parser = AccessLogParser(self.strip_query, name=self.localfile)
        else:
            self.parser = PriceCsvReader(name=self.localfile)

    def events(self):
        """
        Generate the events of the file, in file order.

        Raises:
            IngestError: unusable price CSV header.
            OSError: file reading error.
        """
        if self.parser is None:
            self.parse()
        self.logger.debug("Reading events from '%s'" % self.localfile)
        yield from self.parser.read(self.path)

    @property
    def skipped(self):
        return self.parser.skipped if self.parser is not None else 0

    @property
    def parsed(self):
        return self.parser.parsed if self.parser is not None else 0
